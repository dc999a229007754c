// Copyright 2026 The Overmod Lab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// The learned semantic function: an image encoder f and an utterance
// encoder g scored as sigmoid(f(r) . g(u)).

#ifndef OVERMOD_SEMANTICS_SEMANTICS_HPP_
#define OVERMOD_SEMANTICS_SEMANTICS_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "overmod/nn/checkpoint.hpp"
#include "overmod/nn/encoders.hpp"
#include "overmod/nn/tensor.hpp"
#include "overmod/scene/game.hpp"

namespace overmod::semantics {

using scene::Image;
using scene::ReferenceGame;
using scene::Utterance;

struct TrainingHyperparams {
  std::size_t epochs = 30;
  std::size_t batch_size = 32;
  double learning_rate = 0.01;
  double validation_fraction = 0.1;
  std::uint64_t seed = 0;

  // Throws ConfigError unless everything is positive and the validation
  // fraction lies in (0, 0.5).
  void validate() const;
};

struct TrainingExample {
  std::vector<scene::Token> tokens;
  const Image* image = nullptr;  // owned by the game it came from
  int label = 0;
};

// One row of the training log.
struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double validation_loss = 0.0;
  double validation_accuracy = 0.0;  // literal speaker only; 0 otherwise
};

// Which games of a subset were held out. Both lists hold game ids.
struct ValidationSplit {
  std::vector<std::uint64_t> train_ids;
  std::vector<std::uint64_t> validation_ids;
};

// Seeded shuffle of the games, the first floor(fraction * N) of which are
// held out. Throws ConfigError if that leaves either side empty.
ValidationSplit split_for_validation(std::span<const ReferenceGame> games, double fraction,
                                     std::uint64_t seed);

class SemanticModel {
 public:
  SemanticModel() = default;
  // Fresh parameters drawn from `seed`.
  SemanticModel(const nn::EncoderConfig& config, std::uint64_t seed);

  const nn::EncoderConfig& config() const { return config_; }
  std::uint64_t seed() const { return seed_; }
  double validation_loss() const { return validation_loss_; }
  void set_validation_loss(double loss) { validation_loss_ = loss; }
  nn::ParameterSet& params() { return params_; }
  const nn::ParameterSet& params() const { return params_; }
  const nn::ImageEncoder& image_encoder() const { return image_; }
  const nn::UtteranceEncoder& utterance_encoder() const { return text_; }

  // f(r) for each image, row-major n x d.
  std::vector<double> embed_images(std::span<const Image* const> images) const;
  // g(u), length d. Throws InputError on tokens outside the vocabulary.
  std::vector<double> embed_utterance(std::span<const scene::Token> tokens) const;

  // Mean BCE over the examples. With `with_grad`, gradients of that mean are
  // accumulated into params(). A non-null `region` receives the image
  // encoder's nn::region_signature.
  double batch_loss(std::span<const TrainingExample* const> batch, bool with_grad,
                    std::uint64_t* region = nullptr);

  std::map<std::string, std::string> checkpoint_metadata(const std::string& role) const;
  static SemanticModel from_checkpoint(const nn::Checkpoint& checkpoint);

 private:
  nn::EncoderConfig config_;
  std::uint64_t seed_ = 0;
  double validation_loss_ = 0.0;
  nn::ImageEncoder image_;
  nn::UtteranceEncoder text_;
  nn::ParameterSet params_;
};

// sigmoid(f . g) of two precomputed embeddings. Throws InputError if their
// lengths differ.
double score(std::span<const double> image_embedding, std::span<const double> utterance_embedding);

// Throws InputError if the image side does not match the model.
double semantic_value(const SemanticModel& model, const Utterance& u, const Image& r);

// The ground-truth utterance paired with each referent: label 1 for the
// target, 0 for the two distractors, in referent order.
std::vector<TrainingExample> make_training_examples(const ReferenceGame& game);

struct TrainingResult {
  SemanticModel model;  // snapshot with the lowest validation loss
  std::size_t selected_epoch = 0;
  std::vector<EpochRecord> log;
  ValidationSplit split;
};

// Minibatch Adam on BCE. Throws InputError on an empty subset and
// TrainingDiverged on a non-finite batch loss.
TrainingResult train_semantic_function(std::span<const ReferenceGame> games,
                                       const TrainingHyperparams& hyper,
                                       const nn::EncoderConfig& config);

// epoch,train_loss,validation_loss[,validation_accuracy]
std::string training_log_csv(std::span<const EpochRecord> log, bool with_accuracy);

class Ensemble {
 public:
  Ensemble() = default;
  // Throws InputError if empty or the members' configurations differ.
  explicit Ensemble(std::vector<SemanticModel> members);

  std::size_t size() const { return members_.size(); }
  const SemanticModel& member(std::size_t i) const { return members_[i]; }
  const std::vector<SemanticModel>& members() const { return members_; }

 private:
  std::vector<SemanticModel> members_;
};

// Mean of the members' semantic values.
double ensemble_value(const Ensemble& e, const Utterance& u, const Image& r);

}  // namespace overmod::semantics

#endif  // OVERMOD_SEMANTICS_SEMANTICS_HPP_
