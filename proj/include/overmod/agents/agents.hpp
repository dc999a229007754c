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

// Listener and speaker agents.
//
// Most of the work is phrased over a SemanticTable: the semantic value of
// every utterance in the closed utterance space on each of a game's three
// referents. A table comes either from a trained model, from an ensemble
// (member mean) or from truth-conditional semantics.

#ifndef OVERMOD_AGENTS_AGENTS_HPP_
#define OVERMOD_AGENTS_AGENTS_HPP_

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "overmod/semantics/semantics.hpp"

namespace overmod::agents {

using scene::Image;
using scene::kNumReferents;
using scene::kUtteranceSpaceSize;
using scene::ReferenceGame;
using scene::Utterance;

using Referents = std::array<const Image*, kNumReferents>;
Referents referents_of(const ReferenceGame& game);

using Values = std::array<double, kNumReferents>;
using SemanticTable = std::array<Values, kUtteranceSpaceSize>;  // [utterance][referent]

// g(u) for every utterance of the space, row-major 35 x d.
std::vector<double> embed_utterance_space(const semantics::SemanticModel& model);

SemanticTable semantic_table(const semantics::SemanticModel& model, const Referents& referents);
// One table per game; images are embedded in batches.
std::vector<SemanticTable> semantic_tables(const semantics::SemanticModel& model,
                                           std::span<const ReferenceGame> games);
std::vector<SemanticTable> ensemble_tables(const semantics::Ensemble& ensemble,
                                           std::span<const ReferenceGame> games);
// 1 where the utterance is true of the referent, 0 otherwise.
SemanticTable truth_table(const ReferenceGame& game);

// Probability of each referent, proportional to exp(semantic value).
Values listener_distribution(const Values& values);
// Argmax of the distribution, ties to the lowest index.
std::size_t listener_choice(const Values& values);

struct EvalListener {
  semantics::SemanticModel model;
};

Values eval_listener_distribution(const EvalListener& l, const Utterance& u, const Referents& r);
std::size_t listener_choice(const EvalListener& l, const Utterance& u, const Referents& r);

inline constexpr double kDefaultCost = 0.01;

struct RSASpeaker {
  semantics::Ensemble ensemble;
  double cost = kDefaultCost;  // per token
};

// log P_L(t | u) - cost * |u|, where P_L is the listener distribution over
// the row of `table` for utterance index `u`.
double utility(const SemanticTable& table, std::size_t u, std::size_t target, double cost);
double utility(const RSASpeaker& s, const Utterance& u, std::size_t target, const Referents& r);

// Index of the first maximizer of utility in enumeration order.
std::size_t rsa_choice(const SemanticTable& table, std::size_t target, double cost);
Utterance rsa_speak(const SemanticTable& table, std::size_t target, double cost);
Utterance rsa_speak(const RSASpeaker& s, std::size_t target, const Referents& r);

// Decoder vocabulary: the 11 words plus end-of-sequence are outputs;
// begin-of-sequence is an input only.
inline constexpr scene::Token kEndOfSequence = scene::kVocabularySize;
inline constexpr scene::Token kBeginOfSequence = scene::kVocabularySize + 1;
inline constexpr std::size_t kOutputVocabulary = scene::kVocabularySize + 1;
inline constexpr std::size_t kDecoderInputVocabulary = scene::kVocabularySize + 2;
inline constexpr std::size_t kMaxUtteranceLength = 3;

// Context image encoder f_S, a linear map from the context vector to the
// initial decoder state, and a GRU decoder with an output projection.
class LiteralSpeaker {
 public:
  LiteralSpeaker() = default;
  LiteralSpeaker(const nn::EncoderConfig& config, std::uint64_t seed);

  const nn::EncoderConfig& config() const { return config_; }
  std::uint64_t seed() const { return seed_; }
  std::size_t context_dim() const { return 3 * config_.embed_dim + kNumReferents; }
  nn::ParameterSet& params() { return params_; }
  const nn::ParameterSet& params() const { return params_; }
  double validation_accuracy() const { return validation_accuracy_; }
  void set_validation_accuracy(double a) { validation_accuracy_ = a; }

  // [f_S(r1); f_S(r2); f_S(r3); onehot(t)]. Throws InputError if t > 2.
  std::vector<double> encode(const Referents& r, std::size_t target) const;

  // Greedy decoding, at most 3 tokens, end-of-sequence not included.
  Utterance speak(const Referents& r, std::size_t target) const;
  // speak() for every game's target, images embedded in batches.
  std::vector<Utterance> speak_all(std::span<const ReferenceGame> games) const;

  // Mean token cross-entropy with teacher forcing against each game's
  // ground truth. With `with_grad`, accumulates gradients of that mean.
  // A non-null `region` receives the context encoder's nn::region_signature.
  double batch_loss(std::span<const ReferenceGame* const> games, bool with_grad,
                    std::uint64_t* region = nullptr);

  std::map<std::string, std::string> checkpoint_metadata() const;
  static LiteralSpeaker from_checkpoint(const nn::Checkpoint& checkpoint);

 private:
  std::vector<Utterance> decode(std::span<const double> contexts, std::size_t count) const;

  nn::EncoderConfig config_;
  std::uint64_t seed_ = 0;
  double validation_accuracy_ = 0.0;
  nn::ImageEncoder image_;
  nn::Linear init_;
  nn::Embedding embedding_;
  nn::GruCell cell_;
  nn::Linear out_;
  nn::ParameterSet params_;
};

std::vector<double> literal_encode(const LiteralSpeaker& sp, std::size_t target, const Referents& r);
Utterance literal_speak(const LiteralSpeaker& sp, std::size_t target, const Referents& r);

struct LiteralTrainingResult {
  LiteralSpeaker speaker;  // snapshot with the highest validation exact match
  std::size_t selected_epoch = 0;
  std::vector<semantics::EpochRecord> log;
  semantics::ValidationSplit split;
};

// Adam on token cross-entropy with teacher forcing. Throws InputError on
// an empty subset and TrainingDiverged on a non-finite batch loss.
LiteralTrainingResult train_literal_speaker(std::span<const ReferenceGame> games,
                                            const semantics::TrainingHyperparams& hyper,
                                            const nn::EncoderConfig& config);

inline constexpr double kLiteralSpeakerLearningRate = 0.001;

// Checkpoint role tags.
inline constexpr const char* kEvalListenerRole = "eval-listener";
inline constexpr const char* kLiteralSpeakerRole = "literal-speaker";
std::string ensemble_member_role(std::size_t k);  // "rsa-ensemble-member-<k>"

}  // namespace overmod::agents

#endif  // OVERMOD_AGENTS_AGENTS_HPP_
