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

#include "overmod/semantics/semantics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "overmod/error.hpp"
#include "overmod/nn/adam.hpp"
#include "overmod/nn/loss.hpp"
#include "overmod/util/io.hpp"

namespace overmod::semantics {
namespace {

std::vector<double> normalized_batch(std::span<const Image* const> images) {
  std::vector<double> out;
  if (!images.empty()) out.reserve(images.size() * images[0]->rgb.size());
  for (const Image* img : images) scene::append_normalized(*img, out);
  return out;
}

}  // namespace

void TrainingHyperparams::validate() const {
  if (epochs == 0 || batch_size == 0) throw ConfigError("epochs and batch size must be positive");
  if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
  if (!(validation_fraction > 0.0 && validation_fraction < 0.5)) {
    throw ConfigError("validation fraction must lie in (0, 0.5)");
  }
}

ValidationSplit split_for_validation(std::span<const ReferenceGame> games, double fraction,
                                     std::uint64_t seed) {
  const auto held = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(games.size())));
  if (held == 0 || held >= games.size()) {
    throw ConfigError("validation fraction " + util::format_double(fraction) + " of " +
                      std::to_string(games.size()) + " games leaves an empty split");
  }
  std::vector<std::uint64_t> ids;
  ids.reserve(games.size());
  for (const auto& g : games) ids.push_back(g.id);
  std::mt19937_64 rng(util::derive_seed(seed, {0x76616cull}));
  std::shuffle(ids.begin(), ids.end(), rng);
  ValidationSplit split;
  split.validation_ids.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(held));
  split.train_ids.assign(ids.begin() + static_cast<std::ptrdiff_t>(held), ids.end());
  std::sort(split.validation_ids.begin(), split.validation_ids.end());
  std::sort(split.train_ids.begin(), split.train_ids.end());
  return split;
}

SemanticModel::SemanticModel(const nn::EncoderConfig& config, std::uint64_t seed)
    : config_(config),
      seed_(seed),
      image_(config, "image"),
      text_(config, scene::kVocabularySize, "text") {
  nn::Rng rng(util::derive_seed(seed, {0x73656dull}));
  image_.register_parameters(params_, rng);
  text_.register_parameters(params_, rng);
}

std::vector<double> SemanticModel::embed_images(std::span<const Image* const> images) const {
  for (const Image* img : images) {
    if (img->side != config_.image_side) {
      throw InputError("image side " + std::to_string(img->side) + " does not match the model's " +
                       std::to_string(config_.image_side));
    }
  }
  const auto x = normalized_batch(images);
  std::vector<double> out(images.size() * config_.embed_dim);
  image_.forward(params_, x, images.size(), out);
  return out;
}

std::vector<double> SemanticModel::embed_utterance(std::span<const scene::Token> tokens) const {
  std::vector<double> out(config_.embed_dim);
  text_.forward(params_, tokens, out);
  return out;
}

double SemanticModel::batch_loss(std::span<const TrainingExample* const> batch, bool with_grad,
                                 std::uint64_t* region) {
  const std::size_t n = batch.size();
  const std::size_t d = config_.embed_dim;
  if (n == 0) throw InputError("empty batch");
  std::vector<const Image*> images(n);
  for (std::size_t i = 0; i < n; ++i) images[i] = batch[i]->image;
  const auto x = normalized_batch(images);

  nn::ImageEncoder::Cache cache;
  std::vector<double> f(n * d);
  image_.forward(params_, x, n, f, with_grad || region != nullptr ? &cache : nullptr);
  if (region != nullptr) *region = nn::region_signature(cache);

  std::vector<nn::UtteranceEncoder::Trace> traces(n);
  std::vector<double> g(n * d);
  for (std::size_t i = 0; i < n; ++i) {
    text_.forward(params_, batch[i]->tokens, std::span<double>(g.data() + i * d, d),
                  with_grad ? &traces[i] : nullptr);
  }

  double loss = 0.0;
  std::vector<double> df(with_grad ? n * d : 0);
  std::vector<double> dg(d);
  for (std::size_t i = 0; i < n; ++i) {
    std::span<const double> fi(f.data() + i * d, d);
    std::span<const double> gi(g.data() + i * d, d);
    const double p = score(fi, gi);
    loss += nn::bce_loss(p, batch[i]->label);
    if (!with_grad) continue;
    const double ds = (p - batch[i]->label) / static_cast<double>(n);
    for (std::size_t k = 0; k < d; ++k) {
      df[i * d + k] = ds * gi[k];
      dg[k] = ds * fi[k];
    }
    text_.backward(params_, traces[i], dg);
  }
  if (with_grad) image_.backward(params_, cache, df);
  return loss / static_cast<double>(n);
}

std::map<std::string, std::string> SemanticModel::checkpoint_metadata(const std::string& role) const {
  return {{"role", role},
          {"kind", "semantic"},
          {"seed", std::to_string(seed_)},
          {"validation_loss", util::format_double(validation_loss_)},
          {"config", nn::to_json(config_).dump()}};
}

SemanticModel SemanticModel::from_checkpoint(const nn::Checkpoint& checkpoint) {
  const auto& meta = checkpoint.metadata;
  auto field = [&](const std::string& key) -> const std::string& {
    auto it = meta.find(key);
    if (it == meta.end()) throw IoError("checkpoint lacks '" + key + "'");
    return it->second;
  };
  if (field("kind") != "semantic") throw IoError("checkpoint does not hold a semantic model");
  nn::EncoderConfig config;
  try {
    config = nn::encoder_config_from_json(nlohmann::json::parse(field("config")));
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("bad config in checkpoint: ") + e.what());
  }
  SemanticModel model(config, std::stoull(field("seed")));
  for (auto& [name, tensor] : model.params_) {
    if (!checkpoint.params.contains(name)) throw IoError("checkpoint lacks tensor " + name);
    const auto& src = checkpoint.params.at(name);
    if (src.shape() != tensor.shape()) throw IoError("tensor " + name + " has the wrong shape");
    std::copy(src.data().begin(), src.data().end(), tensor.data().begin());
  }
  if (checkpoint.params.size() != model.params_.size()) throw IoError("checkpoint has extra tensors");
  model.validation_loss_ = std::stod(field("validation_loss"));
  return model;
}

double score(std::span<const double> image_embedding, std::span<const double> utterance_embedding) {
  if (image_embedding.size() != utterance_embedding.size()) {
    throw InputError("embedding dimensions differ: " + std::to_string(image_embedding.size()) +
                     " vs " + std::to_string(utterance_embedding.size()));
  }
  const double s = std::inner_product(image_embedding.begin(), image_embedding.end(),
                                      utterance_embedding.begin(), 0.0);
  return nn::sigmoid(s);
}

double semantic_value(const SemanticModel& model, const Utterance& u, const Image& r) {
  const Image* img[] = {&r};
  return score(model.embed_images(img), model.embed_utterance(u.tokens()));
}

std::vector<TrainingExample> make_training_examples(const ReferenceGame& game) {
  std::vector<TrainingExample> out(scene::kNumReferents);
  for (std::size_t i = 0; i < scene::kNumReferents; ++i) {
    out[i].tokens = game.ground_truth.tokens();
    out[i].image = &game.referents[i].image;
    out[i].label = i == game.target_index ? 1 : 0;
  }
  return out;
}

TrainingResult train_semantic_function(std::span<const ReferenceGame> games,
                                       const TrainingHyperparams& hyper,
                                       const nn::EncoderConfig& config) {
  if (games.empty()) throw InputError("cannot train a semantic function on no games");
  hyper.validate();
  config.validate();

  TrainingResult result;
  result.split = split_for_validation(games, hyper.validation_fraction, hyper.seed);
  std::vector<TrainingExample> train, val;
  for (const auto& g : games) {
    const bool held = std::binary_search(result.split.validation_ids.begin(),
                                         result.split.validation_ids.end(), g.id);
    auto ex = make_training_examples(g);
    auto& dest = held ? val : train;
    dest.insert(dest.end(), ex.begin(), ex.end());
  }

  SemanticModel model(config, hyper.seed);
  nn::AdamState adam;
  adam.learning_rate = hyper.learning_rate;
  std::mt19937_64 rng(util::derive_seed(hyper.seed, {0x62617463ull}));
  std::vector<const TrainingExample*> order(train.size());
  for (std::size_t i = 0; i < train.size(); ++i) order[i] = &train[i];
  std::vector<const TrainingExample*> val_ptrs(val.size());
  for (std::size_t i = 0; i < val.size(); ++i) val_ptrs[i] = &val[i];

  double best = INFINITY;
  for (std::size_t epoch = 1; epoch <= hyper.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < order.size(); start += hyper.batch_size, ++batch_index) {
      const std::size_t count = std::min(hyper.batch_size, order.size() - start);
      std::span<const TrainingExample* const> batch(order.data() + start, count);
      model.params().zero_grad();
      const double loss = model.batch_loss(batch, true);
      if (!std::isfinite(loss)) throw TrainingDiverged(epoch, batch_index, loss);
      nn::adam_update(model.params(), adam);
      total += loss * static_cast<double>(count);
    }

    double val_total = 0.0;
    for (std::size_t start = 0; start < val_ptrs.size(); start += 64) {
      const std::size_t count = std::min<std::size_t>(64, val_ptrs.size() - start);
      val_total += model.batch_loss({val_ptrs.data() + start, count}, false) *
                   static_cast<double>(count);
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = total / static_cast<double>(order.size());
    rec.validation_loss = val_total / static_cast<double>(val_ptrs.size());
    if (!std::isfinite(rec.validation_loss)) throw TrainingDiverged(epoch, batch_index, rec.validation_loss);
    result.log.push_back(rec);
    if (rec.validation_loss < best) {
      best = rec.validation_loss;
      result.model = model;
      result.model.set_validation_loss(best);
      result.selected_epoch = epoch;
    }
  }
  result.model.params().zero_grad();
  return result;
}

std::string training_log_csv(std::span<const EpochRecord> log, bool with_accuracy) {
  std::string out = with_accuracy ? "epoch,train_loss,validation_loss,validation_accuracy\n"
                                  : "epoch,train_loss,validation_loss\n";
  for (const auto& r : log) {
    out += std::to_string(r.epoch) + "," + util::format_double(r.train_loss) + "," +
           util::format_double(r.validation_loss);
    if (with_accuracy) out += "," + util::format_double(r.validation_accuracy);
    out += "\n";
  }
  return out;
}

Ensemble::Ensemble(std::vector<SemanticModel> members) : members_(std::move(members)) {
  if (members_.empty()) throw InputError("an ensemble needs at least one member");
  for (const auto& m : members_) {
    if (!(m.config() == members_[0].config())) {
      throw InputError("ensemble members must share an encoder configuration");
    }
  }
}

double ensemble_value(const Ensemble& e, const Utterance& u, const Image& r) {
  double sum = 0.0;
  for (const auto& m : e.members()) sum += semantic_value(m, u, r);
  return sum / static_cast<double>(e.size());
}

}  // namespace overmod::semantics
