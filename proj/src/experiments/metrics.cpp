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

#include <algorithm>
#include <cmath>
#include <random>

#include "overmod/error.hpp"
#include "overmod/experiments/experiments.hpp"
#include "overmod/util/io.hpp"

namespace overmod::experiments {

void ExperimentConfig::validate() const {
  if (id < 1 || id > 3) throw ConfigError("experiment id must be 1, 2 or 3");
  if (!(scale > 0.0 && scale <= 1.0)) throw ConfigError("scale must lie in (0, 1]");
  if (seeds.empty()) throw ConfigError("at least one seed is required");
  if (ensemble_size < 1 || ensemble_size > kMaxEnsembleSize) {
    throw ConfigError("ensemble size must lie in [1, 9]");
  }
  if (!(cost >= 0.0)) throw ConfigError("cost weight must be non-negative");
  encoder.validate();
  semantics::TrainingHyperparams h;
  h.epochs = epochs;
  h.batch_size = batch_size;
  h.validation_fraction = validation_fraction;
  h.learning_rate = semantic_learning_rate;
  h.validate();
  h.learning_rate = speaker_learning_rate;
  h.validate();
  if (train_games() < kNumSubsets || train_games() >= total_games()) {
    throw ConfigError("scale " + util::format_double(scale) + " leaves too few games");
  }
}

std::size_t ExperimentConfig::total_games() const {
  return static_cast<std::size_t>(std::llround(static_cast<double>(kFullScaleGames) * scale));
}

std::size_t ExperimentConfig::train_games() const {
  const auto raw = static_cast<std::size_t>(std::floor(static_cast<double>(kFullScaleTrainGames) * scale));
  return raw / kNumSubsets * kNumSubsets;
}

std::vector<scene::EnvironmentConfig> ExperimentConfig::environments() const {
  using scene::EnvironmentConfig;
  switch (id) {
    case 1:
      return {EnvironmentConfig::preset("uniform")};
    case 2:
      return {EnvironmentConfig::preset("typicality"), EnvironmentConfig::preset("uniform")};
    case 3:
      return {EnvironmentConfig::preset("low-salience"), EnvironmentConfig::preset("uniform")};
    default:
      throw ConfigError("experiment id must be 1, 2 or 3");
  }
}

nlohmann::json to_json(const ExperimentConfig& cfg) {
  return {{"id", cfg.id},
          {"scale", cfg.scale},
          {"seeds", cfg.seeds},
          {"ensemble_size", cfg.ensemble_size},
          {"encoder", nn::to_json(cfg.encoder)},
          {"epochs", cfg.epochs},
          {"batch_size", cfg.batch_size},
          {"semantic_learning_rate", cfg.semantic_learning_rate},
          {"speaker_learning_rate", cfg.speaker_learning_rate},
          {"validation_fraction", cfg.validation_fraction},
          {"cost", cfg.cost}};
}

ExperimentConfig experiment_config_from_json(const nlohmann::json& j) {
  ExperimentConfig c;
  c.id = j.at("id").get<int>();
  c.scale = j.at("scale").get<double>();
  c.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
  c.ensemble_size = j.at("ensemble_size").get<std::size_t>();
  c.encoder = nn::encoder_config_from_json(j.at("encoder"));
  c.epochs = j.at("epochs").get<std::size_t>();
  c.batch_size = j.at("batch_size").get<std::size_t>();
  c.semantic_learning_rate = j.at("semantic_learning_rate").get<double>();
  c.speaker_learning_rate = j.at("speaker_learning_rate").get<double>();
  c.validation_fraction = j.at("validation_fraction").get<double>();
  c.cost = j.at("cost").get<double>();
  return c;
}

SubsetPlan plan_subsets(std::span<const std::uint64_t> train_ids, std::uint64_t seed) {
  if (train_ids.empty() || train_ids.size() % kNumSubsets != 0) {
    throw InputError("the training set (" + std::to_string(train_ids.size()) +
                     " games) must be a positive multiple of 11");
  }
  std::vector<std::uint64_t> ids(train_ids.begin(), train_ids.end());
  std::sort(ids.begin(), ids.end());
  if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) {
    throw InputError("duplicate game ids in the training set");
  }
  std::mt19937_64 rng(util::derive_seed(seed, {0x706c616eull}));
  std::shuffle(ids.begin(), ids.end(), rng);

  SubsetPlan plan;
  const std::size_t per = ids.size() / kNumSubsets;
  for (std::size_t s = 0; s < kNumSubsets; ++s) {
    auto first = ids.begin() + static_cast<std::ptrdiff_t>(s * per);
    plan.subsets[s].assign(first, first + static_cast<std::ptrdiff_t>(per));
    std::sort(plan.subsets[s].begin(), plan.subsets[s].end());
    plan.roles[s] = s == 0   ? agents::kLiteralSpeakerRole
                    : s == 1 ? agents::kEvalListenerRole
                             : agents::ensemble_member_role(s - 2);
  }
  return plan;
}

Rate communication_accuracy(const SpeakerFn& speaker, const ListenerFn& listener,
                            std::span<const ReferenceGame> games) {
  if (games.empty()) throw InputError("communication accuracy needs at least one game");
  Rate r;
  for (const auto& g : games) {
    const Utterance u = speaker(g);
    r.hits += agents::listener_choice(listener(u, g)) == g.target_index ? 1 : 0;
    r.total += 1;
  }
  return r;
}

Rate overmodification_rate(const SpeakerFn& speaker, std::span<const ReferenceGame> games) {
  Rate r;
  for (const auto& g : games) {
    if (g.condition != scene::ContextCondition::kShapeNeeded) {
      throw InputError("overmodification is measured on shape_needed games only (game " +
                       std::to_string(g.id) + ")");
    }
    r.hits += speaker(g).mentions_color() ? 1 : 0;
    r.total += 1;
  }
  return r;
}

Utterance probe_utterance(scene::Token feature) {
  if (scene::is_shape_token(feature)) return Utterance({feature});
  if (scene::is_color_token(feature)) return Utterance({feature, scene::kShapeNoun});
  throw InputError("probe feature must be a color or shape word");
}

namespace {

bool bears(const scene::SceneSpec& spec, scene::Token feature) {
  if (scene::is_color_token(feature)) return scene::color_token(spec.color) == feature;
  return scene::shape_token(spec.shape) == feature;
}

}  // namespace

std::pair<double, std::size_t> feature_uncertainty(const ValueFn& value,
                                                   std::span<const ReferenceGame> games,
                                                   scene::Token feature) {
  const Utterance probe = probe_utterance(feature);
  double sum = 0.0;
  std::size_t count = 0;
  for (const auto& g : games) {
    for (std::size_t r = 0; r < scene::kNumReferents; ++r) {
      const double truth = bears(g.referents[r].spec, feature) ? 1.0 : 0.0;
      sum += std::abs(value(probe, g, r) - truth);
      count += 1;
    }
  }
  return {count == 0 ? 0.0 : sum / static_cast<double>(count), count};
}

std::map<scene::Color, Cell> applicability_profile(const ValueFn& value, scene::Shape shape,
                                                   std::span<const ReferenceGame> games) {
  const Utterance word({scene::shape_token(shape)});
  std::map<scene::Color, Cell> out;
  for (const auto& g : games) {
    for (std::size_t r = 0; r < scene::kNumReferents; ++r) {
      const auto& spec = g.referents[r].spec;
      if (spec.shape != shape) continue;
      Cell& c = out[spec.color];
      c.mean += value(word, g, r);
      c.count += 1;
    }
  }
  for (auto& [color, c] : out) c.mean /= static_cast<double>(c.count);
  return out;
}

}  // namespace overmod::experiments
