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

#include "overmod/scene/game.hpp"

#include <algorithm>
#include <set>
#include <vector>

#include "overmod/error.hpp"

namespace overmod::scene {
namespace {

constexpr std::array<std::string_view, kNumConditions> kConditionNames = {
    "shape_needed", "color_needed", "both_needed", "either_sufficient"};

template <typename T, std::size_t N>
std::vector<T> others(const std::array<T, N>& all, T excluded) {
  std::vector<T> out;
  for (T v : all) {
    if (v != excluded) out.push_back(v);
  }
  return out;
}

template <typename T>
T pick(Rng& rng, const std::vector<T>& items) {
  return items[std::uniform_int_distribution<std::size_t>(0, items.size() - 1)(rng)];
}

// Two distinct items, in random order.
template <typename T>
std::pair<T, T> pick_two(Rng& rng, std::vector<T> items) {
  const std::size_t i = std::uniform_int_distribution<std::size_t>(0, items.size() - 1)(rng);
  const T first = items[i];
  items.erase(items.begin() + static_cast<std::ptrdiff_t>(i));
  return {first, pick(rng, items)};
}

using Features = std::pair<Color, Shape>;

}  // namespace

std::string_view condition_name(ContextCondition c) {
  return kConditionNames[static_cast<std::size_t>(c)];
}

std::optional<ContextCondition> parse_condition(std::string_view name) {
  for (ContextCondition c : kAllConditions) {
    if (condition_name(c) == name) return c;
  }
  return std::nullopt;
}

std::pair<Color, Shape> sample_target_features(Rng& rng, const EnvironmentConfig& env) {
  const Shape shape = kAllShapes[std::uniform_int_distribution<std::size_t>(0, kNumShapes - 1)(rng)];
  if (env.distribution == Distribution::kTypicality && shape == env.typicality.shape) {
    if (std::bernoulli_distribution(env.typicality.rate)(rng)) return {env.typicality.color, shape};
    return {pick(rng, others(kAllColors, env.typicality.color)), shape};
  }
  return {kAllColors[std::uniform_int_distribution<std::size_t>(0, kNumColors - 1)(rng)], shape};
}

ReferenceGame sample_game(Rng& rng, ContextCondition condition, const EnvironmentConfig& env,
                          std::uint64_t id) {
  env.validate();
  const auto [color, shape] = sample_target_features(rng, env);

  Features d1{}, d2{};
  switch (condition) {
    case ContextCondition::kShapeNeeded: {
      auto [s1, s2] = pick_two(rng, others(kAllShapes, shape));
      d1 = {color, s1};
      d2 = {color, s2};
      break;
    }
    case ContextCondition::kColorNeeded: {
      auto [c1, c2] = pick_two(rng, others(kAllColors, color));
      d1 = {c1, shape};
      d2 = {c2, shape};
      break;
    }
    case ContextCondition::kBothNeeded:
      d1 = {color, pick(rng, others(kAllShapes, shape))};
      d2 = {pick(rng, others(kAllColors, color)), shape};
      break;
    case ContextCondition::kEitherSufficient: {
      const auto colors = others(kAllColors, color);
      const auto shapes = others(kAllShapes, shape);
      d1 = {pick(rng, colors), pick(rng, shapes)};
      do {
        d2 = {pick(rng, colors), pick(rng, shapes)};
      } while (d2 == d1);
      break;
    }
  }

  ReferenceGame game;
  game.id = id;
  game.condition = condition;
  game.target_index = std::uniform_int_distribution<std::size_t>(0, kNumReferents - 1)(rng);
  if (std::bernoulli_distribution(0.5)(rng)) std::swap(d1, d2);

  std::array<Features, kNumReferents> features{};
  std::size_t next = 0;
  const std::array<Features, 2> distractors = {d1, d2};
  for (std::size_t i = 0; i < kNumReferents; ++i) {
    features[i] = i == game.target_index ? Features{color, shape} : distractors[next++];
  }
  for (std::size_t i = 0; i < kNumReferents; ++i) {
    game.referents[i].spec = sample_geometry(rng, env, features[i].first, features[i].second);
  }
  for (std::size_t i = 0; i < kNumReferents; ++i) {
    sample_salience_pixel(rng, env, game.referents[i].spec);
    game.referents[i].image = render(game.referents[i].spec, env);
  }
  game.ground_truth = ground_truth_utterance(game);
  return game;
}

bool satisfies_condition(const ReferenceGame& game) {
  if (game.target_index >= kNumReferents) return false;
  const SceneSpec& t = game.target().spec;
  std::set<Features> pairs;
  std::set<Color> colors;
  std::set<Shape> shapes;
  for (const auto& r : game.referents) {
    pairs.insert({r.spec.color, r.spec.shape});
    colors.insert(r.spec.color);
    shapes.insert(r.spec.shape);
  }
  if (pairs.size() != kNumReferents) return false;

  std::vector<const SceneSpec*> ds;
  for (std::size_t i = 0; i < kNumReferents; ++i) {
    if (i != game.target_index) ds.push_back(&game.referents[i].spec);
  }
  auto same_color = [&](const SceneSpec* d) { return d->color == t.color; };
  auto same_shape = [&](const SceneSpec* d) { return d->shape == t.shape; };

  switch (game.condition) {
    case ContextCondition::kShapeNeeded:
      return colors.size() == 1 && shapes.size() == kNumReferents;
    case ContextCondition::kColorNeeded:
      return shapes.size() == 1 && colors.size() == kNumReferents;
    case ContextCondition::kBothNeeded: {
      const bool a = same_color(ds[0]) && !same_shape(ds[0]) && same_shape(ds[1]) && !same_color(ds[1]);
      const bool b = same_color(ds[1]) && !same_shape(ds[1]) && same_shape(ds[0]) && !same_color(ds[0]);
      return a || b;
    }
    case ContextCondition::kEitherSufficient:
      return std::none_of(ds.begin(), ds.end(),
                          [&](const SceneSpec* d) { return same_color(d) || same_shape(d); });
  }
  return false;
}

Utterance ground_truth_utterance(const ReferenceGame& game) {
  if (!satisfies_condition(game)) {
    throw InputError("game " + std::to_string(game.id) + " violates its " +
                     std::string(condition_name(game.condition)) + " constraints");
  }
  const SceneSpec& t = game.target().spec;
  switch (game.condition) {
    case ContextCondition::kShapeNeeded:
    case ContextCondition::kEitherSufficient:
      return Utterance({shape_token(t.shape)});
    case ContextCondition::kColorNeeded:
      return Utterance({color_token(t.color), kShapeNoun});
    case ContextCondition::kBothNeeded:
      return Utterance({color_token(t.color), shape_token(t.shape)});
  }
  throw InputError("unknown context condition");
}

std::array<bool, kNumReferents> truth_vector(const Utterance& u, const ReferenceGame& game) {
  std::array<bool, kNumReferents> out{};
  for (std::size_t i = 0; i < kNumReferents; ++i) {
    out[i] = is_true_of(u, game.referents[i].spec.color, game.referents[i].spec.shape);
  }
  return out;
}

}  // namespace overmod::scene
