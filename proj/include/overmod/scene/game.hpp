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

#ifndef OVERMOD_SCENE_GAME_HPP_
#define OVERMOD_SCENE_GAME_HPP_

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "overmod/scene/scene.hpp"
#include "overmod/scene/vocabulary.hpp"

namespace overmod::scene {

// Which information a referring expression must carry to single out the
// target:
//   ShapeNeeded       all referents share the target's color, shapes differ
//   ColorNeeded       all referents share the target's shape, colors differ
//   BothNeeded        one distractor shares the color, the other the shape
//   EitherSufficient  both distractors differ in color and in shape
enum class ContextCondition : std::uint8_t { kShapeNeeded, kColorNeeded, kBothNeeded, kEitherSufficient };

inline constexpr std::size_t kNumConditions = 4;
inline constexpr std::array<ContextCondition, kNumConditions> kAllConditions = {
    ContextCondition::kShapeNeeded, ContextCondition::kColorNeeded,
    ContextCondition::kBothNeeded, ContextCondition::kEitherSufficient};

std::string_view condition_name(ContextCondition c);  // e.g. "shape_needed"
std::optional<ContextCondition> parse_condition(std::string_view name);

inline constexpr std::size_t kNumReferents = 3;

struct Referent {
  SceneSpec spec;
  Image image;
};

struct ReferenceGame {
  std::uint64_t id = 0;
  std::array<Referent, kNumReferents> referents;
  std::size_t target_index = 0;
  ContextCondition condition = ContextCondition::kShapeNeeded;
  Utterance ground_truth;

  const Referent& target() const { return referents[target_index]; }
};

// Target features under the environment's distribution: shape uniform;
// color uniform, except that targets with the typicality shape take the
// typical color with the rule's rate and one of the others otherwise.
std::pair<Color, Shape> sample_target_features(Rng& rng, const EnvironmentConfig& env);

// Draw order: target features, distractor features, target position and
// distractor order, the three geometries, then (low salience only) the
// three salience pixels. Scenes therefore coincide between a high- and a
// low-salience environment that share everything else.
ReferenceGame sample_game(Rng& rng, ContextCondition condition, const EnvironmentConfig& env,
                          std::uint64_t id = 0);

// Whether the referents satisfy the structural constraints of the game's
// condition (and no two referents share both color and shape).
bool satisfies_condition(const ReferenceGame& game);

// ShapeNeeded -> [shape]; ColorNeeded -> [color, "shape"];
// BothNeeded -> [color, shape]; EitherSufficient -> [shape].
// Throws InputError when the game violates its condition.
Utterance ground_truth_utterance(const ReferenceGame& game);

// Referents for which `u` is true under truth-conditional semantics.
std::array<bool, kNumReferents> truth_vector(const Utterance& u, const ReferenceGame& game);

}  // namespace overmod::scene

#endif  // OVERMOD_SCENE_GAME_HPP_
