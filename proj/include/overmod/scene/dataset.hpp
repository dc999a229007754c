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

// A dataset directory holds manifest.jsonl plus one PNG per referent,
// named <game-id>_<referent-index>.png with the id zero-padded to 6 digits.
//
// manifest.jsonl, one JSON object per line:
//   line 1   {"kind":"overmod-dataset","version":1,"environment":{...},
//             "seed":S,"num_games":N,"condition_counts":{"shape_needed":n,...}}
//   line 2+  {"id":i,"condition":"shape_needed","target_index":t,
//             "ground_truth":["circle"],
//             "referents":[{"color":"red","shape":"circle","size":24,
//                           "aspect":1.0,"center":[x,y],
//                           "salience_pixel":[x,y] | null,
//                           "image":"000000_0.png"}, ...]}
// Records appear in id order.

#ifndef OVERMOD_SCENE_DATASET_HPP_
#define OVERMOD_SCENE_DATASET_HPP_

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "overmod/scene/game.hpp"

namespace overmod::scene {

struct Dataset {
  EnvironmentConfig env;
  std::uint64_t seed = 0;
  std::vector<ReferenceGame> games;  // games[i].id == i

  std::array<std::size_t, kNumConditions> condition_counts() const;
};

// Condition of game `id`: kAllConditions[id % 4], which balances the four
// conditions with the remainder assigned round-robin.
ContextCondition condition_for_game(std::uint64_t id);

// Game `id` of a dataset, drawn from its own generator seeded by (seed, id).
ReferenceGame generate_game(const EnvironmentConfig& env, std::uint64_t seed, std::uint64_t id);

// Pure function of (env, num_games, seed). Throws InputError if
// num_games < 4. Parallel over games.
Dataset generate_games(const EnvironmentConfig& env, std::size_t num_games, std::uint64_t seed);

std::string image_file_name(std::uint64_t game_id, std::size_t referent);

std::string manifest_to_jsonl(const Dataset& dataset);

// Writes the PNGs and manifest.jsonl into `dir` (created if needed).
void write_dataset(const Dataset& dataset, const std::filesystem::path& dir);

// generate_games followed by write_dataset.
Dataset generate_dataset(const EnvironmentConfig& env, std::size_t num_games, std::uint64_t seed,
                         const std::filesystem::path& dir);

// Reads manifest.jsonl and every referenced PNG. Throws IoError when the
// manifest or an image is missing or inconsistent.
Dataset load_dataset(const std::filesystem::path& dir);

std::string encode_png(const Image& image);
Image decode_png(const std::string& bytes);
Image read_png(const std::filesystem::path& path);

}  // namespace overmod::scene

#endif  // OVERMOD_SCENE_DATASET_HPP_
