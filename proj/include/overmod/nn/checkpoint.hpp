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

// Checkpoint layout:
//
//   overmod-checkpoint 1\n
//   <key>: <value>\n                 metadata, sorted by key
//   ...
//   tensor: <name> <d0,d1,...>\n     one line per parameter, in payload order
//   ...
//   end-header\n
//   <payload>
//
// The payload is every tensor's values as little-endian IEEE-754 float64,
// concatenated in header order. Keys may not contain ':' or newlines;
// values may not contain newlines. Conventional keys are `role`, `seed` and
// `config` (a JSON object).

#ifndef OVERMOD_NN_CHECKPOINT_HPP_
#define OVERMOD_NN_CHECKPOINT_HPP_

#include <filesystem>
#include <map>
#include <string>

#include "overmod/nn/tensor.hpp"

namespace overmod::nn {

struct Checkpoint {
  std::map<std::string, std::string> metadata;
  ParameterSet params;
};

std::string encode_checkpoint(const ParameterSet& params,
                              const std::map<std::string, std::string>& metadata);
Checkpoint decode_checkpoint(const std::string& bytes);

void save_checkpoint(const std::filesystem::path& path, const ParameterSet& params,
                     const std::map<std::string, std::string>& metadata);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace overmod::nn

#endif  // OVERMOD_NN_CHECKPOINT_HPP_
