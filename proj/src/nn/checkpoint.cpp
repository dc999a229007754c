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

#include "overmod/nn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <sstream>

#include "overmod/error.hpp"
#include "overmod/util/io.hpp"

namespace overmod::nn {
namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint payloads are written in host order, which must be little-endian");

constexpr const char* kMagic = "overmod-checkpoint 1";
constexpr const char* kEnd = "end-header";

Shape parse_shape(const std::string& text) {
  Shape shape;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) shape.push_back(std::stoull(part));
  return shape;
}

}  // namespace

std::string encode_checkpoint(const ParameterSet& params,
                              const std::map<std::string, std::string>& metadata) {
  std::string out = std::string(kMagic) + "\n";
  for (const auto& [key, value] : metadata) {
    if (key.find_first_of(":\n") != std::string::npos || value.find('\n') != std::string::npos ||
        key == "tensor") {
      throw ConfigError("invalid checkpoint metadata key/value: " + key);
    }
    out += key + ": " + value + "\n";
  }
  for (const auto& [name, t] : params) {
    out += "tensor: " + name + " " + shape_to_string(t.shape()) + "\n";
  }
  out += std::string(kEnd) + "\n";
  for (const auto& [name, t] : params) {
    const auto d = t.data();
    const std::size_t at = out.size();
    out.resize(at + d.size() * sizeof(double));
    std::memcpy(out.data() + at, d.data(), d.size() * sizeof(double));
  }
  return out;
}

Checkpoint decode_checkpoint(const std::string& bytes) {
  Checkpoint ck;
  std::size_t pos = 0;
  auto next_line = [&]() {
    const std::size_t nl = bytes.find('\n', pos);
    if (nl == std::string::npos) throw IoError("truncated checkpoint header");
    std::string line = bytes.substr(pos, nl - pos);
    pos = nl + 1;
    return line;
  };
  if (next_line() != kMagic) throw IoError("not an overmod checkpoint");

  std::vector<std::pair<std::string, Shape>> layout;
  for (std::string line = next_line(); line != kEnd; line = next_line()) {
    const std::size_t colon = line.find(": ");
    if (colon == std::string::npos) throw IoError("malformed checkpoint header line: " + line);
    std::string key = line.substr(0, colon);
    std::string value = line.substr(colon + 2);
    if (key == "tensor") {
      const std::size_t space = value.rfind(' ');
      if (space == std::string::npos) throw IoError("malformed tensor line: " + line);
      layout.emplace_back(value.substr(0, space), parse_shape(value.substr(space + 1)));
    } else {
      ck.metadata[key] = value;
    }
  }
  for (const auto& [name, shape] : layout) {
    Tensor& t = ck.params.add(name, shape);
    const std::size_t n = t.size() * sizeof(double);
    if (pos + n > bytes.size()) throw IoError("truncated checkpoint payload at " + name);
    std::memcpy(t.data().data(), bytes.data() + pos, n);
    pos += n;
  }
  if (pos != bytes.size()) throw IoError("trailing bytes after checkpoint payload");
  return ck;
}

void save_checkpoint(const std::filesystem::path& path, const ParameterSet& params,
                     const std::map<std::string, std::string>& metadata) {
  util::write_file_atomic(path, encode_checkpoint(params, metadata));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  try {
    return decode_checkpoint(util::read_file(path));
  } catch (const IoError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

}  // namespace overmod::nn
