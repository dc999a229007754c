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

#ifndef OVERMOD_UTIL_IO_HPP_
#define OVERMOD_UTIL_IO_HPP_

#include <cstdint>
#include <filesystem>
#include <initializer_list>
#include <string>
#include <string_view>

namespace overmod::util {

// Writes to a sibling temporary file, then renames over `path`. Parent
// directories are created. Throws IoError naming the path.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

std::string read_file(const std::filesystem::path& path);

void ensure_directory(const std::filesystem::path& dir);

// splitmix64-based seed mixing: a stable 64-bit seed for (base, tags...).
std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> tags);

// FNV-1a, for fingerprints and digests.
std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = 14695981039346656037ull);

// Shortest round-trip decimal form of a double (std::to_chars).
std::string format_double(double value);

}  // namespace overmod::util

#endif  // OVERMOD_UTIL_IO_HPP_
