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

#include "overmod/scene/vocabulary.hpp"

#include <algorithm>
#include <sstream>

#include "overmod/error.hpp"

namespace overmod::scene {
namespace {

constexpr std::array<std::string_view, kVocabularySize> kWords = {
    "red", "blue", "green", "yellow", "gray", "white",
    "circle", "square", "triangle", "ellipse", "shape"};

constexpr std::array<Rgb, kNumColors> kPalette = {{
    {230, 30, 30},    // red
    {40, 80, 230},    // blue
    {30, 180, 60},    // green
    {235, 220, 40},   // yellow
    {150, 150, 150},  // gray
    {250, 250, 250},  // white
}};

std::vector<Utterance> enumerate_space() {
  std::vector<Utterance> space;
  for (Shape s : kAllShapes) space.emplace_back(std::vector<Token>{shape_token(s)});
  space.emplace_back(std::vector<Token>{kShapeNoun});
  for (Color c : kAllColors) {
    for (Shape s : kAllShapes) space.emplace_back(std::vector<Token>{color_token(c), shape_token(s)});
    space.emplace_back(std::vector<Token>{color_token(c), kShapeNoun});
  }
  return space;
}

}  // namespace

Rgb palette_rgb(Color c) { return kPalette[static_cast<std::size_t>(c)]; }

std::string_view color_name(Color c) { return kWords[color_token(c)]; }

std::string_view shape_name(Shape s) { return kWords[shape_token(s)]; }

std::optional<Color> parse_color(std::string_view name) {
  for (Color c : kAllColors) {
    if (color_name(c) == name) return c;
  }
  return std::nullopt;
}

std::optional<Shape> parse_shape(std::string_view name) {
  for (Shape s : kAllShapes) {
    if (shape_name(s) == name) return s;
  }
  return std::nullopt;
}

std::string_view token_word(Token t) {
  if (t >= kVocabularySize) throw InputError("token id " + std::to_string(t) + " out of range");
  return kWords[t];
}

std::optional<Token> parse_token(std::string_view word) {
  for (Token t = 0; t < kVocabularySize; ++t) {
    if (kWords[t] == word) return t;
  }
  return std::nullopt;
}

Utterance Utterance::parse(std::string_view text) {
  std::vector<Token> tokens;
  std::istringstream ss{std::string(text)};
  std::string word;
  while (ss >> word) {
    auto t = parse_token(word);
    if (!t) throw InputError("unknown word '" + word + "'");
    tokens.push_back(*t);
  }
  Utterance u(std::move(tokens));
  if (!u.is_valid()) throw InputError("not a valid utterance: '" + std::string(text) + "'");
  return u;
}

bool Utterance::mentions_color() const {
  return std::any_of(tokens_.begin(), tokens_.end(), is_color_token);
}

bool Utterance::is_valid() const {
  if (tokens_.size() == 1) return is_shape_token(tokens_[0]) || tokens_[0] == kShapeNoun;
  if (tokens_.size() == 2) {
    return is_color_token(tokens_[0]) &&
           (is_shape_token(tokens_[1]) || tokens_[1] == kShapeNoun);
  }
  return false;
}

std::string Utterance::text() const {
  std::string out;
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (i > 0) out += ' ';
    out += tokens_[i] < kVocabularySize ? std::string(kWords[tokens_[i]])
                                        : "<" + std::to_string(tokens_[i]) + ">";
  }
  return out;
}

bool is_true_of(const Utterance& u, Color color, Shape shape) {
  for (Token t : u.tokens()) {
    if (is_color_token(t) && t != color_token(color)) return false;
    if (is_shape_token(t) && t != shape_token(shape)) return false;
  }
  return true;
}

const std::vector<Utterance>& utterance_space() {
  static const std::vector<Utterance> space = enumerate_space();
  return space;
}

std::size_t utterance_index(const Utterance& u) {
  const auto& space = utterance_space();
  auto it = std::find(space.begin(), space.end(), u);
  if (it == space.end()) throw InputError("utterance '" + u.text() + "' is not in the space");
  return static_cast<std::size_t>(it - space.begin());
}

}  // namespace overmod::scene
