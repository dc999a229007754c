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

// Colors, shapes, the 11-word vocabulary and the closed utterance space.
//
// Token ids: 0-5 are the color words (in Color order), 6-9 the shape words
// (in Shape order) and 10 is the noun "shape". An utterance is either one
// token (a shape word or "shape") or a color word followed by a shape word
// or "shape". Bare color words are not utterances.

#ifndef OVERMOD_SCENE_VOCABULARY_HPP_
#define OVERMOD_SCENE_VOCABULARY_HPP_

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace overmod::scene {

enum class Color : std::uint8_t { kRed, kBlue, kGreen, kYellow, kGray, kWhite };
enum class Shape : std::uint8_t { kCircle, kSquare, kTriangle, kEllipse };

inline constexpr std::size_t kNumColors = 6;
inline constexpr std::size_t kNumShapes = 4;
inline constexpr std::array<Color, kNumColors> kAllColors = {
    Color::kRed, Color::kBlue, Color::kGreen, Color::kYellow, Color::kGray, Color::kWhite};
inline constexpr std::array<Shape, kNumShapes> kAllShapes = {
    Shape::kCircle, Shape::kSquare, Shape::kTriangle, Shape::kEllipse};

struct Rgb {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;
  bool operator==(const Rgb&) const = default;
};

inline constexpr Rgb kBackground{0, 0, 0};
// Silhouette fill of low-salience scenes; not a palette color.
inline constexpr Rgb kNeutralFill{110, 110, 110};

Rgb palette_rgb(Color c);
std::string_view color_name(Color c);
std::string_view shape_name(Shape s);
std::optional<Color> parse_color(std::string_view name);
std::optional<Shape> parse_shape(std::string_view name);

using Token = std::size_t;

inline constexpr Token kShapeNoun = 10;
inline constexpr std::size_t kVocabularySize = 11;

constexpr Token color_token(Color c) { return static_cast<Token>(c); }
constexpr Token shape_token(Shape s) { return kNumColors + static_cast<Token>(s); }
constexpr bool is_color_token(Token t) { return t < kNumColors; }
constexpr bool is_shape_token(Token t) { return t >= kNumColors && t < kNumColors + kNumShapes; }

std::string_view token_word(Token t);
std::optional<Token> parse_token(std::string_view word);

class Utterance {
 public:
  Utterance() = default;
  explicit Utterance(std::vector<Token> tokens) : tokens_(std::move(tokens)) {}

  // Space-separated words, e.g. "red circle". Throws InputError on unknown
  // words or an invalid utterance.
  static Utterance parse(std::string_view text);

  const std::vector<Token>& tokens() const { return tokens_; }
  std::size_t length() const { return tokens_.size(); }
  bool mentions_color() const;
  bool is_valid() const;
  std::string text() const;

  auto operator<=>(const Utterance&) const = default;

 private:
  std::vector<Token> tokens_;
};

// Truth-conditional semantics: every content word must match the referent;
// "shape" matches anything.
bool is_true_of(const Utterance& u, Color color, Shape shape);

inline constexpr std::size_t kUtteranceSpaceSize = 35;

// All valid utterances in enumeration order: the one-token utterances
// (circle, square, triangle, ellipse, shape), then for each color in Color
// order that color followed by circle, square, triangle, ellipse, shape.
const std::vector<Utterance>& utterance_space();

// Position of `u` in utterance_space(); throws InputError if invalid.
std::size_t utterance_index(const Utterance& u);

}  // namespace overmod::scene

#endif  // OVERMOD_SCENE_VOCABULARY_HPP_
