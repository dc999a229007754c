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

#ifndef OVERMOD_SCENE_SCENE_HPP_
#define OVERMOD_SCENE_SCENE_HPP_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"
#include "overmod/scene/vocabulary.hpp"

namespace overmod::scene {

using Rng = std::mt19937_64;

enum class Distribution { kUniform, kTypicality };
enum class Salience { kHigh, kLow };

// Skews the color of targets with the given shape.
struct TypicalityRule {
  Shape shape = Shape::kCircle;
  Color color = Color::kRed;
  double rate = 0.9;
  bool operator==(const TypicalityRule&) const = default;
};

struct EnvironmentConfig {
  Distribution distribution = Distribution::kUniform;
  TypicalityRule typicality;
  Salience salience = Salience::kHigh;
  std::size_t image_side = 64;
  int min_size = 16;
  int max_size = 40;
  std::uint64_t seed = 0;

  // "uniform", "typicality" or "low-salience"; throws InputError otherwise.
  static EnvironmentConfig preset(const std::string& name);
  // The preset name this configuration corresponds to.
  std::string name() const;
  void validate() const;

  bool operator==(const EnvironmentConfig&) const = default;
};

nlohmann::json to_json(const EnvironmentConfig& env);
EnvironmentConfig environment_from_json(const nlohmann::json& j);

struct Pixel {
  int x = 0;
  int y = 0;
  bool operator==(const Pixel&) const = default;
};

// One shape on a black frame. `size` is the horizontal extent of the
// bounding box in pixels; ellipses are horizontal with height size/aspect,
// every other shape has aspect 1. The centre is given in continuous frame
// coordinates, pixel (i, j) covering [i, i+1) x [j, j+1).
struct SceneSpec {
  Color color = Color::kRed;
  Shape shape = Shape::kCircle;
  int size = 16;
  double aspect = 1.0;
  Pixel center;
  std::optional<Pixel> salience_pixel;

  bool operator==(const SceneSpec&) const = default;
};

struct Image {
  std::size_t side = 0;
  std::vector<std::uint8_t> rgb;  // row-major RGB triples

  Rgb at(std::size_t x, std::size_t y) const {
    const std::size_t i = (y * side + x) * 3;
    return {rgb[i], rgb[i + 1], rgb[i + 2]};
  }
  bool operator==(const Image&) const = default;
};

struct FeatureConstraint {
  std::optional<Color> color;
  std::optional<Shape> shape;
};

// Whether the pixel at (x, y) is covered by the shape (pixel-centre test).
bool covers(const SceneSpec& spec, int x, int y);
std::vector<Pixel> covered_pixels(const SceneSpec& spec, std::size_t side);

// Color and shape honor `fixed` (uniform otherwise), size is uniform in the
// environment's range, the centre is uniform subject to full containment
// and, under low salience, the salience pixel is uniform over the covered
// pixels. Throws GenerationError if the size range cannot fit the frame.
SceneSpec sample_scene(Rng& rng, const EnvironmentConfig& env, const FeatureConstraint& fixed = {});

// Geometry only (color and shape given); consumes no salience draws.
SceneSpec sample_geometry(Rng& rng, const EnvironmentConfig& env, Color color, Shape shape);
void sample_salience_pixel(Rng& rng, const EnvironmentConfig& env, SceneSpec& spec);

// Hard-edged rendering. High salience fills the shape with its palette
// color; low salience fills it with kNeutralFill except the salience pixel.
Image render(const SceneSpec& spec, const EnvironmentConfig& env);

// Image values in [0, 1], H x W x 3 row-major, appended to `out`.
void append_normalized(const Image& image, std::vector<double>& out);

}  // namespace overmod::scene

#endif  // OVERMOD_SCENE_SCENE_HPP_
