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

#include "overmod/scene/scene.hpp"

#include <cmath>

#include "overmod/error.hpp"

namespace overmod::scene {
namespace {

constexpr double kMinEllipseAspect = 1.5;
constexpr double kMaxEllipseAspect = 2.5;

template <typename T, std::size_t N>
T uniform_pick(Rng& rng, const std::array<T, N>& items) {
  std::uniform_int_distribution<std::size_t> d(0, N - 1);
  return items[d(rng)];
}

double half_height(const SceneSpec& spec) { return spec.size / (2.0 * spec.aspect); }

}  // namespace

EnvironmentConfig EnvironmentConfig::preset(const std::string& name) {
  EnvironmentConfig env;
  if (name == "uniform") return env;
  if (name == "typicality") {
    env.distribution = Distribution::kTypicality;
    return env;
  }
  if (name == "low-salience") {
    env.salience = Salience::kLow;
    return env;
  }
  throw InputError("unknown environment '" + name + "' (uniform|typicality|low-salience)");
}

std::string EnvironmentConfig::name() const {
  if (distribution == Distribution::kTypicality) {
    return salience == Salience::kLow ? "typicality-low-salience" : "typicality";
  }
  return salience == Salience::kLow ? "low-salience" : "uniform";
}

void EnvironmentConfig::validate() const {
  if (distribution == Distribution::kTypicality &&
      !(typicality.rate > 0.0 && typicality.rate < 1.0)) {
    throw ConfigError("typicality rate must lie in (0, 1)");
  }
  if (min_size < 2 || max_size < min_size || static_cast<std::size_t>(max_size) > image_side) {
    throw ConfigError("size range [" + std::to_string(min_size) + ", " + std::to_string(max_size) +
                      "] does not fit a " + std::to_string(image_side) + " px frame");
  }
}

nlohmann::json to_json(const EnvironmentConfig& env) {
  nlohmann::json j;
  j["name"] = env.name();
  j["distribution"] = env.distribution == Distribution::kUniform ? "uniform" : "typicality";
  if (env.distribution == Distribution::kTypicality) {
    j["typicality"] = {{"shape", std::string(shape_name(env.typicality.shape))},
                       {"color", std::string(color_name(env.typicality.color))},
                       {"rate", env.typicality.rate}};
  }
  j["salience"] = env.salience == Salience::kHigh ? "high" : "low";
  j["image_side"] = env.image_side;
  j["size_range"] = {env.min_size, env.max_size};
  j["seed"] = env.seed;
  return j;
}

EnvironmentConfig environment_from_json(const nlohmann::json& j) {
  EnvironmentConfig env;
  const std::string dist = j.at("distribution").get<std::string>();
  if (dist == "typicality") {
    env.distribution = Distribution::kTypicality;
    const auto& t = j.at("typicality");
    auto shape = parse_shape(t.at("shape").get<std::string>());
    auto color = parse_color(t.at("color").get<std::string>());
    if (!shape || !color) throw InputError("bad typicality rule in environment JSON");
    env.typicality = {*shape, *color, t.at("rate").get<double>()};
  } else if (dist != "uniform") {
    throw InputError("unknown distribution '" + dist + "'");
  }
  env.salience = j.at("salience").get<std::string>() == "low" ? Salience::kLow : Salience::kHigh;
  env.image_side = j.at("image_side").get<std::size_t>();
  env.min_size = j.at("size_range").at(0).get<int>();
  env.max_size = j.at("size_range").at(1).get<int>();
  env.seed = j.at("seed").get<std::uint64_t>();
  env.validate();
  return env;
}

bool covers(const SceneSpec& spec, int x, int y) {
  const double px = x + 0.5 - spec.center.x;
  const double py = y + 0.5 - spec.center.y;
  const double half = spec.size / 2.0;
  switch (spec.shape) {
    case Shape::kCircle:
      return px * px + py * py <= half * half;
    case Shape::kSquare:
      return std::abs(px) <= half && std::abs(py) <= half;
    case Shape::kTriangle: {
      // Apex at the top centre, base along the bottom edge.
      if (py < -half || py > half) return false;
      return std::abs(px) <= half * (py + half) / spec.size;
    }
    case Shape::kEllipse: {
      const double a = half;
      const double b = half_height(spec);
      return (px * px) / (a * a) + (py * py) / (b * b) <= 1.0;
    }
  }
  return false;
}

std::vector<Pixel> covered_pixels(const SceneSpec& spec, std::size_t side) {
  std::vector<Pixel> out;
  const int s = static_cast<int>(side);
  for (int y = 0; y < s; ++y) {
    for (int x = 0; x < s; ++x) {
      if (covers(spec, x, y)) out.push_back({x, y});
    }
  }
  return out;
}

SceneSpec sample_geometry(Rng& rng, const EnvironmentConfig& env, Color color, Shape shape) {
  env.validate();
  SceneSpec spec;
  spec.color = color;
  spec.shape = shape;
  spec.size = std::uniform_int_distribution<int>(env.min_size, env.max_size)(rng);
  if (shape == Shape::kEllipse) {
    spec.aspect = std::uniform_real_distribution<double>(kMinEllipseAspect, kMaxEllipseAspect)(rng);
  }
  const int side = static_cast<int>(env.image_side);
  const double hw = spec.size / 2.0;
  const double hh = half_height(spec);
  const int x_lo = static_cast<int>(std::ceil(hw));
  const int x_hi = static_cast<int>(std::floor(side - hw));
  const int y_lo = static_cast<int>(std::ceil(hh));
  const int y_hi = static_cast<int>(std::floor(side - hh));
  if (x_lo > x_hi || y_lo > y_hi) throw GenerationError("shape does not fit the frame");
  spec.center.x = std::uniform_int_distribution<int>(x_lo, x_hi)(rng);
  spec.center.y = std::uniform_int_distribution<int>(y_lo, y_hi)(rng);
  return spec;
}

void sample_salience_pixel(Rng& rng, const EnvironmentConfig& env, SceneSpec& spec) {
  if (env.salience != Salience::kLow) {
    spec.salience_pixel.reset();
    return;
  }
  const auto pixels = covered_pixels(spec, env.image_side);
  if (pixels.empty()) throw GenerationError("shape covers no pixels");
  spec.salience_pixel = pixels[std::uniform_int_distribution<std::size_t>(0, pixels.size() - 1)(rng)];
}

SceneSpec sample_scene(Rng& rng, const EnvironmentConfig& env, const FeatureConstraint& fixed) {
  const Color color = fixed.color ? *fixed.color : uniform_pick(rng, kAllColors);
  const Shape shape = fixed.shape ? *fixed.shape : uniform_pick(rng, kAllShapes);
  SceneSpec spec = sample_geometry(rng, env, color, shape);
  sample_salience_pixel(rng, env, spec);
  return spec;
}

Image render(const SceneSpec& spec, const EnvironmentConfig& env) {
  Image img;
  img.side = env.image_side;
  img.rgb.assign(img.side * img.side * 3, 0);
  const Rgb fill = env.salience == Salience::kLow ? kNeutralFill : palette_rgb(spec.color);
  const int s = static_cast<int>(img.side);
  for (int y = 0; y < s; ++y) {
    for (int x = 0; x < s; ++x) {
      if (!covers(spec, x, y)) continue;
      Rgb c = fill;
      if (spec.salience_pixel && spec.salience_pixel->x == x && spec.salience_pixel->y == y) {
        c = palette_rgb(spec.color);
      }
      const std::size_t i = (static_cast<std::size_t>(y) * img.side + static_cast<std::size_t>(x)) * 3;
      img.rgb[i] = c.r;
      img.rgb[i + 1] = c.g;
      img.rgb[i + 2] = c.b;
    }
  }
  return img;
}

void append_normalized(const Image& image, std::vector<double>& out) {
  const std::size_t at = out.size();
  out.resize(at + image.rgb.size());
  for (std::size_t i = 0; i < image.rgb.size(); ++i) out[at + i] = image.rgb[i] / 255.0;
}

}  // namespace overmod::scene
