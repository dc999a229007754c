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

#include "overmod/scene/dataset.hpp"

#include <png.h>

#include <cstdio>
#include <sstream>

#include "json.hpp"
#include "overmod/error.hpp"
#include "overmod/util/io.hpp"

namespace overmod::scene {
namespace {

using ordered_json = nlohmann::ordered_json;

ordered_json referent_record(const ReferenceGame& g, std::size_t i) {
  const SceneSpec& s = g.referents[i].spec;
  ordered_json r;
  r["color"] = std::string(color_name(s.color));
  r["shape"] = std::string(shape_name(s.shape));
  r["size"] = s.size;
  r["aspect"] = s.aspect;
  r["center"] = {s.center.x, s.center.y};
  if (s.salience_pixel) {
    r["salience_pixel"] = {s.salience_pixel->x, s.salience_pixel->y};
  } else {
    r["salience_pixel"] = nullptr;
  }
  r["image"] = image_file_name(g.id, i);
  return r;
}

SceneSpec spec_from_record(const nlohmann::json& r) {
  SceneSpec s;
  auto color = parse_color(r.at("color").get<std::string>());
  auto shape = parse_shape(r.at("shape").get<std::string>());
  if (!color || !shape) throw IoError("unknown color or shape in manifest record");
  s.color = *color;
  s.shape = *shape;
  s.size = r.at("size").get<int>();
  s.aspect = r.at("aspect").get<double>();
  s.center = {r.at("center").at(0).get<int>(), r.at("center").at(1).get<int>()};
  if (!r.at("salience_pixel").is_null()) {
    s.salience_pixel = Pixel{r.at("salience_pixel").at(0).get<int>(),
                             r.at("salience_pixel").at(1).get<int>()};
  }
  return s;
}

}  // namespace

std::array<std::size_t, kNumConditions> Dataset::condition_counts() const {
  std::array<std::size_t, kNumConditions> counts{};
  for (const auto& g : games) counts[static_cast<std::size_t>(g.condition)] += 1;
  return counts;
}

ContextCondition condition_for_game(std::uint64_t id) { return kAllConditions[id % kNumConditions]; }

ReferenceGame generate_game(const EnvironmentConfig& env, std::uint64_t seed, std::uint64_t id) {
  Rng rng(util::derive_seed(seed, {id}));
  return sample_game(rng, condition_for_game(id), env, id);
}

Dataset generate_games(const EnvironmentConfig& env, std::size_t num_games, std::uint64_t seed) {
  if (num_games < kNumConditions) {
    throw InputError("a dataset needs at least 4 games, got " + std::to_string(num_games));
  }
  Dataset ds;
  ds.env = env;
  ds.env.seed = seed;
  ds.seed = seed;
  ds.env.validate();
  ds.games.resize(num_games);
  const auto n = static_cast<std::ptrdiff_t>(num_games);
#pragma omp parallel for schedule(dynamic, 64)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    ds.games[static_cast<std::size_t>(i)] = generate_game(ds.env, seed, static_cast<std::uint64_t>(i));
  }
  return ds;
}

std::string image_file_name(std::uint64_t game_id, std::size_t referent) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%06llu_%zu.png", static_cast<unsigned long long>(game_id), referent);
  return buf;
}

std::string manifest_to_jsonl(const Dataset& ds) {
  std::string out;
  ordered_json header;
  header["kind"] = "overmod-dataset";
  header["version"] = 1;
  header["environment"] = ordered_json::parse(to_json(ds.env).dump());
  header["seed"] = ds.seed;
  header["num_games"] = ds.games.size();
  const auto counts = ds.condition_counts();
  ordered_json cc;
  for (ContextCondition c : kAllConditions) {
    cc[std::string(condition_name(c))] = counts[static_cast<std::size_t>(c)];
  }
  header["condition_counts"] = cc;
  out += header.dump() + "\n";
  for (const auto& g : ds.games) {
    ordered_json rec;
    rec["id"] = g.id;
    rec["condition"] = std::string(condition_name(g.condition));
    rec["target_index"] = g.target_index;
    ordered_json gt = ordered_json::array();
    for (Token t : g.ground_truth.tokens()) gt.push_back(std::string(token_word(t)));
    rec["ground_truth"] = gt;
    ordered_json refs = ordered_json::array();
    for (std::size_t i = 0; i < kNumReferents; ++i) refs.push_back(referent_record(g, i));
    rec["referents"] = refs;
    out += rec.dump() + "\n";
  }
  return out;
}

void write_dataset(const Dataset& ds, const std::filesystem::path& dir) {
  util::ensure_directory(dir);
  for (const auto& g : ds.games) {
    for (std::size_t i = 0; i < kNumReferents; ++i) {
      util::write_file_atomic(dir / image_file_name(g.id, i), encode_png(g.referents[i].image));
    }
  }
  util::write_file_atomic(dir / "manifest.jsonl", manifest_to_jsonl(ds));
}

Dataset generate_dataset(const EnvironmentConfig& env, std::size_t num_games, std::uint64_t seed,
                         const std::filesystem::path& dir) {
  Dataset ds = generate_games(env, num_games, seed);
  write_dataset(ds, dir);
  return ds;
}

Dataset load_dataset(const std::filesystem::path& dir) {
  const auto manifest_path = dir / "manifest.jsonl";
  std::istringstream in(util::read_file(manifest_path));
  std::string line;
  if (!std::getline(in, line)) throw IoError(manifest_path.string() + ": empty manifest");

  Dataset ds;
  try {
    const auto header = nlohmann::json::parse(line);
    if (header.at("kind") != "overmod-dataset") throw IoError("not a dataset manifest");
    ds.env = environment_from_json(header.at("environment"));
    ds.seed = header.at("seed").get<std::uint64_t>();
    const auto n = header.at("num_games").get<std::size_t>();
    ds.games.reserve(n);
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto rec = nlohmann::json::parse(line);
      ReferenceGame g;
      g.id = rec.at("id").get<std::uint64_t>();
      auto cond = parse_condition(rec.at("condition").get<std::string>());
      if (!cond) throw IoError("unknown condition in record " + std::to_string(g.id));
      g.condition = *cond;
      g.target_index = rec.at("target_index").get<std::size_t>();
      std::string gt;
      for (const auto& w : rec.at("ground_truth")) gt += w.get<std::string>() + " ";
      g.ground_truth = Utterance::parse(gt);
      const auto& refs = rec.at("referents");
      if (refs.size() != kNumReferents) throw IoError("record " + std::to_string(g.id) + " needs 3 referents");
      for (std::size_t i = 0; i < kNumReferents; ++i) {
        g.referents[i].spec = spec_from_record(refs[i]);
        g.referents[i].image = read_png(dir / refs[i].at("image").get<std::string>());
        if (g.referents[i].image.side != ds.env.image_side) {
          throw IoError("image " + refs[i].at("image").get<std::string>() + " has the wrong size");
        }
      }
      if (g.id != ds.games.size()) throw IoError("manifest records out of id order");
      ds.games.push_back(std::move(g));
    }
    if (ds.games.size() != n) throw IoError("manifest declares " + std::to_string(n) + " games");
  } catch (const nlohmann::json::exception& e) {
    throw IoError(manifest_path.string() + ": " + e.what());
  } catch (const InputError& e) {
    throw IoError(manifest_path.string() + ": " + e.what());
  }
  return ds;
}

std::string encode_png(const Image& image) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(image.side);
  img.height = static_cast<png_uint_32>(image.side);
  img.format = PNG_FORMAT_RGB;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&img, nullptr, &size, 0, image.rgb.data(), 0, nullptr)) {
    throw IoError(std::string("PNG encoding failed: ") + img.message);
  }
  std::string out(size, '\0');
  if (!png_image_write_to_memory(&img, out.data(), &size, 0, image.rgb.data(), 0, nullptr)) {
    throw IoError(std::string("PNG encoding failed: ") + img.message);
  }
  out.resize(size);
  return out;
}

Image decode_png(const std::string& bytes) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&img, bytes.data(), bytes.size())) {
    throw IoError(std::string("PNG decoding failed: ") + img.message);
  }
  img.format = PNG_FORMAT_RGB;
  if (img.width != img.height) {
    png_image_free(&img);
    throw IoError("PNG image is not square");
  }
  Image out;
  out.side = img.width;
  out.rgb.resize(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, out.rgb.data(), 0, nullptr)) {
    throw IoError(std::string("PNG decoding failed: ") + img.message);
  }
  return out;
}

Image read_png(const std::filesystem::path& path) {
  try {
    return decode_png(util::read_file(path));
  } catch (const IoError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

}  // namespace overmod::scene
