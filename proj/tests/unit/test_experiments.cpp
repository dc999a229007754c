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

#include <algorithm>
#include <cmath>
#include <set>

#include "doctest.h"
#include "fixtures.hpp"
#include "oracles.hpp"
#include "overmod/error.hpp"
#include "overmod/experiments/experiments.hpp"
#include "overmod/scene/dataset.hpp"
#include "overmod/util/io.hpp"

using namespace overmod;
using experiments::ReportRow;

namespace {

std::vector<scene::ReferenceGame> games_in(scene::ContextCondition c, std::size_t n, std::uint64_t seed) {
  const auto all = scene::generate_games(scene::EnvironmentConfig::preset("uniform"), 4 * n, seed).games;
  std::vector<scene::ReferenceGame> out;
  for (const auto& g : all) {
    if (g.condition == c) out.push_back(g);
  }
  return out;
}

// Crisp listener: truth-conditional values.
agents::Values truth_values(const scene::Utterance& u, const scene::ReferenceGame& g) {
  agents::Values v{};
  const auto t = scene::truth_vector(u, g);
  for (std::size_t r = 0; r < 3; ++r) v[r] = t[r] ? 1.0 : 0.0;
  return v;
}

// A configuration small enough to run end to end in seconds.
experiments::ExperimentConfig tiny_run(int id) {
  experiments::ExperimentConfig cfg;
  cfg.id = id;
  cfg.scale = 0.002;
  cfg.seeds = {1, 2};
  cfg.ensemble_size = 2;
  cfg.encoder.channels = {2, 2, 2};
  cfg.encoder.embed_dim = 4;
  cfg.encoder.token_dim = 3;
  cfg.epochs = 2;
  cfg.batch_size = 16;
  return cfg;
}

std::size_t count_rows(const experiments::MetricsReport& r, const std::string& metric) {
  return static_cast<std::size_t>(
      std::count_if(r.rows.begin(), r.rows.end(), [&](const ReportRow& row) { return row.metric == metric; }));
}

}  // namespace

TEST_CASE("experiment configuration sizes and validation") {
  experiments::ExperimentConfig cfg;
  CHECK(cfg.total_games() == 7500);
  CHECK(cfg.train_games() == 5500);
  cfg.scale = 1.0;
  CHECK(cfg.total_games() == 75000);
  CHECK(cfg.train_games() == 55000);
  cfg.scale = 0.05;
  CHECK(cfg.total_games() == 3750);
  CHECK(cfg.train_games() == 2750);
  cfg.scale = 0.013;
  CHECK(cfg.train_games() == 715);  // floor(715) is already a multiple of 11
  cfg.scale = 0.0131;
  CHECK(cfg.train_games() % 11 == 0);
  CHECK_NOTHROW(cfg.validate());

  auto bad = cfg;
  bad.id = 4;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = cfg;
  bad.scale = 0.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = cfg;
  bad.scale = 1.5;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = cfg;
  bad.ensemble_size = 10;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = cfg;
  bad.seeds.clear();
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = cfg;
  bad.scale = 0.0001;
  CHECK_THROWS_AS(bad.validate(), ConfigError);

  cfg.id = 2;
  const auto envs = cfg.environments();
  REQUIRE(envs.size() == 2);
  CHECK(envs[0].name() == "typicality");
  CHECK(envs[1].name() == "uniform");
  cfg.id = 3;
  CHECK(cfg.environments()[0].name() == "low-salience");
  CHECK(experiments::experiment_config_from_json(experiments::to_json(cfg)).encoder == cfg.encoder);
  CHECK(experiments::to_json(experiments::experiment_config_from_json(experiments::to_json(cfg))) ==
        experiments::to_json(cfg));
}

TEST_CASE("subset plan partitions the training set into 11 disjoint roles") {
  std::vector<std::uint64_t> ids(110);
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = 3 * i + 1;
  const auto plan = experiments::plan_subsets(ids, 5);
  std::set<std::uint64_t> seen;
  for (std::size_t s = 0; s < 11; ++s) {
    CHECK(plan.subsets[s].size() == 10);
    CHECK(std::is_sorted(plan.subsets[s].begin(), plan.subsets[s].end()));
    for (auto id : plan.subsets[s]) CHECK(seen.insert(id).second);
  }
  CHECK(seen == std::set<std::uint64_t>(ids.begin(), ids.end()));
  CHECK(plan.roles[0] == "literal-speaker");
  CHECK(plan.roles[1] == "eval-listener");
  CHECK(plan.roles[2] == "rsa-ensemble-member-0");
  CHECK(plan.roles[10] == "rsa-ensemble-member-8");

  // Order of the input does not matter; the seed does.
  auto reversed = ids;
  std::reverse(reversed.begin(), reversed.end());
  CHECK(experiments::plan_subsets(reversed, 5).subsets == plan.subsets);
  CHECK(experiments::plan_subsets(ids, 6).subsets != plan.subsets);

  CHECK_THROWS_AS(experiments::plan_subsets(std::span(ids).first(100), 5), InputError);
  CHECK_THROWS_AS(experiments::plan_subsets(std::vector<std::uint64_t>{}, 5), InputError);
  auto dup = ids;
  dup[1] = dup[0];
  CHECK_THROWS_AS(experiments::plan_subsets(dup, 5), InputError);
}

TEST_CASE("communication accuracy of a crisp speaker and listener") {
  const auto games = scene::generate_games(scene::EnvironmentConfig::preset("uniform"), 200, 3).games;
  const experiments::SpeakerFn truthful = [](const scene::ReferenceGame& g) { return g.ground_truth; };
  const auto r = experiments::communication_accuracy(truthful, truth_values, games);
  CHECK(r.total == 200);
  CHECK(r.hits == 200);
  CHECK(r.value() == 1.0);

  // "shape" is true of everything, so the listener always picks referent 0.
  const experiments::SpeakerFn vague = [](const scene::ReferenceGame&) { return scene::Utterance::parse("shape"); };
  const auto v = experiments::communication_accuracy(vague, truth_values, games);
  std::size_t first = 0;
  for (const auto& g : games) first += g.target_index == 0 ? 1 : 0;
  CHECK(v.hits == first);
  CHECK_THROWS_AS(experiments::communication_accuracy(truthful, truth_values, {}), InputError);
}

TEST_CASE("overmodification counts color words on shape_needed games") {
  const auto games = games_in(scene::ContextCondition::kShapeNeeded, 40, 4);
  REQUIRE(games.size() == 40);
  const experiments::SpeakerFn minimal = [](const scene::ReferenceGame& g) { return g.ground_truth; };
  CHECK(experiments::overmodification_rate(minimal, games).hits == 0);
  // "red circle" for a red circle in a shape_needed context is overmodified.
  const experiments::SpeakerFn full = [](const scene::ReferenceGame& g) {
    const auto& t = g.target().spec;
    return scene::Utterance({scene::color_token(t.color), scene::shape_token(t.shape)});
  };
  const auto r = experiments::overmodification_rate(full, games);
  CHECK(r.hits == 40);
  CHECK(r.value() == 1.0);
  const experiments::SpeakerFn half = [&](const scene::ReferenceGame& g) { return g.id % 2 ? full(g) : minimal(g); };
  std::size_t odd = 0;
  for (const auto& g : games) odd += g.id % 2;
  CHECK(experiments::overmodification_rate(half, games).hits == odd);

  const auto other = games_in(scene::ContextCondition::kBothNeeded, 4, 4);
  CHECK_THROWS_AS(experiments::overmodification_rate(minimal, other), InputError);
}

TEST_CASE("feature uncertainty and applicability") {
  CHECK(experiments::probe_utterance(scene::color_token(scene::Color::kBlue)).text() == "blue shape");
  CHECK(experiments::probe_utterance(scene::shape_token(scene::Shape::kSquare)).text() == "square");
  CHECK_THROWS_AS(experiments::probe_utterance(scene::kShapeNoun), InputError);

  const auto games = scene::generate_games(scene::EnvironmentConfig::preset("uniform"), 60, 5).games;
  const experiments::ValueFn half = [](const scene::Utterance&, const scene::ReferenceGame&, std::size_t) { return 0.5; };
  const auto [u_half, n] = experiments::feature_uncertainty(half, games, 0);
  CHECK(u_half == doctest::Approx(0.5));
  CHECK(n == 180);

  const experiments::ValueFn crisp = [](const scene::Utterance& u, const scene::ReferenceGame& g, std::size_t r) {
    return testing::oracle_true_of(u.tokens(), g.referents[r].spec) ? 1.0 : 0.0;
  };
  for (scene::Token t = 0; t < 10; ++t) CHECK(experiments::feature_uncertainty(crisp, games, t).first == 0.0);
  const experiments::ValueFn inverted = [&](const scene::Utterance& u, const scene::ReferenceGame& g, std::size_t r) {
    return 1.0 - crisp(u, g, r);
  };
  CHECK(experiments::feature_uncertainty(inverted, games, 7).first == 1.0);

  // The value of "circle" for red circles 0.8, for other circles 0.3.
  const experiments::ValueFn fake = [](const scene::Utterance& u, const scene::ReferenceGame& g, std::size_t r) {
    CHECK(u.text() == "circle");
    return g.referents[r].spec.color == scene::Color::kRed ? 0.8 : 0.3;
  };
  const auto profile = experiments::applicability_profile(fake, scene::Shape::kCircle, games);
  std::size_t circles = 0;
  for (const auto& g : games) {
    for (const auto& r : g.referents) circles += r.spec.shape == scene::Shape::kCircle ? 1 : 0;
  }
  std::size_t counted = 0;
  for (const auto& [color, cell] : profile) {
    CHECK(cell.mean == doctest::Approx(color == scene::Color::kRed ? 0.8 : 0.3));
    counted += cell.count;
  }
  CHECK(counted == circles);
}

TEST_CASE("aggregates: mean and a 95% interval over seeds") {
  const std::vector<ReportRow> rows = {
      {1, 1, "rsa", "uniform/shape_needed", "overmodification", 0.5, 10},
      {1, 2, "rsa", "uniform/shape_needed", "overmodification", 0.7, 10},
      {1, 1, "literal", "uniform/all", "accuracy_overall", 0.4, 10},
  };
  const auto agg = experiments::aggregate(rows);
  REQUIRE(agg.size() == 2);
  CHECK(agg[0].speaker == "rsa");
  CHECK(agg[0].mean == doctest::Approx(0.6));
  REQUIRE(agg[0].ci95.has_value());
  CHECK(*agg[0].ci95 == doctest::Approx(1.96 * std::sqrt(0.02) / std::sqrt(2.0)));
  CHECK(agg[0].values == std::vector<double>{0.5, 0.7});
  CHECK_FALSE(agg[1].ci95.has_value());

  experiments::MetricsReport report;
  report.rows = rows;
  report.aggregates = agg;
  CHECK(report.mean("rsa", "uniform/shape_needed", "overmodification") == doctest::Approx(0.6));
  CHECK_FALSE(report.mean("rsa", "uniform/shape_needed", "accuracy").has_value());
}

TEST_CASE("report CSV and JSON") {
  const std::vector<ReportRow> rows = {{2, 3, "literal", "typicality/red-circle", "overmodification", 0.25, 8}};
  CHECK(experiments::report_csv(rows) ==
        "experiment,seed,speaker,condition,metric,value,denominator\n"
        "2,3,literal,typicality/red-circle,overmodification,0.25,8\n");

  experiments::MetricsReport report;
  report.config.id = 2;
  report.rows = rows;
  report.aggregates = experiments::aggregate(rows);
  report.failure = experiments::Failure{"train", "typicality", 3, "diverged"};
  const auto j = experiments::to_json(report);
  const auto back = experiments::metrics_report_from_json(j);
  CHECK(experiments::to_json(back) == j);
  REQUIRE(back.failure.has_value());
  CHECK(back.failure->stage == "train");
  CHECK(back.rows.size() == 1);
  CHECK(back.rows[0].value == 0.25);
}

TEST_CASE("figures per experiment") {
  for (int id : {1, 2, 3}) {
    experiments::MetricsReport report;
    report.config.id = id;
    report.rows = {{id, 1, "rsa", "uniform/shape_needed", "overmodification", 0.4, 5}};
    report.aggregates = experiments::aggregate(report.rows);
    const auto figs = experiments::render_figures(report);
    CHECK(figs.count("accuracy.svg") == 1);
    if (id == 1) CHECK(figs.count("overmodification.svg") == 1);
    if (id == 2) {
      CHECK(figs.count("overmodification_typicality.svg") == 1);
      CHECK(figs.count("overmodification_uniform.svg") == 1);
      CHECK(figs.count("applicability_circle.svg") == 1);
    }
    if (id == 3) {
      CHECK(figs.count("overmodification_salience.svg") == 1);
      CHECK(figs.count("uncertainty.svg") == 1);
    }
    for (const auto& [name, svg] : figs) {
      CHECK(svg.rfind("<?xml", 0) == 0);
      CHECK(svg.find("<svg xmlns") != std::string::npos);
      CHECK(svg.find("</svg>") != std::string::npos);
    }
  }
}

TEST_CASE("a tiny experiment runs end to end and reuses its cache") {
  testing::TempDir dir("pipeline");
  const auto cfg = tiny_run(3);
  std::vector<std::string> lines;
  experiments::RunOptions opts;
  opts.log = [&](const std::string& s) { lines.push_back(s); };
  const auto a = experiments::run_experiment(cfg, dir.path() / "out", opts);
  REQUIRE_FALSE(a.failure.has_value());
  CHECK(!lines.empty());
  // 2 speakers x 4 conditions x 2 seeds x 2 environments.
  CHECK(count_rows(a, "accuracy") == 32);
  for (const auto& row : a.rows) {
    if (row.metric == "accuracy" || row.metric == "overmodification") {
      CHECK(row.value >= 0.0);
      CHECK(row.value <= 1.0);
      CHECK(row.denominator > 0);
    }
  }
  CHECK(a.mean("ground-truth", "uniform/all", "accuracy_overall").has_value());
  CHECK(a.mean("rsa-ensemble", "low-salience/color-words", "uncertainty").has_value());
  for (const char* f : {"report.csv", "metrics.json", "accuracy.svg", "uncertainty_table.csv"}) {
    CHECK(std::filesystem::exists(dir.path() / "out" / f));
  }
  CHECK(std::filesystem::exists(dir.path() / "out" / "runs" / "uniform" / "seed-1" / "eval-listener.ckpt"));

  const auto csv = util::read_file(dir.path() / "out" / "report.csv");
  lines.clear();
  const auto b = experiments::run_experiment(cfg, dir.path() / "out", opts);
  CHECK(util::read_file(dir.path() / "out" / "report.csv") == csv);
  CHECK(experiments::report_csv(b.rows) == csv);
  for (const auto& l : lines) CHECK(l.find("training") == std::string::npos);

  // A fresh directory reproduces the same bytes.
  const auto c = experiments::run_experiment(cfg, dir.path() / "fresh");
  CHECK(experiments::report_csv(c.rows) == csv);
}

TEST_CASE("a failing run is reported, not thrown") {
  testing::TempDir dir("failing");
  auto cfg = tiny_run(1);
  cfg.seeds = {1};
  cfg.encoder.image_side = 32;  // does not match the 64 px frames
  const auto r = experiments::run_experiment(cfg, dir.path());
  REQUIRE(r.failure.has_value());
  CHECK(r.failure->environment == "uniform");
  CHECK(r.failure->seed == 1);
  CHECK(std::filesystem::exists(dir.path() / "metrics.json"));
  CHECK(experiments::metrics_report_from_json(nlohmann::json::parse(util::read_file(dir.path() / "metrics.json")))
            .failure.has_value());
}

TEST_CASE("full-size subset plan and tabular applicability") {
  std::vector<std::uint64_t> ids(5500);
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = i;
  const auto plan = experiments::plan_subsets(ids, 11);
  for (const auto& s : plan.subsets) CHECK(s.size() == 500);

  const auto games = scene::generate_games(scene::EnvironmentConfig::preset("typicality"), 400, 12).games;
  const experiments::ValueFn crisp = [](const scene::Utterance& u, const scene::ReferenceGame& g, std::size_t r) {
    return testing::oracle_true_of(u.tokens(), g.referents[r].spec) ? 1.0 : 0.0;
  };
  const auto profile = experiments::applicability_profile(crisp, scene::Shape::kCircle, games);
  CHECK(profile.size() == scene::kAllColors.size());
  for (const auto& [color, cell] : profile) {
    CHECK(cell.mean == 1.0);
    CHECK(cell.count > 0);
  }
}

TEST_CASE("a tiny typicality experiment reports circle targets by color") {
  testing::TempDir dir("typicality");
  auto cfg = tiny_run(2);
  cfg.scale = 0.01;
  cfg.seeds = {1};
  const auto report = experiments::run_experiment(cfg, dir.path() / "out");
  REQUIRE_FALSE(report.failure.has_value());
  for (const char* env : {"typicality", "uniform"}) {
    for (const char* sp : {"literal", "rsa"}) {
      for (const char* cond : {"red-circle", "non-red-circle"}) {
        CHECK(report.mean(sp, std::string(env) + "/" + cond, "overmodification").has_value());
      }
    }
  }
  const auto svg = util::read_file(dir.path() / "out" / "overmodification_typicality.svg");
  std::size_t bars = 0;
  for (std::size_t pos = 0; (pos = svg.find("<rect x=", pos)) != std::string::npos; ++pos) bars += 1;
  CHECK(bars == 4);
}
