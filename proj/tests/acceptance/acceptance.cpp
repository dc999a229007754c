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

// The acceptance suite. Prints one PASS or FAIL line per criterion and
// exits non-zero if any criterion fails.
//
// The three desk-scale experiments write to <work>/exp1..exp3 and cache
// trained models under <work>/cache, so a second run only re-evaluates.
// `overmod experiment ... --out exp<i> --cache cache` run from <work> fills
// the same cache.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "desk.hpp"
#include "gradient_suite.hpp"
#include "oracles.hpp"
#include "overmod/agents/agents.hpp"
#include "overmod/experiments/experiments.hpp"
#include "overmod/nn/checkpoint.hpp"
#include "overmod/scene/dataset.hpp"
#include "overmod/util/io.hpp"

namespace fs = std::filesystem;
using namespace overmod;

namespace {

using Clock = std::chrono::steady_clock;

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int digits = 4) {
  std::ostringstream s;
  s.precision(digits);
  s << std::fixed << v;
  return s.str();
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

void log_line(const std::string& s) { std::cerr << s << "\n" << std::flush; }

// ---------------------------------------------------------------- 1

Verdict gradient_correctness() {
  double worst = 0.0;
  std::size_t checked = 0, skipped = 0;
  std::vector<std::string> failing;
  for (const auto& c : testing::gradient_cases()) {
    for (std::uint64_t seed : testing::kGradientSeeds) {
      const auto r = c.run(seed);
      worst = std::max(worst, r.max_relative_error);
      checked += r.checked;
      skipped += r.skipped_kinks;
      if (!testing::gradient_case_passes(r)) failing.push_back(c.name + "/seed " + std::to_string(seed));
    }
  }
  std::string detail = "7 components x 5 seeds, worst relative error " + fmt(worst * 1e4, 3) + "e-4, " +
                       std::to_string(checked) + " coordinates checked, " + std::to_string(skipped) +
                       " skipped at ReLU/pooling kinks";
  for (const auto& f : failing) detail += "; failed " + f;
  return {failing.empty(), detail};
}

// ---------------------------------------------------------------- 2

std::vector<std::size_t> utterance_lengths() {
  std::vector<std::size_t> out;
  for (const auto& u : scene::utterance_space()) out.push_back(u.length());
  return out;
}

// Ensemble members from the experiment 1 cache when present, else a
// briefly trained pair.
semantics::Ensemble trained_ensemble(const fs::path& cache) {
  std::vector<semantics::SemanticModel> members;
  for (std::size_t k = 0; k < 3; ++k) {
    const auto p = cache / "uniform" / "seed-1" / (agents::ensemble_member_role(k) + ".ckpt");
    if (!fs::exists(p)) break;
    members.push_back(semantics::SemanticModel::from_checkpoint(nn::load_checkpoint(p)));
  }
  if (!members.empty()) return semantics::Ensemble(std::move(members));
  log_line("[rsa-oracle] no cached ensemble; training two small members");
  const auto games = scene::generate_games(scene::EnvironmentConfig::preset("uniform"), 400, 77).games;
  nn::EncoderConfig cfg;
  for (std::uint64_t s = 0; s < 2; ++s) {
    semantics::TrainingHyperparams h;
    h.epochs = 2;
    h.learning_rate = 0.001;
    h.seed = 100 + s;
    members.push_back(semantics::train_semantic_function(games, h, cfg).model);
  }
  return semantics::Ensemble(std::move(members));
}

Verdict rsa_oracle(const fs::path& cache) {
  const auto games = scene::generate_games(scene::EnvironmentConfig::preset("uniform"), 1000, 2026).games;
  const auto lengths = utterance_lengths();
  std::size_t agree_tab = 0, agree_trained = 0, total = 0;
  for (const auto& g : games) {
    const auto table = agents::truth_table(g);
    for (std::size_t t = 0; t < 3; ++t) {
      const auto u = agents::rsa_speak(table, t, agents::kDefaultCost);
      agree_tab += scene::utterance_index(u) == testing::oracle_rsa_choice(table, t, agents::kDefaultCost, lengths);
    }
  }
  const auto ensemble = trained_ensemble(cache);
  const auto tables = agents::ensemble_tables(ensemble, games);
  for (std::size_t i = 0; i < games.size(); ++i) {
    for (std::size_t t = 0; t < 3; ++t) {
      const auto u = agents::rsa_speak(tables[i], t, agents::kDefaultCost);
      agree_trained += scene::utterance_index(u) == testing::oracle_rsa_choice(tables[i], t, agents::kDefaultCost, lengths);
      total += 1;
    }
  }
  return {agree_tab == total && agree_trained == total,
          "1000 games x 3 targets: tabular " + std::to_string(agree_tab) + "/" + std::to_string(total) +
              ", trained (" + std::to_string(ensemble.size()) + "-member ensemble) " +
              std::to_string(agree_trained) + "/" + std::to_string(total)};
}

// ---------------------------------------------------------------- 3

Verdict generator_statistics() {
  const auto uni = scene::generate_games(scene::EnvironmentConfig::preset("uniform"), 24000, 1);
  std::map<std::pair<scene::Color, scene::Shape>, std::size_t> pairs;
  for (const auto& g : uni.games) pairs[{g.target().spec.color, g.target().spec.shape}] += 1;
  double worst_dev = 0.0;
  for (const auto& [k, n] : pairs) worst_dev = std::max(worst_dev, std::abs(static_cast<double>(n) / 24000.0 - 1.0 / 24.0));
  const bool uniform_ok = pairs.size() == 24 && worst_dev <= 0.01;

  const auto typ = scene::generate_games(scene::EnvironmentConfig::preset("typicality"), 10000, 1);
  std::size_t circles = 0, red = 0;
  for (const auto& g : typ.games) {
    if (g.target().spec.shape != scene::Shape::kCircle) continue;
    circles += 1;
    red += g.target().spec.color == scene::Color::kRed;
  }
  const double share = static_cast<double>(red) / static_cast<double>(circles);
  const bool typ_ok = std::abs(share - 0.9) <= 0.01;

  std::set<std::tuple<int, int, int>> palette;
  for (auto c : scene::kAllColors) {
    const auto rgb = scene::palette_rgb(c);
    palette.insert({rgb.r, rgb.g, rgb.b});
  }
  const auto low = scene::generate_games(scene::EnvironmentConfig::preset("low-salience"), 10000, 1);
  std::size_t exact = 0, referents = 0;
  for (const auto& g : low.games) {
    for (const auto& r : g.referents) {
      std::size_t n = 0;
      for (std::size_t i = 0; i < r.image.rgb.size(); i += 3) {
        n += palette.count({r.image.rgb[i], r.image.rgb[i + 1], r.image.rgb[i + 2]});
      }
      exact += n == 1;
      referents += 1;
    }
  }
  const bool low_ok = exact == referents;
  return {uniform_ok && typ_ok && low_ok,
          "uniform: " + std::to_string(pairs.size()) + " pairs, max |p - 1/24| " + fmt(worst_dev) +
              " over 24000 games; typicality: red share of circle targets " + fmt(share) + " (" +
              std::to_string(red) + "/" + std::to_string(circles) + ") over 10000 games; low salience: " +
              std::to_string(exact) + "/" + std::to_string(referents) + " referents with exactly one palette pixel"};
}

// ---------------------------------------------------------------- 4-6

struct ExperimentOutcome {
  experiments::MetricsReport report;
  double seconds = 0.0;
};

ExperimentOutcome run_desk(int id, const fs::path& work) {
  experiments::RunOptions opts;
  opts.cache_dir = work / "cache";
  opts.log = log_line;
  const auto t0 = Clock::now();
  ExperimentOutcome o;
  o.report = experiments::run_experiment(testing::desk_config(id), work / ("exp" + std::to_string(id)), opts);
  o.seconds = seconds_since(t0);
  return o;
}

double need(const experiments::MetricsReport& r, const std::string& speaker, const std::string& cond,
            const std::string& metric) {
  const auto v = r.mean(speaker, cond, metric);
  if (!v) throw std::runtime_error("report lacks " + speaker + " " + cond + " " + metric);
  return *v;
}

std::string timing(double s) { return "; " + fmt(s / 60.0, 1) + " min this run"; }

std::optional<Verdict> failed_run(const experiments::MetricsReport& r) {
  if (!r.failure) return std::nullopt;
  return Verdict{false, "run failed at " + r.failure->stage + " (" + r.failure->environment + ", seed " +
                            std::to_string(r.failure->seed) + "): " + r.failure->message};
}

Verdict exp1_accuracy(const ExperimentOutcome& o) {
  if (auto f = failed_run(o.report)) return *f;
  const double lit = need(o.report, "literal", "uniform/all", "accuracy_overall");
  const double rsa = need(o.report, "rsa", "uniform/all", "accuracy_overall");
  return {lit >= 0.75 && rsa >= 0.75,
          "held-out accuracy (3-seed mean): literal " + fmt(lit) + ", rsa " + fmt(rsa) + "; threshold 0.75" +
              timing(o.seconds)};
}

Verdict exp1_overmodification(const ExperimentOutcome& o) {
  if (auto f = failed_run(o.report)) return *f;
  const double lit = need(o.report, "literal", "uniform/shape_needed", "overmodification");
  const double rsa = need(o.report, "rsa", "uniform/shape_needed", "overmodification");
  return {rsa - lit >= 0.10, "shape_needed overmodification: rsa " + fmt(rsa) + ", literal " + fmt(lit) +
                                 ", difference " + fmt(100.0 * (rsa - lit), 1) + " pp; threshold 10 pp"};
}

Verdict exp2_typicality(const ExperimentOutcome& o) {
  if (auto f = failed_run(o.report)) return *f;
  std::string detail;
  bool ok = true;
  for (const char* sp : {"literal", "rsa"}) {
    const double red = need(o.report, sp, "typicality/red-circle", "overmodification");
    const double other = need(o.report, sp, "typicality/non-red-circle", "overmodification");
    ok = ok && red < other;
    detail += std::string(sp) + " red-circle " + fmt(red) + " vs non-red-circle " + fmt(other) + "; ";
  }
  return {ok, detail + "required red < non-red for both" + timing(o.seconds)};
}

Verdict exp2_applicability(const ExperimentOutcome& o) {
  if (auto f = failed_run(o.report)) return *f;
  const double typ = need(o.report, "rsa-ensemble", "typicality/red-minus-non-red", "applicability_circle_gap");
  const double uni = need(o.report, "rsa-ensemble", "uniform/red-minus-non-red", "applicability_circle_gap");
  return {typ >= 0.2 && std::abs(uni) < std::abs(typ),
          "\"circle\" applicability gap red - non-red: typicality " + fmt(typ) + " (threshold 0.2), uniform " +
              fmt(uni) + " (must be smaller in absolute value)"};
}

Verdict exp3_uncertainty(const ExperimentOutcome& o) {
  if (auto f = failed_run(o.report)) return *f;
  const double low = need(o.report, "rsa-ensemble", "low-salience/color-words", "uncertainty");
  const double high = need(o.report, "rsa-ensemble", "uniform/color-words", "uncertainty");
  const double ratio = high > 0.0 ? low / high : INFINITY;
  return {low >= 3.0 * high, "color-word uncertainty: low salience " + fmt(low) + ", high salience " + fmt(high) +
                                 ", ratio " + fmt(ratio, 2) + "; threshold 3" + timing(o.seconds)};
}

Verdict exp3_overmodification(const ExperimentOutcome& o) {
  if (auto f = failed_run(o.report)) return *f;
  const double rsa_low = need(o.report, "rsa", "low-salience/shape_needed", "overmodification");
  const double rsa_high = need(o.report, "rsa", "uniform/shape_needed", "overmodification");
  const double lit_low = need(o.report, "literal", "low-salience/shape_needed", "overmodification");
  const double lit_high = need(o.report, "literal", "uniform/shape_needed", "overmodification");
  return {rsa_low < rsa_high, "rsa overmodification: low salience " + fmt(rsa_low) + ", high salience " +
                                  fmt(rsa_high) + "; literal (reported only): low " + fmt(lit_low) + ", high " +
                                  fmt(lit_high) + (lit_low < lit_high ? ", lower under low salience"
                                                                      : ", not lower under low salience")};
}

// ---------------------------------------------------------------- 7

int run_binary(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(OVERMOD_BINARY) + " " + args + " > '" + log.string() + "' 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

// Two fresh end-to-end runs of `overmod experiment` with identical flags,
// each with its own empty model cache.
Verdict determinism(const fs::path& work) {
  const fs::path dir = work / "determinism";
  fs::remove_all(dir);
  util::ensure_directory(dir);
  const std::string flags = "experiment --id 3 --scale 0.01 --seeds 2 --n 2 --d 16 --epochs 2";
  const auto t0 = Clock::now();
  std::vector<std::string> csv;
  for (const char* name : {"a", "b"}) {
    const fs::path out = dir / name;
    const int code = run_binary(flags + " --out '" + out.string() + "'", dir / (std::string(name) + ".log"));
    if (code != 0) return {false, "run " + std::string(name) + " exited " + std::to_string(code)};
    csv.push_back(util::read_file(out / "report.csv"));
  }
  const bool same = csv[0] == csv[1];
  return {same, "`overmod " + flags + "` twice from empty caches: report.csv " +
                    (same ? "byte-identical" : "differs") + " (" + std::to_string(csv[0].size()) + " bytes); " +
                    fmt(seconds_since(t0), 0) + " s"};
}

// ---------------------------------------------------------------- 8

Verdict minimality() {
  std::size_t ok = 0, total = 0;
  for (const char* preset : {"uniform", "typicality", "low-salience"}) {
    const auto data = scene::generate_games(scene::EnvironmentConfig::preset(preset), 5000, 8);
    for (const auto& g : data.games) {
      ok += testing::ground_truth_is_minimal(g);
      total += 1;
    }
  }
  return {ok == total, std::to_string(ok) + "/" + std::to_string(total) +
                           " ground truths uniquely identifying with no shorter identifying utterance "
                           "(5000 games in each environment)"};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance suite: one PASS/FAIL line per criterion"};
  std::string work = "acceptance";
  std::vector<int> only;
  app.add_option("--work", work, "Working directory for experiment outputs and the model cache")->capture_default_str();
  app.add_option("--only", only, "Run only these criteria (1-8)");
  CLI11_PARSE(app, argc, argv);
  util::ensure_directory(work);
  const fs::path wd = fs::absolute(work);
  auto wanted = [&](int i) { return only.empty() || std::find(only.begin(), only.end(), i) != only.end(); };

  // Criteria finish out of order (2 reuses the experiment 1 cache); each
  // is logged when done and the verdicts are printed in order at the end.
  std::map<std::string, std::string> lines;
  bool all = true;
  auto report = [&](const std::string& id, const std::string& name, const Verdict& v) {
    all = all && v.pass;
    lines[id] = std::string(v.pass ? "PASS " : "FAIL ") + id + " " + name + ": " + v.detail;
    log_line("[done] " + lines[id]);
  };
  auto guarded = [&](const std::string& id, const std::string& name, const std::function<Verdict()>& f) {
    try {
      report(id, name, f());
    } catch (const std::exception& e) {
      report(id, name, {false, std::string("error: ") + e.what()});
    }
  };

  if (wanted(1)) guarded("1", "gradient-correctness", gradient_correctness);
  if (wanted(3)) guarded("3", "generator-statistics", generator_statistics);
  if (wanted(8)) guarded("8", "ground-truth-minimality", minimality);

  std::map<int, ExperimentOutcome> runs;
  for (int id : {1, 2, 3}) {
    if (!wanted(id + 3)) continue;
    try {
      runs[id] = run_desk(id, wd);
    } catch (const std::exception& e) {
      runs[id].report.failure = experiments::Failure{"setup", "", 0, e.what()};
    }
  }
  if (wanted(2)) guarded("2", "rsa-oracle-equivalence", [&] { return rsa_oracle(wd / "cache"); });
  if (wanted(4)) {
    guarded("4a", "exp1-accuracy", [&] { return exp1_accuracy(runs[1]); });
    guarded("4b", "exp1-overmodification", [&] { return exp1_overmodification(runs[1]); });
  }
  if (wanted(5)) {
    guarded("5a", "exp2-typicality-overmodification", [&] { return exp2_typicality(runs[2]); });
    guarded("5b", "exp2-circle-applicability", [&] { return exp2_applicability(runs[2]); });
  }
  if (wanted(6)) {
    guarded("6a", "exp3-color-uncertainty", [&] { return exp3_uncertainty(runs[3]); });
    guarded("6b", "exp3-rsa-overmodification", [&] { return exp3_overmodification(runs[3]); });
  }
  if (wanted(7)) guarded("7", "determinism", [&] { return determinism(wd); });
  for (const auto& [id, line] : lines) std::cout << line << "\n";
  return all ? 0 : 1;
}
