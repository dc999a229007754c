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

// Experiment pipelines, metrics and reports.
//
// Experiment 1 trains and evaluates agents in the uniform environment,
// experiment 2 in the typicality environment and experiment 3 in the
// low-salience environment; 2 and 3 also run the uniform environment as
// the contrast condition.
//
// report.csv columns:
//   experiment  1, 2 or 3
//   seed        the run seed
//   speaker     literal | rsa | ground-truth | rsa-ensemble | the role of a
//               trained model (training diagnostics)
//   condition   <environment>/<stratum>, e.g. uniform/shape_needed,
//               typicality/red-circle, low-salience/red
//   metric      accuracy            argmax eval-listener accuracy, one row
//                                   per context condition
//               accuracy_sampled    expected accuracy of a sampling listener
//               accuracy_overall    accuracy over all held-out games
//               ground_truth_match  share of utterances equal to the minimal
//                                   ground truth
//               well_formed         share of grammatical utterances
//               overmodification    color mention rate on shape_needed games
//                                   (strata shape_needed, red-circle,
//                                   non-red-circle)
//               uncertainty         per word, color-words and shape-words
//               applicability_circle, applicability_circle_gap
//               selected_validation_loss, selected_validation_accuracy
//   value       the metric value
//   denominator number of games (or referents) the value averages over

#ifndef OVERMOD_EXPERIMENTS_EXPERIMENTS_HPP_
#define OVERMOD_EXPERIMENTS_EXPERIMENTS_HPP_

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "overmod/agents/agents.hpp"

namespace overmod::experiments {

using scene::ReferenceGame;
using scene::Utterance;

inline constexpr std::size_t kFullScaleGames = 75000;
inline constexpr std::size_t kFullScaleTrainGames = 55000;
inline constexpr std::size_t kNumSubsets = 11;
inline constexpr std::size_t kMaxEnsembleSize = kNumSubsets - 2;

struct ExperimentConfig {
  int id = 1;
  double scale = 0.1;
  std::vector<std::uint64_t> seeds{1, 2, 3};
  std::size_t ensemble_size = 3;
  nn::EncoderConfig encoder;
  std::size_t epochs = 30;
  std::size_t batch_size = 32;
  double semantic_learning_rate = 0.001;
  double speaker_learning_rate = agents::kLiteralSpeakerLearningRate;
  double validation_fraction = 0.1;
  double cost = agents::kDefaultCost;

  // Throws ConfigError on an unknown id, a scale outside (0, 1], no seeds,
  // an ensemble size outside [1, 9] or bad training settings.
  void validate() const;
  std::size_t total_games() const;
  std::size_t train_games() const;
  // Environments run by this experiment, the uniform contrast last.
  std::vector<scene::EnvironmentConfig> environments() const;
};

nlohmann::json to_json(const ExperimentConfig& cfg);
ExperimentConfig experiment_config_from_json(const nlohmann::json& j);

struct SubsetPlan {
  std::array<std::vector<std::uint64_t>, kNumSubsets> subsets;  // game ids, sorted
  std::array<std::string, kNumSubsets> roles;
};

// Seeded permutation of the training ids sliced into 11 equal parts: the
// literal speaker's, the eval listener's, then one per ensemble member.
// Throws InputError unless the count is a positive multiple of 11.
SubsetPlan plan_subsets(std::span<const std::uint64_t> train_ids, std::uint64_t seed);

struct Rate {
  std::size_t hits = 0;
  std::size_t total = 0;
  double value() const { return total == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(total); }
};

using SpeakerFn = std::function<Utterance(const ReferenceGame&)>;
// Semantic values of `u` on the three referents of a game.
using ListenerFn = std::function<agents::Values(const Utterance&, const ReferenceGame&)>;
// Semantic value of `u` on one referent of a game.
using ValueFn = std::function<double(const Utterance&, const ReferenceGame&, std::size_t)>;

// Games where the listener's choice for the speaker's utterance is the
// target. Throws InputError on no games.
Rate communication_accuracy(const SpeakerFn& speaker, const ListenerFn& listener,
                            std::span<const ReferenceGame> games);
// Games whose utterance contains a color word. Throws InputError on a game
// outside the shape_needed condition.
Rate overmodification_rate(const SpeakerFn& speaker, std::span<const ReferenceGame> games);

// The utterance probing a content word: [shape] for a shape word and
// [color, "shape"] for a color word. Throws InputError otherwise.
Utterance probe_utterance(scene::Token feature);
// Mean over every referent of |value - truth| for the feature's probe
// utterance; returns the mean and the referent count.
std::pair<double, std::size_t> feature_uncertainty(const ValueFn& value,
                                                   std::span<const ReferenceGame> games,
                                                   scene::Token feature);

struct Cell {
  double mean = 0.0;
  std::size_t count = 0;
};
// Mean value of the bare shape word over referents of that shape, per
// color. Colors without such referents are absent.
std::map<scene::Color, Cell> applicability_profile(const ValueFn& value, scene::Shape shape,
                                                   std::span<const ReferenceGame> games);

struct ReportRow {
  int experiment = 0;
  std::uint64_t seed = 0;
  std::string speaker;
  std::string condition;
  std::string metric;
  double value = 0.0;
  std::size_t denominator = 0;
};

struct Aggregate {
  std::string speaker;
  std::string condition;
  std::string metric;
  std::vector<double> values;  // in seed order
  double mean = 0.0;
  std::optional<double> ci95;  // 1.96 * sd / sqrt(n), only with >= 2 seeds
};

struct Failure {
  std::string stage;
  std::string environment;
  std::uint64_t seed = 0;
  std::string message;
};

struct MetricsReport {
  ExperimentConfig config;
  std::vector<ReportRow> rows;
  std::vector<Aggregate> aggregates;
  std::optional<Failure> failure;

  // Mean over seeds for one (speaker, condition, metric); nullopt if absent.
  std::optional<double> mean(const std::string& speaker, const std::string& condition,
                             const std::string& metric) const;
};

std::vector<Aggregate> aggregate(std::span<const ReportRow> rows);

std::string report_csv(std::span<const ReportRow> rows);
nlohmann::json to_json(const MetricsReport& report);
MetricsReport metrics_report_from_json(const nlohmann::json& j);

// SVG figures for the report: file name -> document.
std::map<std::string, std::string> render_figures(const MetricsReport& report);

// Writes report.csv, metrics.json and the SVG figures into `dir`.
void write_report(const MetricsReport& report, const std::filesystem::path& dir);

// Progress lines go here; nullptr silences them.
using LogFn = std::function<void(const std::string&)>;

struct RunOptions {
  // Trained models and per-run metrics are cached under this directory and
  // reused when the configuration fingerprint matches. Defaults to
  // <workdir>/runs.
  std::optional<std::filesystem::path> cache_dir;
  LogFn log;
};

// Runs every (environment, seed) of the experiment, writes the report into
// `workdir` and returns it. Stage failures are caught: the report then
// holds the rows computed so far plus the failure, and a FAILED marker file
// is written next to it.
MetricsReport run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& workdir,
                             const RunOptions& options = {});

}  // namespace overmod::experiments

#endif  // OVERMOD_EXPERIMENTS_EXPERIMENTS_HPP_
