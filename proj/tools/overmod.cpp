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

// overmod: dataset generation, training, evaluation, experiments, reports.
//
// Exit codes: 0 success, 1 usage error, 2 runtime failure.

#include <omp.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "overmod/agents/agents.hpp"
#include "overmod/error.hpp"
#include "overmod/experiments/experiments.hpp"
#include "overmod/nn/checkpoint.hpp"
#include "overmod/scene/dataset.hpp"
#include "overmod/util/io.hpp"

namespace {

using namespace overmod;
namespace fs = std::filesystem;

constexpr int kUsageError = 1;
constexpr int kRuntimeError = 2;

// Errors in flag values found after parsing.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string quote(const std::string& s) {
  if (!s.empty() && s.find_first_of(" \t\"'\\$") == std::string::npos) return s;
  std::string out = "'";
  for (char c : s) out += c == '\'' ? std::string("'\\''") : std::string(1, c);
  return out + "'";
}

// Prints the resolved configuration as an equivalent command line.
void echo(const std::string& sub, const std::vector<std::pair<std::string, std::string>>& flags) {
  std::string line = "overmod " + sub;
  for (const auto& [k, v] : flags) line += " --" + k + " " + quote(v);
  std::cout << "config: " << line << "\n" << std::flush;
}

std::string num(double v) { return util::format_double(v); }

void set_jobs(int jobs) {
  if (jobs < 0) throw UsageError("--jobs must be non-negative");
  if (jobs > 0) omp_set_num_threads(jobs);
}

// ---------------------------------------------------------------- gen

struct GenArgs {
  std::string env = "uniform";
  std::size_t num_games = 1000;
  std::uint64_t seed = 0;
  std::string out;
  int jobs = 0;
};

int run_gen(const GenArgs& a) {
  scene::EnvironmentConfig env;
  try {
    env = scene::EnvironmentConfig::preset(a.env);
  } catch (const InputError& e) {
    throw UsageError(e.what());
  }
  if (a.num_games < scene::kNumConditions) throw UsageError("--num-games must be at least 4");
  set_jobs(a.jobs);
  echo("gen", {{"env", a.env},
               {"num-games", std::to_string(a.num_games)},
               {"seed", std::to_string(a.seed)},
               {"out", a.out},
               {"jobs", std::to_string(a.jobs)}});

  const auto data = scene::generate_dataset(env, a.num_games, a.seed, a.out);
  std::cout << "games: " << data.games.size() << "\n";
  const auto counts = data.condition_counts();
  for (std::size_t c = 0; c < scene::kNumConditions; ++c) {
    std::cout << "condition " << scene::condition_name(scene::kAllConditions[c]) << ": " << counts[c] << "\n";
  }
  std::map<scene::Color, std::size_t> colors;
  std::map<scene::Shape, std::size_t> shapes;
  std::size_t circles = 0, red_circles = 0;
  for (const auto& g : data.games) {
    const auto& t = g.target().spec;
    colors[t.color] += 1;
    shapes[t.shape] += 1;
    if (t.shape == scene::Shape::kCircle) {
      circles += 1;
      red_circles += t.color == scene::Color::kRed ? 1 : 0;
    }
  }
  for (auto c : scene::kAllColors) std::cout << "target color " << scene::color_name(c) << ": " << colors[c] << "\n";
  for (auto s : scene::kAllShapes) std::cout << "target shape " << scene::shape_name(s) << ": " << shapes[s] << "\n";
  const double share = circles == 0 ? 0.0 : static_cast<double>(red_circles) / static_cast<double>(circles);
  std::cout << "red-circle-target share: " << num(share) << " (" << red_circles << "/" << circles << ")\n";
  return 0;
}

// ---------------------------------------------------------------- train

struct TrainArgs {
  std::string role = "semantic";
  std::string data;
  std::optional<std::size_t> subset_index;
  std::size_t d = 64;
  std::size_t epochs = 30;
  std::optional<double> lr;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
  std::string out;
  int jobs = 0;
};

// Training portion of a standalone dataset, split like an experiment: the
// first 55/75 of the games, rounded down to a multiple of 11.
std::vector<std::uint64_t> training_ids(std::size_t num_games) {
  const std::size_t train =
      num_games * experiments::kFullScaleTrainGames / experiments::kFullScaleGames / experiments::kNumSubsets *
      experiments::kNumSubsets;
  std::vector<std::uint64_t> ids(train);
  for (std::size_t i = 0; i < train; ++i) ids[i] = i;
  return ids;
}

int run_train(const TrainArgs& a) {
  if (a.role != "semantic" && a.role != "literal-speaker") {
    throw UsageError("--role must be semantic or literal-speaker");
  }
  if (a.subset_index && *a.subset_index >= experiments::kNumSubsets) {
    throw UsageError("--subset-index must lie in [0, 10]");
  }
  nn::EncoderConfig config;
  config.embed_dim = a.d;
  semantics::TrainingHyperparams h;
  h.epochs = a.epochs;
  h.batch_size = a.batch_size;
  h.learning_rate = a.lr.value_or(a.role == "semantic" ? 0.001 : agents::kLiteralSpeakerLearningRate);
  h.seed = a.seed;
  try {
    config.validate();
    h.validate();
  } catch (const ConfigError& e) {
    throw UsageError(e.what());
  }
  set_jobs(a.jobs);
  std::vector<std::pair<std::string, std::string>> flags = {{"role", a.role}, {"data", a.data}};
  if (a.subset_index) flags.push_back({"subset-index", std::to_string(*a.subset_index)});
  flags.insert(flags.end(), {{"d", std::to_string(a.d)},
                             {"epochs", std::to_string(a.epochs)},
                             {"lr", num(h.learning_rate)},
                             {"batch-size", std::to_string(a.batch_size)},
                             {"seed", std::to_string(a.seed)},
                             {"out", a.out},
                             {"jobs", std::to_string(a.jobs)}});
  echo("train", flags);

  const auto data = scene::load_dataset(a.data);
  std::vector<std::uint64_t> ids;
  if (a.subset_index) {
    const auto plan = experiments::plan_subsets(training_ids(data.games.size()), data.seed);
    ids = plan.subsets[*a.subset_index];
  } else {
    ids = training_ids(data.games.size());
    if (ids.empty()) ids.resize(data.games.size());
    for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = i;
  }
  std::vector<scene::ReferenceGame> games;
  for (auto id : ids) games.push_back(data.games[id]);
  std::cout << "training on " << games.size() << " games\n" << std::flush;

  const fs::path out(a.out);
  fs::path log_path = out;
  log_path.replace_extension(".log.csv");
  if (out.has_parent_path()) util::ensure_directory(out.parent_path());
  if (a.role == "semantic") {
    auto r = semantics::train_semantic_function(games, h, config);
    auto meta = r.model.checkpoint_metadata("semantic");
    meta["selected_epoch"] = std::to_string(r.selected_epoch);
    nn::save_checkpoint(out, r.model.params(), meta);
    util::write_file_atomic(log_path, semantics::training_log_csv(r.log, false));
    std::cout << "selected epoch " << r.selected_epoch << ": validation BCE " << num(r.model.validation_loss())
              << "\n";
  } else {
    auto r = agents::train_literal_speaker(games, h, config);
    auto meta = r.speaker.checkpoint_metadata();
    meta["selected_epoch"] = std::to_string(r.selected_epoch);
    nn::save_checkpoint(out, r.speaker.params(), meta);
    util::write_file_atomic(log_path, semantics::training_log_csv(r.log, true));
    std::cout << "selected epoch " << r.selected_epoch << ": validation exact match "
              << num(r.speaker.validation_accuracy()) << "\n";
  }
  std::cout << "wrote " << out.string() << " and " << log_path.string() << "\n";
  return 0;
}

// ---------------------------------------------------------------- eval

struct EvalArgs {
  std::string data;
  std::string listener;
  std::string speaker = "ground-truth";
  std::vector<std::string> models;
  double cost = agents::kDefaultCost;
  int jobs = 0;
};

int run_eval(const EvalArgs& a) {
  if (a.speaker != "ground-truth" && a.speaker != "literal" && a.speaker != "rsa") {
    throw UsageError("--speaker must be ground-truth, literal or rsa");
  }
  if (a.speaker == "literal" && a.models.size() != 1) throw UsageError("--speaker literal takes one --model");
  if (a.speaker == "rsa" && a.models.empty()) throw UsageError("--speaker rsa takes one --model per member");
  if (a.speaker == "ground-truth" && !a.models.empty()) throw UsageError("--speaker ground-truth takes no --model");
  if (!(a.cost >= 0.0)) throw UsageError("--cost must be non-negative");
  set_jobs(a.jobs);
  std::vector<std::pair<std::string, std::string>> flags = {
      {"data", a.data}, {"listener", a.listener}, {"speaker", a.speaker}};
  for (const auto& m : a.models) flags.push_back({"model", m});
  flags.push_back({"cost", num(a.cost)});
  flags.push_back({"jobs", std::to_string(a.jobs)});
  echo("eval", flags);

  const auto data = scene::load_dataset(a.data);
  const auto listener = semantics::SemanticModel::from_checkpoint(nn::load_checkpoint(a.listener));
  const auto listen_tables = agents::semantic_tables(listener, data.games);

  std::vector<scene::Utterance> said(data.games.size());
  if (a.speaker == "ground-truth") {
    for (std::size_t i = 0; i < said.size(); ++i) said[i] = data.games[i].ground_truth;
  } else if (a.speaker == "literal") {
    said = agents::LiteralSpeaker::from_checkpoint(nn::load_checkpoint(a.models[0])).speak_all(data.games);
  } else {
    std::vector<semantics::SemanticModel> members;
    for (const auto& m : a.models) members.push_back(semantics::SemanticModel::from_checkpoint(nn::load_checkpoint(m)));
    const auto tables = agents::ensemble_tables(semantics::Ensemble(std::move(members)), data.games);
    for (std::size_t i = 0; i < said.size(); ++i) said[i] = agents::rsa_speak(tables[i], data.games[i].target_index, a.cost);
  }

  experiments::SpeakerFn speak = [&](const scene::ReferenceGame& g) { return said[g.id]; };
  experiments::ListenerFn listen = [&](const scene::Utterance& u, const scene::ReferenceGame& g) {
    // Utterances outside the 35-utterance space never occur for the
    // ground-truth and RSA speakers; the literal speaker's are scored
    // directly.
    if (u.is_valid()) return listen_tables[g.id][scene::utterance_index(u)];
    agents::Values v{};
    if (u.length() == 0) return agents::Values{0.5, 0.5, 0.5};
    for (std::size_t r = 0; r < scene::kNumReferents; ++r) {
      v[r] = semantics::semantic_value(listener, u, g.referents[r].image);
    }
    return v;
  };
  for (auto c : scene::kAllConditions) {
    std::vector<scene::ReferenceGame> games;
    for (const auto& g : data.games) {
      if (g.condition == c) games.push_back(g);
    }
    if (games.empty()) continue;
    const auto r = experiments::communication_accuracy(speak, listen, games);
    std::cout << "accuracy " << scene::condition_name(c) << ": " << num(r.value()) << " (" << r.hits << "/"
              << r.total << ")\n";
    if (c == scene::ContextCondition::kShapeNeeded) {
      const auto o = experiments::overmodification_rate(speak, games);
      std::cout << "overmodification shape_needed: " << num(o.value()) << " (" << o.hits << "/" << o.total << ")\n";
    }
  }
  const auto all = experiments::communication_accuracy(speak, listen, data.games);
  std::cout << "accuracy all: " << num(all.value()) << " (" << all.hits << "/" << all.total << ")\n";
  return 0;
}

// ---------------------------------------------------------------- experiment

struct ExperimentArgs {
  int id = 1;
  double scale = 0.1;
  std::size_t seeds = 3;
  std::size_t n = 3;
  std::size_t d = 64;
  std::size_t epochs = 30;
  std::string out;
  std::string cache;
  double cost = agents::kDefaultCost;
  int jobs = 0;
};

int run_experiment_cmd(const ExperimentArgs& a) {
  experiments::ExperimentConfig cfg;
  cfg.id = a.id;
  cfg.scale = a.scale;
  cfg.seeds.clear();
  for (std::size_t s = 1; s <= a.seeds; ++s) cfg.seeds.push_back(s);
  cfg.ensemble_size = a.n;
  cfg.encoder.embed_dim = a.d;
  cfg.epochs = a.epochs;
  cfg.cost = a.cost;
  try {
    cfg.validate();
  } catch (const ConfigError& e) {
    throw UsageError(e.what());
  }
  set_jobs(a.jobs);
  std::vector<std::pair<std::string, std::string>> flags = {{"id", std::to_string(a.id)},
                                                            {"scale", num(a.scale)},
                                                            {"seeds", std::to_string(a.seeds)},
                                                            {"n", std::to_string(a.n)},
                                                            {"d", std::to_string(a.d)},
                                                            {"epochs", std::to_string(a.epochs)},
                                                            {"cost", num(a.cost)},
                                                            {"out", a.out}};
  if (!a.cache.empty()) flags.push_back({"cache", a.cache});
  flags.push_back({"jobs", std::to_string(a.jobs)});
  echo("experiment", flags);

  experiments::RunOptions opts;
  if (!a.cache.empty()) opts.cache_dir = fs::path(a.cache);
  opts.log = [](const std::string& line) { std::cerr << line << std::endl; };
  const auto report = experiments::run_experiment(cfg, a.out, opts);
  std::cout << "wrote report to " << a.out << " (" << report.rows.size() << " rows)\n";
  for (const auto& agg : report.aggregates) {
    if (agg.metric != "accuracy_overall" && agg.metric != "overmodification") continue;
    std::cout << agg.speaker << " " << agg.condition << " " << agg.metric << ": " << num(agg.mean);
    if (agg.ci95) std::cout << " +/- " << num(*agg.ci95);
    std::cout << "\n";
  }
  if (report.failure) {
    const auto& f = *report.failure;
    std::cerr << "error: stage '" << f.stage << "' failed for " << f.environment << " seed " << f.seed << ": "
              << f.message << "\npartial results and a FAILED marker are in " << a.out << "\n";
    return kRuntimeError;
  }
  return 0;
}

// ---------------------------------------------------------------- report

struct ReportArgs {
  std::string in;
  std::string format = "csv";
  std::string out;
};

int run_report(const ReportArgs& a) {
  if (a.format != "csv" && a.format != "json" && a.format != "svg") {
    throw UsageError("--format must be csv, json or svg");
  }
  std::vector<std::pair<std::string, std::string>> flags = {{"in", a.in}, {"format", a.format}};
  if (!a.out.empty()) flags.push_back({"out", a.out});
  // The echo goes to stderr here: stdout carries the artifact.
  std::string cmd = "overmod report";
  for (const auto& [k, v] : flags) cmd += " --" + k + " " + quote(v);
  std::cerr << "config: " << cmd << "\n";

  const fs::path metrics = fs::path(a.in) / "metrics.json";
  if (!fs::exists(metrics)) throw IoError("no metrics.json in " + a.in);
  const auto report = experiments::metrics_report_from_json(nlohmann::json::parse(util::read_file(metrics)));

  if (a.format == "svg") {
    const fs::path dir = a.out.empty() ? fs::path(a.in) : fs::path(a.out);
    util::ensure_directory(dir);
    for (const auto& [name, svg] : experiments::render_figures(report)) {
      util::write_file_atomic(dir / name, svg);
      std::cout << (dir / name).string() << "\n";
    }
    return 0;
  }
  const std::string text =
      a.format == "csv" ? experiments::report_csv(report.rows) : experiments::to_json(report).dump(2) + "\n";
  if (a.out.empty()) {
    std::cout << text << std::flush;
  } else {
    util::write_file_atomic(a.out, text);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"overmod: reference games, RSA and literal speakers, overmodification experiments"};
  app.require_subcommand(1);
  app.allow_extras(false);

  GenArgs gen;
  auto* g = app.add_subcommand("gen", "Generate a dataset of reference games");
  g->add_option("--env", gen.env, "uniform | typicality | low-salience")->capture_default_str();
  g->add_option("--num-games", gen.num_games, "Number of games")->capture_default_str();
  g->add_option("--seed", gen.seed, "Dataset seed")->capture_default_str();
  g->add_option("--out", gen.out, "Output directory")->required();
  g->add_option("--jobs", gen.jobs, "Worker threads (0: OpenMP default)")->capture_default_str();

  TrainArgs train;
  auto* t = app.add_subcommand("train", "Train a semantic function or a literal speaker");
  t->add_option("--role", train.role, "semantic | literal-speaker")->capture_default_str();
  t->add_option("--data", train.data, "Dataset directory")->required();
  t->add_option("--subset-index", train.subset_index,
                "Train on one of the 11 training subsets (default: the whole training portion)");
  t->add_option("--d", train.d, "Embedding dimension")->capture_default_str();
  t->add_option("--epochs", train.epochs, "Epochs")->capture_default_str();
  t->add_option("--lr", train.lr, "Adam learning rate (default 0.001)");
  t->add_option("--batch-size", train.batch_size, "Batch size")->capture_default_str();
  t->add_option("--seed", train.seed, "Initialization and shuffling seed")->capture_default_str();
  t->add_option("--out", train.out, "Checkpoint path; the log goes next to it")->required();
  t->add_option("--jobs", train.jobs, "Worker threads (0: OpenMP default)")->capture_default_str();

  EvalArgs eval;
  auto* e = app.add_subcommand("eval", "Communication accuracy of a speaker against an eval listener");
  e->add_option("--data", eval.data, "Dataset directory")->required();
  e->add_option("--listener", eval.listener, "Semantic checkpoint of the eval listener")->required();
  e->add_option("--speaker", eval.speaker, "ground-truth | literal | rsa")->capture_default_str();
  e->add_option("--model", eval.models, "Literal speaker checkpoint, or one per RSA ensemble member");
  e->add_option("--cost", eval.cost, "RSA length cost weight")->capture_default_str();
  e->add_option("--jobs", eval.jobs, "Worker threads (0: OpenMP default)")->capture_default_str();

  ExperimentArgs exp;
  auto* x = app.add_subcommand("experiment", "Run experiment 1, 2 or 3 end to end");
  x->add_option("--id", exp.id, "Experiment id")->capture_default_str();
  x->add_option("--scale", exp.scale, "Fraction of the 75,000 games")->capture_default_str();
  x->add_option("--seeds", exp.seeds, "Number of seeds (1..k)")->capture_default_str();
  x->add_option("--n", exp.n, "RSA ensemble size")->capture_default_str();
  x->add_option("--d", exp.d, "Embedding dimension")->capture_default_str();
  x->add_option("--epochs", exp.epochs, "Epochs per model")->capture_default_str();
  x->add_option("--cost", exp.cost, "RSA length cost weight")->capture_default_str();
  x->add_option("--out", exp.out, "Output directory")->required();
  x->add_option("--cache", exp.cache, "Model cache directory (default <out>/runs)");
  x->add_option("--jobs", exp.jobs, "Worker threads (0: OpenMP default)")->capture_default_str();

  ReportArgs rep;
  auto* r = app.add_subcommand("report", "Re-render an experiment's report without recomputation");
  r->add_option("--in", rep.in, "Experiment output directory")->required();
  r->add_option("--format", rep.format, "csv | json | svg")->capture_default_str();
  r->add_option("--out", rep.out, "Output file (csv, json) or directory (svg)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& err) {
    return app.exit(err);
  } catch (const CLI::ParseError& err) {
    app.exit(err);
    return kUsageError;
  }

  try {
    if (*g) return run_gen(gen);
    if (*t) return run_train(train);
    if (*e) return run_eval(eval);
    if (*x) return run_experiment_cmd(exp);
    if (*r) return run_report(rep);
  } catch (const UsageError& err) {
    std::cerr << "error: " << err.what() << "\n\n" << app.get_subcommands().front()->help();
    return kUsageError;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kRuntimeError;
  }
  return kUsageError;
}
