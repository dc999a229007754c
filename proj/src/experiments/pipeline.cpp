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
#include <chrono>
#include <cstdio>
#include <set>

#include "overmod/error.hpp"
#include "overmod/experiments/experiments.hpp"
#include "overmod/nn/checkpoint.hpp"
#include "overmod/scene/dataset.hpp"
#include "overmod/util/io.hpp"

namespace overmod::experiments {
namespace {

using scene::ContextCondition;

constexpr int kRunFormat = 1;

std::string hex(std::uint64_t v) {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

// Seeds of the pieces of one run, all derived from the run seed. The
// dataset seed does not depend on the environment, so the environments of
// an experiment share their scene layouts.
std::uint64_t dataset_seed(std::uint64_t seed) { return util::derive_seed(seed, {0x64617461ull}); }
std::uint64_t plan_seed(std::uint64_t seed) { return util::derive_seed(seed, {0x706c616eull}); }
std::uint64_t model_seed(std::uint64_t seed, std::size_t subset) {
  return util::derive_seed(seed, {0x6d6f64656cull, subset});
}

class Run {
 public:
  Run(const ExperimentConfig& cfg, const scene::EnvironmentConfig& env, std::uint64_t seed,
      std::filesystem::path dir, const LogFn& log, std::string& stage)
      : cfg_(cfg), env_(env), seed_(seed), dir_(std::move(dir)), log_(log), stage_(stage) {}

  std::vector<ReportRow> execute();

 private:
  nlohmann::json base_fingerprint() const;
  std::string model_fingerprint(std::size_t subset) const;
  std::string run_fingerprint() const;
  void say(const std::string& msg) const;
  void add(const std::string& speaker, const std::string& stratum, const std::string& metric,
           double value, std::size_t denominator);
  void add(const std::string& speaker, const std::string& stratum, const std::string& metric,
           const Rate& r);

  std::vector<ReferenceGame> subset_games(std::size_t subset) const;
  semantics::SemanticModel semantic_model(std::size_t subset);
  agents::LiteralSpeaker literal_speaker();
  void evaluate(const agents::LiteralSpeaker& literal, const agents::EvalListener& listener,
                const semantics::Ensemble& ensemble);

  const ExperimentConfig& cfg_;
  scene::EnvironmentConfig env_;
  std::uint64_t seed_;
  std::filesystem::path dir_;
  const LogFn& log_;
  std::string& stage_;

  scene::Dataset data_;
  SubsetPlan plan_;
  std::span<const ReferenceGame> eval_;
  std::vector<ReportRow> rows_;
};

void Run::say(const std::string& msg) const {
  if (log_) log_("[" + env_.name() + " seed " + std::to_string(seed_) + "] " + msg);
}

nlohmann::json Run::base_fingerprint() const {
  return {{"format", kRunFormat},
          {"environment", scene::to_json(data_.env)},
          {"seed", seed_},
          {"total_games", cfg_.total_games()},
          {"train_games", cfg_.train_games()},
          {"encoder", nn::to_json(cfg_.encoder)},
          {"epochs", cfg_.epochs},
          {"batch_size", cfg_.batch_size},
          {"validation_fraction", cfg_.validation_fraction}};
}

std::string Run::model_fingerprint(std::size_t subset) const {
  auto j = base_fingerprint();
  j["subset"] = subset;
  j["learning_rate"] = subset == 0 ? cfg_.speaker_learning_rate : cfg_.semantic_learning_rate;
  return hex(util::fnv1a(j.dump()));
}

std::string Run::run_fingerprint() const {
  auto j = base_fingerprint();
  j["ensemble_size"] = cfg_.ensemble_size;
  j["semantic_learning_rate"] = cfg_.semantic_learning_rate;
  j["speaker_learning_rate"] = cfg_.speaker_learning_rate;
  j["cost"] = cfg_.cost;
  return hex(util::fnv1a(j.dump()));
}

void Run::add(const std::string& speaker, const std::string& stratum, const std::string& metric,
              double value, std::size_t denominator) {
  rows_.push_back({0, seed_, speaker, env_.name() + "/" + stratum, metric, value, denominator});
}

void Run::add(const std::string& speaker, const std::string& stratum, const std::string& metric,
              const Rate& r) {
  if (r.total > 0) add(speaker, stratum, metric, r.value(), r.total);
}

std::vector<ReferenceGame> Run::subset_games(std::size_t subset) const {
  std::vector<ReferenceGame> out;
  out.reserve(plan_.subsets[subset].size());
  for (std::uint64_t id : plan_.subsets[subset]) out.push_back(data_.games[id]);
  return out;
}

semantics::SemanticModel Run::semantic_model(std::size_t subset) {
  const std::string role = plan_.roles[subset];
  const auto path = dir_ / (role + ".ckpt");
  const std::string fp = model_fingerprint(subset);
  if (std::filesystem::exists(path)) {
    auto ckpt = nn::load_checkpoint(path);
    if (ckpt.metadata["fingerprint"] == fp) {
      say("reusing " + role);
      return semantics::SemanticModel::from_checkpoint(ckpt);
    }
  }
  stage_ = "train " + role;
  say("training " + role);
  const auto t0 = std::chrono::steady_clock::now();
  semantics::TrainingHyperparams h;
  h.epochs = cfg_.epochs;
  h.batch_size = cfg_.batch_size;
  h.learning_rate = cfg_.semantic_learning_rate;
  h.validation_fraction = cfg_.validation_fraction;
  h.seed = model_seed(seed_, subset);
  const auto games = subset_games(subset);
  auto result = semantics::train_semantic_function(games, h, cfg_.encoder);
  auto meta = result.model.checkpoint_metadata(role);
  meta["fingerprint"] = fp;
  meta["selected_epoch"] = std::to_string(result.selected_epoch);
  nn::save_checkpoint(path, result.model.params(), meta);
  util::write_file_atomic(dir_ / (role + ".log.csv"), semantics::training_log_csv(result.log, false));
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  say(role + ": validation loss " + util::format_double(result.model.validation_loss()) +
      " at epoch " + std::to_string(result.selected_epoch) + " (" + std::to_string(static_cast<int>(secs)) + " s)");
  return std::move(result.model);
}

agents::LiteralSpeaker Run::literal_speaker() {
  const std::string role = plan_.roles[0];
  const auto path = dir_ / (role + ".ckpt");
  const std::string fp = model_fingerprint(0);
  if (std::filesystem::exists(path)) {
    auto ckpt = nn::load_checkpoint(path);
    if (ckpt.metadata["fingerprint"] == fp) {
      say("reusing " + role);
      return agents::LiteralSpeaker::from_checkpoint(ckpt);
    }
  }
  stage_ = "train " + role;
  say("training " + role);
  const auto t0 = std::chrono::steady_clock::now();
  semantics::TrainingHyperparams h;
  h.epochs = cfg_.epochs;
  h.batch_size = cfg_.batch_size;
  h.learning_rate = cfg_.speaker_learning_rate;
  h.validation_fraction = cfg_.validation_fraction;
  h.seed = model_seed(seed_, 0);
  const auto games = subset_games(0);
  auto result = agents::train_literal_speaker(games, h, cfg_.encoder);
  auto meta = result.speaker.checkpoint_metadata();
  meta["fingerprint"] = fp;
  meta["selected_epoch"] = std::to_string(result.selected_epoch);
  nn::save_checkpoint(path, result.speaker.params(), meta);
  util::write_file_atomic(dir_ / (role + ".log.csv"), semantics::training_log_csv(result.log, true));
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  say(role + ": validation exact match " + util::format_double(result.speaker.validation_accuracy()) +
      " at epoch " + std::to_string(result.selected_epoch) + " (" + std::to_string(static_cast<int>(secs)) + " s)");
  return std::move(result.speaker);
}

void Run::evaluate(const agents::LiteralSpeaker& literal, const agents::EvalListener& listener,
                   const semantics::Ensemble& ensemble) {
  stage_ = "evaluate";
  say("evaluating on " + std::to_string(eval_.size()) + " held-out games");
  const std::uint64_t first_eval = eval_.front().id;
  auto index_of = [&](const ReferenceGame& g) { return static_cast<std::size_t>(g.id - first_eval); };

  // Eval listener: image embeddings once per game, utterance embeddings
  // once per distinct token sequence. The empty sequence keeps the GRU's
  // zero initial state.
  const std::size_t d = cfg_.encoder.embed_dim;
  std::vector<const scene::Image*> images;
  for (const auto& g : eval_) {
    for (const auto& r : g.referents) images.push_back(&r.image);
  }
  const auto f = listener.model.embed_images(images);
  std::map<std::vector<scene::Token>, std::vector<double>> g_cache;
  ListenerFn listen = [&](const Utterance& u, const ReferenceGame& g) {
    auto it = g_cache.find(u.tokens());
    if (it == g_cache.end()) {
      std::vector<double> emb(d, 0.0);
      if (u.length() > 0) emb = listener.model.embed_utterance(u.tokens());
      it = g_cache.emplace(u.tokens(), std::move(emb)).first;
    }
    agents::Values v{};
    const std::size_t base = index_of(g) * scene::kNumReferents * d;
    for (std::size_t k = 0; k < scene::kNumReferents; ++k) {
      v[k] = semantics::score(std::span<const double>(f).subspan(base + k * d, d), it->second);
    }
    return v;
  };

  const auto tables = agents::ensemble_tables(ensemble, eval_);
  std::vector<std::size_t> rsa_choices(eval_.size());
  for (std::size_t i = 0; i < eval_.size(); ++i) {
    rsa_choices[i] = agents::rsa_choice(tables[i], eval_[i].target_index, cfg_.cost);
  }
  const auto literal_said = literal.speak_all(eval_);

  const std::map<std::string, SpeakerFn> speakers = {
      {"ground-truth", [](const ReferenceGame& g) { return g.ground_truth; }},
      {"literal", [&](const ReferenceGame& g) { return literal_said[index_of(g)]; }},
      {"rsa", [&](const ReferenceGame& g) { return scene::utterance_space()[rsa_choices[index_of(g)]]; }},
  };

  for (const char* name : {"ground-truth", "literal", "rsa"}) {
    const SpeakerFn& speak = speakers.at(name);
    std::vector<ReferenceGame> shape_needed, red_circle, other_circle;
    const bool reference = std::string(name) == "ground-truth";
    for (auto c : scene::kAllConditions) {
      std::vector<ReferenceGame> games;
      for (const auto& g : eval_) {
        if (g.condition == c) games.push_back(g);
      }
      if (games.empty()) continue;
      const std::string stratum(scene::condition_name(c));
      if (c == ContextCondition::kShapeNeeded) shape_needed = games;
      if (reference) continue;
      add(name, stratum, "accuracy", communication_accuracy(speak, listen, games));
      double sampled = 0.0;
      for (const auto& g : games) sampled += agents::listener_distribution(listen(speak(g), g))[g.target_index];
      add(name, stratum, "accuracy_sampled", sampled / static_cast<double>(games.size()), games.size());
    }
    add(name, "all", "accuracy_overall", communication_accuracy(speak, listen, eval_));
    Rate exact;
    for (const auto& g : eval_) {
      exact.hits += speak(g) == g.ground_truth ? 1 : 0;
      exact.total += 1;
    }
    add(name, "all", "ground_truth_match", exact);
    if (reference) continue;

    add(name, "shape_needed", "overmodification", overmodification_rate(speak, shape_needed));
    for (const auto& g : shape_needed) {
      const auto& t = g.target().spec;
      if (t.shape != scene::Shape::kCircle) continue;
      (t.color == scene::Color::kRed ? red_circle : other_circle).push_back(g);
    }
    add(name, "red-circle", "overmodification", overmodification_rate(speak, red_circle));
    add(name, "non-red-circle", "overmodification", overmodification_rate(speak, other_circle));
    Rate valid;
    for (const auto& g : eval_) {
      valid.hits += speak(g).is_valid() ? 1 : 0;
      valid.total += 1;
    }
    add(name, "all", "well_formed", valid);
  }

  ValueFn ensemble_value = [&](const Utterance& u, const ReferenceGame& g, std::size_t r) {
    return tables[index_of(g)][scene::utterance_index(u)][r];
  };
  double color_sum = 0.0, shape_sum = 0.0;
  std::size_t referents = 0;
  for (scene::Token t = 0; t < scene::kNumColors + scene::kNumShapes; ++t) {
    const auto [u, n] = feature_uncertainty(ensemble_value, eval_, t);
    add("rsa-ensemble", std::string(scene::token_word(t)), "uncertainty", u, n);
    (scene::is_color_token(t) ? color_sum : shape_sum) += u;
    referents = n;
  }
  add("rsa-ensemble", "color-words", "uncertainty", color_sum / scene::kNumColors, referents);
  add("rsa-ensemble", "shape-words", "uncertainty", shape_sum / scene::kNumShapes, referents);

  const auto profile = applicability_profile(ensemble_value, scene::Shape::kCircle, eval_);
  double other_sum = 0.0;
  std::size_t other_n = 0;
  for (const auto& [color, cell] : profile) {
    add("rsa-ensemble", std::string(scene::color_name(color)), "applicability_circle", cell.mean, cell.count);
    if (color != scene::Color::kRed) {
      other_sum += cell.mean * static_cast<double>(cell.count);
      other_n += cell.count;
    }
  }
  if (other_n > 0) {
    const double other = other_sum / static_cast<double>(other_n);
    add("rsa-ensemble", "non-red", "applicability_circle", other, other_n);
    auto red = profile.find(scene::Color::kRed);
    if (red != profile.end()) {
      add("rsa-ensemble", "red-minus-non-red", "applicability_circle_gap", red->second.mean - other,
          red->second.count + other_n);
    }
  }
}

std::vector<ReportRow> Run::execute() {
  stage_ = "generate";
  const std::size_t total = cfg_.total_games();
  const std::size_t train = cfg_.train_games();
  data_ = scene::generate_games(env_, total, dataset_seed(seed_));
  const std::string fp = run_fingerprint();
  const auto run_file = dir_ / "run.json";
  if (std::filesystem::exists(run_file)) {
    const auto j = nlohmann::json::parse(util::read_file(run_file));
    if (j.value("fingerprint", "") == fp) {
      say("reusing evaluated run");
      for (const auto& r : j.at("rows")) {
        rows_.push_back({0, seed_, r.at("speaker").get<std::string>(), r.at("condition").get<std::string>(),
                         r.at("metric").get<std::string>(), r.at("value").get<double>(),
                         r.at("denominator").get<std::size_t>()});
      }
      return rows_;
    }
  }
  util::ensure_directory(dir_);

  stage_ = "plan";
  std::vector<std::uint64_t> train_ids(train);
  for (std::size_t i = 0; i < train; ++i) train_ids[i] = i;
  plan_ = plan_subsets(train_ids, plan_seed(seed_));
  eval_ = std::span<const ReferenceGame>(data_.games).subspan(train);
  std::set<std::uint64_t> used;
  for (std::size_t s = 0; s < 2 + cfg_.ensemble_size; ++s) used.insert(plan_.subsets[s].begin(), plan_.subsets[s].end());
  for (const auto& g : eval_) {
    if (used.count(g.id) != 0) throw InputError("eval game " + std::to_string(g.id) + " is in a training subset");
  }

  auto literal = literal_speaker();
  agents::EvalListener listener{semantic_model(1)};
  std::vector<semantics::SemanticModel> members;
  for (std::size_t k = 0; k < cfg_.ensemble_size; ++k) members.push_back(semantic_model(2 + k));
  semantics::Ensemble ensemble(std::move(members));

  const std::size_t val_games =
      static_cast<std::size_t>(cfg_.validation_fraction * static_cast<double>(plan_.subsets[0].size()));
  add(agents::kLiteralSpeakerRole, "training", "selected_validation_accuracy",
      literal.validation_accuracy(), val_games);
  add(agents::kEvalListenerRole, "training", "selected_validation_loss", listener.model.validation_loss(),
      val_games);
  for (std::size_t k = 0; k < ensemble.size(); ++k) {
    add(agents::ensemble_member_role(k), "training", "selected_validation_loss",
        ensemble.member(k).validation_loss(), val_games);
  }

  evaluate(literal, listener, ensemble);

  nlohmann::json j;
  j["fingerprint"] = fp;
  j["rows"] = nlohmann::json::array();
  for (const auto& r : rows_) {
    j["rows"].push_back({{"speaker", r.speaker},
                         {"condition", r.condition},
                         {"metric", r.metric},
                         {"value", r.value},
                         {"denominator", r.denominator}});
  }
  util::write_file_atomic(run_file, j.dump(1) + "\n");
  return rows_;
}

}  // namespace

MetricsReport run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& workdir,
                             const RunOptions& options) {
  cfg.validate();
  MetricsReport report;
  report.config = cfg;
  const auto cache = options.cache_dir.value_or(workdir / "runs");
  util::ensure_directory(workdir);
  const auto marker = workdir / "FAILED";
  std::filesystem::remove(marker);

  for (const auto& env : cfg.environments()) {
    for (std::uint64_t seed : cfg.seeds) {
      std::string stage = "start";
      try {
        Run run(cfg, env, seed, cache / env.name() / ("seed-" + std::to_string(seed)), options.log, stage);
        for (auto& row : run.execute()) {
          row.experiment = cfg.id;
          report.rows.push_back(std::move(row));
        }
      } catch (const std::exception& e) {
        report.failure = Failure{stage, env.name(), seed, e.what()};
        break;
      }
    }
    if (report.failure) break;
  }
  report.aggregates = aggregate(report.rows);
  write_report(report, workdir);
  if (report.failure) {
    const auto& f = *report.failure;
    util::write_file_atomic(marker, "stage: " + f.stage + "\nenvironment: " + f.environment +
                                        "\nseed: " + std::to_string(f.seed) + "\nerror: " + f.message + "\n");
  }
  return report;
}

}  // namespace overmod::experiments
