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
#include <cstdio>
#include <tuple>

#include "overmod/error.hpp"
#include "overmod/experiments/experiments.hpp"
#include "overmod/util/io.hpp"

namespace overmod::experiments {

std::optional<double> MetricsReport::mean(const std::string& speaker, const std::string& condition,
                                          const std::string& metric) const {
  for (const auto& a : aggregates) {
    if (a.speaker == speaker && a.condition == condition && a.metric == metric) return a.mean;
  }
  return std::nullopt;
}

std::vector<Aggregate> aggregate(std::span<const ReportRow> rows) {
  std::vector<Aggregate> out;
  std::map<std::tuple<std::string, std::string, std::string>, std::size_t> index;
  for (const auto& r : rows) {
    const auto key = std::make_tuple(r.speaker, r.condition, r.metric);
    auto it = index.find(key);
    if (it == index.end()) {
      it = index.emplace(key, out.size()).first;
      out.push_back({r.speaker, r.condition, r.metric, {}, 0.0, std::nullopt});
    }
    out[it->second].values.push_back(r.value);
  }
  for (auto& a : out) {
    const double n = static_cast<double>(a.values.size());
    double sum = 0.0;
    for (double v : a.values) sum += v;
    a.mean = sum / n;
    if (a.values.size() >= 2) {
      double ss = 0.0;
      for (double v : a.values) ss += (v - a.mean) * (v - a.mean);
      a.ci95 = 1.96 * std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
    }
  }
  return out;
}

std::string report_csv(std::span<const ReportRow> rows) {
  std::string out = "experiment,seed,speaker,condition,metric,value,denominator\n";
  for (const auto& r : rows) {
    out += std::to_string(r.experiment) + "," + std::to_string(r.seed) + "," + r.speaker + "," +
           r.condition + "," + r.metric + "," + util::format_double(r.value) + "," +
           std::to_string(r.denominator) + "\n";
  }
  return out;
}

nlohmann::json to_json(const MetricsReport& report) {
  nlohmann::json j;
  j["config"] = to_json(report.config);
  j["status"] = report.failure ? "partial" : "complete";
  j["rows"] = nlohmann::json::array();
  for (const auto& r : report.rows) {
    j["rows"].push_back({{"experiment", r.experiment},
                         {"seed", r.seed},
                         {"speaker", r.speaker},
                         {"condition", r.condition},
                         {"metric", r.metric},
                         {"value", r.value},
                         {"denominator", r.denominator}});
  }
  j["aggregates"] = nlohmann::json::array();
  for (const auto& a : report.aggregates) {
    nlohmann::json e = {{"speaker", a.speaker},
                        {"condition", a.condition},
                        {"metric", a.metric},
                        {"values", a.values},
                        {"mean", a.mean},
                        {"seeds", a.values.size()}};
    e["ci95"] = a.ci95 ? nlohmann::json(*a.ci95) : nlohmann::json(nullptr);
    j["aggregates"].push_back(e);
  }
  if (report.failure) {
    j["failure"] = {{"stage", report.failure->stage},
                    {"environment", report.failure->environment},
                    {"seed", report.failure->seed},
                    {"message", report.failure->message}};
  }
  return j;
}

MetricsReport metrics_report_from_json(const nlohmann::json& j) {
  MetricsReport report;
  try {
    report.config = experiment_config_from_json(j.at("config"));
    for (const auto& r : j.at("rows")) {
      report.rows.push_back({r.at("experiment").get<int>(), r.at("seed").get<std::uint64_t>(),
                             r.at("speaker").get<std::string>(),
                             r.at("condition").get<std::string>(),
                             r.at("metric").get<std::string>(), r.at("value").get<double>(),
                             r.at("denominator").get<std::size_t>()});
    }
    if (j.contains("failure")) {
      const auto& f = j.at("failure");
      report.failure = Failure{f.at("stage").get<std::string>(),
                               f.at("environment").get<std::string>(),
                               f.at("seed").get<std::uint64_t>(),
                               f.at("message").get<std::string>()};
    }
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("malformed metrics.json: ") + e.what());
  }
  report.aggregates = aggregate(report.rows);
  return report;
}

namespace {

struct Bar {
  std::string label;
  double value = 0.0;
  std::optional<double> ci;
  bool present = true;
};

struct BarGroup {
  std::string label;
  std::vector<Bar> bars;
};

constexpr const char* kBarColors[] = {"#4878a8", "#e0803c", "#5a9e5a", "#c44e52",
                                      "#8172b2", "#937860", "#808080"};

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

// Grouped bar chart with 95% CI whiskers, y axis from 0 to y_max.
std::string bar_chart(const std::string& title, const std::string& y_label,
                      const std::vector<BarGroup>& groups, double y_max) {
  const double left = 70, top = 50, plot_h = 260, bar_w = 28, gap = 36;
  std::size_t n_bars = 0;
  for (const auto& g : groups) n_bars += g.bars.size();
  const double plot_w = static_cast<double>(n_bars) * bar_w + static_cast<double>(groups.size() + 1) * gap;
  const double width = left + plot_w + 30, height = top + plot_h + 110;
  auto y_of = [&](double v) { return top + plot_h * (1.0 - std::clamp(v / y_max, 0.0, 1.0)); };

  std::string s = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" + fmt(width) +
       "\" height=\"" + fmt(height) + "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s += "<text x=\"" + fmt(width / 2) + "\" y=\"24\" text-anchor=\"middle\" font-size=\"14\">" +
       escape(title) + "</text>\n";
  s += "<text transform=\"translate(18," + fmt(top + plot_h / 2) +
       ") rotate(-90)\" text-anchor=\"middle\">" + escape(y_label) + "</text>\n";
  for (int t = 0; t <= 4; ++t) {
    const double v = y_max * t / 4.0;
    const double y = y_of(v);
    s += "<line x1=\"" + fmt(left) + "\" y1=\"" + fmt(y) + "\" x2=\"" + fmt(left + plot_w) +
         "\" y2=\"" + fmt(y) + "\" stroke=\"#dddddd\"/>\n";
    s += "<text x=\"" + fmt(left - 6) + "\" y=\"" + fmt(y + 4) + "\" text-anchor=\"end\">" +
         fmt(v) + "</text>\n";
  }
  s += "<line x1=\"" + fmt(left) + "\" y1=\"" + fmt(top + plot_h) + "\" x2=\"" +
       fmt(left + plot_w) + "\" y2=\"" + fmt(top + plot_h) + "\" stroke=\"black\"/>\n";

  double x = left + gap;
  for (const auto& g : groups) {
    const double group_start = x;
    for (std::size_t i = 0; i < g.bars.size(); ++i) {
      const Bar& b = g.bars[i];
      const double cx = x + bar_w / 2;
      if (b.present) {
        const double y = y_of(b.value);
        s += "<rect x=\"" + fmt(x) + "\" y=\"" + fmt(y) + "\" width=\"" + fmt(bar_w) +
             "\" height=\"" + fmt(top + plot_h - y) + "\" fill=\"" +
             kBarColors[i % std::size(kBarColors)] + "\"><title>" + escape(b.label) + ": " +
             util::format_double(b.value) + "</title></rect>\n";
        if (b.ci) {
          const double y1 = y_of(b.value - *b.ci), y2 = y_of(b.value + *b.ci);
          s += "<line x1=\"" + fmt(cx) + "\" y1=\"" + fmt(y1) + "\" x2=\"" + fmt(cx) + "\" y2=\"" +
               fmt(y2) + "\" stroke=\"black\"/>\n";
          for (double yy : {y1, y2}) {
            s += "<line x1=\"" + fmt(cx - 6) + "\" y1=\"" + fmt(yy) + "\" x2=\"" + fmt(cx + 6) +
                 "\" y2=\"" + fmt(yy) + "\" stroke=\"black\"/>\n";
          }
        }
      }
      s += "<text transform=\"translate(" + fmt(cx + 4) + "," + fmt(top + plot_h + 8) +
           ") rotate(60)\">" + escape(b.label) + "</text>\n";
      x += bar_w;
    }
    s += "<text x=\"" + fmt((group_start + x) / 2) + "\" y=\"" + fmt(top + plot_h + 95) +
         "\" text-anchor=\"middle\" font-weight=\"bold\">" + escape(g.label) + "</text>\n";
    x += gap;
  }
  s += "</svg>\n";
  return s;
}

class FigureBuilder {
 public:
  explicit FigureBuilder(const MetricsReport& r) : report_(r) {}

  Bar bar(const std::string& label, const std::string& speaker, const std::string& condition,
          const std::string& metric) const {
    for (const auto& a : report_.aggregates) {
      if (a.speaker == speaker && a.condition == condition && a.metric == metric) {
        return {label, a.mean, a.ci95, true};
      }
    }
    return {label, 0.0, std::nullopt, false};
  }

 private:
  const MetricsReport& report_;
};

const char* kSpeakers[] = {"literal", "rsa"};

}  // namespace

std::map<std::string, std::string> render_figures(const MetricsReport& report) {
  std::map<std::string, std::string> out;
  FigureBuilder fb(report);
  const auto envs = report.config.environments();
  const std::string main_env = envs.front().name();

  {
    std::vector<BarGroup> groups;
    for (auto c : scene::kAllConditions) {
      BarGroup g{std::string(scene::condition_name(c)), {}};
      for (const char* sp : kSpeakers) {
        g.bars.push_back(fb.bar(sp, sp, main_env + "/" + std::string(scene::condition_name(c)), "accuracy"));
      }
      groups.push_back(g);
    }
    out["accuracy.svg"] = bar_chart("Communication accuracy (" + main_env + ")", "accuracy", groups, 1.0);
  }

  switch (report.config.id) {
    case 1: {
      BarGroup g{"shape_needed", {}};
      for (const char* sp : kSpeakers) g.bars.push_back(fb.bar(sp, sp, "uniform/shape_needed", "overmodification"));
      out["overmodification.svg"] = bar_chart("Color overmodification (uniform)", "rate", {g}, 1.0);
      break;
    }
    case 2: {
      for (const auto& env : envs) {
        std::vector<BarGroup> groups;
        for (const char* sp : kSpeakers) {
          groups.push_back({sp,
                            {fb.bar("red", sp, env.name() + "/red-circle", "overmodification"),
                             fb.bar("non-red", sp, env.name() + "/non-red-circle", "overmodification")}});
        }
        out["overmodification_" + env.name() + ".svg"] = bar_chart(
            "Overmodification on circle targets (" + env.name() + " training)", "rate", groups, 1.0);
      }
      std::vector<BarGroup> groups;
      for (const auto& env : envs) {
        BarGroup g{env.name(), {}};
        for (auto c : scene::kAllColors) {
          const std::string color(scene::color_name(c));
          g.bars.push_back(fb.bar(color, "rsa-ensemble", env.name() + "/" + color, "applicability_circle"));
        }
        groups.push_back(g);
      }
      out["applicability_circle.svg"] =
          bar_chart("Applicability of \"circle\" by color", "mean semantic value", groups, 1.0);
      break;
    }
    case 3: {
      std::vector<BarGroup> groups;
      for (const char* sp : kSpeakers) {
        BarGroup g{sp, {}};
        for (auto it = envs.rbegin(); it != envs.rend(); ++it) {
          const std::string label = it->name() == "uniform" ? "high salience" : "low salience";
          g.bars.push_back(fb.bar(label, sp, it->name() + "/shape_needed", "overmodification"));
        }
        groups.push_back(g);
      }
      out["overmodification_salience.svg"] =
          bar_chart("Color overmodification by salience", "rate", groups, 1.0);
      std::vector<BarGroup> ugroups;
      for (const char* words : {"color-words", "shape-words"}) {
        BarGroup g{words, {}};
        for (auto it = envs.rbegin(); it != envs.rend(); ++it) {
          const std::string label = it->name() == "uniform" ? "high salience" : "low salience";
          g.bars.push_back(fb.bar(label, "rsa-ensemble", it->name() + "/" + words, "uncertainty"));
        }
        ugroups.push_back(g);
      }
      out["uncertainty.svg"] = bar_chart("Semantic uncertainty by salience", "mean |L - truth|", ugroups, 0.5);
      break;
    }
    default:
      break;
  }
  return out;
}

namespace {

// feature,<env>...: the uncertainty seed means, one column per environment.
std::string uncertainty_table(const MetricsReport& report) {
  const auto envs = report.config.environments();
  std::string out = "feature";
  for (const auto& e : envs) out += "," + e.name();
  out += "\n";
  std::vector<std::string> features;
  for (auto c : scene::kAllColors) features.emplace_back(scene::color_name(c));
  for (auto s : scene::kAllShapes) features.emplace_back(scene::shape_name(s));
  features.emplace_back("color-words");
  features.emplace_back("shape-words");
  for (const auto& f : features) {
    out += f;
    for (const auto& e : envs) {
      const auto m = report.mean("rsa-ensemble", e.name() + "/" + f, "uncertainty");
      out += "," + (m ? util::format_double(*m) : std::string());
    }
    out += "\n";
  }
  return out;
}

}  // namespace

void write_report(const MetricsReport& report, const std::filesystem::path& dir) {
  util::ensure_directory(dir);
  util::write_file_atomic(dir / "report.csv", report_csv(report.rows));
  util::write_file_atomic(dir / "metrics.json", to_json(report).dump(2) + "\n");
  for (const auto& [name, svg] : render_figures(report)) util::write_file_atomic(dir / name, svg);
  if (report.config.id == 3) util::write_file_atomic(dir / "uncertainty_table.csv", uncertainty_table(report));
}

}  // namespace overmod::experiments
