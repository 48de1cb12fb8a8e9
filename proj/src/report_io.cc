// src/report_io.cc
//
// Copyright 2026 The sastnet authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//
// JSON persistence and plain-text rendering for evaluation reports, condition
// grids, correlation results, and the ablation table. Keys serialize sorted,
// so identical runs write byte-identical reports.

#include "sastnet/evaluation.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

namespace sastnet {

namespace {

using nlohmann::json;

json report_to_json(const EvalReport& r) {
  json conf = json::array();
  for (Index i = 0; i < r.confusion.rows(); ++i) {
    json row = json::array();
    for (Index j = 0; j < r.confusion.cols(); ++j) row.push_back(r.confusion(i, j));
    conf.push_back(std::move(row));
  }
  json sources = json::object();
  for (const auto& [key, stat] : r.per_source)
    sources[key] = json{{"count", stat.count}, {"f1", stat.f1}};
  return json{{"task", to_string(r.task)},
              {"macro_f1", r.macro_f1},
              {"per_class_f1", r.per_class_f1},
              {"confusion", std::move(conf)},
              {"per_source", std::move(sources)},
              {"conditions", r.conditions},
              {"n_items", r.n_items}};
}

EvalReport report_from_json(const json& j) {
  EvalReport r;
  r.task = parse_task(j.at("task").get<std::string>());
  j.at("macro_f1").get_to(r.macro_f1);
  j.at("per_class_f1").get_to(r.per_class_f1);
  const json& conf = j.at("confusion");
  const auto n = static_cast<Index>(conf.size());
  r.confusion = CountMatrix::Zero(n, n);
  for (Index i = 0; i < n; ++i) {
    const json& row = conf.at(static_cast<std::size_t>(i));
    if (static_cast<Index>(row.size()) != n)
      throw IoError("report: confusion matrix is not square");
    for (Index jj = 0; jj < n; ++jj)
      r.confusion(i, jj) = row.at(static_cast<std::size_t>(jj)).get<long long>();
  }
  for (const auto& [key, stat] : j.at("per_source").items())
    r.per_source[key] = {stat.at("count").get<long long>(),
                         stat.at("f1").get<double>()};
  j.at("conditions").get_to(r.conditions);
  j.at("n_items").get_to(r.n_items);
  return r;
}

json grid_to_json(const ConditionGrid& g) {
  json j{{"seen_with", report_to_json(g.seen_with)},
         {"seen_without", report_to_json(g.seen_without)},
         {"unseen_with", report_to_json(g.unseen_with)},
         {"unseen_without", report_to_json(g.unseen_without)},
         {"has_unseen_codec", g.has_unseen_codec},
         {"silence_delta_seen", g.silence_delta_seen},
         {"silence_delta_unseen", g.silence_delta_unseen}};
  if (g.has_unseen_codec) j["unseen_codec"] = report_to_json(g.unseen_codec);
  return j;
}

ConditionGrid grid_from_json(const json& j) {
  ConditionGrid g;
  g.seen_with = report_from_json(j.at("seen_with"));
  g.seen_without = report_from_json(j.at("seen_without"));
  g.unseen_with = report_from_json(j.at("unseen_with"));
  g.unseen_without = report_from_json(j.at("unseen_without"));
  j.at("has_unseen_codec").get_to(g.has_unseen_codec);
  if (g.has_unseen_codec) g.unseen_codec = report_from_json(j.at("unseen_codec"));
  j.at("silence_delta_seen").get_to(g.silence_delta_seen);
  j.at("silence_delta_unseen").get_to(g.silence_delta_unseen);
  return g;
}

std::string dump_sorted(const json& j) { return j.dump(2) + "\n"; }

json parse_or_throw(const std::string& text, const char* what) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw IoError(std::string(what) + ": invalid JSON: " + e.what());
  }
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot write: " + path);
  os << text;
  if (!os) throw IoError("failed writing: " + path);
}

std::string read_text(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open: " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

std::string fmt3(double v) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(3) << v;
  return os.str();
}

}  // namespace

std::string eval_report_to_json(const EvalReport& report) {
  return dump_sorted(report_to_json(report));
}

EvalReport eval_report_from_json(const std::string& text) {
  try {
    return report_from_json(parse_or_throw(text, "report"));
  } catch (const json::exception& e) {
    throw IoError(std::string("report: bad field: ") + e.what());
  }
}

void save_eval_report(const EvalReport& report, const std::string& path) {
  write_text(path, eval_report_to_json(report));
}

EvalReport load_eval_report(const std::string& path) {
  return eval_report_from_json(read_text(path));
}

std::string condition_grid_to_json(const ConditionGrid& grid) {
  return dump_sorted(grid_to_json(grid));
}

ConditionGrid condition_grid_from_json(const std::string& text) {
  try {
    return grid_from_json(parse_or_throw(text, "condition grid"));
  } catch (const json::exception& e) {
    throw IoError(std::string("condition grid: bad field: ") + e.what());
  }
}

void save_condition_grid(const ConditionGrid& grid, const std::string& path) {
  write_text(path, condition_grid_to_json(grid));
}

ConditionGrid load_condition_grid(const std::string& path) {
  return condition_grid_from_json(read_text(path));
}

std::string render_condition_grid(const ConditionGrid& grid) {
  std::ostringstream os;
  os << "condition grid (macro-F1)\n"
     << "                 with       without    delta\n"
     << "  seen content   " << fmt3(grid.seen_with.macro_f1) << "      "
     << fmt3(grid.seen_without.macro_f1) << "      "
     << fmt3(grid.silence_delta_seen) << "\n"
     << "  unseen content " << fmt3(grid.unseen_with.macro_f1) << "      "
     << fmt3(grid.unseen_without.macro_f1) << "      "
     << fmt3(grid.silence_delta_unseen) << "\n";
  if (grid.has_unseen_codec)
    os << "  unseen codec   " << fmt3(grid.unseen_codec.macro_f1)
       << "  (with silence)\n";
  return os.str();
}

std::string correlation_to_json(const CorrelationResult& r) {
  json pairs = json::array();
  for (const auto& [x, y] : r.pairs) pairs.push_back(json::array({x, y}));
  return dump_sorted(json{{"coefficient", r.coefficient},
                          {"n_points", r.n_points},
                          {"method", r.method},
                          {"pairs", std::move(pairs)}});
}

CorrelationResult correlation_from_json(const std::string& text) {
  const json j = parse_or_throw(text, "correlation");
  try {
    CorrelationResult r;
    j.at("coefficient").get_to(r.coefficient);
    j.at("n_points").get_to(r.n_points);
    j.at("method").get_to(r.method);
    for (const auto& p : j.at("pairs"))
      r.pairs.emplace_back(p.at(0).get<double>(), p.at(1).get<double>());
    return r;
  } catch (const json::exception& e) {
    throw IoError(std::string("correlation: bad field: ") + e.what());
  }
}

std::string ablation_to_json(const std::vector<AblationRow>& rows) {
  json arr = json::array();
  for (const auto& row : rows)
    arr.push_back(json{{"variant", to_string(row.variant)},
                       {"checkpoint", row.checkpoint_path},
                       {"grid", grid_to_json(row.grid)}});
  return dump_sorted(arr);
}

std::vector<AblationRow> ablation_from_json(const std::string& text) {
  const json arr = parse_or_throw(text, "ablation");
  try {
    std::vector<AblationRow> rows;
    for (const auto& j : arr) {
      AblationRow row;
      row.variant = parse_variant(j.at("variant").get<std::string>());
      row.checkpoint_path = j.at("checkpoint").get<std::string>();
      row.grid = grid_from_json(j.at("grid"));
      rows.push_back(std::move(row));
    }
    return rows;
  } catch (const json::exception& e) {
    throw IoError(std::string("ablation: bad field: ") + e.what());
  }
}

void save_ablation(const std::vector<AblationRow>& rows,
                   const std::string& path) {
  write_text(path, ablation_to_json(rows));
}

std::vector<AblationRow> load_ablation(const std::string& path) {
  return ablation_from_json(read_text(path));
}

std::string render_ablation_table(const std::vector<AblationRow>& rows) {
  std::ostringstream os;
  os << "variant      seen/with  seen/wo    uns/with   uns/wo     uns-codec\n";
  for (const auto& row : rows) {
    std::string name = to_string(row.variant);
    name.resize(12, ' ');
    os << name << " " << fmt3(row.grid.seen_with.macro_f1) << "      "
       << fmt3(row.grid.seen_without.macro_f1) << "      "
       << fmt3(row.grid.unseen_with.macro_f1) << "      "
       << fmt3(row.grid.unseen_without.macro_f1) << "      "
       << (row.grid.has_unseen_codec ? fmt3(row.grid.unseen_codec.macro_f1)
                                     : std::string("  n/a"))
       << "\n";
  }
  return os.str();
}

}  // namespace sastnet
