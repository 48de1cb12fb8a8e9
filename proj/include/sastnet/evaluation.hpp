// sastnet/evaluation.hpp
//
// Copyright 2026 The sastnet authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.
//
// Metrics and evaluation harness: macro-F1 with the zero rule, confusion
// counts, silence/F1 correlation over per-source groups, and the condition
// grid that crosses {with, without silence} x {seen, unseen content} plus the
// held-out-codec cell. Evaluation is read-only with respect to the model;
// utterances are independent, so the loop could be parallelized, but the desk
// scale runs it sequentially.

#ifndef SASTNET_EVALUATION_HPP_
#define SASTNET_EVALUATION_HPP_

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "sastnet/audio.hpp"
#include "sastnet/corpus.hpp"
#include "sastnet/model.hpp"

namespace sastnet {

using CountMatrix = Eigen::Matrix<long long, Eigen::Dynamic, Eigen::Dynamic>;

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

namespace detail {

struct ClassCounts {
  std::vector<long long> tp, fp, fn;
};

inline ClassCounts class_counts(const std::vector<int>& preds,
                                const std::vector<int>& truths, int n_classes) {
  if (preds.size() != truths.size())
    throw ContractError("metrics: prediction/truth length mismatch");
  if (n_classes < 2) throw ContractError("metrics: need at least two classes");
  ClassCounts c;
  c.tp.assign(static_cast<std::size_t>(n_classes), 0);
  c.fp.assign(static_cast<std::size_t>(n_classes), 0);
  c.fn.assign(static_cast<std::size_t>(n_classes), 0);
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const int p = preds[i], t = truths[i];
    if (p < 0 || p >= n_classes || t < 0 || t >= n_classes)
      throw ContractError("metrics: label out of range");
    if (p == t) {
      ++c.tp[static_cast<std::size_t>(p)];
    } else {
      ++c.fp[static_cast<std::size_t>(p)];
      ++c.fn[static_cast<std::size_t>(t)];
    }
  }
  return c;
}

}  // namespace detail

// Per-class F1 with the zero rule: a class nobody predicted and nobody owns
// (precision + recall = 0, i.e. no true positives) scores 0 and still counts
// in the mean. With true positives present, 2PR/(P+R) reduces to the
// count form 2tp/(2tp+fp+fn), which avoids intermediate rounding.
inline std::vector<double> per_class_f1(const std::vector<int>& preds,
                                        const std::vector<int>& truths,
                                        int n_classes) {
  const detail::ClassCounts c = detail::class_counts(preds, truths, n_classes);
  std::vector<double> f1(static_cast<std::size_t>(n_classes), 0.0);
  for (std::size_t k = 0; k < f1.size(); ++k) {
    if (c.tp[k] == 0) continue;  // P + R = 0 exactly when tp = 0
    f1[k] = 2.0 * static_cast<double>(c.tp[k]) /
            static_cast<double>(2 * c.tp[k] + c.fp[k] + c.fn[k]);
  }
  return f1;
}

// Unweighted mean of the per-class F1 scores over all task classes.
inline double macro_f1(const std::vector<int>& preds,
                       const std::vector<int>& truths, int n_classes) {
  const std::vector<double> f1 = per_class_f1(preds, truths, n_classes);
  return std::accumulate(f1.begin(), f1.end(), 0.0) /
         static_cast<double>(n_classes);
}

// counts[true][pred]; row sums equal the per-class true counts.
inline CountMatrix confusion(const std::vector<int>& preds,
                             const std::vector<int>& truths, int n_classes) {
  if (preds.size() != truths.size())
    throw ContractError("confusion: prediction/truth length mismatch");
  if (n_classes < 2) throw ContractError("confusion: need at least two classes");
  CountMatrix m = CountMatrix::Zero(n_classes, n_classes);
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const int p = preds[i], t = truths[i];
    if (p < 0 || p >= n_classes || t < 0 || t >= n_classes)
      throw ContractError("confusion: label out of range");
    ++m(t, p);
  }
  return m;
}

// ---------------------------------------------------------------------------
// Silence/performance correlation over per-source groups
// ---------------------------------------------------------------------------

struct SilenceGroup {
  std::string source_id;        // codec profile id, or "bonafide"
  double silence_proportion = 0.0;
  double f1 = 0.0;
};

struct CorrelationResult {
  double coefficient = 0.0;  // in [-1, 1]
  int n_points = 0;
  std::vector<std::pair<double, double>> pairs;  // (silence_proportion, f1)
  std::string method = "pearson";                // or "spearman"
};

// Pearson product-moment coefficient with population denominators:
// rho = cov(x, y) / (sigma_x * sigma_y).
inline double pearson(const std::vector<double>& xs,
                      const std::vector<double>& ys) {
  if (xs.size() != ys.size()) throw ContractError("pearson: length mismatch");
  const auto n = static_cast<double>(xs.size());
  if (xs.size() < 2) throw ContractError("pearson: need at least two points");
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double cov = 0.0, vx = 0.0, vy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dx = xs[i] - mx, dy = ys[i] - my;
    cov += dx * dy;
    vx += dx * dx;
    vy += dy * dy;
  }
  cov /= n;
  vx /= n;
  vy /= n;
  if (vx == 0.0 || vy == 0.0) throw ContractError("degenerate correlation");
  return cov / (std::sqrt(vx) * std::sqrt(vy));
}

// Average ranks (ties share the mean of their rank range), 1-based.
inline std::vector<double> average_ranks(const std::vector<double>& v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size(), 0.0);
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double shared = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = shared;
    i = j + 1;
  }
  return ranks;
}

// Correlates per-source silence proportion with per-source F1. Pearson by
// default; `rank` switches to Spearman (Pearson over average ranks), tagged
// in the result so reports state which coefficient they carry.
inline CorrelationResult silence_f1_correlation(
    const std::vector<SilenceGroup>& groups, bool rank = false) {
  if (groups.size() < 3)
    throw ContractError("silence_f1_correlation: need at least 3 groups, got " +
                        std::to_string(groups.size()));
  std::vector<double> xs, ys;
  CorrelationResult out;
  xs.reserve(groups.size());
  ys.reserve(groups.size());
  for (const auto& g : groups) {
    xs.push_back(g.silence_proportion);
    ys.push_back(g.f1);
    out.pairs.emplace_back(g.silence_proportion, g.f1);
  }
  if (rank) {
    xs = average_ranks(xs);
    ys = average_ranks(ys);
    out.method = "spearman";
  }
  out.coefficient = pearson(xs, ys);
  out.n_points = static_cast<int>(groups.size());
  return out;
}

// Silence fraction a record was generated with: leading plus trailing
// silence over the whole duration.
inline double record_silence_proportion(const UtteranceRecord& r) {
  const double total = r.silence_head + r.silence_tail + r.voiced_seconds;
  if (total <= 0.0) throw ContractError("record has no duration");
  return (r.silence_head + r.silence_tail) / total;
}

inline std::string source_key(const UtteranceRecord& r) {
  return r.profile_id.empty() ? std::string("bonafide") : r.profile_id;
}

// Groups evaluated records by source (codec profile), averaging the silence
// proportion and scoring macro-F1 within each group.
inline std::vector<SilenceGroup> silence_groups_by_source(
    const std::vector<UtteranceRecord>& records, const std::vector<int>& preds,
    Task task) {
  if (records.size() != preds.size())
    throw ContractError("silence groups: record/prediction length mismatch");
  std::map<std::string, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < records.size(); ++i)
    members[source_key(records[i])].push_back(i);
  std::vector<SilenceGroup> out;
  for (const auto& [key, idx] : members) {
    SilenceGroup g;
    g.source_id = key;
    std::vector<int> p, t;
    for (std::size_t i : idx) {
      g.silence_proportion += record_silence_proportion(records[i]);
      p.push_back(preds[i]);
      t.push_back(records[i].label.index_for(task));
    }
    g.silence_proportion /= static_cast<double>(idx.size());
    g.f1 = macro_f1(p, t, n_classes(task));
    out.push_back(std::move(g));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Evaluation reports
// ---------------------------------------------------------------------------

struct EvalReport {
  Task task = Task::kAux;
  double macro_f1 = 0.0;
  std::vector<double> per_class_f1;
  CountMatrix confusion;
  struct SourceStat {
    long long count = 0;
    double f1 = 0.0;
  };
  std::map<std::string, SourceStat> per_source;
  // Condition tags, e.g. {"silence": "with", "content": "seen"}; the
  // held-out-codec cell adds {"codec": "unseen"}.
  std::map<std::string, std::string> conditions;
  int n_items = 0;
};

// Scores one record set. "Without silence" trims leading/trailing silence
// before inference; a recording the trimmer empties entirely falls back to
// its untrimmed form so the cell stays defined. Read-only on the model's
// parameters. `preds_out` receives per-record predictions aligned with
// `records` for downstream grouping.
inline EvalReport evaluate_records(
    Model& model, const SemanticBackbone* semantic, const CorpusManifest& io,
    const std::vector<UtteranceRecord>& records, bool without_silence,
    std::map<std::string, std::string> conditions,
    std::vector<int>* preds_out = nullptr) {
  if (records.empty()) throw ContractError("evaluate: empty record set");
  const Task task = model.config().task;
  const int classes = n_classes(task);
  std::vector<int> preds, truths;
  preds.reserve(records.size());
  truths.reserve(records.size());
  for (const auto& rec : records) {
    Waveform w = load_record_audio(io, rec);
    if (without_silence) {
      const Waveform trimmed = trim_silence(w, SilenceConfig{});
      if (trimmed.size() > 0) w = trimmed;
    }
    preds.push_back(infer(model, semantic, w).label);
    truths.push_back(rec.label.index_for(task));
  }

  EvalReport report;
  report.task = task;
  report.per_class_f1 = sastnet::per_class_f1(preds, truths, classes);
  report.macro_f1 = std::accumulate(report.per_class_f1.begin(),
                                    report.per_class_f1.end(), 0.0) /
                    static_cast<double>(classes);
  report.confusion = sastnet::confusion(preds, truths, classes);
  report.conditions = std::move(conditions);
  report.n_items = static_cast<int>(records.size());

  std::map<std::string, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < records.size(); ++i)
    members[source_key(records[i])].push_back(i);
  for (const auto& [key, idx] : members) {
    std::vector<int> p, t;
    for (std::size_t i : idx) {
      p.push_back(preds[i]);
      t.push_back(truths[i]);
    }
    report.per_source[key] = {static_cast<long long>(idx.size()),
                              macro_f1(p, t, classes)};
  }
  if (preds_out) *preds_out = std::move(preds);
  return report;
}

inline EvalReport evaluate(Model& model, const SemanticBackbone* semantic,
                           const CorpusManifest& part, bool without_silence,
                           std::map<std::string, std::string> conditions,
                           std::vector<int>* preds_out = nullptr) {
  return evaluate_records(model, semantic, part, part.records, without_silence,
                          std::move(conditions), preds_out);
}

// ---------------------------------------------------------------------------
// Condition grid: {with, without silence} x {seen, unseen content}, plus the
// held-out-codec cell (held-out spoofs composed with unseen bona fide
// records so the cell is multi-class).
// ---------------------------------------------------------------------------

struct ConditionGrid {
  EvalReport seen_with, seen_without;
  EvalReport unseen_with, unseen_without;
  bool has_unseen_codec = false;
  EvalReport unseen_codec;
  double silence_delta_seen = 0.0;    // with - without, seen content
  double silence_delta_unseen = 0.0;  // with - without, unseen content
};

inline ConditionGrid run_condition_grid(Model& model,
                                        const SemanticBackbone* semantic,
                                        const CorpusManifest& manifest) {
  const SplitView split =
      split_seen_unseen(manifest, manifest.config.id_threshold());
  ConditionGrid grid;
  grid.seen_with = evaluate(model, semantic, split.test_seen, false,
                            {{"silence", "with"}, {"content", "seen"}});
  grid.seen_without = evaluate(model, semantic, split.test_seen, true,
                               {{"silence", "without"}, {"content", "seen"}});
  grid.unseen_with = evaluate(model, semantic, split.test_unseen, false,
                              {{"silence", "with"}, {"content", "unseen"}});
  grid.unseen_without =
      evaluate(model, semantic, split.test_unseen, true,
               {{"silence", "without"}, {"content", "unseen"}});
  grid.silence_delta_seen =
      grid.seen_with.macro_f1 - grid.seen_without.macro_f1;
  grid.silence_delta_unseen =
      grid.unseen_with.macro_f1 - grid.unseen_without.macro_f1;

  std::vector<UtteranceRecord> held_out = unseen_codec_records(manifest);
  if (!held_out.empty()) {
    for (const auto& rec : split.test_unseen.records)
      if (rec.profile_id.empty()) held_out.push_back(rec);
    grid.unseen_codec = evaluate_records(
        model, semantic, manifest, held_out, false,
        {{"silence", "with"}, {"content", "seen"}, {"codec", "unseen"}});
    grid.has_unseen_codec = true;
  }
  return grid;
}

// ---------------------------------------------------------------------------
// Report persistence and rendering (implemented in report_io.cc). JSON output
// uses sorted keys, so byte-identical reruns produce byte-identical reports.
// ---------------------------------------------------------------------------

std::string eval_report_to_json(const EvalReport& report);
EvalReport eval_report_from_json(const std::string& text);
void save_eval_report(const EvalReport& report, const std::string& path);
EvalReport load_eval_report(const std::string& path);

std::string condition_grid_to_json(const ConditionGrid& grid);
ConditionGrid condition_grid_from_json(const std::string& text);
void save_condition_grid(const ConditionGrid& grid, const std::string& path);
ConditionGrid load_condition_grid(const std::string& path);
std::string render_condition_grid(const ConditionGrid& grid);

std::string correlation_to_json(const CorrelationResult& r);
CorrelationResult correlation_from_json(const std::string& text);

// One ablation-matrix row: a trained variant and its condition grid.
struct AblationRow {
  Variant variant = Variant::kBaseline;
  ConditionGrid grid;
  std::string checkpoint_path;
};

std::string ablation_to_json(const std::vector<AblationRow>& rows);
std::vector<AblationRow> ablation_from_json(const std::string& text);
void save_ablation(const std::vector<AblationRow>& rows,
                   const std::string& path);
std::vector<AblationRow> load_ablation(const std::string& path);
std::string render_ablation_table(const std::vector<AblationRow>& rows);

}  // namespace sastnet

#endif  // SASTNET_EVALUATION_HPP_
