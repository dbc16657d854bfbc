#include "sos/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "sos/common.hpp"
#include "sos/csv.hpp"

namespace sos {

double average_precision_voc07(const RankedList& list) {
  if (list.total_positives < 1)
    throw SchemaError("average precision needs at least one positive");
  int64_t present = 0;
  for (const auto& it : list.items) {
    if (!std::isfinite(it.score))
      throw SchemaError("non-finite score in ranked list");
    if (it.relevant) ++present;
  }
  if (present > list.total_positives)
    throw SchemaError("ranked list holds more relevant items than total_positives");

  std::vector<size_t> order(list.items.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    return list.items[a].score > list.items[b].score;
  });

  // precision/recall at each relevant rank; the interpolated maximum for any
  // threshold is always attained at one of these points
  std::vector<std::pair<double, double>> pr;
  int64_t tp = 0;
  for (size_t i = 0; i < order.size(); ++i) {
    if (list.items[order[i]].relevant) {
      ++tp;
      pr.emplace_back(double(tp) / double(list.total_positives),
                      double(tp) / double(i + 1));
    }
  }
  double sum = 0.0;
  for (int t = 0; t <= 10; ++t) {
    double thresh = t / 10.0;
    double best = 0.0;
    for (const auto& [recall, precision] : pr)
      if (recall >= thresh) best = std::max(best, precision);
    sum += best;
  }
  return sum / 11.0;
}

PerClassAp map_per_class(const std::vector<ScoreVector>& scores,
                         const std::vector<CountLabel>& labels) {
  if (scores.size() != labels.size())
    throw SchemaError("score/label count mismatch");
  if (scores.empty()) throw SchemaError("no scored images");
  PerClassAp out;
  double sum = 0.0;
  int defined = 0;
  for (int c = 0; c < kNumClasses; ++c) {
    RankedList list;
    list.items.reserve(scores.size());
    for (size_t i = 0; i < scores.size(); ++i) {
      list.items.push_back({scores[i][c], label_index(labels[i]) == c});
      if (label_index(labels[i]) == c) ++list.total_positives;
    }
    if (list.total_positives == 0) {
      out.defined[c] = false;
      out.warnings.push_back("class " + label_to_string(label_from_index(c)) +
                             " has no positives; skipped in the mean");
      continue;
    }
    out.ap[c] = average_precision_voc07(list);
    out.defined[c] = true;
    sum += out.ap[c];
    ++defined;
  }
  if (defined == 0) throw SchemaError("no class has positives");
  out.mean = sum / defined;
  return out;
}

PerClassAp chance_baseline(const std::vector<CountLabel>& labels, int trials,
                           uint64_t seed) {
  if (labels.empty()) throw SchemaError("no labels for the chance baseline");
  if (trials < 1) throw SchemaError("chance baseline needs at least one trial");
  Rng rng(seed);
  std::array<double, kNumClasses> acc{};
  std::array<bool, kNumClasses> defined{};
  std::vector<std::string> warnings;
  std::vector<ScoreVector> scores(labels.size());
  for (int t = 0; t < trials; ++t) {
    for (auto& s : scores)
      for (int c = 0; c < kNumClasses; ++c) s[c] = rng.uniform01();
    PerClassAp trial = map_per_class(scores, labels);
    for (int c = 0; c < kNumClasses; ++c) {
      if (trial.defined[c]) acc[c] += trial.ap[c];
      defined[c] = trial.defined[c];
    }
    if (t == 0) warnings = trial.warnings;
  }
  PerClassAp out;
  out.warnings = warnings;
  double sum = 0.0;
  int n_def = 0;
  for (int c = 0; c < kNumClasses; ++c) {
    out.defined[c] = defined[c];
    if (defined[c]) {
      out.ap[c] = acc[c] / trials;
      sum += out.ap[c];
      ++n_def;
    }
  }
  out.mean = sum / n_def;
  return out;
}

std::array<double, kNumClasses> ConfusionMatrix::per_class_recall() const {
  std::array<double, kNumClasses> out{};
  for (int r = 0; r < kNumClasses; ++r) {
    int64_t row = 0;
    for (int c = 0; c < kNumClasses; ++c) row += counts[r][c];
    out[r] = row > 0 ? double(counts[r][r]) / double(row) : 0.0;
  }
  return out;
}

std::array<std::array<double, kNumClasses>, kNumClasses>
ConfusionMatrix::row_normalized() const {
  std::array<std::array<double, kNumClasses>, kNumClasses> out{};
  for (int r = 0; r < kNumClasses; ++r) {
    int64_t row = 0;
    for (int c = 0; c < kNumClasses; ++c) row += counts[r][c];
    if (row == 0) continue;
    for (int c = 0; c < kNumClasses; ++c)
      out[r][c] = double(counts[r][c]) / double(row);
  }
  return out;
}

ConfusionMatrix confusion(const std::vector<ScoreVector>& scores,
                          const std::vector<CountLabel>& labels) {
  if (scores.size() != labels.size())
    throw SchemaError("score/label count mismatch");
  ConfusionMatrix cm;
  for (size_t i = 0; i < scores.size(); ++i) {
    int pred = 0;
    for (int c = 1; c < kNumClasses; ++c)
      if (scores[i][c] > scores[i][pred]) pred = c;
    ++cm.counts[label_index(labels[i])][pred];
  }
  return cm;
}

void write_eval_report(const std::string& path, const PerClassAp& ap,
                       const ConfusionMatrix& cm) {
  std::vector<CsvRow> rows;
  rows.push_back({"section", "row", "zero", "one", "two", "three", "fourplus",
                  "mean"});
  CsvRow ap_row = {"ap", ""};
  for (int c = 0; c < kNumClasses; ++c)
    ap_row.push_back(ap.defined[c] ? format_double(ap.ap[c]) : "");
  ap_row.push_back(format_double(ap.mean));
  rows.push_back(ap_row);
  for (int r = 0; r < kNumClasses; ++r) {
    CsvRow row = {"confusion", std::to_string(r)};
    for (int c = 0; c < kNumClasses; ++c)
      row.push_back(std::to_string(cm.counts[r][c]));
    row.push_back("");
    rows.push_back(row);
  }
  auto norm = cm.row_normalized();
  for (int r = 0; r < kNumClasses; ++r) {
    CsvRow row = {"confusion_pct", std::to_string(r)};
    for (int c = 0; c < kNumClasses; ++c)
      row.push_back(format_double(norm[r][c] * 100.0));
    row.push_back("");
    rows.push_back(row);
  }
  write_csv(path, rows);
}

}  // namespace sos
