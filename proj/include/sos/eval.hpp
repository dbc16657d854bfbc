#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "sos/data.hpp"

namespace sos {

using ScoreVector = std::array<double, kNumClasses>;

struct RankedItem {
  double score = 0.0;
  bool relevant = false;
};

// A scored ranking plus the true positive total, which may exceed the number
// of relevant items present when the list was truncated upstream.
struct RankedList {
  std::vector<RankedItem> items;
  int64_t total_positives = 0;
};

// VOC07 11-point interpolated AP: mean over r in {0, 0.1, ..., 1.0} of the
// maximum precision at recall >= r. Ties in score keep input order.
double average_precision_voc07(const RankedList& list);

struct PerClassAp {
  std::array<double, kNumClasses> ap{};
  std::array<bool, kNumClasses> defined{};
  double mean = 0.0;
  std::vector<std::string> warnings;
};

// One-vs-rest AP per count class; the mean skips classes without positives.
PerClassAp map_per_class(const std::vector<ScoreVector>& scores,
                         const std::vector<CountLabel>& labels);

// Uniform random scores, averaged over trials. Deterministic under seed.
PerClassAp chance_baseline(const std::vector<CountLabel>& labels, int trials,
                           uint64_t seed);

struct ConfusionMatrix {
  int64_t counts[kNumClasses][kNumClasses] = {};

  std::array<double, kNumClasses> per_class_recall() const;
  // rows sum to 1; all-zero rows stay zero
  std::array<std::array<double, kNumClasses>, kNumClasses> row_normalized() const;
};

// Prediction is the argmax score; the lowest index wins exact ties.
ConfusionMatrix confusion(const std::vector<ScoreVector>& scores,
                          const std::vector<CountLabel>& labels);

// CSV report: per-class AP row, confusion counts, row-normalized percentages.
void write_eval_report(const std::string& path, const PerClassAp& ap,
                       const ConfusionMatrix& cm);

}  // namespace sos
