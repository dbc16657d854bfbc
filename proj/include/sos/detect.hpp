#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sos/image.hpp"

namespace sos {

struct DetectionWindow {
  BoundingBox box;
  double score = 0.0;
};

struct ImageDetections {
  std::string image_id;
  std::vector<DetectionWindow> candidates;
  std::vector<BoundingBox> ground_truth;
};

// Intersection area over union area.
double iou(const BoundingBox& a, const BoundingBox& b);

// Keeps the top-min(n, |candidates|) windows by score, ties by input order.
std::vector<DetectionWindow> cue_by_count(const std::vector<DetectionWindow>& candidates,
                                          int64_t n);

struct PrfResult {
  double precision = 1.0;
  double recall = 0.0;
  double f_measure = 0.0;
  int64_t true_positives = 0;
  int64_t detections = 0;
  int64_t ground_truths = 0;
};

double f_measure(double precision, double recall);

// Greedy per-image matching in descending score order; a detection is a true
// positive iff it claims a still-unmatched ground truth at IoU >= threshold
// (the highest-overlap one). Totals are pooled over the whole set. With no
// detections at all, precision is reported as 1 and recall as 0.
PrfResult match_and_score(const std::vector<ImageDetections>& images,
                          double iou_threshold = 0.5);

struct PrCurvePoint {
  double threshold = 0.0;
  PrfResult prf;
};

struct PrCurve {
  std::vector<PrCurvePoint> points;
  double best_threshold = 0.0;  // lowest threshold attaining the best F
  double best_f = 0.0;
};

// Fixed score-threshold baseline: keep windows scoring >= t for each t.
PrCurve sweep_threshold(const std::vector<ImageDetections>& images,
                        const std::vector<double>& thresholds,
                        double iou_threshold = 0.5);

// One JSON object per line: {"image_id": ..., "candidates": [[x,y,w,h,score],
// ...], "ground_truth": [[x,y,w,h], ...]}.
std::vector<ImageDetections> read_detections_jsonl(const std::string& path);
void write_detections_jsonl(const std::string& path,
                            const std::vector<ImageDetections>& images);

// counts file: header image_id,count with non-negative integer counts.
std::vector<std::pair<std::string, int64_t>> read_counts_csv(const std::string& path);
void write_counts_csv(const std::string& path,
                      const std::vector<std::pair<std::string, int64_t>>& counts);

void write_pr_csv(const std::string& path, const PrCurve& curve);

}  // namespace sos
