#include "sos/detect.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "sos/common.hpp"
#include "sos/csv.hpp"

namespace sos {

double iou(const BoundingBox& a, const BoundingBox& b) {
  double ix = std::max(0.0, std::min(a.x + a.w, b.x + b.w) - std::max(a.x, b.x));
  double iy = std::max(0.0, std::min(a.y + a.h, b.y + b.h) - std::max(a.y, b.y));
  double inter = ix * iy;
  double uni = a.w * a.h + b.w * b.h - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

std::vector<DetectionWindow> cue_by_count(const std::vector<DetectionWindow>& candidates,
                                          int64_t n) {
  if (n < 0) throw SchemaError("negative window count");
  std::vector<size_t> order(candidates.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    return candidates[a].score > candidates[b].score;
  });
  size_t keep = std::min<size_t>(candidates.size(), size_t(n));
  std::vector<DetectionWindow> out;
  out.reserve(keep);
  for (size_t i = 0; i < keep; ++i) out.push_back(candidates[order[i]]);
  return out;
}

double f_measure(double precision, double recall) {
  double s = precision + recall;
  return s > 0.0 ? 2.0 * recall * precision / s : 0.0;
}

PrfResult match_and_score(const std::vector<ImageDetections>& images,
                          double iou_threshold) {
  PrfResult out;
  for (const auto& img : images) {
    for (const auto& d : img.candidates)
      if (!std::isfinite(d.score))
        throw SchemaError("non-finite detection score in " + img.image_id);
    std::vector<size_t> order(img.candidates.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
      return img.candidates[a].score > img.candidates[b].score;
    });
    std::vector<bool> taken(img.ground_truth.size(), false);
    for (size_t oi : order) {
      int best = -1;
      double best_iou = 0.0;
      for (size_t g = 0; g < img.ground_truth.size(); ++g) {
        if (taken[g]) continue;
        double v = iou(img.candidates[oi].box, img.ground_truth[g]);
        if (v >= iou_threshold && v > best_iou) {
          best = int(g);
          best_iou = v;
        }
      }
      if (best >= 0) {
        taken[best] = true;
        ++out.true_positives;
      }
    }
    out.detections += int64_t(img.candidates.size());
    out.ground_truths += int64_t(img.ground_truth.size());
  }
  out.precision = out.detections > 0
                      ? double(out.true_positives) / double(out.detections)
                      : 1.0;
  out.recall = out.ground_truths > 0
                   ? double(out.true_positives) / double(out.ground_truths)
                   : 0.0;
  out.f_measure = f_measure(out.precision, out.recall);
  return out;
}

PrCurve sweep_threshold(const std::vector<ImageDetections>& images,
                        const std::vector<double>& thresholds,
                        double iou_threshold) {
  if (!std::is_sorted(thresholds.begin(), thresholds.end()))
    throw SchemaError("thresholds must be sorted ascending");
  PrCurve curve;
  for (double t : thresholds) {
    std::vector<ImageDetections> kept = images;
    for (auto& img : kept) {
      std::vector<DetectionWindow> filt;
      for (const auto& d : img.candidates)
        if (d.score >= t) filt.push_back(d);
      img.candidates = std::move(filt);
    }
    PrCurvePoint pt;
    pt.threshold = t;
    pt.prf = match_and_score(kept, iou_threshold);
    curve.points.push_back(pt);
  }
  curve.best_f = -1.0;
  for (const auto& pt : curve.points) {
    if (pt.prf.f_measure > curve.best_f) {
      curve.best_f = pt.prf.f_measure;
      curve.best_threshold = pt.threshold;
    }
  }
  return curve;
}

namespace {

BoundingBox box_from_json(const nlohmann::json& j, const std::string& where) {
  if (!j.is_array() || j.size() < 4)
    throw SchemaError(where + ": box must be [x,y,w,h]");
  for (size_t i = 0; i < 4; ++i)
    if (!j[i].is_number()) throw SchemaError(where + ": box values must be numbers");
  BoundingBox b{j[0].get<double>(), j[1].get<double>(), j[2].get<double>(),
                j[3].get<double>()};
  if (b.w < 1.0 || b.h < 1.0)
    throw SchemaError(where + ": box sides must be >= 1");
  return b;
}

}  // namespace

std::vector<ImageDetections> read_detections_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::vector<ImageDetections> out;
  std::string line;
  size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::string where = path + ":" + std::to_string(n);
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded()) throw FormatError(where + ": invalid json");
    if (!j.is_object() || !j.contains("image_id") || !j["image_id"].is_string())
      throw SchemaError(where + ": missing image_id");
    ImageDetections img;
    img.image_id = j["image_id"].get<std::string>();
    if (j.contains("candidates")) {
      if (!j["candidates"].is_array())
        throw SchemaError(where + ": candidates must be an array");
      for (const auto& c : j["candidates"]) {
        if (!c.is_array() || c.size() != 5)
          throw SchemaError(where + ": candidate must be [x,y,w,h,score]");
        DetectionWindow w;
        w.box = box_from_json(c, where);
        if (!c[4].is_number())
          throw SchemaError(where + ": candidate score must be a number");
        w.score = c[4].get<double>();
        img.candidates.push_back(w);
      }
    }
    if (j.contains("ground_truth")) {
      if (!j["ground_truth"].is_array())
        throw SchemaError(where + ": ground_truth must be an array");
      for (const auto& g : j["ground_truth"])
        img.ground_truth.push_back(box_from_json(g, where));
    }
    out.push_back(std::move(img));
  }
  return out;
}

void write_detections_jsonl(const std::string& path,
                            const std::vector<ImageDetections>& images) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  for (const auto& img : images) {
    nlohmann::json j;
    j["image_id"] = img.image_id;
    j["candidates"] = nlohmann::json::array();
    for (const auto& c : img.candidates)
      j["candidates"].push_back({c.box.x, c.box.y, c.box.w, c.box.h, c.score});
    j["ground_truth"] = nlohmann::json::array();
    for (const auto& g : img.ground_truth)
      j["ground_truth"].push_back({g.x, g.y, g.w, g.h});
    out << j.dump() << '\n';
  }
  if (!out) throw IoError("write failed for " + path);
}

std::vector<std::pair<std::string, int64_t>> read_counts_csv(const std::string& path) {
  auto rows = read_csv(path);
  if (rows.empty() || rows[0] != CsvRow{"image_id", "count"})
    throw SchemaError(path + ": expected header image_id,count");
  std::vector<std::pair<std::string, int64_t>> out;
  for (size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].size() != 2)
      throw SchemaError(path + ": row " + std::to_string(i + 1) + " needs 2 columns");
    int64_t count = 0;
    try {
      size_t pos = 0;
      count = std::stoll(rows[i][1], &pos);
      if (pos != rows[i][1].size()) throw std::invalid_argument("");
    } catch (const std::exception&) {
      throw SchemaError(path + ": bad count '" + rows[i][1] + "'");
    }
    if (count < 0) throw SchemaError(path + ": negative count for " + rows[i][0]);
    out.emplace_back(rows[i][0], count);
  }
  return out;
}

void write_counts_csv(const std::string& path,
                      const std::vector<std::pair<std::string, int64_t>>& counts) {
  std::vector<CsvRow> rows;
  rows.push_back({"image_id", "count"});
  for (const auto& [id, n] : counts) rows.push_back({id, std::to_string(n)});
  write_csv(path, rows);
}

void write_pr_csv(const std::string& path, const PrCurve& curve) {
  std::vector<CsvRow> rows;
  rows.push_back({"threshold", "precision", "recall", "f_measure", "tp",
                  "detections", "ground_truths"});
  for (const auto& pt : curve.points)
    rows.push_back({format_double(pt.threshold), format_double(pt.prf.precision),
                    format_double(pt.prf.recall), format_double(pt.prf.f_measure),
                    std::to_string(pt.prf.true_positives),
                    std::to_string(pt.prf.detections),
                    std::to_string(pt.prf.ground_truths)});
  rows.push_back({"best", format_double(curve.best_threshold), "",
                  format_double(curve.best_f), "", "", ""});
  write_csv(path, rows);
}

}  // namespace sos
