#include "sos/featviz.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "sos/common.hpp"
#include "sos/csv.hpp"

namespace sos {

namespace {

std::vector<double> fractional_ranks(const std::vector<double>& v) {
  const size_t n = v.size();
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t a, size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(n, 0.0);
  size_t i = 0;
  while (i < n) {
    size_t j = i;
    while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
    double avg = 0.5 * double(i + j) + 1.0;  // mean of 1-based positions i..j
    for (size_t t = i; t <= j; ++t) ranks[order[t]] = avg;
    i = j + 1;
  }
  return ranks;
}

// -1 signals zero variance in either rank vector (correlation undefined)
double pearson_on_ranks(const std::vector<double>& ra,
                        const std::vector<double>& rb, bool* undefined) {
  *undefined = false;
  if (ra == rb) return 1.0;
  const size_t n = ra.size();
  double ma = 0.0, mb = 0.0;
  for (size_t i = 0; i < n; ++i) {
    ma += ra[i];
    mb += rb[i];
  }
  ma /= double(n);
  mb /= double(n);
  double num = 0.0, da = 0.0, db = 0.0;
  for (size_t i = 0; i < n; ++i) {
    num += (ra[i] - ma) * (rb[i] - mb);
    da += (ra[i] - ma) * (ra[i] - ma);
    db += (rb[i] - mb) * (rb[i] - mb);
  }
  if (da == 0.0 || db == 0.0) {
    *undefined = true;
    return 0.0;
  }
  return num / std::sqrt(da * db);
}

bool zero_variance(const std::vector<double>& ranks) {
  for (size_t i = 1; i < ranks.size(); ++i)
    if (ranks[i] != ranks[0]) return false;
  return true;
}

}  // namespace

double spearman_rho(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size())
    throw SchemaError("spearman: length mismatch " + std::to_string(a.size()) +
                      " vs " + std::to_string(b.size()));
  if (a.size() < 2) throw SchemaError("spearman: need at least 2 observations");
  bool undefined = false;
  double rho = pearson_on_ranks(fractional_ranks(a), fractional_ranks(b),
                                &undefined);
  if (undefined) throw SchemaError("spearman: zero rank variance");
  return rho;
}

std::vector<NoveltyScore> novelty_scores(
    const std::vector<ChannelRanking>& model,
    const std::vector<ChannelRanking>& reference,
    std::vector<std::string>* warnings) {
  if (model.empty() || reference.empty())
    throw SchemaError("novelty: empty channel list");
  const size_t n = model[0].activation.size();
  if (n < 2) throw SchemaError("novelty: need at least 2 probe images");
  for (const auto& ch : model)
    if (ch.activation.size() != n)
      throw SchemaError("novelty: model channels rank different image sets");
  for (const auto& ch : reference)
    if (ch.activation.size() != n)
      throw SchemaError("novelty: reference ranks a different image set");

  std::vector<std::vector<double>> ref_ranks;
  for (const auto& ch : reference) {
    auto ranks = fractional_ranks(ch.activation);
    if (zero_variance(ranks)) {
      if (warnings)
        warnings->push_back("reference channel " + std::to_string(ch.channel_id) +
                            " is constant; skipped");
      continue;
    }
    ref_ranks.push_back(std::move(ranks));
  }
  if (ref_ranks.empty())
    throw SchemaError("novelty: every reference channel is constant");

  std::vector<NoveltyScore> out;
  for (const auto& ch : model) {
    auto ranks = fractional_ranks(ch.activation);
    if (zero_variance(ranks)) {
      if (warnings)
        warnings->push_back("model channel " + std::to_string(ch.channel_id) +
                            " is constant; dropped");
      continue;
    }
    double best = -1.0;
    for (const auto& rr : ref_ranks) {
      bool undefined = false;
      double rho = pearson_on_ranks(ranks, rr, &undefined);
      if (!undefined) best = std::max(best, rho);
    }
    out.push_back({ch.channel_id, best});
  }
  return out;
}

std::vector<NoveltyScore> select_novel(const std::vector<NoveltyScore>& scores,
                                       double threshold) {
  std::vector<NoveltyScore> out;
  for (const auto& s : scores)
    if (s.s < threshold) out.push_back(s);
  std::stable_sort(out.begin(), out.end(),
                   [](const NoveltyScore& a, const NoveltyScore& b) {
                     return a.s < b.s;
                   });
  return out;
}

std::vector<HistogramBin> novelty_histogram(
    const std::vector<NoveltyScore>& scores, int bins) {
  if (bins < 1) throw SchemaError("histogram: need at least one bin");
  std::vector<HistogramBin> out;
  out.resize(size_t(bins));
  const double width = 2.0 / bins;
  for (int b = 0; b < bins; ++b) {
    out[size_t(b)].lo = -1.0 + b * width;
    out[size_t(b)].hi = -1.0 + (b + 1) * width;
  }
  out.back().hi = 1.0;
  for (const auto& s : scores) {
    int b = int(std::floor((s.s + 1.0) / width));
    b = std::clamp(b, 0, bins - 1);
    ++out[size_t(b)].count;
  }
  return out;
}

std::vector<PatchSpec> top_patches(const std::vector<ActivationMap>& maps,
                                   int image_w, int image_h, int k,
                                   double patch_fraction,
                                   std::vector<std::string>* warnings) {
  if (maps.empty()) throw SchemaError("top_patches: no activation maps");
  if (k < 1) throw SchemaError("top_patches: k must be positive");
  if (image_w < 1 || image_h < 1)
    throw SchemaError("top_patches: bad image size");
  if (!(patch_fraction > 0.0 && patch_fraction <= 1.0))
    throw SchemaError("top_patches: patch fraction outside (0,1]");
  const int mh = maps[0].h, mw = maps[0].w;
  if (mh < 1 || mw < 1) throw SchemaError("top_patches: empty map");
  for (const auto& m : maps) {
    if (m.h != mh || m.w != mw)
      throw SchemaError("top_patches: maps disagree on shape");
    if (int(m.v.size()) != mh * mw)
      throw SchemaError("top_patches: map size mismatch");
  }

  struct Ranked {
    int source;
    int argmax;
    double peak;
  };
  std::vector<Ranked> ranked;
  for (size_t i = 0; i < maps.size(); ++i) {
    int arg = 0;
    for (int p = 1; p < mh * mw; ++p)
      if (maps[i].v[size_t(p)] > maps[i].v[size_t(arg)]) arg = p;
    ranked.push_back({int(i), arg, double(maps[i].v[size_t(arg)])});
  }
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const Ranked& a, const Ranked& b) {
                     return a.peak > b.peak;
                   });
  int take = std::min<int>(k, int(ranked.size()));
  if (take < k && warnings)
    warnings->push_back("only " + std::to_string(take) + " images for top-" +
                        std::to_string(k) + " patches");

  const int pw = std::clamp<int>(int(std::lround(patch_fraction * image_w)), 1,
                                 image_w);
  const int ph = std::clamp<int>(int(std::lround(patch_fraction * image_h)), 1,
                                 image_h);
  std::vector<PatchSpec> out;
  for (int t = 0; t < take; ++t) {
    const Ranked& r = ranked[size_t(t)];
    const int my = r.argmax / mw, mx = r.argmax % mw;
    const double px = (mx + 0.5) * double(image_w) / mw;
    const double py = (my + 0.5) * double(image_h) / mh;
    int x0 = std::clamp<int>(int(std::lround(px - pw / 2.0)), 0, image_w - pw);
    int y0 = std::clamp<int>(int(std::lround(py - ph / 2.0)), 0, image_h - ph);
    out.push_back({r.source,
                   {double(x0), double(y0), double(pw), double(ph)},
                   r.peak});
  }
  return out;
}

RasterImage montage_3x3(const std::vector<RasterImage>& patches) {
  if (patches.empty()) throw SchemaError("montage: no patches");
  if (patches.size() > 9) throw SchemaError("montage: more than nine patches");
  const int pw = patches[0].width, ph = patches[0].height;
  for (const auto& p : patches)
    if (p.width != pw || p.height != ph)
      throw SchemaError("montage: patches disagree on size");
  const int gap = 2;
  RasterImage grid{3 * pw + 2 * gap, 3 * ph + 2 * gap};
  grid.fill(0.5f, 0.5f, 0.5f, 1.0f);
  for (size_t i = 0; i < patches.size(); ++i) {
    const int gx = int(i) % 3, gy = int(i) / 3;
    const int ox = gx * (pw + gap), oy = gy * (ph + gap);
    for (int y = 0; y < ph; ++y)
      for (int x = 0; x < pw; ++x)
        for (int c = 0; c < 4; ++c)
          grid.at(ox + x, oy + y, c) = patches[i].at(x, y, c);
  }
  return grid;
}

void write_novelty_csv(const std::string& path,
                       const std::vector<NoveltyScore>& scores) {
  std::vector<CsvRow> rows;
  rows.push_back({"channel_id", "score"});
  for (const auto& s : scores)
    rows.push_back({std::to_string(s.channel_id), format_double(s.s)});
  write_csv(path, rows);
}

void write_histogram_csv(const std::string& path,
                         const std::vector<HistogramBin>& bins) {
  std::vector<CsvRow> rows;
  rows.push_back({"lo", "hi", "count"});
  for (const auto& b : bins)
    rows.push_back({format_double(b.lo), format_double(b.hi),
                    std::to_string(b.count)});
  write_csv(path, rows);
}

}  // namespace sos
