#pragma once

#include <string>
#include <vector>

#include "sos/image.hpp"

namespace sos {

// Per-image max activations of one feature channel over a fixed probe set.
struct ChannelRanking {
  int channel_id = 0;
  std::vector<double> activation;
};

// Spearman rank correlation with average (fractional) ranks for ties.
// Throws SchemaError for length mismatch, length < 2, or zero rank variance.
double spearman_rho(const std::vector<double>& a, const std::vector<double>& b);

struct NoveltyScore {
  int channel_id = 0;
  double s = 0.0;  // max correlation against the reference channels
};

// S_i = max_j rho(model_i, reference_j). Channels with zero rank variance
// cannot be correlated: constant reference channels are skipped, constant
// model channels are dropped from the result; both are noted in warnings.
std::vector<NoveltyScore> novelty_scores(
    const std::vector<ChannelRanking>& model,
    const std::vector<ChannelRanking>& reference,
    std::vector<std::string>* warnings = nullptr);

// Channels with S_i strictly below threshold, sorted ascending by S_i.
std::vector<NoveltyScore> select_novel(const std::vector<NoveltyScore>& scores,
                                       double threshold = 0.3);

struct HistogramBin {
  double lo = 0.0;
  double hi = 0.0;
  int count = 0;
};

// Equal-width bins over [-1, 1]; every bin is [lo, hi), the last is closed.
std::vector<HistogramBin> novelty_histogram(
    const std::vector<NoveltyScore>& scores, int bins = 20);

// One channel's spatial activation map for one image, row-major.
struct ActivationMap {
  int h = 0;
  int w = 0;
  std::vector<float> v;
};

struct PatchSpec {
  int source = 0;  // index into the map/image list
  BoundingBox box;
  double activation = 0.0;
};

// Top-k images by max activation (ties by input order). Each patch is
// patch_fraction of the image per axis, centered on the argmax unit's center
// mapped linearly into pixels, shifted to stay inside the image.
std::vector<PatchSpec> top_patches(const std::vector<ActivationMap>& maps,
                                   int image_w, int image_h, int k = 9,
                                   double patch_fraction = 0.6,
                                   std::vector<std::string>* warnings = nullptr);

// Tiles up to nine equally sized patches into a 3x3 grid with gray seams.
RasterImage montage_3x3(const std::vector<RasterImage>& patches);

void write_novelty_csv(const std::string& path,
                       const std::vector<NoveltyScore>& scores);
void write_histogram_csv(const std::string& path,
                         const std::vector<HistogramBin>& bins);

}  // namespace sos
