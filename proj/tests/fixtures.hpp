#pragma once

#include <string>
#include <vector>

#include "sos/image.hpp"

namespace fixtures {

struct Asset {
  std::string id;
  std::string path;
  std::string category;
  double score = 1.0;
};

struct Library {
  std::vector<Asset> cutouts;
  std::vector<Asset> backgrounds;
  std::string csv_path;
};

// Fresh empty directory under ./test_tmp, wiped if it already exists.
std::string temp_dir(const std::string& name);

// Shape cutout with hard alpha. family 0: disk/block/wedge in warm colors,
// family 1: ring/cross/diamond in cool colors.
sos::RasterImage make_cutout(int family, int shape, int side, float r, float g,
                             float b);
sos::RasterImage make_background(int family, int variant, int side,
                                 uint64_t seed);

// Writes cutout + background PNGs and a library csv into dir.
// All scores pass the default 0.95 filter unless with_rejects adds a few
// deliberately low-scoring entries.
Library make_library(const std::string& dir, int family,
                     int cutouts_per_category, int background_count,
                     uint64_t seed, bool with_rejects = false);

const std::vector<std::string>& categories(int family);

}  // namespace fixtures
