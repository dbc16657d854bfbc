#include "fixtures.hpp"

#include <cmath>
#include <filesystem>

#include "sos/codec.hpp"
#include "sos/common.hpp"
#include "sos/csv.hpp"

namespace fs = std::filesystem;

namespace fixtures {

std::string temp_dir(const std::string& name) {
  fs::path p = fs::path("test_tmp") / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p.string();
}

namespace {

float shape_coverage(int family, int shape, float u, float v) {
  // u,v in [0,1] across the tile
  float du = u - 0.5f, dv = v - 0.5f;
  float rad = std::sqrt(du * du + dv * dv);
  if (family == 0) {
    switch (shape) {
      case 0:  // disk
        return rad <= 0.38f ? 1.0f : 0.0f;
      case 1:  // block
        return (std::fabs(du) <= 0.33f && std::fabs(dv) <= 0.33f) ? 1.0f : 0.0f;
      default: {  // wedge (isoceles triangle, apex up)
        if (v < 0.12f || v > 0.88f) return 0.0f;
        float t = (v - 0.12f) / 0.76f;
        return std::fabs(du) <= 0.38f * t ? 1.0f : 0.0f;
      }
    }
  }
  switch (shape) {
    case 0:  // ring
      return (rad <= 0.40f && rad >= 0.22f) ? 1.0f : 0.0f;
    case 1:  // cross
      return ((std::fabs(du) <= 0.38f && std::fabs(dv) <= 0.13f) ||
              (std::fabs(dv) <= 0.38f && std::fabs(du) <= 0.13f))
                 ? 1.0f
                 : 0.0f;
    default:  // diamond
      return std::fabs(du) + std::fabs(dv) <= 0.40f ? 1.0f : 0.0f;
  }
}

const float kWarm[3][3] = {{0.85f, 0.20f, 0.15f},
                           {0.95f, 0.60f, 0.10f},
                           {0.90f, 0.85f, 0.20f}};
const float kCool[3][3] = {{0.15f, 0.35f, 0.85f},
                           {0.10f, 0.70f, 0.45f},
                           {0.55f, 0.25f, 0.80f}};

}  // namespace

const std::vector<std::string>& categories(int family) {
  static const std::vector<std::string> a = {"disk", "block", "wedge"};
  static const std::vector<std::string> b = {"ring", "cross", "diamond"};
  return family == 0 ? a : b;
}

sos::RasterImage make_cutout(int family, int shape, int side, float r, float g,
                             float b) {
  sos::RasterImage img(side, side);
  for (int y = 0; y < side; ++y) {
    for (int x = 0; x < side; ++x) {
      float u = (x + 0.5f) / side, v = (y + 0.5f) / side;
      float a = shape_coverage(family, shape, u, v);
      img.at(x, y, 0) = r;
      img.at(x, y, 1) = g;
      img.at(x, y, 2) = b;
      img.at(x, y, 3) = a;
    }
  }
  return img;
}

sos::RasterImage make_background(int family, int variant, int side,
                                 uint64_t seed) {
  sos::RasterImage img(side, side);
  sos::Rng rng(seed);
  float c1[3], c2[3];
  for (int k = 0; k < 3; ++k) {
    c1[k] = float(rng.uniform(0.1, 0.9));
    c2[k] = float(rng.uniform(0.1, 0.9));
  }
  for (int y = 0; y < side; ++y) {
    for (int x = 0; x < side; ++x) {
      float px[3];
      if (family == 0) {
        float t;
        switch (variant % 4) {
          case 0: t = float(x) / (side - 1); break;
          case 1: t = float(y) / (side - 1); break;
          case 2: t = float(x + y) / (2 * (side - 1)); break;
          default: t = 0.5f; break;
        }
        for (int k = 0; k < 3; ++k) px[k] = c1[k] + (c2[k] - c1[k]) * t;
      } else {
        switch (variant % 3) {
          case 0: {
            int cell = 16 + 8 * (variant % 2);
            bool on = ((x / cell) + (y / cell)) % 2 == 0;
            for (int k = 0; k < 3; ++k) px[k] = on ? c1[k] : c2[k];
            break;
          }
          case 1: {
            bool on = (y / 20) % 2 == 0;
            for (int k = 0; k < 3; ++k) px[k] = on ? c1[k] : c2[k];
            break;
          }
          default:
            for (int k = 0; k < 3; ++k)
              px[k] = std::clamp(c1[k] + float(rng.uniform(-0.15, 0.15)), 0.0f,
                                 1.0f);
            break;
        }
      }
      for (int k = 0; k < 3; ++k) img.at(x, y, k) = px[k];
      img.at(x, y, 3) = 1.0f;
    }
  }
  return img;
}

Library make_library(const std::string& dir, int family,
                     int cutouts_per_category, int background_count,
                     uint64_t seed, bool with_rejects) {
  Library lib;
  fs::create_directories(dir);
  const auto& cats = categories(family);
  sos::Rng rng(seed);
  std::vector<std::vector<std::string>> rows;
  rows.push_back({"kind", "id", "path", "score"});
  for (int shape = 0; shape < 3; ++shape) {
    for (int i = 0; i < cutouts_per_category; ++i) {
      const float* base = family == 0 ? kWarm[shape] : kCool[shape];
      float jr = float(rng.uniform(-0.08, 0.08));
      auto img = make_cutout(family, shape, 48,
                             std::clamp(base[0] + jr, 0.05f, 1.0f),
                             std::clamp(base[1] + jr, 0.05f, 1.0f),
                             std::clamp(base[2] + jr, 0.05f, 1.0f));
      Asset a;
      a.id = cats[shape] + "_" + std::to_string(i);
      a.category = cats[shape];
      a.score = rng.uniform(0.96, 1.0);
      a.path = (fs::path(dir) / (a.id + ".png")).string();
      sos::save_png(img, a.path);
      rows.push_back({"cutout", a.id, a.id + ".png", sos::format_double(a.score)});
      lib.cutouts.push_back(a);
    }
  }
  for (int i = 0; i < background_count; ++i) {
    auto img = make_background(family, i, 128, sos::mix_seed(seed, 1000 + i));
    Asset a;
    a.id = "bg_" + std::to_string(i);
    a.category = "";
    a.score = rng.uniform(0.96, 1.0);
    a.path = (fs::path(dir) / (a.id + ".png")).string();
    sos::save_png(img, a.path);
    rows.push_back({"background", a.id, a.id + ".png", sos::format_double(a.score)});
    lib.backgrounds.push_back(a);
  }
  if (with_rejects) {
    auto img = make_cutout(family, 0, 48, 0.5f, 0.5f, 0.5f);
    Asset a;
    a.id = "lowscore_cutout";
    a.category = cats[0];
    a.score = 0.5;
    a.path = (fs::path(dir) / (a.id + ".png")).string();
    sos::save_png(img, a.path);
    rows.push_back({"cutout", a.id, a.id + ".png", sos::format_double(a.score)});
    lib.cutouts.push_back(a);
    auto bg = make_background(family, 0, 128, sos::mix_seed(seed, 9999));
    Asset b;
    b.id = "lowscore_bg";
    b.category = "";
    b.score = 0.3;
    b.path = (fs::path(dir) / (b.id + ".png")).string();
    sos::save_png(bg, b.path);
    rows.push_back({"background", b.id, b.id + ".png", sos::format_double(b.score)});
    lib.backgrounds.push_back(b);
  }
  lib.csv_path = (fs::path(dir) / "library.csv").string();
  sos::write_csv(lib.csv_path, rows);
  return lib;
}

}  // namespace fixtures
