#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sos/data.hpp"
#include "sos/image.hpp"

namespace sos {

struct SynthConfig {
  int canvas_size = 256;
  double ref_scale_lo = 0.4;   // of canvas size, for the largest dimension
  double ref_scale_hi = 0.8;
  double jitter_lo = 0.85;     // per-instance scale around the reference
  double jitter_hi = 1.15;
  double rotation_deg = 10.0;  // sampled in [-rotation_deg, rotation_deg]
  double hflip_prob = 0.5;
  double max_occlusion = 0.5;  // per instance, of its pasted area
  int max_attempts = 100;      // fresh recipes per image slot
  int count_lo = 1;
  int count_hi = 4;
};

void validate_synth_config(const SynthConfig& cfg);

struct LibraryCutout {
  std::string id;
  RasterImage image;  // alpha marks the object
  double score = 0.0; // confidence the crop holds exactly one object
};

struct LibraryBackground {
  std::string id;
  RasterImage image;
  double score = 0.0; // confidence the scene is empty of salient objects
};

struct CutoutLibrary {
  std::vector<LibraryCutout> cutouts;
  std::vector<LibraryBackground> backgrounds;
  std::vector<std::string> warnings;
};

// Keeps entries scoring at least threshold; empty results only warn.
CutoutLibrary filter_library(const CutoutLibrary& lib, double threshold = 0.95);

// kind(cutout|background),id,path,score - image paths relative to the CSV.
CutoutLibrary read_library_csv(const std::string& csv_path);

struct SynthRecipe {
  uint64_t seed = 0;
  int n_objects = 1;
  std::string cutout_id;
  std::string background_id;
};

struct Placement {
  double cx = 0.0, cy = 0.0;      // sampled instance center
  double scale = 0.0;             // reference scale x jitter
  double rotation_deg = 0.0;
  bool hflip = false;
  int paste_x = 0, paste_y = 0;   // top-left pixel on the canvas
  double visible_fraction = 0.0;  // alpha-weighted share that survives
  double visible_binary = 0.0;    // hard-pixel share (alpha > 0.5)
};

struct PlacementLog {
  double ref_scale_u = 0.0;
  std::vector<Placement> instances;
};

struct SynthOutcome {
  bool accepted = false;
  RasterImage image;  // composited scene, filled for accepted outcomes
  CountLabel label = CountLabel::Zero;
  PlacementLog log;   // complete for rejected outcomes as well
};

// Pastes n_objects transformed copies of one cutout onto the background.
// Deterministic in recipe.seed. Rejection (any instance more occluded than
// cfg.max_occlusion allows, counting border clipping) is a value.
SynthOutcome generate_image(const CutoutLibrary& lib, const SynthConfig& cfg,
                            const SynthRecipe& recipe);

struct CorpusResult {
  DatasetManifest manifest;  // image paths relative to out_dir
  int accepted = 0;
  int rejected = 0;
  std::vector<std::string> shortfalls;  // unmet per-class quotas
};

// Writes per_class accepted images per count class (plus Zero-class copies
// of the backgrounds when include_backgrounds), manifest.csv, and
// provenance.jsonl into out_dir. Per-image seeds hash (base_seed, class,
// index), so any slot regenerates identically in isolation.
CorpusResult generate_corpus(const CutoutLibrary& lib, const SynthConfig& cfg,
                             int per_class, uint64_t base_seed,
                             bool include_backgrounds,
                             const std::string& out_dir);

}  // namespace sos
