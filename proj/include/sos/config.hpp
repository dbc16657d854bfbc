#pragma once

#include <cstdint>
#include <string>

#include "sos/synth.hpp"
#include "sos/train.hpp"

namespace sos {

// Flat key=value run configuration covering generation, training, and the
// evaluation knobs. '#' starts a comment; unknown or repeated keys are
// schema errors, so a config file can never silently misspell an option.
struct PipelineConfig {
  uint64_t seed = 0;
  SynthConfig synth;
  int per_class = 500;
  bool include_backgrounds = true;
  double library_threshold = 0.95;
  int input_side = 64;
  TrainConfig train;
  int knn_k = 75;
  int ndcg_h = 20;
  double novelty_threshold = 0.3;
  double iou_threshold = 0.5;
};

PipelineConfig parse_config_text(const std::string& text);
PipelineConfig load_config(const std::string& path);

// Canonical text form; parse_config_text(render_config(c)) reproduces c
// exactly, and equal configs render to identical bytes.
std::string render_config(const PipelineConfig& cfg);

// Drops config.resolved (version comment + canonical form) into dir.
void write_resolved_config(const std::string& dir, const PipelineConfig& cfg);

}  // namespace sos
