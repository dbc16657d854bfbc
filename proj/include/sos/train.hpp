#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sos/data.hpp"
#include "sos/featviz.hpp"
#include "sos/image.hpp"
#include "sos/nnet.hpp"

namespace sos {

struct TrainConfig {
  int batch_size = 32;
  double base_lr = 0.001;
  double lr_decay = 0.1;
  int step_iters = 2000;   // decay applied every this many iterations
  int total_iters = 2000;
  double momentum = 0.9;
  uint64_t seed = 0;
  bool freeze_features = false;  // update only the final layer
  int log_every = 50;
};

// base_lr * decay^floor(t / step_iters); piecewise constant, non-increasing.
double lr_at(const TrainConfig& cfg, int64_t t);

// Images resized once to the augmentation canvas (8/7 of the input side);
// crops and flips are drawn per batch.
struct PreparedSample {
  Tensor image;  // [3, canvas, canvas], values in [0,1]
  int label = 0;
};

struct PreparedDataset {
  int input_side = 0;
  int canvas_side = 0;
  std::vector<PreparedSample> samples;
};

int canvas_for(int input_side);

// Loads and resizes every manifest image. Unreadable or undecodable images
// are skipped with a warning; an empty result throws IoError.
PreparedDataset prepare_dataset(const DatasetManifest& manifest, int input_side,
                                const std::string& base_dir = "",
                                std::vector<std::string>* warnings = nullptr);

struct LossPoint {
  int64_t iteration = 0;
  double loss = 0.0;
  double lr = 0.0;
};

struct TrainResult {
  ModelState state;
  std::vector<LossPoint> curve;
};

// SGD with momentum over shuffled epochs; per-sample random crop + hflip;
// pixel values are shifted by -0.5. Deterministic for a fixed seed. Starts
// from init when given (momentum kept), otherwise from seeded fresh weights.
TrainResult train(const PreparedDataset& data, const SubitNetSpec& spec,
                  const TrainConfig& cfg, const ModelState* init = nullptr);

struct TwoStageResult {
  ModelState state;
  std::vector<LossPoint> stage1_curve;
  std::vector<LossPoint> stage2_curve;
};

// Stage 1 trains fresh weights on synthetic data; stage 2 continues from
// them on real data, keeping every layer (momentum reset, schedule restarts).
TwoStageResult two_stage_finetune(const PreparedDataset& synthetic,
                                  const PreparedDataset& real,
                                  const SubitNetSpec& spec,
                                  const TrainConfig& stage1,
                                  const TrainConfig& stage2);

// Test-time pass: resize to the canvas, center crop, shift by -0.5.
struct ImageForward {
  ScoreVector probs;              // softmax over count classes
  std::vector<float> embedding;   // global-average-pooled features
  Tensor feature_maps;            // last conv block output [C, h, w]
};

ImageForward run_image(const ModelState& state, const RasterImage& image);
ScoreVector predict(const ModelState& state, const RasterImage& image);
std::vector<float> embed(const ModelState& state, const RasterImage& image);

void write_loss_curve_csv(const std::string& path,
                          const std::vector<LossPoint>& curve);

}  // namespace sos
