#include "sos/train.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "sos/codec.hpp"
#include "sos/csv.hpp"

namespace sos {

double lr_at(const TrainConfig& cfg, int64_t t) {
  return cfg.base_lr * std::pow(cfg.lr_decay, double(t / cfg.step_iters));
}

int canvas_for(int input_side) {
  return int(std::lround(input_side * 8.0 / 7.0));
}

namespace {

std::string join_path(const std::string& base, const std::string& path) {
  if (base.empty() || std::filesystem::path(path).is_absolute()) return path;
  return (std::filesystem::path(base) / path).string();
}

Tensor to_chw(const RasterImage& img) {
  Tensor t({3, img.height, img.width});
  size_t i = 0;
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width; ++x) t[i++] = img.at(x, y, c);
  return t;
}

void validate_train_config(const TrainConfig& cfg) {
  if (cfg.batch_size < 1) throw SchemaError("batch size must be positive");
  if (cfg.total_iters < 0) throw SchemaError("negative iteration count");
  if (cfg.step_iters < 1) throw SchemaError("lr step must be positive");
  if (cfg.log_every < 1) throw SchemaError("log interval must be positive");
  if (!(cfg.base_lr > 0.0)) throw SchemaError("learning rate must be positive");
}

// uniform shuffle, reseeded pass over the dataset per epoch
struct EpochStream {
  std::vector<int> order;
  size_t pos = 0;

  explicit EpochStream(size_t n) : order(n), pos(n) {
    for (size_t i = 0; i < n; ++i) order[i] = int(i);
  }
  int next(Rng& rng) {
    if (pos == order.size()) {
      for (size_t i = order.size() - 1; i > 0; --i)
        std::swap(order[i], order[size_t(rng.uniform_int(0, int64_t(i)))]);
      pos = 0;
    }
    return order[pos++];
  }
};

// crop at (ox, oy), optional horizontal flip, shift to [-0.5, 0.5]
void fill_slot(const PreparedSample& sample, int canvas, int side, int ox,
               int oy, bool flip, float* dst) {
  for (int c = 0; c < 3; ++c) {
    const float* src = sample.image.data.data() + size_t(c) * canvas * canvas;
    for (int y = 0; y < side; ++y) {
      const float* row = src + size_t(oy + y) * canvas;
      float* out = dst + (size_t(c) * side + y) * side;
      for (int x = 0; x < side; ++x) {
        const int sx = flip ? ox + side - 1 - x : ox + x;
        out[x] = row[sx] - 0.5f;
      }
    }
  }
}

void step_fc_only(ModelState& state, const Gradients& grads, double lr,
                  double momentum) {
  for (int p : {kFcWeight, kFcBias}) {
    auto& value = state.params[size_t(p)].value.data;
    auto& vel = state.params[size_t(p)].momentum.data;
    const auto& g = grads[size_t(p)].data;
    if (!all_finite(grads[size_t(p)]))
      throw std::runtime_error("non-finite gradient for " +
                               state.params[size_t(p)].name);
    for (size_t i = 0; i < value.size(); ++i) {
      vel[i] = float(momentum) * vel[i] + g[i];
      value[i] -= float(lr) * vel[i];
    }
  }
}

}  // namespace

PreparedDataset prepare_dataset(const DatasetManifest& manifest, int input_side,
                                const std::string& base_dir,
                                std::vector<std::string>* warnings) {
  if (manifest.entries.empty()) throw SchemaError("empty manifest");
  PreparedDataset data;
  data.input_side = input_side;
  data.canvas_side = canvas_for(input_side);
  for (const auto& entry : manifest.entries) {
    const std::string path = join_path(base_dir, entry.image_path);
    RasterImage img;
    try {
      img = load_image(path);
    } catch (const IoError& e) {
      if (warnings) warnings->push_back(std::string("skipped: ") + e.what());
      continue;
    } catch (const FormatError& e) {
      if (warnings) warnings->push_back(std::string("skipped: ") + e.what());
      continue;
    }
    PreparedSample sample;
    sample.image =
        to_chw(resize_bilinear(img, data.canvas_side, data.canvas_side));
    sample.label = label_index(entry.label);
    data.samples.push_back(std::move(sample));
  }
  if (data.samples.empty())
    throw IoError("no loadable images in the manifest");
  return data;
}

TrainResult train(const PreparedDataset& data, const SubitNetSpec& spec,
                  const TrainConfig& cfg, const ModelState* init) {
  validate_spec(spec);
  validate_train_config(cfg);
  if (data.samples.empty()) throw SchemaError("empty dataset");
  if (data.input_side != spec.input_side)
    throw SchemaError("dataset prepared for a different input side");
  if (data.canvas_side < data.input_side)
    throw SchemaError("canvas smaller than the crop");
  for (const auto& s : data.samples)
    if (s.label < 0 || s.label >= spec.num_classes)
      throw SchemaError("label outside the class range");

  TrainResult result;
  if (init) {
    if (init->spec.input_side != spec.input_side ||
        init->spec.channels != spec.channels ||
        init->spec.num_classes != spec.num_classes)
      throw SchemaError("init checkpoint disagrees with the model spec");
    result.state = *init;
  } else {
    result.state = init_model(spec, mix_seed(cfg.seed, 1));
  }

  Rng rng(mix_seed(cfg.seed, 2));
  EpochStream stream(data.samples.size());
  const int side = spec.input_side, canvas = data.canvas_side;
  const int span = canvas - side;
  Tensor batch({cfg.batch_size, 3, side, side});
  std::vector<int> labels(size_t(cfg.batch_size));

  for (int t = 0; t < cfg.total_iters; ++t) {
    for (int b = 0; b < cfg.batch_size; ++b) {
      const PreparedSample& sample = data.samples[size_t(stream.next(rng))];
      const int ox = span > 0 ? int(rng.uniform_int(0, span)) : 0;
      const int oy = span > 0 ? int(rng.uniform_int(0, span)) : 0;
      const bool flip = rng.bernoulli(0.5);
      fill_slot(sample, canvas, side, ox, oy, flip,
                batch.data.data() + size_t(b) * 3 * side * side);
      labels[size_t(b)] = sample.label;
    }
    const double lr = lr_at(cfg, t);
    ForwardTrace trace = forward(result.state, batch);
    Gradients grads;
    const double loss = backward(result.state, batch, trace, labels, &grads);
    if (cfg.freeze_features)
      step_fc_only(result.state, grads, lr, cfg.momentum);
    else
      sgd_momentum_step(result.state, grads, lr, cfg.momentum);
    result.state.iteration += 1;
    if (t % cfg.log_every == 0 || t + 1 == cfg.total_iters)
      result.curve.push_back({t, loss, lr});
  }
  return result;
}

TwoStageResult two_stage_finetune(const PreparedDataset& synthetic,
                                  const PreparedDataset& real,
                                  const SubitNetSpec& spec,
                                  const TrainConfig& stage1,
                                  const TrainConfig& stage2) {
  TrainResult first = train(synthetic, spec, stage1);
  zero_momentum(first.state);
  TrainResult second = train(real, spec, stage2, &first.state);
  return {std::move(second.state), std::move(first.curve),
          std::move(second.curve)};
}

ImageForward run_image(const ModelState& state, const RasterImage& image) {
  const int side = state.spec.input_side;
  const int canvas = canvas_for(side);
  RasterImage resized = resize_bilinear(image, canvas, canvas);
  const int off = (canvas - side) / 2;
  Tensor input({1, 3, side, side});
  size_t i = 0;
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < side; ++y)
      for (int x = 0; x < side; ++x)
        input[i++] = resized.at(off + x, off + y, c) - 0.5f;

  ForwardTrace trace = forward(state, input);
  ImageForward out;
  const int K = state.spec.num_classes;
  double m = trace.logits[0];
  for (int k = 1; k < K; ++k) m = std::max(m, double(trace.logits[size_t(k)]));
  double s = 0.0;
  std::vector<double> e(size_t(K), 0.0);
  for (int k = 0; k < K; ++k) {
    e[size_t(k)] = std::exp(double(trace.logits[size_t(k)]) - m);
    s += e[size_t(k)];
  }
  for (int k = 0; k < K && k < int(kNumClasses); ++k)
    out.probs[size_t(k)] = e[size_t(k)] / s;
  out.embedding = trace.gap_out.data;
  const auto& fshape = trace.pool_out[2].shape;
  out.feature_maps = Tensor({fshape[1], fshape[2], fshape[3]});
  out.feature_maps.data = trace.pool_out[2].data;
  return out;
}

ScoreVector predict(const ModelState& state, const RasterImage& image) {
  return run_image(state, image).probs;
}

std::vector<float> embed(const ModelState& state, const RasterImage& image) {
  return run_image(state, image).embedding;
}

void write_loss_curve_csv(const std::string& path,
                          const std::vector<LossPoint>& curve) {
  std::vector<CsvRow> rows;
  rows.push_back({"iteration", "loss", "lr"});
  for (const auto& p : curve)
    rows.push_back({std::to_string(p.iteration), format_double(p.loss),
                    format_double(p.lr)});
  write_csv(path, rows);
}

}  // namespace sos
