#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "sos/common.hpp"
#include "sos/eval.hpp"
#include "sos/tensor.hpp"

namespace sos {

// ---- layers -----------------------------------------------------------
// Batched activations are [N, C, H, W]; conv weights are [F, C, kh, kw].

Tensor conv2d_forward(const Tensor& input, const Tensor& weights,
                      const Tensor& bias, int stride = 1, int pad = 1);
void conv2d_backward(const Tensor& input, const Tensor& weights,
                     const Tensor& grad_out, Tensor* grad_input,
                     Tensor* grad_weights, Tensor* grad_bias, int stride = 1,
                     int pad = 1);

// 2x2 max pooling, stride 2; argmax stores the flat input offset per output
// cell (first element of the window wins ties).
Tensor maxpool2_forward(const Tensor& input, std::vector<int>* argmax);
Tensor maxpool2_backward(const Tensor& grad_out,
                         const std::vector<int>& argmax,
                         const std::vector<int>& input_shape);

Tensor relu_forward(const Tensor& input);
Tensor relu_backward(const Tensor& input, const Tensor& grad_out);

// [N, C, H, W] -> [N, C]
Tensor global_avg_pool(const Tensor& input);
Tensor global_avg_pool_backward(const Tensor& grad_out,
                                const std::vector<int>& input_shape);

// input [N, D], weights [K, D], bias [K] -> [N, K]
Tensor fully_connected(const Tensor& input, const Tensor& weights,
                       const Tensor& bias);
void fully_connected_backward(const Tensor& input, const Tensor& weights,
                              const Tensor& grad_out, Tensor* grad_input,
                              Tensor* grad_weights, Tensor* grad_bias);

// Mean cross-entropy over the batch with max-subtracted softmax.
// grad_logits is (probs - onehot) / N.
double softmax_cross_entropy(const Tensor& logits,
                             const std::vector<int>& labels,
                             Tensor* grad_logits, Tensor* probs);

// ---- model ------------------------------------------------------------

struct SubitNetSpec {
  int input_side = 64;             // divisible by 8 (three pooling halvings)
  std::array<int, 3> channels = {16, 32, 64};
  int num_classes = int(kNumClasses);
};

void validate_spec(const SubitNetSpec& spec);

struct ParamTensor {
  std::string name;
  Tensor value;
  Tensor momentum;
};

// Parameter order is fixed: conv1..conv3 then fc, weights before biases.
constexpr int kParamCount = 8;
constexpr int kFcWeight = 6;
constexpr int kFcBias = 7;

struct ModelState {
  SubitNetSpec spec;
  std::vector<ParamTensor> params;
  int64_t iteration = 0;
};

// He-initialized weights (seeded), zero biases and momentum.
ModelState init_model(const SubitNetSpec& spec, uint64_t seed);

struct ForwardTrace {
  Tensor conv_out[3];
  Tensor relu_out[3];
  Tensor pool_out[3];           // pool_out[2] feeds visualization
  std::vector<int> pool_arg[3];
  Tensor gap_out;               // [N, C3] embedding
  Tensor logits;                // [N, num_classes]
};

// input is [N, 3, S, S], already normalized.
ForwardTrace forward(const ModelState& state, const Tensor& input);

using Gradients = std::vector<Tensor>;  // parallel to state.params

// Loss + parameter gradients; grad_input may be null.
double backward(const ModelState& state, const Tensor& input,
                const ForwardTrace& trace, const std::vector<int>& labels,
                Gradients* grads);

// v <- mu*v + g; w <- w - lr*v. Throws SchemaError on shape mismatch and
// std::runtime_error on non-finite gradients.
void sgd_momentum_step(ModelState& state, const Gradients& grads, double lr,
                       double momentum);

void zero_momentum(ModelState& state);

// ---- gradient verification -------------------------------------------

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst_param;
  int checked = 0;
  bool pass = false;
};

// Central-difference check on a small random model/batch; samples up to
// per_layer coordinates per parameter tensor. sabotage flips the sign of
// one analytic gradient tensor to prove the check can fail.
GradCheckReport gradient_check(uint64_t seed, double tolerance = 1e-2,
                               int per_layer = 64, bool sabotage = false);

// ---- checkpoints ------------------------------------------------------

void save_model(const std::string& path, const ModelState& state);
ModelState load_model(const std::string& path);

}  // namespace sos
