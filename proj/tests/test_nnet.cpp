#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fixtures.hpp"
#include "sos/common.hpp"
#include "sos/csv.hpp"
#include "sos/nnet.hpp"

using namespace sos;

namespace {

Tensor random_tensor(std::vector<int> shape, Rng& rng, double lo = -1.0,
                     double hi = 1.0) {
  Tensor t(std::move(shape));
  for (auto& v : t.data) v = float(rng.uniform(lo, hi));
  return t;
}

// direct nested-loop cross-correlation, double accumulation
Tensor conv_oracle(const Tensor& in, const Tensor& w, const Tensor& b) {
  const int N = in.dim(0), C = in.dim(1), H = in.dim(2), W = in.dim(3);
  const int F = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  Tensor out({N, F, H, W});
  for (int n = 0; n < N; ++n)
    for (int f = 0; f < F; ++f)
      for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
          double s = b[size_t(f)];
          for (int c = 0; c < C; ++c)
            for (int ky = 0; ky < kh; ++ky)
              for (int kx = 0; kx < kw; ++kx) {
                const int sy = y - 1 + ky, sx = x - 1 + kx;
                if (sy < 0 || sy >= H || sx < 0 || sx >= W) continue;
                s += double(w[((size_t(f) * C + c) * kh + ky) * kw + kx]) *
                     double(in[((size_t(n) * C + c) * H + sy) * W + sx]);
              }
          out[((size_t(n) * F + f) * H + y) * W + x] = float(s);
        }
  return out;
}

}  // namespace

TEST_CASE("delta kernel convolution is the identity") {
  Rng rng(111);
  Tensor in = random_tensor({2, 3, 5, 7}, rng);
  Tensor w({3, 3, 3, 3});
  for (int f = 0; f < 3; ++f) w[((size_t(f) * 3 + f) * 3 + 1) * 3 + 1] = 1.0f;
  Tensor b({3});
  Tensor out = conv2d_forward(in, w, b);
  REQUIRE(out.shape == in.shape);
  for (size_t i = 0; i < out.data.size(); ++i) CHECK(out[i] == in[i]);
}

TEST_CASE("zero-weight convolution is the bias plane") {
  Rng rng(112);
  Tensor in = random_tensor({1, 2, 4, 4}, rng);
  Tensor w({3, 2, 3, 3});
  Tensor b({3});
  b[0] = 0.25f;
  b[1] = -1.5f;
  b[2] = 4.0f;
  Tensor out = conv2d_forward(in, w, b);
  for (int f = 0; f < 3; ++f)
    for (int i = 0; i < 16; ++i)
      CHECK(out[size_t(f) * 16 + size_t(i)] == b[size_t(f)]);
}

TEST_CASE("convolution matches the nested-loop oracle") {
  Rng rng(113);
  {
    Tensor in = random_tensor({1, 1, 4, 4}, rng);
    Tensor w = random_tensor({1, 1, 3, 3}, rng);
    Tensor b = random_tensor({1}, rng);
    Tensor out = conv2d_forward(in, w, b);
    Tensor want = conv_oracle(in, w, b);
    for (size_t i = 0; i < out.data.size(); ++i)
      CHECK(out[i] == doctest::Approx(want[i]).epsilon(1e-5));
  }
  {
    Tensor in = random_tensor({2, 3, 6, 5}, rng);
    Tensor w = random_tensor({4, 3, 3, 3}, rng);
    Tensor b = random_tensor({4}, rng);
    Tensor out = conv2d_forward(in, w, b);
    Tensor want = conv_oracle(in, w, b);
    for (size_t i = 0; i < out.data.size(); ++i)
      CHECK(out[i] == doctest::Approx(want[i]).epsilon(1e-5));
  }
}

TEST_CASE("convolution rejects inconsistent shapes") {
  Rng rng(114);
  Tensor in = random_tensor({1, 2, 4, 4}, rng);
  Tensor w = random_tensor({3, 5, 3, 3}, rng);  // wrong input channels
  Tensor b({3});
  CHECK_THROWS_AS(conv2d_forward(in, w, b), SchemaError);
  Tensor w2 = random_tensor({3, 2, 3, 3}, rng);
  Tensor b2({4});
  CHECK_THROWS_AS(conv2d_forward(in, w2, b2), SchemaError);
}

TEST_CASE("convolution backward matches linearity oracles") {
  Rng rng(115);
  Tensor in = random_tensor({1, 2, 4, 4}, rng);
  Tensor w = random_tensor({3, 2, 3, 3}, rng);
  Tensor b({3});
  Tensor gout = random_tensor({1, 3, 4, 4}, rng);

  Tensor gin, gw, gb;
  conv2d_backward(in, w, gout, &gin, &gw, &gb);

  // zero upstream gradient
  Tensor zo({1, 3, 4, 4});
  Tensor zin, zw, zb;
  conv2d_backward(in, w, zo, &zin, &zw, &zb);
  for (float v : zin.data) CHECK(v == 0.0f);
  for (float v : zw.data) CHECK(v == 0.0f);
  for (float v : zb.data) CHECK(v == 0.0f);

  // bias gradient is the spatial sum per filter
  for (int f = 0; f < 3; ++f) {
    double s = 0.0;
    for (int i = 0; i < 16; ++i) s += gout[size_t(f) * 16 + size_t(i)];
    CHECK(gb[size_t(f)] == doctest::Approx(s).epsilon(1e-5));
  }

  // L = <gout, conv(in, w)> is linear; central differences are exact
  auto loss = [&](const Tensor& input, const Tensor& weights) {
    Tensor out = conv2d_forward(input, weights, b);
    double s = 0.0;
    for (size_t i = 0; i < out.data.size(); ++i)
      s += double(out[i]) * double(gout[i]);
    return s;
  };
  const double eps = 1e-2;
  for (int trial = 0; trial < 30; ++trial) {
    size_t cw = size_t(rng.uniform_int(0, int64_t(w.data.size()) - 1));
    Tensor wp = w, wm = w;
    wp[cw] += float(eps);
    wm[cw] -= float(eps);
    double fd = (loss(in, wp) - loss(in, wm)) / (2 * eps);
    CHECK(gw[cw] == doctest::Approx(fd).epsilon(2e-3));

    size_t ci = size_t(rng.uniform_int(0, int64_t(in.data.size()) - 1));
    Tensor ip = in, im = in;
    ip[ci] += float(eps);
    im[ci] -= float(eps);
    fd = (loss(ip, w) - loss(im, w)) / (2 * eps);
    CHECK(gin[ci] == doctest::Approx(fd).epsilon(2e-3));
  }
}

TEST_CASE("max pooling takes window maxima and remembers where") {
  Tensor constant({1, 1, 4, 4});
  for (auto& v : constant.data) v = 2.5f;
  std::vector<int> arg;
  Tensor out = maxpool2_forward(constant, &arg);
  CHECK(out.shape == std::vector<int>({1, 1, 2, 2}));
  for (float v : out.data) CHECK(v == 2.5f);
  CHECK(arg == std::vector<int>({0, 2, 8, 10}));  // ties go to the first cell

  Tensor rising({1, 1, 4, 4});
  std::iota(rising.data.begin(), rising.data.end(), 0.0f);
  out = maxpool2_forward(rising, &arg);
  CHECK(out.data == std::vector<float>({5, 7, 13, 15}));
  CHECK(arg == std::vector<int>({5, 7, 13, 15}));

  Rng rng(116);
  Tensor rand = random_tensor({2, 3, 4, 4}, rng);
  out = maxpool2_forward(rand, &arg);
  size_t o = 0;
  for (int n = 0; n < 2; ++n)
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < 4; y += 2)
        for (int x = 0; x < 4; x += 2) {
          const size_t base = (size_t(n) * 3 + c) * 16;
          float m = std::max(
              {rand[base + size_t(y) * 4 + x], rand[base + size_t(y) * 4 + x + 1],
               rand[base + size_t(y + 1) * 4 + x],
               rand[base + size_t(y + 1) * 4 + x + 1]});
          CHECK(out[o++] == m);
        }

  Tensor odd({1, 1, 3, 4});
  CHECK_THROWS_AS(maxpool2_forward(odd, &arg), SchemaError);

  // backward routes gradient to the recorded winner
  Tensor gout({1, 1, 2, 2});
  gout.data = {1, 2, 3, 4};
  maxpool2_forward(constant, &arg);
  Tensor gin = maxpool2_backward(gout, arg, {1, 1, 4, 4});
  CHECK(gin[0] == 1.0f);
  CHECK(gin[2] == 2.0f);
  CHECK(gin[8] == 3.0f);
  CHECK(gin[10] == 4.0f);
  double total = 0;
  for (float v : gin.data) total += v;
  CHECK(total == 10.0);
}

TEST_CASE("relu clamps and gates exactly at zero") {
  Tensor in({1, 1, 1, 4});
  in.data = {-2.0f, 0.0f, 3.0f, -0.5f};
  Tensor out = relu_forward(in);
  CHECK(out.data == std::vector<float>({0, 0, 3, 0}));
  Tensor gout({1, 1, 1, 4});
  gout.data = {5, 5, 5, 5};
  Tensor gin = relu_backward(in, gout);
  CHECK(gin.data == std::vector<float>({0, 0, 5, 0}));
}

TEST_CASE("global average pool averages and spreads back evenly") {
  Tensor constant({2, 3, 4, 4});
  for (auto& v : constant.data) v = 0.75f;
  Tensor out = global_avg_pool(constant);
  CHECK(out.shape == std::vector<int>({2, 3}));
  for (float v : out.data) CHECK(v == doctest::Approx(0.75f));

  Rng rng(117);
  Tensor rand = random_tensor({1, 2, 2, 2}, rng);
  out = global_avg_pool(rand);
  for (int c = 0; c < 2; ++c) {
    double s = 0;
    for (int i = 0; i < 4; ++i) s += rand[size_t(c) * 4 + size_t(i)];
    CHECK(out[size_t(c)] == doctest::Approx(s / 4).epsilon(1e-6));
  }

  Tensor gout({1, 2});
  gout.data = {4.0f, -8.0f};
  Tensor gin = global_avg_pool_backward(gout, {1, 2, 2, 2});
  for (int i = 0; i < 4; ++i) {
    CHECK(gin[size_t(i)] == 1.0f);
    CHECK(gin[4 + size_t(i)] == -2.0f);
  }
}

TEST_CASE("fully connected layer matches the direct multiply") {
  Rng rng(118);
  Tensor in = random_tensor({3, 5}, rng);
  Tensor w = random_tensor({4, 5}, rng);
  Tensor b = random_tensor({4}, rng);
  Tensor out = fully_connected(in, w, b);
  REQUIRE(out.shape == std::vector<int>({3, 4}));
  for (int n = 0; n < 3; ++n)
    for (int k = 0; k < 4; ++k) {
      double s = b[size_t(k)];
      for (int d = 0; d < 5; ++d)
        s += double(in[size_t(n) * 5 + size_t(d)]) *
             double(w[size_t(k) * 5 + size_t(d)]);
      CHECK(out[size_t(n) * 4 + size_t(k)] ==
            doctest::Approx(s).epsilon(1e-5));
    }

  Tensor gout = random_tensor({3, 4}, rng);
  Tensor gin, gw, gb;
  fully_connected_backward(in, w, gout, &gin, &gw, &gb);
  for (int n = 0; n < 3; ++n)
    for (int d = 0; d < 5; ++d) {
      double s = 0;
      for (int k = 0; k < 4; ++k)
        s += double(gout[size_t(n) * 4 + size_t(k)]) *
             double(w[size_t(k) * 5 + size_t(d)]);
      CHECK(gin[size_t(n) * 5 + size_t(d)] ==
            doctest::Approx(s).epsilon(1e-5));
    }
  for (int k = 0; k < 4; ++k) {
    double s = 0;
    for (int n = 0; n < 3; ++n) s += gout[size_t(n) * 4 + size_t(k)];
    CHECK(gb[size_t(k)] == doctest::Approx(s).epsilon(1e-5));
    for (int d = 0; d < 5; ++d) {
      double sw = 0;
      for (int n = 0; n < 3; ++n)
        sw += double(gout[size_t(n) * 4 + size_t(k)]) *
              double(in[size_t(n) * 5 + size_t(d)]);
      CHECK(gw[size_t(k) * 5 + size_t(d)] ==
            doctest::Approx(sw).epsilon(1e-5));
    }
  }
  CHECK_THROWS_AS(fully_connected(in, random_tensor({4, 6}, rng), b),
                  SchemaError);
}

TEST_CASE("softmax cross entropy: analytic anchors and gradient") {
  Tensor uniform({2, 5});
  Tensor grad, probs;
  double loss = softmax_cross_entropy(uniform, {0, 3}, &grad, &probs);
  CHECK(loss == doctest::Approx(std::log(5.0)).epsilon(1e-6));
  for (float p : probs.data) CHECK(p == doctest::Approx(0.2).epsilon(1e-6));

  Tensor margin({1, 5});
  margin[2] = 50.0f;  // huge margin on the true class
  loss = softmax_cross_entropy(margin, {2}, &grad, &probs);
  CHECK(loss == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(loss >= 0.0);

  Rng rng(119);
  Tensor logits = random_tensor({4, 5}, rng, -2, 2);
  std::vector<int> labels = {1, 0, 4, 2};
  loss = softmax_cross_entropy(logits, labels, &grad, &probs);
  for (int n = 0; n < 4; ++n) {
    double s = 0, gs = 0;
    for (int k = 0; k < 5; ++k) {
      s += probs[size_t(n) * 5 + size_t(k)];
      gs += grad[size_t(n) * 5 + size_t(k)];
    }
    CHECK(s == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(gs == doctest::Approx(0.0).epsilon(1e-6));
    for (int k = 0; k < 5; ++k)
      CHECK(grad[size_t(n) * 5 + size_t(k)] ==
            doctest::Approx((double(probs[size_t(n) * 5 + size_t(k)]) -
                             (labels[size_t(n)] == k ? 1 : 0)) /
                            4)
                .epsilon(1e-5));
  }

  // finite differences on the loss itself
  const double eps = 1e-3;
  for (int trial = 0; trial < 20; ++trial) {
    size_t c = size_t(rng.uniform_int(0, 19));
    Tensor lp = logits, lm = logits;
    lp[c] += float(eps);
    lm[c] -= float(eps);
    double fd = (softmax_cross_entropy(lp, labels, nullptr, nullptr) -
                 softmax_cross_entropy(lm, labels, nullptr, nullptr)) /
                (2 * eps);
    CHECK(grad[c] == doctest::Approx(fd).epsilon(2e-3));
  }

  CHECK_THROWS_AS(softmax_cross_entropy(logits, {1, 0, 4}, nullptr, nullptr),
                  SchemaError);
  CHECK_THROWS_AS(softmax_cross_entropy(logits, {1, 0, 4, 5}, nullptr, nullptr),
                  SchemaError);
}

namespace {

ModelState scalar_state() {
  ModelState state;
  for (int i = 0; i < kParamCount; ++i) {
    ParamTensor p;
    p.name = "p" + std::to_string(i);
    p.value = Tensor({1});
    p.momentum = Tensor({1});
    state.params.push_back(std::move(p));
  }
  return state;
}

Gradients scalar_grads(float first) {
  Gradients g(size_t(kParamCount), Tensor({1}));
  g[0][0] = first;
  return g;
}

}  // namespace

TEST_CASE("sgd with momentum follows the velocity recurrence") {
  ModelState state = scalar_state();
  state.params[0].value[0] = 1.0f;

  // mu = 0: plain gradient step
  sgd_momentum_step(state, scalar_grads(0.5f), 0.1, 0.0);
  CHECK(state.params[0].value[0] == doctest::Approx(0.95));

  // zero gradient, stored velocity keeps the weight moving
  state = scalar_state();
  state.params[0].value[0] = 1.0f;
  state.params[0].momentum[0] = 2.0f;
  sgd_momentum_step(state, scalar_grads(0.0f), 0.1, 0.9);
  CHECK(state.params[0].momentum[0] == doctest::Approx(1.8));
  CHECK(state.params[0].value[0] == doctest::Approx(1.0 - 0.1 * 1.8));

  // two steps on f(w) = w^2/2, hand-iterated
  state = scalar_state();
  state.params[0].value[0] = 1.0f;
  sgd_momentum_step(state, scalar_grads(1.0f), 0.1, 0.9);
  CHECK(state.params[0].value[0] == doctest::Approx(0.9));
  sgd_momentum_step(state, scalar_grads(0.9f), 0.1, 0.9);
  CHECK(state.params[0].momentum[0] == doctest::Approx(1.8));
  CHECK(state.params[0].value[0] == doctest::Approx(0.72));

  Gradients bad(size_t(kParamCount), Tensor({2}));
  CHECK_THROWS_AS(sgd_momentum_step(state, bad, 0.1, 0.9), SchemaError);
  Gradients nan_g = scalar_grads(std::nanf(""));
  CHECK_THROWS_AS(sgd_momentum_step(state, nan_g, 0.1, 0.9),
                  std::runtime_error);
}

TEST_CASE("model initialization is seeded and He-scaled") {
  SubitNetSpec spec;
  ModelState a = init_model(spec, 42);
  ModelState b = init_model(spec, 42);
  ModelState c = init_model(spec, 43);
  REQUIRE(a.params.size() == size_t(kParamCount));
  CHECK(a.params[0].value.data == b.params[0].value.data);
  CHECK(a.params[2].value.data != c.params[2].value.data);
  CHECK(a.params[0].value.shape == std::vector<int>({16, 3, 3, 3}));
  CHECK(a.params[4].value.shape == std::vector<int>({64, 32, 3, 3}));
  CHECK(a.params[kFcWeight].value.shape == std::vector<int>({5, 64}));

  for (int bias : {1, 3, 5, 7})
    for (float v : a.params[size_t(bias)].value.data) CHECK(v == 0.0f);
  for (const auto& p : a.params)
    for (float v : p.momentum.data) CHECK(v == 0.0f);

  // conv2 fan-in = 16*9 = 144
  const auto& w = a.params[2].value.data;
  double mean = 0, var = 0;
  for (float v : w) mean += v;
  mean /= double(w.size());
  for (float v : w) var += (v - mean) * (v - mean);
  var /= double(w.size());
  CHECK(std::sqrt(var) == doctest::Approx(std::sqrt(2.0 / 144)).epsilon(0.1));

  SubitNetSpec bad;
  bad.input_side = 60;  // not divisible by 8
  CHECK_THROWS_AS(init_model(bad, 1), SchemaError);
}

TEST_CASE("forward pass produces the documented shapes") {
  SubitNetSpec spec;
  ModelState state = init_model(spec, 7);
  Rng rng(120);
  Tensor input = random_tensor({2, 3, 64, 64}, rng, -0.5, 0.5);
  ForwardTrace t = forward(state, input);
  CHECK(t.conv_out[0].shape == std::vector<int>({2, 16, 64, 64}));
  CHECK(t.pool_out[0].shape == std::vector<int>({2, 16, 32, 32}));
  CHECK(t.pool_out[2].shape == std::vector<int>({2, 64, 8, 8}));
  CHECK(t.gap_out.shape == std::vector<int>({2, 64}));
  CHECK(t.logits.shape == std::vector<int>({2, 5}));
  CHECK(all_finite(t.logits));

  Tensor wrong = random_tensor({1, 3, 32, 32}, rng);
  CHECK_THROWS_AS(forward(state, wrong), SchemaError);
}

TEST_CASE("permuting classes permutes the outputs") {
  SubitNetSpec spec;
  spec.input_side = 16;
  spec.channels = {4, 6, 8};
  ModelState state = init_model(spec, 21);
  Rng rng(121);
  for (auto& v : state.params[kFcBias].value.data)
    v = float(rng.uniform(-1, 1));
  Tensor input = random_tensor({3, 3, 16, 16}, rng, -0.5, 0.5);
  Tensor base = forward(state, input).logits;

  const int perm[5] = {3, 0, 4, 1, 2};
  ModelState permuted = state;
  for (int k = 0; k < 5; ++k) {
    for (int d = 0; d < 8; ++d)
      permuted.params[kFcWeight].value[size_t(k) * 8 + size_t(d)] =
          state.params[kFcWeight].value[size_t(perm[k]) * 8 + size_t(d)];
    permuted.params[kFcBias].value[size_t(k)] =
        state.params[kFcBias].value[size_t(perm[k])];
  }
  Tensor out = forward(permuted, input).logits;
  for (int n = 0; n < 3; ++n)
    for (int k = 0; k < 5; ++k)
      CHECK(out[size_t(n) * 5 + size_t(k)] ==
            doctest::Approx(base[size_t(n) * 5 + size_t(perm[k])])
                .epsilon(1e-6));
}

TEST_CASE("whole-model gradients match central differences") {
  for (uint64_t seed : {2026ull, 8822ull}) {
    GradCheckReport report = gradient_check(seed, 1e-2, 48);
    INFO("seed ", seed, " worst ", report.worst_param, " rel ",
         report.max_rel_error);
    CHECK(report.pass);
    CHECK(report.checked >= 8 * 5);
  }
  GradCheckReport broken = gradient_check(2026, 1e-2, 48, true);
  CHECK(!broken.pass);
  CHECK(broken.max_rel_error > 0.5);
}

TEST_CASE("zero input still yields finite gradients") {
  SubitNetSpec spec;
  spec.input_side = 8;
  spec.channels = {3, 4, 5};
  ModelState state = init_model(spec, 3);
  Tensor input({2, 3, 8, 8});
  ForwardTrace trace = forward(state, input);
  Gradients grads;
  double loss = backward(state, input, trace, {0, 4}, &grads);
  CHECK(std::isfinite(loss));
  for (const auto& g : grads) CHECK(all_finite(g));
}

TEST_CASE("checkpoints round-trip exactly") {
  std::string dir = fixtures::temp_dir("nnet_ckpt");
  SubitNetSpec spec;
  spec.input_side = 16;
  spec.channels = {4, 6, 8};
  ModelState state = init_model(spec, 99);
  Rng rng(122);
  for (auto& v : state.params[3].momentum.data) v = float(rng.uniform(-1, 1));
  state.iteration = 12345;

  const std::string path = dir + "/model.subt";
  save_model(path, state);
  ModelState back = load_model(path);
  CHECK(back.spec.input_side == 16);
  CHECK(back.spec.channels == spec.channels);
  CHECK(back.iteration == 12345);
  REQUIRE(back.params.size() == state.params.size());
  for (size_t p = 0; p < state.params.size(); ++p) {
    CHECK(back.params[p].name == state.params[p].name);
    CHECK(back.params[p].value.shape == state.params[p].value.shape);
    CHECK(back.params[p].value.data == state.params[p].value.data);
    CHECK(back.params[p].momentum.data == state.params[p].momentum.data);
  }
}

TEST_CASE("checkpoint reader rejects damage") {
  std::string dir = fixtures::temp_dir("nnet_badckpt");
  SubitNetSpec spec;
  spec.input_side = 8;
  spec.channels = {2, 3, 4};
  ModelState state = init_model(spec, 5);
  const std::string good = dir + "/good.subt";
  save_model(good, state);
  std::string bytes = read_text_file(good);

  write_text_file(dir + "/magic.subt", "JUNK" + bytes.substr(4));
  CHECK_THROWS_AS(load_model(dir + "/magic.subt"), FormatError);
  write_text_file(dir + "/trunc.subt", bytes.substr(0, bytes.size() / 2));
  CHECK_THROWS_AS(load_model(dir + "/trunc.subt"), FormatError);
  write_text_file(dir + "/trail.subt", bytes + "x");
  CHECK_THROWS_AS(load_model(dir + "/trail.subt"), FormatError);
  CHECK_THROWS_AS(load_model(dir + "/absent.subt"), IoError);

  ModelState poisoned = state;
  poisoned.params[2].value[0] = std::nanf("");
  save_model(dir + "/nan.subt", poisoned);
  CHECK_THROWS_AS(load_model(dir + "/nan.subt"), FormatError);
}
