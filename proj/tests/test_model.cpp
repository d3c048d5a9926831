// Copyright (C) 2026 the flowsr authors
// SPDX-License-Identifier: Apache-2.0
#include "flowsr/model.hpp"

#include <doctest.h>

#include <cmath>

#include "flowsr/autodiff.hpp"
#include "flowsr/common.hpp"
#include "flowsr/rng.hpp"
#include "test_util.hpp"

using namespace flowsr;
namespace md = flowsr::model;
namespace ad = flowsr::autodiff;
namespace ops = flowsr::autodiff::ops;
using testutil::random_tensor;

namespace {

md::ModelConfig tiny_config() {
  md::ModelConfig cfg;
  cfg.backbone = md::Backbone::mini_rmfsr;
  cfg.channels = {2, 2, 4, 4, 4};
  cfg.enc_dilations = {1, 2, 4, 8, 16};
  cfg.tcn_dilations = {1, 2, 4, 8};
  cfg.embed_dim = 16;
  return cfg;
}

}  // namespace

TEST_CASE("forward preserves the spectrogram shape") {
  Rng rng(1);
  for (int K : {17, 33}) {
    md::Model net(tiny_config(), 3);
    Tensor x = random_tensor({2, K, 7}, rng, -0.5, 0.5);
    Tensor y = random_tensor({2, K, 7}, rng, -0.5, 0.5);
    Tensor out = net.forward(x, y, 0.5, 0.25);
    CHECK(out.shape() == x.shape());
  }
  md::ModelConfig mcfg;
  mcfg.backbone = md::Backbone::mlp;
  mcfg.mlp_hidden = 8;
  mcfg.embed_dim = 16;
  md::Model mlp(mcfg, 3);
  Tensor x = random_tensor({2, 12, 5}, rng);
  Tensor out = mlp.forward(x, x, 0.3, 0.3);
  CHECK(out.shape() == x.shape());
}

TEST_CASE("time embedding is deterministic and t-sensitive") {
  md::Model net(tiny_config(), 7);
  auto e1 = net.time_embedding(Tensor::scalar(0.1), Tensor::scalar(0.1));
  auto e2 = net.time_embedding(Tensor::scalar(0.1), Tensor::scalar(0.1));
  CHECK(e1.size() == 16);  // embed_dim of the tiny config
  for (int i = 0; i < e1.size(); ++i)
    CHECK(e1.values()[static_cast<size_t>(i)] ==
          e2.values()[static_cast<size_t>(i)]);

  auto e3 = net.time_embedding(Tensor::scalar(0.9), Tensor::scalar(0.9));
  double l2 = 0.0;
  for (int i = 0; i < e1.size(); ++i) {
    const double d = e1.values()[static_cast<size_t>(i)] -
                     e3.values()[static_cast<size_t>(i)];
    l2 += d * d;
  }
  CHECK(l2 > 0.0);

  // full-size embedding has the contracted 128 entries
  md::ModelConfig full = tiny_config();
  full.embed_dim = 128;
  md::Model net128(full, 7);
  CHECK(net128.time_embedding(Tensor::scalar(0.5), Tensor::scalar(0.5)).size() ==
        128);
}

TEST_CASE("zeroed network passes the head bias through") {
  md::Model net(tiny_config(), 2);
  for (auto& p : net.params())
    for (auto& v : p.value.values()) v = 0.0;
  // head bias is the last parameter pair's .b
  for (auto& p : net.params())
    if (p.name == "head.b") {
      p.value.values()[0] = 0.25;
      p.value.values()[1] = -0.5;
    }
  Rng rng(3);
  Tensor x = random_tensor({2, 17, 5}, rng);
  Tensor out = net.forward(x, x, 0.7, 0.1);
  const int K = 17, N = 5;
  for (int k = 0; k < K; ++k)
    for (int n = 0; n < N; ++n) {
      CHECK(out.values()[static_cast<size_t>(k * N + n)] == 0.25);
      CHECK(out.values()[static_cast<size_t>((K + k) * N + n)] == -0.5);
    }
}

TEST_CASE("offline forward is causal in time, exactly") {
  Rng rng(4);
  md::Model net(tiny_config(), 5);
  const int K = 17, N = 12, cut = 6;
  Tensor x = random_tensor({2, K, N}, rng, -0.5, 0.5);
  Tensor y = random_tensor({2, K, N}, rng, -0.5, 0.5);
  Tensor base = net.forward(x, y, 0.4, 0.2);

  Tensor x2 = x.detached_copy();
  Tensor y2 = y.detached_copy();
  for (int c = 0; c < 2; ++c)
    for (int k = 0; k < K; ++k)
      for (int n = cut + 1; n < N; ++n) {
        x2.values()[static_cast<size_t>((c * K + k) * N + n)] += 3.0;
        y2.values()[static_cast<size_t>((c * K + k) * N + n)] -= 2.0;
      }
  Tensor pert = net.forward(x2, y2, 0.4, 0.2);
  for (int c = 0; c < 2; ++c)
    for (int k = 0; k < K; ++k)
      for (int n = 0; n <= cut; ++n)
        CHECK(base.values()[static_cast<size_t>((c * K + k) * N + n)] ==
              pert.values()[static_cast<size_t>((c * K + k) * N + n)]);
}

TEST_CASE("streaming matches offline frame by frame") {
  Rng rng(5);
  md::Model net(tiny_config(), 6);
  const int K = 17, N = 40;
  Tensor x = random_tensor({2, K, N}, rng, -0.5, 0.5);
  Tensor y = random_tensor({2, K, N}, rng, -0.5, 0.5);
  const double t = 0.8, r = 0.3;
  Tensor offline = net.forward(x, y, t, r);

  auto state = net.make_state(K);
  double worst = 0.0;
  std::vector<double> first_frame_out;
  for (int n = 0; n < N; ++n) {
    Tensor xf({2, K, 1}), yf({2, K, 1});
    for (int c = 0; c < 2; ++c)
      for (int k = 0; k < K; ++k) {
        xf.values()[static_cast<size_t>(c * K + k)] =
            x.values()[static_cast<size_t>((c * K + k) * N + n)];
        yf.values()[static_cast<size_t>(c * K + k)] =
            y.values()[static_cast<size_t>((c * K + k) * N + n)];
      }
    Tensor of = net.forward_streaming(xf, yf, t, r, state);
    if (n == 0) first_frame_out = of.values();
    for (int c = 0; c < 2; ++c)
      for (int k = 0; k < K; ++k)
        worst = std::max(
            worst,
            std::abs(of.values()[static_cast<size_t>(c * K + k)] -
                     offline.values()[static_cast<size_t>((c * K + k) * N + n)]));
  }
  CHECK(worst < 1e-5);

  // reset + replay reproduces the first frame exactly
  state.reset();
  Tensor xf({2, K, 1}), yf({2, K, 1});
  for (int c = 0; c < 2; ++c)
    for (int k = 0; k < K; ++k) {
      xf.values()[static_cast<size_t>(c * K + k)] =
          x.values()[static_cast<size_t>((c * K + k) * N)];
      yf.values()[static_cast<size_t>(c * K + k)] =
          y.values()[static_cast<size_t>((c * K + k) * N)];
    }
  Tensor of = net.forward_streaming(xf, yf, t, r, state);
  for (size_t i = 0; i < first_frame_out.size(); ++i)
    CHECK(of.values()[i] == first_frame_out[i]);
}

TEST_CASE("gradient reaches every trainable parameter") {
  Rng rng(6);
  md::Model net(tiny_config(), 8);
  const int K = 17, N = 8;
  Tensor x = random_tensor({2, K, N}, rng, -0.5, 0.5);
  Tensor y = random_tensor({2, K, N}, rng, -0.5, 0.5);
  Tensor target = random_tensor({2, K, N}, rng, -0.5, 0.5);

  ad::Tape tape;
  Tensor loss;
  {
    ad::TapeScope scope(tape);
    Tensor out = net.forward(x, y, 0.6, 0.2);
    Tensor d = ops::sub(out, target);
    loss = ops::mean(ops::mul(d, d));
  }
  auto params = net.trainable_tensors();
  auto result = tape.gradients(loss, params);

  size_t idx = 0;
  for (const auto& p : net.params()) {
    if (!p.trainable) continue;
    INFO("param ", p.name);
    CHECK(result.in_record[idx]);
    double mag = 0.0;
    for (double g : result.grads[idx].values()) mag += std::abs(g);
    CHECK(mag > 0.0);
    ++idx;
  }
}

TEST_CASE("forward output stays finite for bounded inputs at init") {
  Rng rng(7);
  md::Model net(tiny_config(), 9);
  Tensor x = random_tensor({2, 17, 10}, rng, -1.0, 1.0);
  Tensor y = random_tensor({2, 17, 10}, rng, -1.0, 1.0);
  Tensor out = net.forward(x, y, 1.0, 0.0);
  for (double v : out.values()) CHECK(std::isfinite(v));
}

TEST_CASE("forward rejects bad input") {
  Rng rng(8);
  md::Model net(tiny_config(), 10);
  Tensor x = random_tensor({2, 17, 5}, rng);
  Tensor y = random_tensor({2, 17, 6}, rng);
  CHECK_THROWS_AS((void)net.forward(x, y, 0.5, 0.5), Error);

  Tensor bad = x.detached_copy();
  bad.values()[3] = std::nan("");
  CHECK_THROWS_AS((void)net.forward(bad, bad, 0.5, 0.5), Error);
}

TEST_CASE("closed-form accounting matches the instantiated model") {
  dsp::StftConfig stft;
  for (auto cfg : {tiny_config()}) {
    md::Model net(cfg, 11);
    auto rep = md::count_params_macs(cfg, stft);
    CHECK(rep.params == net.param_count());
  }
  md::ModelConfig mcfg;
  mcfg.backbone = md::Backbone::mlp;
  mcfg.mlp_hidden = 8;
  mcfg.embed_dim = 16;
  md::Model mlp(mcfg, 12);
  auto rep = md::count_params_macs(mcfg, stft);
  CHECK(rep.params == mlp.param_count());

  // hand-computed closed form for the mlp backbone
  const int E = 16, F = 8, H = 8, K = stft.bins();
  const int64_t expect_params =
      (2 * F) + (E * E + E) +            // embeddings
      (4 * E + 4) + (H * 4 + H) + 2 * H +  // input proj, conv1, snake1
      (H * E + H) + (H * H + H) + 2 * H +  // mid proj, conv2, snake2
      (2 * H + 2);                         // head
  CHECK(rep.params == expect_params);
  const double expect_macs = static_cast<double>(K) * (H * 4 + H * H + 2 * H);
  CHECK(rep.macs_per_frame == expect_macs);
}

TEST_CASE("accounting reports the paper-scale row within tolerance") {
  md::ModelConfig cfg;
  cfg.channels = {64, 64, 128, 256, 256};
  dsp::StftConfig stft;
  auto rep = md::count_params_macs(cfg, stft);
  // Table-style consistency: 7.8 M params within +-20%
  CHECK(rep.params >= static_cast<int64_t>(7.8e6 * 0.8));
  CHECK(rep.params <= static_cast<int64_t>(7.8e6 * 1.2));
  CHECK(rep.latency_ms == doctest::Approx(20.0));
}

TEST_CASE("receptive field matches the analytic kernel/dilation extent") {
  md::ModelConfig cfg;  // desk defaults
  dsp::StftConfig stft;
  auto rep = md::count_params_macs(cfg, stft);
  int expect = 1;
  for (int d : cfg.enc_dilations) expect += 2 * (cfg.enc_kernel_t - 1) * d;
  for (int d : cfg.tcn_dilations) expect += (cfg.tcn_kernel_t - 1) * d;
  expect += 5 * ((cfg.dec_kernel_t - 1) + (cfg.enc_kernel_t - 1));
  CHECK(rep.receptive_field_frames == expect);
  const double hop_s = stft.hop_size() / static_cast<double>(stft.sample_rate);
  const double win_s =
      stft.window_size() / static_cast<double>(stft.sample_rate);
  CHECK(rep.context_seconds ==
        doctest::Approx((expect - 1) * hop_s + win_s));
}
