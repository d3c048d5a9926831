// Copyright (C) 2026 the flowsr authors
// SPDX-License-Identifier: Apache-2.0
#include "flowsr/flowcore.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "flowsr/autodiff.hpp"
#include "flowsr/common.hpp"
#include "flowsr/rng.hpp"

using namespace flowsr;
namespace flow = flowsr::flow;
namespace ops = flowsr::autodiff::ops;

namespace {

dsp::ComplexSpectrogram const_spec(int K, int N, std::complex<double> v) {
  dsp::ComplexSpectrogram s(K, N);
  for (auto& z : s.data) z = v;
  return s;
}

dsp::ComplexSpectrogram random_spec(int K, int N, Rng& rng, double amp = 1.0) {
  dsp::ComplexSpectrogram s(K, N);
  for (auto& z : s.data) z = {rng.uniform(-amp, amp), rng.uniform(-amp, amp)};
  return s;
}

}  // namespace

TEST_CASE("flow sample boundaries") {
  Rng rng(1);
  flow::FlowConfig cfg;
  auto x0 = random_spec(5, 4, rng);
  auto y = random_spec(5, 4, rng);
  auto eps = random_spec(5, 4, rng);

  SUBCASE("t=1 centers on y with sigma_max") {
    auto s = flow::make_flow_sample(x0, y, 1.0, 1.0, cfg, eps);
    CHECK(s.sigma == doctest::Approx(0.3).epsilon(1e-15));
    for (size_t i = 0; i < y.data.size(); ++i)
      CHECK(std::abs(s.mu.data[i] - y.data[i]) < 1e-15);
  }
  SUBCASE("t=0 centers on x0 with sigma_min") {
    auto s = flow::make_flow_sample(x0, y, 0.0, 0.0, cfg, eps);
    CHECK(s.sigma == doctest::Approx(1e-8).epsilon(1e-12));
    for (size_t i = 0; i < x0.data.size(); ++i)
      CHECK(std::abs(s.mu.data[i] - x0.data[i]) < 1e-15);
  }
  SUBCASE("midpoint with sigma_min=0") {
    flow::FlowConfig mid = cfg;
    mid.sigma_min = 0.0;
    auto s = flow::make_flow_sample(x0, y, 0.5, 0.5, mid, eps);
    for (size_t i = 0; i < x0.data.size(); ++i) {
      const auto want =
          0.5 * (x0.data[i] + y.data[i]) + 0.15 * eps.data[i];
      CHECK(std::abs(s.xt.data[i] - want) < 1e-15);
    }
  }
  SUBCASE("shape mismatch is an error") {
    auto bad = random_spec(4, 4, rng);
    CHECK_THROWS_AS(
        (void)flow::make_flow_sample(x0, bad, 0.5, 0.5, cfg, eps), Error);
  }
}

TEST_CASE("velocity target substitutions") {
  flow::FlowConfig cfg;
  cfg.sigma_min = 0.0;
  auto x0 = const_spec(3, 2, {1.0, 0.0});
  auto y = const_spec(3, 2, {0.0, 0.0});

  SUBCASE("eps=0 gives -(x0 - y)") {
    auto s = flow::make_flow_sample(x0, y, 0.5, 0.5, cfg,
                                    const_spec(3, 2, {0.0, 0.0}));
    auto v = flow::velocity_target(s);
    for (auto& z : v.data) CHECK(z == std::complex<double>(-1.0, 0.0));
  }
  SUBCASE("eps=1 adds (sigma_max - sigma_min)") {
    auto s = flow::make_flow_sample(x0, y, 0.5, 0.5, cfg,
                                    const_spec(3, 2, {1.0, 0.0}));
    auto v = flow::velocity_target(s);
    for (auto& z : v.data)
      CHECK(std::abs(z - std::complex<double>(-0.7, 0.0)) < 1e-15);
  }
  SUBCASE("clean input is a fixed point") {
    auto s = flow::make_flow_sample(x0, x0, 0.5, 0.5, cfg,
                                    const_spec(3, 2, {0.0, 0.0}));
    auto v = flow::velocity_target(s);
    for (auto& z : v.data) CHECK(z == std::complex<double>(0.0, 0.0));
  }
}

TEST_CASE("mse loss basics") {
  Rng rng(2);
  auto a = random_spec(6, 5, rng);

  CHECK(flow::mse_loss(a, a) == 0.0);

  auto b = a;
  const double delta = 0.37;
  for (auto& z : b.data) z += std::complex<double>(delta, delta);
  CHECK(flow::mse_loss(b, a) == doctest::Approx(delta * delta).epsilon(1e-12));

  auto c = random_spec(6, 5, rng);
  CHECK(flow::mse_loss(a, c) > 0.0);
}

TEST_CASE("dp conversion") {
  Rng rng(3);
  flow::FlowConfig cfg;
  cfg.sigma_min = 0.0;
  auto x0 = random_spec(4, 3, rng);
  auto y = random_spec(4, 3, rng);
  auto zero = const_spec(4, 3, {0.0, 0.0});

  SUBCASE("xhat = xt gives zero velocity") {
    auto s = flow::make_flow_sample(x0, y, 0.6, 0.6, cfg, zero);
    auto conv = flow::dp_to_velocity(s.xt, s.xt, s.t);
    CHECK_FALSE(conv.clamped);
    for (auto& z : conv.v.data) CHECK(z == std::complex<double>(0.0, 0.0));
  }
  SUBCASE("perfect prediction on the noise-free path matches Eq. (6)") {
    for (double t : {0.2, 0.5, 0.9, 1.0}) {
      auto s = flow::make_flow_sample(x0, y, t, t, cfg, zero);
      auto conv = flow::dp_to_velocity(x0, s.xt, t);
      auto v = flow::velocity_target(s);
      for (size_t i = 0; i < v.data.size(); ++i)
        CHECK(std::abs(conv.v.data[i] - v.data[i]) < 1e-12);
    }
  }
  SUBCASE("t=1 with x1=y") {
    auto s = flow::make_flow_sample(x0, y, 1.0, 1.0, cfg, zero);
    auto xhat = random_spec(4, 3, rng);
    auto conv = flow::dp_to_velocity(xhat, s.xt, 1.0);
    for (size_t i = 0; i < conv.v.data.size(); ++i)
      CHECK(std::abs(conv.v.data[i] - (y.data[i] - xhat.data[i])) < 1e-15);
  }
  SUBCASE("tiny t clamps and flags") {
    auto xhat = random_spec(4, 3, rng);
    auto conv = flow::dp_to_velocity(xhat, x0, 1e-6);
    CHECK(conv.clamped);
    for (auto& z : conv.v.data) CHECK(std::isfinite(z.real()));
  }
}

TEST_CASE("imf prediction") {
  Rng rng(4);
  auto u = random_spec(4, 3, rng);
  auto j = random_spec(4, 3, rng);

  SUBCASE("r=t collapses to u exactly") {
    auto v = flow::imf_prediction(u, j, 0.7, 0.7);
    for (size_t i = 0; i < u.data.size(); ++i)
      CHECK(v.data[i] == u.data[i]);
  }
  SUBCASE("zero jvp collapses to u") {
    auto v = flow::imf_prediction(u, const_spec(4, 3, {0, 0}), 0.7, 0.2);
    for (size_t i = 0; i < u.data.size(); ++i)
      CHECK(v.data[i] == u.data[i]);
  }
  SUBCASE("linear toy network matches the hand-derived chain rule") {
    // u(x, r, t) = A x (per channel); JVP along [v, 0, 1] is A v
    const double A[2][2] = {{0.8, -0.3}, {0.5, 1.1}};
    Tensor At({2, 2}, {A[0][0], A[1][0], A[0][1], A[1][1]});  // transpose
    auto xt = random_spec(2, 1, rng);
    auto vdir = random_spec(2, 1, rng);
    const double t = 0.8, r = 0.25;

    auto f = [&](std::vector<Tensor>& in) {
      // in: x [2ch, 2bins], r, t scalars (unused by the linear net)
      return ops::matmul(in[0], At);
    };
    const Tensor x_in = flow::spec_to_tensor(xt).reshaped({2, 2});
    const Tensor v_in = flow::spec_to_tensor(vdir).reshaped({2, 2});
    auto jr = autodiff::jvp(
        f, {x_in, Tensor::scalar(r), Tensor::scalar(t)},
        {v_in, Tensor(), Tensor::scalar(1.0)});

    auto like = xt;
    auto u_spec = flow::tensor_to_spec(jr.value.reshaped({2, 2, 1}), like);
    auto j_spec = flow::tensor_to_spec(jr.tangent.reshaped({2, 2, 1}), like);
    auto V = flow::imf_prediction(u_spec, j_spec, t, r);

    for (int k = 0; k < 2; ++k) {
      std::complex<double> want{0.0, 0.0};
      for (int l = 0; l < 2; ++l)
        want += A[k][l] * (xt.at(l, 0) + (t - r) * vdir.at(l, 0));
      CHECK(std::abs(V.at(k, 0) - want) < 1e-12);
    }
  }
}

TEST_CASE("imf loss degenerates to the velocity loss at r=t, bit for bit") {
  Rng rng(5);
  flow::FlowConfig cfg;
  for (int trial = 0; trial < 10; ++trial) {
    auto x0 = random_spec(8, 6, rng);
    auto y = random_spec(8, 6, rng);
    const double t = rng.uniform(0.05, 1.0);
    auto s = flow::make_flow_sample(x0, y, t, t, cfg, random_spec(8, 6, rng));
    auto xhat = random_spec(8, 6, rng);

    auto u = flow::x_to_u(xhat, s.xt, s.t).v;
    auto V = flow::imf_prediction(u, random_spec(8, 6, rng), s.t, s.r);
    const double imf = flow::imf_loss(V, flow::velocity_target(s));
    const double ref = flow::fm_velocity_loss(
        flow::dp_to_velocity(xhat, s.xt, s.t).v, s);
    CHECK(imf == ref);
  }
}

TEST_CASE("path consistency: samples lie on one line per bin") {
  Rng rng(6);
  flow::FlowConfig cfg;
  auto x0 = random_spec(5, 4, rng);
  auto y = random_spec(5, 4, rng);
  auto eps = random_spec(5, 4, rng);

  auto s1 = flow::make_flow_sample(x0, y, 0.2, 0.2, cfg, eps);
  auto s2 = flow::make_flow_sample(x0, y, 0.65, 0.65, cfg, eps);
  auto s3 = flow::make_flow_sample(x0, y, 0.9, 0.9, cfg, eps);

  for (size_t i = 0; i < x0.data.size(); ++i) {
    const auto slope12 = (s1.xt.data[i] - s2.xt.data[i]) / (s1.t - s2.t);
    const auto slope13 = (s1.xt.data[i] - s3.xt.data[i]) / (s1.t - s3.t);
    CHECK(std::abs(slope12 - slope13) < 1e-12);
  }
}

TEST_CASE("t sampler Monte Carlo oracle") {
  Rng rng(7);
  flow::FlowConfig cfg;
  double acc = 0.0;
  const int draws = 1000000;
  for (int i = 0; i < draws; ++i) acc += flow::sample_t(cfg, rng);
  acc /= draws;
  CHECK(acc >= 0.57);
  CHECK(acc <= 0.60);

  flow::FlowConfig uni = cfg;
  uni.t_sampler = flow::TSampler::uniform;
  acc = 0.0;
  for (int i = 0; i < 200000; ++i) acc += flow::sample_t(uni, rng);
  CHECK(acc / 200000 == doctest::Approx(0.5).epsilon(0.01));
}

TEST_CASE("r sampler Monte Carlo oracles") {
  Rng rng(8);
  const double t = 0.83;

  SUBCASE("gamma=1 makes r uniform on (0, t)") {
    double acc = 0.0;
    const int draws = 100000;
    for (int i = 0; i < draws; ++i) acc += flow::sample_r(t, 1.0, 0.0, rng);
    CHECK(acc / draws == doctest::Approx(t / 2.0).epsilon(0.02));
  }
  SUBCASE("gamma=0.05 concentrates on small spans") {
    std::vector<double> spans;
    for (int i = 0; i < 100000; ++i)
      spans.push_back((t - flow::sample_r(t, 0.05, 0.0, rng)) / t);
    std::nth_element(spans.begin(), spans.begin() + spans.size() / 2,
                     spans.end());
    CHECK(spans[spans.size() / 2] < 0.05);
  }
  SUBCASE("r never exceeds t") {
    Rng r2(9);
    for (int i = 0; i < 100000; ++i) {
      const double tt = flow::sample_t(flow::FlowConfig{}, r2);
      const double rr = flow::sample_r(tt, 0.3, 0.5, r2);
      REQUIRE(rr <= tt);
    }
  }
  SUBCASE("rho=1 forces r=t") {
    for (int i = 0; i < 100; ++i) CHECK(flow::sample_r(t, 0.5, 1.0, rng) == t);
  }
}

TEST_CASE("training schedules") {
  const int E = 100;
  CHECK(flow::ratio_schedule(0, E) == doctest::Approx(0.747).epsilon(1e-3));
  CHECK(flow::ratio_schedule(E, E) == doctest::Approx(0.253).epsilon(1e-3));
  CHECK(flow::gamma_schedule(0, E) == doctest::Approx(0.05).epsilon(1e-12));
  CHECK(flow::gamma_schedule(E, E) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(flow::gamma_schedule(E / 2, E) == doctest::Approx(0.525).epsilon(1e-12));

  double prev_rho = 1.0, prev_gamma = 0.0;
  for (int e = 0; e <= E; ++e) {
    const double rho = flow::ratio_schedule(e, E);
    const double gamma = flow::gamma_schedule(e, E);
    CHECK(rho <= prev_rho + 1e-15);
    CHECK(gamma >= prev_gamma - 1e-15);
    CHECK(rho >= 0.25);
    CHECK(rho <= 0.75);
    CHECK(gamma >= 0.05);
    CHECK(gamma <= 1.0);
    prev_rho = rho;
    prev_gamma = gamma;
  }
}

TEST_CASE("spec/tensor round trip") {
  Rng rng(10);
  auto s = random_spec(7, 5, rng);
  s.sample_rate = 16000;
  s.window = 320;
  s.hop = 160;
  auto t = flow::spec_to_tensor(s);
  CHECK(t.shape() == std::vector<int>{2, 7, 5});
  auto back = flow::tensor_to_spec(t, s);
  for (size_t i = 0; i < s.data.size(); ++i) CHECK(back.data[i] == s.data[i]);
}
