// Copyright (C) 2026 the flowsr authors
// SPDX-License-Identifier: Apache-2.0
#include "flowsr/sampler.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

#include "flowsr/common.hpp"
#include "flowsr/rng.hpp"

using namespace flowsr;
namespace sp = flowsr::sampler;

namespace {

dsp::ComplexSpectrogram random_spec(int K, int N, Rng& rng, double amp = 0.5) {
  dsp::ComplexSpectrogram s(K, N);
  for (auto& z : s.data) z = {rng.uniform(-amp, amp), rng.uniform(-amp, amp)};
  return s;
}

model::ModelConfig tiny_net_config() {
  model::ModelConfig cfg;
  cfg.channels = {2, 2, 4, 4, 4};
  cfg.embed_dim = 16;
  return cfg;
}

dsp::StftConfig tiny_stft() {
  dsp::StftConfig cfg;
  cfg.sample_rate = 1600;  // 32-sample window, 17 bins
  return cfg;
}

}  // namespace

TEST_CASE("euler on the oracle constant field is exact at any NFE") {
  Rng rng(1);
  auto x0 = random_spec(9, 6, rng);
  auto y = random_spec(9, 6, rng);
  dsp::ComplexSpectrogram u(9, 6);
  for (size_t i = 0; i < u.data.size(); ++i)
    u.data[i] = y.data[i] - x0.data[i];

  auto field = [&u](const dsp::ComplexSpectrogram&, double, double) {
    return u;
  };

  std::vector<dsp::ComplexSpectrogram> results;
  for (int nfe : {1, 2, 4, 8}) {
    auto res = sp::euler_integrate(y, field, nfe);
    CHECK(res.evals == nfe);
    double worst = 0.0;
    for (size_t i = 0; i < x0.data.size(); ++i)
      worst = std::max(worst, std::abs(res.x0.data[i] - x0.data[i]));
    INFO("nfe ", nfe);
    CHECK(worst < 1e-12);
    results.push_back(res.x0);
  }
  for (size_t r = 1; r < results.size(); ++r)
    for (size_t i = 0; i < results[0].data.size(); ++i)
      CHECK(std::abs(results[r].data[i] - results[0].data[i]) < 1e-12);
}

TEST_CASE("euler rejects NFE=0 and non-finite states") {
  Rng rng(2);
  auto y = random_spec(5, 4, rng);
  auto field = [](const dsp::ComplexSpectrogram& x, double, double) {
    auto u = x;
    for (auto& z : u.data) z = {std::nan(""), 0.0};
    return u;
  };
  CHECK_THROWS_AS(
      (void)sp::euler_integrate(y, [](const auto& x, double, double) { return x; }, 0),
      Error);
  CHECK_THROWS_AS((void)sp::euler_integrate(y, field, 2), Error);
}

TEST_CASE("dp-imf at NFE=1 collapses to the data prediction") {
  Rng rng(3);
  model::Model net(tiny_net_config(), 4);
  auto y = random_spec(17, 6, rng);

  sp::SamplerConfig cfg;
  cfg.nfe = 1;
  cfg.mode = flow::LossMode::dp_imf;
  flow::FlowConfig fcfg;

  Rng sample_rng(55);
  auto res = sp::euler_sample(y, net, cfg, fcfg, sample_rng);
  CHECK(res.evals == 1);
  CHECK(res.clamp_events == 0);

  // replay the same prior draw and evaluate the network directly
  Rng replay(55);
  auto eps = dsp::spectral_noise(17, 6, fcfg.noise_color, replay);
  auto x1 = y;
  for (size_t i = 0; i < x1.data.size(); ++i)
    x1.data[i] += fcfg.sigma_max * eps.data[i];
  Tensor xhat = net.forward(flow::spec_to_tensor(x1), flow::spec_to_tensor(y),
                            1.0, 0.0);
  auto want = flow::tensor_to_spec(xhat, y);
  double worst = 0.0;
  for (size_t i = 0; i < want.data.size(); ++i)
    worst = std::max(worst, std::abs(res.x0.data[i] - want.data[i]));
  CHECK(worst < 1e-12);
}

TEST_CASE("sampling is deterministic given the seed and counts evaluations") {
  Rng rng(5);
  model::Model net(tiny_net_config(), 6);
  auto y = random_spec(17, 5, rng);
  sp::SamplerConfig cfg;
  cfg.nfe = 4;
  cfg.mode = flow::LossMode::dp;
  flow::FlowConfig fcfg;

  Rng r1(9), r2(9);
  auto a = sp::euler_sample(y, net, cfg, fcfg, r1);
  auto b = sp::euler_sample(y, net, cfg, fcfg, r2);
  CHECK(a.evals == 4);
  CHECK(a.clamp_events == 0);  // uniform grid never evaluates at t=0
  for (size_t i = 0; i < a.x0.data.size(); ++i)
    REQUIRE(a.x0.data[i] == b.x0.data[i]);
}

TEST_CASE("zero-flow restore chain is the identity up to the transform") {
  // x(t) frozen at x1 = y with sigma = 0: the output should match the
  // compress/istft round trip of the input
  Rng rng(6);
  const auto stft_cfg = tiny_stft();
  std::vector<double> x(static_cast<size_t>(stft_cfg.sample_rate / 2));
  for (size_t i = 0; i < x.size(); ++i)
    x[i] = 0.7 * std::sin(2.0 * std::numbers::pi * 220.0 *
                          static_cast<double>(i) / stft_cfg.sample_rate) +
           0.1 * rng.uniform(-1.0, 1.0);

  const auto y = dsp::compress(dsp::stft(x, stft_cfg), stft_cfg.compression);
  auto zero_field = [](const dsp::ComplexSpectrogram& s, double, double) {
    auto u = s;
    for (auto& z : u.data) z = {0.0, 0.0};
    return u;
  };
  auto res = sp::euler_integrate(y, zero_field, 4);
  auto out = dsp::istft(dsp::decompress(res.x0, stft_cfg.compression),
                        stft_cfg);
  out.resize(x.size());

  auto roundtrip = dsp::istft(
      dsp::decompress(dsp::compress(dsp::stft(x, stft_cfg),
                                    stft_cfg.compression),
                      stft_cfg.compression),
      stft_cfg);
  roundtrip.resize(x.size());

  double worst = 0.0;
  for (size_t i = 0; i < x.size(); ++i)
    worst = std::max(worst, std::abs(out[i] - roundtrip[i]));
  CHECK(worst < 1e-5);
}

TEST_CASE("streaming restoration equals offline restoration") {
  Rng rng(7);
  model::Model net(tiny_net_config(), 8);
  const auto stft_cfg = tiny_stft();
  std::vector<double> audio(static_cast<size_t>(stft_cfg.sample_rate / 2));
  for (size_t i = 0; i < audio.size(); ++i)
    audio[i] = 0.4 * std::sin(2.0 * std::numbers::pi * 150.0 *
                              static_cast<double>(i) / stft_cfg.sample_rate) +
               0.05 * rng.uniform(-1.0, 1.0);

  for (auto mode : {flow::LossMode::dp, flow::LossMode::dp_imf}) {
    sp::SamplerConfig cfg;
    cfg.nfe = 2;
    cfg.mode = mode;
    flow::FlowConfig fcfg;
    Rng r1(11), r2(11);
    auto offline = sp::restore(audio, stft_cfg.sample_rate, net, stft_cfg,
                               fcfg, cfg, r1);
    auto streamed = sp::restore_streaming(audio, stft_cfg.sample_rate, net,
                                          stft_cfg, fcfg, cfg, r2);
    REQUIRE(offline.samples.size() == streamed.samples.size());
    double worst = 0.0;
    for (size_t i = 0; i < offline.samples.size(); ++i)
      worst = std::max(worst,
                       std::abs(offline.samples[i] - streamed.samples[i]));
    INFO("mode ", flow::to_string(mode));
    CHECK(worst < 1e-4);
    const int frames = dsp::stft(audio, stft_cfg).frames;
    CHECK(streamed.evals == offline.evals * frames);
  }
}

TEST_CASE("restore rejects a sample-rate mismatch") {
  model::Model net(tiny_net_config(), 9);
  std::vector<double> audio(1600, 0.1);
  sp::SamplerConfig cfg;
  flow::FlowConfig fcfg;
  Rng rng(1);
  CHECK_THROWS_AS((void)sp::restore(audio, 8000, net, tiny_stft(), fcfg, cfg, rng),
                  Error);
}

TEST_CASE("restore output is bounded after the soft clip") {
  Rng rng(10);
  model::Model net(tiny_net_config(), 12);
  const auto stft_cfg = tiny_stft();
  std::vector<double> audio(static_cast<size_t>(stft_cfg.sample_rate / 2));
  for (auto& v : audio) v = rng.uniform(-0.9, 0.9);
  sp::SamplerConfig cfg;
  cfg.nfe = 1;
  cfg.mode = flow::LossMode::dp;
  flow::FlowConfig fcfg;
  auto res = sp::restore(audio, stft_cfg.sample_rate, net, stft_cfg, fcfg,
                         cfg, rng);
  for (double v : res.samples) {
    CHECK(std::isfinite(v));
    CHECK(std::abs(v) <= 1.0);
  }
}

TEST_CASE("nfe sweep echoes the request list and scales with NFE") {
  Rng rng(13);
  model::Model net(tiny_net_config(), 14);
  const auto stft_cfg = tiny_stft();

  std::vector<sp::EvalClip> clips;
  for (int c = 0; c < 2; ++c) {
    sp::EvalClip clip;
    clip.clean.resize(static_cast<size_t>(stft_cfg.sample_rate));
    for (size_t i = 0; i < clip.clean.size(); ++i)
      clip.clean[i] = 0.5 * std::sin(2.0 * std::numbers::pi * (200.0 + 50 * c) *
                                     static_cast<double>(i) /
                                     stft_cfg.sample_rate);
    clip.degraded = clip.clean;
    for (auto& v : clip.degraded) v = 0.5 * v + 0.01 * rng.normal();
    clips.push_back(clip);
  }

  sp::SamplerConfig cfg;
  cfg.mode = flow::LossMode::dp;
  const std::vector<int> nfe_list{1, 2, 4, 8};
  auto rows = sp::nfe_sweep(clips, stft_cfg.sample_rate, net, stft_cfg,
                            flow::FlowConfig{}, cfg, nfe_list, 99);
  REQUIRE(rows.size() == nfe_list.size());
  for (size_t i = 0; i < rows.size(); ++i) {
    CHECK(rows[i].nfe == nfe_list[i]);
    CHECK(rows[i].runtime_ms > 0.0);
  }

  // determinism of the metric columns
  auto rows2 = sp::nfe_sweep(clips, stft_cfg.sample_rate, net, stft_cfg,
                             flow::FlowConfig{}, cfg, nfe_list, 99);
  for (size_t i = 0; i < rows.size(); ++i) {
    CHECK(rows[i].lsd_db == rows2[i].lsd_db);
    CHECK(rows[i].fmax_hz == rows2[i].fmax_hz);
  }
}
