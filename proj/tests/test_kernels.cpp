// Copyright (C) 2026 the flowsr authors
// SPDX-License-Identifier: Apache-2.0
#include "flowsr/kernels.hpp"

#include <doctest.h>

#include <vector>

#include "flowsr/rng.hpp"
#include "test_util.hpp"

using namespace flowsr;
namespace kn = flowsr::kernels;

namespace {

struct BackendRestore {
  kn::Backend saved = kn::backend();
  ~BackendRestore() { kn::set_backend(saved); }
};

std::vector<double> rand_vec(size_t n, Rng& rng) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(-1.0, 1.0);
  return v;
}

// run fn under both backends and require bit-identical output buffers
template <typename Fn>
void check_backends_equal(Fn fn, std::vector<double>& out) {
  BackendRestore restore;
  kn::set_backend(kn::Backend::serial);
  fn();
  std::vector<double> ref = out;
  kn::set_backend(kn::Backend::openmp);
  std::fill(out.begin(), out.end(), -12345.0);
  fn();
  for (size_t i = 0; i < out.size(); ++i) REQUIRE(out[i] == ref[i]);
}

}  // namespace

TEST_CASE("conv2d serial and openmp paths agree exactly") {
  Rng rng(101);
  for (int trial = 0; trial < 8; ++trial) {
    kn::Conv2dDims d;
    d.ci = 1 + static_cast<int>(rng.below(4));
    d.co = 1 + static_cast<int>(rng.below(4));
    d.kf = 1 + 2 * static_cast<int>(rng.below(2));  // 1 or 3
    d.kt = 1 + static_cast<int>(rng.below(3));
    d.K = 5 + static_cast<int>(rng.below(12));
    d.N = 4 + static_cast<int>(rng.below(12));
    d.stride_f = 1 + static_cast<int>(rng.below(2));
    d.dil_t = 1 + static_cast<int>(rng.below(3));
    d.pad_f = d.kf / 2;
    d.Kout = kn::conv_out_freq(d.K, d.kf, d.pad_f, d.stride_f);

    auto x = rand_vec(static_cast<size_t>(d.ci) * d.K * d.N, rng);
    auto w = rand_vec(static_cast<size_t>(d.co) * d.ci * d.kf * d.kt, rng);
    std::vector<double> y(static_cast<size_t>(d.co) * d.Kout * d.N);
    check_backends_equal(
        [&] { kn::conv2d_forward(x.data(), w.data(), y.data(), d); }, y);

    auto gy = rand_vec(y.size(), rng);
    std::vector<double> gx(x.size());
    check_backends_equal(
        [&] { kn::conv2d_backward_input(gy.data(), w.data(), gx.data(), d); },
        gx);
    std::vector<double> gw(w.size());
    check_backends_equal(
        [&] { kn::conv2d_backward_weight(gy.data(), x.data(), gw.data(), d); },
        gw);
  }
}

TEST_CASE("depthwise conv serial and openmp paths agree exactly") {
  Rng rng(202);
  for (int trial = 0; trial < 8; ++trial) {
    kn::DwDims d;
    d.c = 1 + static_cast<int>(rng.below(5));
    d.kf = 3;
    d.kt = 1 + static_cast<int>(rng.below(3));
    d.K = 4 + static_cast<int>(rng.below(10));
    d.N = 4 + static_cast<int>(rng.below(10));
    d.dil_t = 1 + static_cast<int>(rng.below(4));
    d.pad_f = 1;

    auto x = rand_vec(static_cast<size_t>(d.c) * d.K * d.N, rng);
    auto w = rand_vec(static_cast<size_t>(d.c) * d.kf * d.kt, rng);
    std::vector<double> y(x.size());
    check_backends_equal(
        [&] { kn::dw_conv2d_forward(x.data(), w.data(), y.data(), d); }, y);

    auto gy = rand_vec(y.size(), rng);
    std::vector<double> gx(x.size());
    check_backends_equal(
        [&] {
          kn::dw_conv2d_backward_input(gy.data(), w.data(), gx.data(), d);
        },
        gx);
    std::vector<double> gw(w.size());
    check_backends_equal(
        [&] {
          kn::dw_conv2d_backward_weight(gy.data(), x.data(), gw.data(), d);
        },
        gw);
  }
}

TEST_CASE("deconv2d serial and openmp paths agree exactly") {
  Rng rng(303);
  for (int trial = 0; trial < 8; ++trial) {
    kn::Deconv2dDims d;
    d.ci = 1 + static_cast<int>(rng.below(4));
    d.co = 1 + static_cast<int>(rng.below(4));
    d.kf = 3;
    d.kt = 1 + static_cast<int>(rng.below(2));
    d.K = 3 + static_cast<int>(rng.below(8));
    d.N = 4 + static_cast<int>(rng.below(8));
    d.stride_f = 1 + static_cast<int>(rng.below(2));
    d.pad_f = 1;
    d.Kout = kn::deconv_out_freq(d.K, d.kf, d.pad_f, d.stride_f);

    auto x = rand_vec(static_cast<size_t>(d.ci) * d.K * d.N, rng);
    auto w = rand_vec(static_cast<size_t>(d.ci) * d.co * d.kf * d.kt, rng);
    std::vector<double> y(static_cast<size_t>(d.co) * d.Kout * d.N);
    check_backends_equal(
        [&] { kn::deconv2d_forward(x.data(), w.data(), y.data(), d); }, y);

    auto gy = rand_vec(y.size(), rng);
    std::vector<double> gx(x.size());
    check_backends_equal(
        [&] { kn::deconv2d_backward_input(gy.data(), w.data(), gx.data(), d); },
        gx);
    std::vector<double> gw(w.size());
    check_backends_equal(
        [&] {
          kn::deconv2d_backward_weight(gy.data(), x.data(), gw.data(), d);
        },
        gw);
  }
}

TEST_CASE("matmul family serial and openmp paths agree exactly") {
  Rng rng(404);
  for (int trial = 0; trial < 8; ++trial) {
    const int m = 1 + static_cast<int>(rng.below(12));
    const int k = 1 + static_cast<int>(rng.below(12));
    const int n = 1 + static_cast<int>(rng.below(12));
    auto a = rand_vec(static_cast<size_t>(m) * k, rng);
    auto b = rand_vec(static_cast<size_t>(k) * n, rng);
    std::vector<double> c(static_cast<size_t>(m) * n);
    check_backends_equal(
        [&] { kn::matmul(a.data(), b.data(), c.data(), m, k, n); }, c);

    auto at = rand_vec(static_cast<size_t>(k) * m, rng);
    check_backends_equal(
        [&] { kn::matmul_at(at.data(), b.data(), c.data(), m, k, n); }, c);

    auto bt = rand_vec(static_cast<size_t>(n) * k, rng);
    check_backends_equal(
        [&] { kn::matmul_bt(a.data(), bt.data(), c.data(), m, k, n); }, c);
  }
}

TEST_CASE("attention serial and openmp paths agree exactly") {
  Rng rng(505);
  const int C = 3, K = 7, N = 5;
  auto q = rand_vec(static_cast<size_t>(C) * K * N, rng);
  auto k = rand_vec(q.size(), rng);
  auto v = rand_vec(q.size(), rng);
  std::vector<double> attn(static_cast<size_t>(N) * K * K);
  std::vector<double> out(q.size());
  check_backends_equal(
      [&] {
        kn::attention_forward(q.data(), k.data(), v.data(), attn.data(),
                              out.data(), C, K, N);
      },
      out);

  auto g = rand_vec(out.size(), rng);
  std::vector<double> gq(q.size()), gk(q.size()), gv(q.size());
  check_backends_equal(
      [&] {
        kn::attention_backward(q.data(), k.data(), v.data(), attn.data(),
                               g.data(), gq.data(), gk.data(), gv.data(), C, K,
                               N);
      },
      gq);
}

TEST_CASE("matmul matches a hand-computed product") {
  // [1 2; 3 4] * [5 6; 7 8]
  std::vector<double> a{1, 2, 3, 4}, b{5, 6, 7, 8}, c(4);
  kn::matmul(a.data(), b.data(), c.data(), 2, 2, 2);
  CHECK(c[0] == 19);
  CHECK(c[1] == 22);
  CHECK(c[2] == 43);
  CHECK(c[3] == 50);
}
