// Copyright (C) 2026 the flowsr authors
// SPDX-License-Identifier: Apache-2.0
#ifndef FLOWSR_TESTS_TEST_UTIL_HPP
#define FLOWSR_TESTS_TEST_UTIL_HPP

#include <cmath>
#include <functional>
#include <vector>

#include "flowsr/rng.hpp"
#include "flowsr/tensor.hpp"

namespace flowsr::testutil {

inline Tensor random_tensor(std::vector<int> shape, Rng& rng, double lo = -2.0,
                            double hi = 2.0) {
  Tensor t(std::move(shape));
  for (auto& v : t.values()) v = rng.uniform(lo, hi);
  return t;
}

inline double rel_err(double got, double want, double floor = 1e-6) {
  return std::abs(got - want) / std::max(std::abs(want), floor);
}

// max relative error between two vectors, with an absolute floor
inline double max_rel_err(const std::vector<double>& got,
                          const std::vector<double>& want,
                          double floor = 1e-6) {
  double worst = 0.0;
  for (size_t i = 0; i < got.size(); ++i)
    worst = std::max(worst, rel_err(got[i], want[i], floor));
  return worst;
}

inline double max_abs_diff(const std::vector<double>& a,
                           const std::vector<double>& b) {
  double worst = 0.0;
  for (size_t i = 0; i < a.size(); ++i)
    worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

// central finite difference of a scalar function along one coordinate
inline double central_diff(const std::function<double()>& eval, double& slot,
                           double h = 1e-5) {
  const double keep = slot;
  slot = keep + h;
  const double up = eval();
  slot = keep - h;
  const double dn = eval();
  slot = keep;
  return (up - dn) / (2.0 * h);
}

}  // namespace flowsr::testutil

#endif  // FLOWSR_TESTS_TEST_UTIL_HPP
