// Copyright (C) 2026 the flowsr authors
// SPDX-License-Identifier: Apache-2.0
#include "flowsr/tensor.hpp"

#include <numeric>

#include "flowsr/common.hpp"

namespace flowsr {

namespace {
int shape_size(const std::vector<int>& shape) {
  int n = 1;
  for (int d : shape) {
    require(d > 0, "tensor dimension must be positive, got ", d);
    n *= d;
  }
  return n;
}
}  // namespace

Tensor::Tensor(std::vector<int> shape)
    : shape_(std::move(shape)),
      values_(std::make_shared<std::vector<double>>(
          static_cast<size_t>(shape_size(shape_)), 0.0)) {}

Tensor::Tensor(std::vector<int> shape, std::vector<double> values)
    : shape_(std::move(shape)),
      values_(std::make_shared<std::vector<double>>(std::move(values))) {
  require(static_cast<int>(values_->size()) == shape_size(shape_),
          "tensor value count ", values_->size(), " does not match shape ",
          shape_str());
}

Tensor Tensor::scalar(double v) { return Tensor({1}, {v}); }

Tensor Tensor::full(std::vector<int> shape, double v) {
  Tensor t(std::move(shape));
  for (auto& x : t.values()) x = v;
  return t;
}

int Tensor::size() const {
  return values_ ? static_cast<int>(values_->size()) : 0;
}

double Tensor::item() const {
  require(size() == 1, "item() requires a scalar tensor, shape is ",
          shape_str());
  return (*values_)[0];
}

void Tensor::set_tangent(std::vector<double> tan) {
  require(values_ && tan.size() == values_->size(),
          "tangent size mismatch: ", tan.size(), " vs ", size());
  tangent_ = std::make_shared<std::vector<double>>(std::move(tan));
}

void Tensor::zero_tangent() {
  tangent_ = std::make_shared<std::vector<double>>(values_->size(), 0.0);
}

Tensor Tensor::detached_copy() const {
  Tensor t;
  t.shape_ = shape_;
  t.values_ = std::make_shared<std::vector<double>>(*values_);
  return t;
}

Tensor Tensor::reshaped(std::vector<int> new_shape) const {
  require(shape_size(new_shape) == size(), "reshape size mismatch: ",
          shape_str(), " -> requested size ", shape_size(new_shape));
  Tensor t(*this);
  t.shape_ = std::move(new_shape);
  return t;
}

std::string Tensor::shape_str() const {
  std::string s = "[";
  for (size_t i = 0; i < shape_.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape_[i]);
  }
  return s + "]";
}

bool same_shape(const Tensor& a, const Tensor& b) {
  return a.shape() == b.shape();
}

}  // namespace flowsr
