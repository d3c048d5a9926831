// Copyright (C) 2026 the flowsr authors
// SPDX-License-Identifier: Apache-2.0
#ifndef FLOWSR_TENSOR_HPP
#define FLOWSR_TENSOR_HPP

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace flowsr {

// Dense n-d array of doubles with an optional forward-mode tangent of the
// same shape. Copies share the underlying buffers; operations never mutate
// their inputs. node()/tape_id() tie a tensor to at most one live
// computation record (see autodiff.hpp).
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape);
  Tensor(std::vector<int> shape, std::vector<double> values);

  static Tensor scalar(double v);
  static Tensor full(std::vector<int> shape, double v);

  const std::vector<int>& shape() const { return shape_; }
  int ndim() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_[static_cast<size_t>(i)]; }
  int size() const;
  bool defined() const { return static_cast<bool>(values_); }
  bool is_scalar() const { return size() == 1; }
  double item() const;

  std::vector<double>& values() { return *values_; }
  const std::vector<double>& values() const { return *values_; }
  double* data() { return values_->data(); }
  const double* data() const { return values_->data(); }

  bool has_tangent() const { return static_cast<bool>(tangent_); }
  std::vector<double>& tangent() { return *tangent_; }
  const std::vector<double>& tangent() const { return *tangent_; }
  void set_tangent(std::vector<double> tan);
  void zero_tangent();  // allocate an all-zero tangent
  void clear_tangent() { tangent_.reset(); }

  // Deep copy of values (tangent and graph linkage dropped).
  Tensor detached_copy() const;

  // Same buffers and graph linkage under a new shape of equal size.
  Tensor reshaped(std::vector<int> new_shape) const;

  int node() const { return node_; }
  uint64_t tape_id() const { return tape_id_; }
  void set_node(int node, uint64_t tape_id) {
    node_ = node;
    tape_id_ = tape_id;
  }

  // Identity of the value buffer, used for leaf dedup on the tape.
  const void* data_id() const { return values_.get(); }

  std::string shape_str() const;

 private:
  std::vector<int> shape_;
  std::shared_ptr<std::vector<double>> values_;
  std::shared_ptr<std::vector<double>> tangent_;
  int node_ = -1;
  uint64_t tape_id_ = 0;
};

bool same_shape(const Tensor& a, const Tensor& b);

}  // namespace flowsr

#endif  // FLOWSR_TENSOR_HPP
