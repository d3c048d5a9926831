// Copyright (C) 2026 the flowsr authors
// SPDX-License-Identifier: Apache-2.0
#ifndef FLOWSR_AUTODIFF_HPP
#define FLOWSR_AUTODIFF_HPP

#include <cstdint>
#include <functional>
#include <unordered_map>
#include <vector>

#include "flowsr/tensor.hpp"

namespace flowsr::autodiff {

// Reverse-mode computation record. Ops executed while a Tape is active
// append nodes in topological order; backward() replays adjoints once per
// node. One tape belongs to one training step; distinct tapes may be used
// concurrently from different threads.
class Tape {
 public:
  Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  uint64_t id() const { return id_; }
  int num_nodes() const { return static_cast<int>(nodes_.size()); }

  // Registers (or finds) a leaf node for a tensor value buffer.
  int leaf(const Tensor& t);
  // Appends an interior node; backward accumulates into input gradients.
  int append(int out_size, std::vector<int> inputs,
             std::function<void(Tape&, const double*)> backward);

  // During backward: gradient accumulation buffer for a node, or nullptr if
  // the node does not lead to any requested parameter.
  double* grad_buffer(int node, int size);

  struct GradResult {
    std::vector<Tensor> grads;
    // false entries mark params that never entered the record (their grad
    // is zero-filled).
    std::vector<bool> in_record;
  };

  // Adjoints of a scalar loss w.r.t. each param. Single use per record is
  // the intended pattern; buffers are reset on each call.
  GradResult gradients(const Tensor& loss, const std::vector<Tensor>& params);

 private:
  struct Node {
    int size = 0;
    std::vector<int> inputs;
    std::function<void(Tape&, const double*)> backward;  // null for leaves
    bool wanted = false;
  };

  uint64_t id_;
  std::vector<Node> nodes_;
  std::unordered_map<const void*, int> leaf_by_data_;
  std::vector<std::vector<double>> adj_;
};

// Scoped activation of a tape on the current thread.
class TapeScope {
 public:
  explicit TapeScope(Tape& tape);
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape* prev_;
};

Tape* active_tape();

// Forward-mode Jacobian-vector product: evaluates f at `point` with the
// given tangents attached and returns (value, directional derivative) from
// one forward pass. Tangent entries may be undefined tensors (zero
// tangent). Gradient recording must not be active, and f must not install
// a tape; either case raises an error.
struct JvpResult {
  Tensor value;
  Tensor tangent;
};
JvpResult jvp(const std::function<Tensor(std::vector<Tensor>&)>& f,
              const std::vector<Tensor>& point,
              const std::vector<Tensor>& tangents);

bool in_jvp();

// Identity on values; blocks both the reverse-mode adjoint and the
// forward-mode tangent.
Tensor stop_gradient(const Tensor& x);

namespace ops {

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double c);
Tensor add_const(const Tensor& x, double c);
Tensor neg(const Tensor& x);

Tensor sin(const Tensor& x);
Tensor cos(const Tensor& x);
Tensor exp(const Tensor& x);
// x^p with constant exponent
Tensor powc(const Tensor& x, double p);

Tensor mean(const Tensor& x);
Tensor sum(const Tensor& x);

// softmax over one axis of an arbitrary-rank tensor
Tensor softmax(const Tensor& x, int axis);

// y = x + sin^2(alpha_c * x) / (beta_c + 1e-9), per leading-dim channel
Tensor snakebeta(const Tensor& x, const Tensor& alpha, const Tensor& beta);

// c[m,n] = a[m,k] * b[k,n]
Tensor matmul(const Tensor& a, const Tensor& b);

// x: [Ci,K,N], w: [Co,Ci,kf,kt]; causal in time, zero padded in frequency
Tensor conv2d(const Tensor& x, const Tensor& w, int stride_f, int dil_t,
              int pad_f);
// x: [Ci,N], w: [Co,Ci,kt]; causal 1-d convolution
Tensor conv1d(const Tensor& x, const Tensor& w, int dil_t);
// x: [C,K,N], w: [C,kf,kt]
Tensor depthwise_conv2d(const Tensor& x, const Tensor& w, int dil_t,
                        int pad_f);
// x: [Ci,K,N], w: [Ci,Co,kf,kt]; transposed along frequency
Tensor deconv2d(const Tensor& x, const Tensor& w, int stride_f, int pad_f);

// b: [C] broadcast over the trailing dims of x: [C,...]
Tensor add_channel_bias(const Tensor& x, const Tensor& b);
// along dim 0; trailing dims must match
Tensor concat_channels(const Tensor& a, const Tensor& b);

// single-head softmax attention over the frequency axis; q,k,v: [C,K,N]
Tensor freq_attention(const Tensor& q, const Tensor& k, const Tensor& v);

}  // namespace ops

}  // namespace flowsr::autodiff

#endif  // FLOWSR_AUTODIFF_HPP
