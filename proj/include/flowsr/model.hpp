// Copyright (C) 2026 the flowsr authors
// SPDX-License-Identifier: Apache-2.0
#ifndef FLOWSR_MODEL_HPP
#define FLOWSR_MODEL_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "flowsr/dsp.hpp"
#include "flowsr/flowcore.hpp"
#include "flowsr/rng.hpp"
#include "flowsr/tensor.hpp"

namespace flowsr::model {

enum class Backbone { mlp, mini_rmfsr };

std::string to_string(Backbone b);
Backbone backbone_from_string(const std::string& s);

struct ModelConfig {
  Backbone backbone = Backbone::mini_rmfsr;
  // encoder channels, mirrored at the decoder; layers 2-5 downsample
  // frequency by 2 (time is never downsampled)
  std::vector<int> channels = {8, 8, 16, 32, 32};
  std::vector<int> enc_dilations = {1, 2, 4, 8, 16};
  int enc_kernel_f = 3;
  int enc_kernel_t = 3;
  int dec_kernel_f = 3;
  int dec_kernel_t = 2;
  int tcn_layers = 4;
  int tcn_kernel_t = 11;
  std::vector<int> tcn_dilations = {1, 2, 4, 8};
  bool freq_attention = true;  // at the two deepest levels
  int embed_dim = 128;
  int mlp_hidden = 64;
  uint64_t init_seed = 1;

  void validate() const;
};

struct Param {
  std::string name;
  Tensor value;
  bool trainable = true;
};

// Per-stream history for the causal time convolutions: one ring buffer per
// time-extended conv, sized by kernel extent x dilation.
struct StreamingState {
  struct Ring {
    int depth = 0;        // frames retained
    int frame_size = 0;   // values per frame
    int pos = 0;          // slot of the most recent frame
    int filled = 0;
    std::vector<double> data;

    void push(const double* frame);
    // frame at offset `back` behind the most recent push (0 = current);
    // returns nullptr while the history is still zero-filled
    const double* at(int back) const;
  };
  std::vector<Ring> rings;
  int bins = 0;

  void reset();
};

class Model {
 public:
  Model(ModelConfig cfg, uint64_t init_seed);
  Model(ModelConfig cfg, std::vector<Param> params);  // checkpoint restore

  const ModelConfig& config() const { return cfg_; }
  std::vector<Param>& params() { return params_; }
  const std::vector<Param>& params() const { return params_; }
  std::vector<Tensor> trainable_tensors() const;
  int64_t param_count() const;

  // x, y: [2,K,N] (real/imag planes); t, r: scalar tensors so forward-mode
  // tangents can ride through the time conditioning.
  Tensor forward(const Tensor& x, const Tensor& y, const Tensor& t,
                 const Tensor& r) const;
  Tensor forward(const Tensor& x, const Tensor& y, double t, double r) const;

  // deterministic 128-dim conditioning vector, exposed for tests
  Tensor time_embedding(const Tensor& t, const Tensor& r) const;

  StreamingState make_state(int bins) const;
  // x_frame, y_frame: [2,K,1] -> [2,K,1]
  Tensor forward_streaming(const Tensor& x_frame, const Tensor& y_frame,
                           double t, double r, StreamingState& state) const;

 private:
  struct Conv {
    int w = -1;
    int b = -1;
    int stride_f = 1;
    int dil_t = 1;
    int pad_f = 0;
  };
  struct Snake {
    int alpha = -1;
    int beta = -1;
  };
  struct EmbProj {
    int w = -1;
    int b = -1;
  };
  struct InvRes {
    Conv expand;
    Snake s1;
    int dw_w = -1;
    int dw_dil = 1;
    Snake s2;
    Conv project;
  };
  struct Attention {
    Conv q, k, v, o;
  };
  struct EncLevel {
    EmbProj emb;
    Conv entry;
    Snake s;
    InvRes block;
    bool has_attn = false;
    Attention attn;
  };
  struct TcnLayer {
    EmbProj emb;
    Snake s;
    Conv conv;
  };
  struct DecLevel {
    bool has_attn = false;
    Attention attn;
    EmbProj emb;
    Conv up;          // transposed for levels >= 1, plain conv at level 0
    bool transposed = false;
    Snake s;
    Conv skip;        // 1x1 on the encoder feature joined after upsampling
    InvRes block;
  };
  struct MlpNet {
    EmbProj emb_in;
    Conv c1;
    Snake s1;
    EmbProj emb_mid;
    Conv c2;
    Snake s2;
    Conv c3;
  };

  void build();
  int add_param(const std::string& name, std::vector<int> shape, double scale,
                bool trainable, Rng& rng);
  int add_const_param(const std::string& name, std::vector<int> shape,
                      double value);
  const Tensor& p(int idx) const { return params_[static_cast<size_t>(idx)].value; }

  Tensor apply_conv(const Conv& c, const Tensor& x) const;
  Tensor apply_deconv(const Conv& c, const Tensor& x) const;
  Tensor apply_snake(const Snake& s, const Tensor& x) const;
  Tensor apply_emb(const EmbProj& e, const Tensor& x, const Tensor& emb) const;
  Tensor apply_invres(const InvRes& b, const Tensor& x) const;
  Tensor apply_attention(const Attention& a, const Tensor& x) const;

  ModelConfig cfg_;
  std::vector<Param> params_;

  // embedding params
  int fourier_t_ = -1, fourier_r_ = -1;
  int emb_wt_ = -1, emb_wr_ = -1, emb_b_ = -1;

  std::vector<EncLevel> enc_;
  Conv enc4_skip_;  // 1x1 skip from the deepest encoder level
  std::vector<TcnLayer> tcn_;
  std::vector<DecLevel> dec_;
  Conv head_;
  MlpNet mlp_;

  friend struct StreamRunner;
};

struct CostReport {
  int64_t params = 0;
  int64_t trainable_params = 0;
  double macs_per_frame = 0.0;   // convolution/attention multiplies
  double macs_per_second = 0.0;  // at NFE=1
  double latency_ms = 0.0;       // algorithmic latency = STFT window
  int receptive_field_frames = 0;
  double context_seconds = 0.0;
};

// Closed-form accounting; independent of Model so tests can cross-check it
// against an instantiated network.
CostReport count_params_macs(const ModelConfig& cfg,
                             const dsp::StftConfig& stft);

}  // namespace flowsr::model

#endif  // FLOWSR_MODEL_HPP
