// Copyright (C) 2026 the flowsr authors
// SPDX-License-Identifier: Apache-2.0
#include "flowsr/model.hpp"

#include <cmath>
#include <numbers>

#include "flowsr/autodiff.hpp"
#include "flowsr/common.hpp"
#include "flowsr/kernels.hpp"

namespace flowsr::model {

namespace ops = autodiff::ops;

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kFourierScale = 10.0;
}  // namespace

std::string to_string(Backbone b) {
  return b == Backbone::mlp ? "mlp" : "mini-rmfsr";
}

Backbone backbone_from_string(const std::string& s) {
  if (s == "mlp") return Backbone::mlp;
  if (s == "mini-rmfsr") return Backbone::mini_rmfsr;
  throw Error(format_msg("unknown backbone '", s,
                         "' (expected mlp | mini-rmfsr)"));
}

void ModelConfig::validate() const {
  require(channels.size() == 5, "ModelConfig: channel list must have 5 "
          "entries, got ", channels.size());
  for (int c : channels) require(c > 0, "ModelConfig: channels must be positive");
  require(enc_dilations.size() == channels.size(),
          "ModelConfig: one encoder dilation per level");
  require(static_cast<int>(tcn_dilations.size()) == tcn_layers,
          "ModelConfig: one TCN dilation per layer");
  require(embed_dim > 0 && embed_dim % 2 == 0,
          "ModelConfig: embed_dim must be positive and even");
  require(enc_kernel_f % 2 == 1 && dec_kernel_f % 2 == 1,
          "ModelConfig: frequency kernels must be odd");
  require(mlp_hidden > 0, "ModelConfig: mlp_hidden must be positive");
}

// ---------------------------------------------------------------------------
// streaming ring buffers
// ---------------------------------------------------------------------------

void StreamingState::Ring::push(const double* frame) {
  pos = (pos + 1) % depth;
  std::copy(frame, frame + frame_size,
            data.begin() + static_cast<size_t>(pos) * frame_size);
  if (filled < depth) ++filled;
}

const double* StreamingState::Ring::at(int back) const {
  if (back >= filled) return nullptr;  // zero history
  const int slot = (pos - back % depth + depth) % depth;
  return data.data() + static_cast<size_t>(slot) * frame_size;
}

void StreamingState::reset() {
  for (auto& r : rings) {
    r.pos = 0;
    r.filled = 0;
    std::fill(r.data.begin(), r.data.end(), 0.0);
  }
}

// ---------------------------------------------------------------------------
// construction
// ---------------------------------------------------------------------------

Model::Model(ModelConfig cfg, uint64_t init_seed) : cfg_(std::move(cfg)) {
  cfg_.init_seed = init_seed;
  cfg_.validate();
  build();
}

Model::Model(ModelConfig cfg, std::vector<Param> params)
    : cfg_(std::move(cfg)) {
  cfg_.validate();
  build();
  require(params.size() == params_.size(), "Model: checkpoint has ",
          params.size(), " parameters, architecture expects ", params_.size());
  for (size_t i = 0; i < params_.size(); ++i) {
    require(params[i].name == params_[i].name,
            "Model: parameter order mismatch at index ", i, ": '",
            params[i].name, "' vs '", params_[i].name, "'");
    require(params[i].value.shape() == params_[i].value.shape(),
            "Model: shape mismatch for '", params[i].name, "'");
    params_[i].value = params[i].value;
    params_[i].trainable = params[i].trainable;
  }
}

int Model::add_param(const std::string& name, std::vector<int> shape,
                     double scale, bool trainable, Rng& rng) {
  Tensor t(shape);
  if (scale != 0.0)
    for (auto& v : t.values()) v = rng.normal() * scale;
  params_.push_back(Param{name, std::move(t), trainable});
  return static_cast<int>(params_.size()) - 1;
}

int Model::add_const_param(const std::string& name, std::vector<int> shape,
                           double value) {
  params_.push_back(Param{name, Tensor::full(std::move(shape), value), true});
  return static_cast<int>(params_.size()) - 1;
}

void Model::build() {
  Rng rng(cfg_.init_seed);
  const int E = cfg_.embed_dim;
  const int F = E / 2;

  fourier_t_ = add_param("embed.fourier_t", {F, 1}, kFourierScale, false, rng);
  fourier_r_ = add_param("embed.fourier_r", {F, 1}, kFourierScale, false, rng);
  emb_wt_ = add_param("embed.w", {E, E}, 1.0 / std::sqrt(E), true, rng);
  emb_wr_ = emb_wt_;  // one learned projection shared by both embeddings
  emb_b_ = add_param("embed.b", {E, 1}, 0.0, true, rng);

  auto conv_param = [&](const std::string& name, int co, int ci, int kf,
                        int kt, int stride_f, int dil, int pad) {
    Conv c;
    c.w = add_param(name + ".w", {co, ci, kf, kt},
                    1.0 / std::sqrt(static_cast<double>(ci) * kf * kt), true,
                    rng);
    c.b = add_param(name + ".b", {co}, 0.0, true, rng);
    c.stride_f = stride_f;
    c.dil_t = dil;
    c.pad_f = pad;
    return c;
  };
  auto deconv_param = [&](const std::string& name, int ci, int co, int kf,
                          int kt) {
    Conv c;
    c.w = add_param(name + ".w", {ci, co, kf, kt},
                    1.0 / std::sqrt(static_cast<double>(ci) * kf * kt), true,
                    rng);
    c.b = add_param(name + ".b", {co}, 0.0, true, rng);
    c.stride_f = 2;
    c.dil_t = 1;
    c.pad_f = kf / 2;
    return c;
  };
  auto snake_param = [&](const std::string& name, int c) {
    Snake s;
    s.alpha = add_const_param(name + ".alpha", {c}, 1.0);
    s.beta = add_const_param(name + ".beta", {c}, 1.0);
    return s;
  };
  auto emb_param = [&](const std::string& name, int c) {
    EmbProj e;
    e.w = add_param(name + ".w", {c, E}, 1.0 / std::sqrt(E), true, rng);
    e.b = add_param(name + ".b", {c}, 0.0, true, rng);
    return e;
  };
  auto invres_param = [&](const std::string& name, int c, int dil) {
    InvRes b;
    b.expand = conv_param(name + ".expand", 2 * c, c, 1, 1, 1, 1, 0);
    b.s1 = snake_param(name + ".snake1", 2 * c);
    b.dw_w = add_param(name + ".dw.w", {2 * c, 3, cfg_.enc_kernel_t},
                       1.0 / std::sqrt(3.0 * cfg_.enc_kernel_t), true, rng);
    b.dw_dil = dil;
    b.s2 = snake_param(name + ".snake2", 2 * c);
    b.project = conv_param(name + ".project", c, 2 * c, 1, 1, 1, 1, 0);
    return b;
  };
  auto attn_param = [&](const std::string& name, int c) {
    Attention a;
    a.q = conv_param(name + ".q", c, c, 1, 1, 1, 1, 0);
    a.k = conv_param(name + ".k", c, c, 1, 1, 1, 1, 0);
    a.v = conv_param(name + ".v", c, c, 1, 1, 1, 1, 0);
    a.o = conv_param(name + ".o", c, c, 1, 1, 1, 1, 0);
    return a;
  };

  if (cfg_.backbone == Backbone::mlp) {
    const int H = cfg_.mlp_hidden;
    mlp_.emb_in = emb_param("mlp.emb_in", 4);
    mlp_.c1 = conv_param("mlp.conv1", H, 4, 1, 1, 1, 1, 0);
    mlp_.s1 = snake_param("mlp.snake1", H);
    mlp_.emb_mid = emb_param("mlp.emb_mid", H);
    mlp_.c2 = conv_param("mlp.conv2", H, H, 1, 1, 1, 1, 0);
    mlp_.s2 = snake_param("mlp.snake2", H);
    mlp_.c3 = conv_param("mlp.conv3", 2, H, 1, 1, 1, 1, 0);
    return;
  }

  const auto& C = cfg_.channels;
  const int levels = static_cast<int>(C.size());
  int cin = 4;
  for (int i = 0; i < levels; ++i) {
    const std::string name = "enc" + std::to_string(i);
    EncLevel lvl;
    lvl.emb = emb_param(name + ".emb", cin);
    lvl.entry = conv_param(name + ".entry", C[static_cast<size_t>(i)], cin,
                           cfg_.enc_kernel_f, cfg_.enc_kernel_t,
                           i == 0 ? 1 : 2, cfg_.enc_dilations[static_cast<size_t>(i)],
                           cfg_.enc_kernel_f / 2);
    lvl.s = snake_param(name + ".snake", C[static_cast<size_t>(i)]);
    lvl.block = invres_param(name + ".block", C[static_cast<size_t>(i)],
                             cfg_.enc_dilations[static_cast<size_t>(i)]);
    lvl.has_attn = cfg_.freq_attention && i >= levels - 2;
    if (lvl.has_attn) lvl.attn = attn_param(name + ".attn", C[static_cast<size_t>(i)]);
    enc_.push_back(lvl);
    cin = C[static_cast<size_t>(i)];
  }

  const int c4 = C.back();
  enc4_skip_ = conv_param("skip4", c4, c4, 1, 1, 1, 1, 0);
  for (int l = 0; l < cfg_.tcn_layers; ++l) {
    const std::string name = "tcn" + std::to_string(l);
    TcnLayer t;
    t.emb = emb_param(name + ".emb", c4);
    t.s = snake_param(name + ".snake", c4);
    t.conv = conv_param(name + ".conv", c4, c4, 1, cfg_.tcn_kernel_t, 1,
                        cfg_.tcn_dilations[static_cast<size_t>(l)], 0);
    tcn_.push_back(t);
  }

  for (int lvl = levels - 1; lvl >= 0; --lvl) {
    const std::string name = "dec" + std::to_string(lvl);
    DecLevel d;
    const int c = C[static_cast<size_t>(lvl)];
    const int cprev = lvl >= 1 ? C[static_cast<size_t>(lvl - 1)] : C[0];
    d.has_attn = cfg_.freq_attention && lvl >= levels - 2;
    if (d.has_attn) d.attn = attn_param(name + ".attn", c);
    d.emb = emb_param(name + ".emb", c);
    if (lvl >= 1) {
      d.up = deconv_param(name + ".up", c, cprev, cfg_.dec_kernel_f,
                          cfg_.dec_kernel_t);
      d.transposed = true;
      d.skip = conv_param(name + ".skip", cprev, cprev, 1, 1, 1, 1, 0);
    } else {
      d.up = conv_param(name + ".conv", cprev, c, cfg_.dec_kernel_f,
                        cfg_.dec_kernel_t, 1, 1, cfg_.dec_kernel_f / 2);
      d.transposed = false;
    }
    d.s = snake_param(name + ".snake", cprev);
    d.block = invres_param(name + ".block", cprev, 1);
    dec_.push_back(d);
  }

  head_ = conv_param("head", 2, C[0], 1, 1, 1, 1, 0);
}

std::vector<Tensor> Model::trainable_tensors() const {
  std::vector<Tensor> out;
  for (const auto& p : params_)
    if (p.trainable) out.push_back(p.value);
  return out;
}

int64_t Model::param_count() const {
  int64_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

// ---------------------------------------------------------------------------
// forward (offline, autodiff ops)
// ---------------------------------------------------------------------------

Tensor Model::apply_conv(const Conv& c, const Tensor& x) const {
  Tensor y = ops::conv2d(x, p(c.w), c.stride_f, c.dil_t, c.pad_f);
  return ops::add_channel_bias(y, p(c.b));
}

Tensor Model::apply_deconv(const Conv& c, const Tensor& x) const {
  Tensor y = ops::deconv2d(x, p(c.w), c.stride_f, c.pad_f);
  return ops::add_channel_bias(y, p(c.b));
}

Tensor Model::apply_snake(const Snake& s, const Tensor& x) const {
  return ops::snakebeta(x, p(s.alpha), p(s.beta));
}

Tensor Model::apply_emb(const EmbProj& e, const Tensor& x,
                        const Tensor& emb) const {
  const int c = p(e.b).size();
  Tensor bias = ops::add(ops::matmul(p(e.w), emb).reshaped({c}), p(e.b));
  return ops::add_channel_bias(x, bias);
}

Tensor Model::apply_invres(const InvRes& b, const Tensor& x) const {
  Tensor h = apply_conv(b.expand, x);
  h = apply_snake(b.s1, h);
  h = ops::depthwise_conv2d(h, p(b.dw_w), b.dw_dil, 1);
  h = apply_snake(b.s2, h);
  h = apply_conv(b.project, h);
  return ops::add(x, h);
}

Tensor Model::apply_attention(const Attention& a, const Tensor& x) const {
  Tensor q = apply_conv(a.q, x);
  Tensor k = apply_conv(a.k, x);
  Tensor v = apply_conv(a.v, x);
  Tensor o = ops::freq_attention(q, k, v);
  return ops::add(x, apply_conv(a.o, o));
}

Tensor Model::time_embedding(const Tensor& t, const Tensor& r) const {
  require(t.size() == 1 && r.size() == 1,
          "time_embedding: t and r must be scalars");
  auto features = [&](int fourier, const Tensor& s) {
    Tensor z = ops::scale(ops::mul(p(fourier), s), kTwoPi);
    return ops::concat_channels(ops::sin(z), ops::cos(z));
  };
  Tensor et = ops::matmul(p(emb_wt_), features(fourier_t_, t));
  Tensor er = ops::matmul(p(emb_wr_), features(fourier_r_, r));
  return ops::add(ops::add(et, er), p(emb_b_));
}

Tensor Model::forward(const Tensor& x, const Tensor& y, double t,
                      double r) const {
  return forward(x, y, Tensor::scalar(t), Tensor::scalar(r));
}

Tensor Model::forward(const Tensor& x, const Tensor& y, const Tensor& t,
                      const Tensor& r) const {
  require(x.ndim() == 3 && x.dim(0) == 2, "forward: x must be [2,K,N], got ",
          x.shape_str());
  require(same_shape(x, y), "forward: x is ", x.shape_str(), " but y is ",
          y.shape_str());
  for (double v : x.values())
    require(std::isfinite(v), "forward: non-finite value in x");
  for (double v : y.values())
    require(std::isfinite(v), "forward: non-finite value in y");

  const Tensor emb = time_embedding(t, r);
  Tensor cur = ops::concat_channels(x, y);

  if (cfg_.backbone == Backbone::mlp) {
    cur = apply_emb(mlp_.emb_in, cur, emb);
    cur = apply_conv(mlp_.c1, cur);
    cur = apply_snake(mlp_.s1, cur);
    cur = apply_emb(mlp_.emb_mid, cur, emb);
    cur = apply_conv(mlp_.c2, cur);
    cur = apply_snake(mlp_.s2, cur);
    return apply_conv(mlp_.c3, cur);
  }

  // four frequency downsamples must mirror exactly on the way back up
  require((x.dim(1) - 1) % 16 == 0,
          "forward: frequency bins must be 16m+1 for the 5-level U-net, got ",
          x.dim(1));

  std::vector<Tensor> skips;
  for (const auto& lvl : enc_) {
    cur = apply_emb(lvl.emb, cur, emb);
    cur = apply_conv(lvl.entry, cur);
    cur = apply_snake(lvl.s, cur);
    cur = apply_invres(lvl.block, cur);
    if (lvl.has_attn) cur = apply_attention(lvl.attn, cur);
    skips.push_back(cur);
  }

  for (const auto& layer : tcn_) {
    Tensor h = apply_emb(layer.emb, cur, emb);
    h = apply_snake(layer.s, h);
    h = apply_conv(layer.conv, h);
    cur = ops::add(cur, h);
  }
  cur = ops::add(cur, apply_conv(enc4_skip_, skips.back()));

  const int levels = static_cast<int>(enc_.size());
  for (size_t j = 0; j < dec_.size(); ++j) {
    const auto& d = dec_[j];
    if (d.has_attn) cur = apply_attention(d.attn, cur);
    cur = apply_emb(d.emb, cur, emb);
    cur = d.transposed ? apply_deconv(d.up, cur) : apply_conv(d.up, cur);
    cur = apply_snake(d.s, cur);
    const int skip_level = levels - 2 - static_cast<int>(j);
    if (d.skip.w >= 0 && skip_level >= 0)
      cur = ops::add(cur, apply_conv(d.skip,
                                     skips[static_cast<size_t>(skip_level)]));
    cur = apply_invres(d.block, cur);
  }
  return apply_conv(head_, cur);
}

// ---------------------------------------------------------------------------
// streaming
// ---------------------------------------------------------------------------

namespace {

struct FrameBuf {
  std::vector<double> v;
  int c = 0, k = 0;
  void resize(int c_, int k_) {
    c = c_;
    k = k_;
    v.assign(static_cast<size_t>(c_) * k_, 0.0);
  }
};

}  // namespace

StreamingState Model::make_state(int bins) const {
  cfg_.validate();
  StreamingState st;
  st.bins = bins;
  if (cfg_.backbone == Backbone::mlp) return st;  // 1x1 only, stateless

  require((bins - 1) % 16 == 0,
          "make_state: frequency bins must be 16m+1 for the 5-level U-net, "
          "got ", bins);
  auto add_ring = [&st](int kt, int dil, int c, int k) {
    StreamingState::Ring r;
    r.depth = (kt - 1) * dil + 1;
    r.frame_size = c * k;
    r.data.assign(static_cast<size_t>(r.depth) * r.frame_size, 0.0);
    r.pos = 0;
    r.filled = 0;
    st.rings.push_back(std::move(r));
  };

  const auto& C = cfg_.channels;
  int cin = 4, g = bins;
  for (size_t i = 0; i < C.size(); ++i) {
    add_ring(cfg_.enc_kernel_t, cfg_.enc_dilations[i], cin, g);  // entry
    if (i >= 1) g = (g + 1) / 2;
    add_ring(cfg_.enc_kernel_t, cfg_.enc_dilations[i], 2 * C[i], g);  // dw
    cin = C[i];
  }
  for (int l = 0; l < cfg_.tcn_layers; ++l)
    add_ring(cfg_.tcn_kernel_t, cfg_.tcn_dilations[static_cast<size_t>(l)],
             C.back(), g);
  for (int lvl = static_cast<int>(C.size()) - 1; lvl >= 0; --lvl) {
    const int c = C[static_cast<size_t>(lvl)];
    const int cprev = lvl >= 1 ? C[static_cast<size_t>(lvl - 1)] : C[0];
    add_ring(cfg_.dec_kernel_t, 1, c, g);  // up / dec0 conv input
    if (lvl >= 1) g = 2 * g - 1;
    add_ring(cfg_.enc_kernel_t, 1, 2 * cprev, g);  // dec invres dw
  }
  return st;
}

struct StreamRunner {
  const Model& m;
  StreamingState& st;
  size_t ring_idx = 0;

  StreamingState::Ring& next_ring() { return st.rings[ring_idx++]; }
  const Tensor& p(int i) const { return m.p(i); }

  // matches ops::conv2d + add_channel_bias: accumulate ci -> df -> dt, add
  // bias after the sum
  void conv(const Model::Conv& c, const FrameBuf& in, FrameBuf& out) {
    const Tensor& w = p(c.w);
    const Tensor& b = p(c.b);
    const int co = w.dim(0), ci = w.dim(1), kf = w.dim(2), kt = w.dim(3);
    const int kin = in.k;
    const int kout = kernels::conv_out_freq(kin, kf, c.pad_f, c.stride_f);
    auto& ring = next_ring();
    ring.push(in.v.data());
    out.resize(co, kout);
    const double* wv = w.data();
    for (int o = 0; o < co; ++o)
      for (int ko = 0; ko < kout; ++ko) {
        double acc = 0.0;
        for (int i = 0; i < ci; ++i)
          for (int df = 0; df < kf; ++df) {
            const int ki = ko * c.stride_f + df - c.pad_f;
            if (ki < 0 || ki >= kin) continue;
            for (int dt = 0; dt < kt; ++dt) {
              const double* fr = ring.at(dt * c.dil_t);
              if (!fr) continue;
              acc += wv[((o * ci + i) * kf + df) * kt + dt] * fr[i * kin + ki];
            }
          }
        out.v[static_cast<size_t>(o) * kout + ko] = acc + b.data()[o];
      }
  }

  void conv1x1(const Model::Conv& c, const FrameBuf& in, FrameBuf& out) {
    const Tensor& w = p(c.w);
    const Tensor& b = p(c.b);
    const int co = w.dim(0), ci = w.dim(1);
    out.resize(co, in.k);
    const double* wv = w.data();
    for (int o = 0; o < co; ++o)
      for (int k = 0; k < in.k; ++k) {
        double acc = 0.0;
        for (int i = 0; i < ci; ++i) {
          // mirror conv2d's df/dt loop collapse at kf=kt=1
          acc += wv[o * ci + i] * in.v[static_cast<size_t>(i) * in.k + k];
        }
        out.v[static_cast<size_t>(o) * in.k + k] = acc + b.data()[o];
      }
  }

  void deconv(const Model::Conv& c, const FrameBuf& in, FrameBuf& out) {
    const Tensor& w = p(c.w);
    const Tensor& b = p(c.b);
    const int ci = w.dim(0), co = w.dim(1), kf = w.dim(2), kt = w.dim(3);
    const int kin = in.k;
    const int kout = kernels::deconv_out_freq(kin, kf, c.pad_f, c.stride_f);
    auto& ring = next_ring();
    ring.push(in.v.data());
    out.resize(co, kout);
    const double* wv = w.data();
    for (int o = 0; o < co; ++o)
      for (int ko = 0; ko < kout; ++ko) {
        double acc = 0.0;
        for (int i = 0; i < ci; ++i)
          for (int df = 0; df < kf; ++df) {
            const int tt = ko + c.pad_f - df;
            if (tt < 0 || tt % c.stride_f != 0) continue;
            const int ki = tt / c.stride_f;
            if (ki >= kin) continue;
            for (int dt = 0; dt < kt; ++dt) {
              const double* fr = ring.at(dt);
              if (!fr) continue;
              acc += wv[((i * co + o) * kf + df) * kt + dt] * fr[i * kin + ki];
            }
          }
        out.v[static_cast<size_t>(o) * kout + ko] = acc + b.data()[o];
      }
  }

  void depthwise(int w_idx, int dil, const FrameBuf& in, FrameBuf& out) {
    const Tensor& w = p(w_idx);
    const int c = w.dim(0), kf = w.dim(1), kt = w.dim(2);
    auto& ring = next_ring();
    ring.push(in.v.data());
    out.resize(c, in.k);
    const double* wv = w.data();
    const int K = in.k;
    for (int ch = 0; ch < c; ++ch)
      for (int ko = 0; ko < K; ++ko) {
        double acc = 0.0;
        for (int df = 0; df < kf; ++df) {
          const int ki = ko + df - 1;
          if (ki < 0 || ki >= K) continue;
          for (int dt = 0; dt < kt; ++dt) {
            const double* fr = ring.at(dt * dil);
            if (!fr) continue;
            acc += wv[(ch * kf + df) * kt + dt] * fr[ch * K + ki];
          }
        }
        out.v[static_cast<size_t>(ch) * K + ko] = acc;
      }
  }

  void snake(const Model::Snake& s, FrameBuf& x) {
    const double* a = p(s.alpha).data();
    const double* b = p(s.beta).data();
    for (int c = 0; c < x.c; ++c) {
      const double alpha = a[c];
      const double binv = 1.0 / (b[c] + 1e-9);
      for (int k = 0; k < x.k; ++k) {
        double& v = x.v[static_cast<size_t>(c) * x.k + k];
        const double sn = std::sin(alpha * v);
        v = v + binv * sn * sn;
      }
    }
  }

  void add_emb(const Model::EmbProj& e, const std::vector<double>& emb,
               FrameBuf& x) {
    const Tensor& w = p(e.w);
    const Tensor& b = p(e.b);
    const int c = b.size();
    const int E = w.dim(1);
    for (int ch = 0; ch < c; ++ch) {
      double acc = 0.0;
      for (int j = 0; j < E; ++j) acc += w.data()[ch * E + j] * emb[static_cast<size_t>(j)];
      const double bias = acc + b.data()[ch];
      for (int k = 0; k < x.k; ++k)
        x.v[static_cast<size_t>(ch) * x.k + k] += bias;
    }
  }

  void attention(const Model::Attention& a, FrameBuf& x) {
    FrameBuf q, k, v, o;
    conv1x1(a.q, x, q);
    conv1x1(a.k, x, k);
    conv1x1(a.v, x, v);
    o.resize(x.c, x.k);
    std::vector<double> attn(static_cast<size_t>(x.k) * x.k);
    kernels::attention_forward(q.v.data(), k.v.data(), v.v.data(), attn.data(),
                               o.v.data(), x.c, x.k, 1);
    FrameBuf proj;
    conv1x1(a.o, o, proj);
    for (size_t i = 0; i < x.v.size(); ++i) x.v[i] += proj.v[i];
  }

  void invres(const Model::InvRes& b, FrameBuf& x) {
    FrameBuf h, h2;
    conv1x1(b.expand, x, h);
    snake(b.s1, h);
    depthwise(b.dw_w, b.dw_dil, h, h2);
    snake(b.s2, h2);
    conv1x1(b.project, h2, h);
    for (size_t i = 0; i < x.v.size(); ++i) x.v[i] += h.v[i];
  }
};

Tensor Model::forward_streaming(const Tensor& x_frame, const Tensor& y_frame,
                                double t, double r,
                                StreamingState& state) const {
  require(x_frame.ndim() == 3 && x_frame.dim(0) == 2 && x_frame.dim(2) == 1,
          "forward_streaming: frame must be [2,K,1], got ",
          x_frame.shape_str());
  require(same_shape(x_frame, y_frame),
          "forward_streaming: frame shape mismatch");
  const int K = x_frame.dim(1);
  require(state.bins == K, "forward_streaming: state built for ", state.bins,
          " bins, frame has ", K);

  // embedding, replicating the op-for-op order of time_embedding()
  const int E = cfg_.embed_dim;
  const int F = E / 2;
  std::vector<double> emb(static_cast<size_t>(E), 0.0);
  {
    std::vector<double> feat_t(static_cast<size_t>(E)), feat_r(static_cast<size_t>(E));
    const double* bt = p(fourier_t_).data();
    const double* br = p(fourier_r_).data();
    for (int f = 0; f < F; ++f) {
      const double zt = (bt[f] * t) * kTwoPi;
      const double zr = (br[f] * r) * kTwoPi;
      feat_t[static_cast<size_t>(f)] = std::sin(zt);
      feat_t[static_cast<size_t>(F + f)] = std::cos(zt);
      feat_r[static_cast<size_t>(f)] = std::sin(zr);
      feat_r[static_cast<size_t>(F + f)] = std::cos(zr);
    }
    const double* wt = p(emb_wt_).data();
    const double* wr = p(emb_wr_).data();
    const double* be = p(emb_b_).data();
    for (int i = 0; i < E; ++i) {
      double et = 0.0, er = 0.0;
      for (int j = 0; j < E; ++j) et += wt[i * E + j] * feat_t[static_cast<size_t>(j)];
      for (int j = 0; j < E; ++j) er += wr[i * E + j] * feat_r[static_cast<size_t>(j)];
      emb[static_cast<size_t>(i)] = (et + er) + be[i];
    }
  }

  StreamRunner run{*this, state};

  FrameBuf cur;
  cur.resize(4, K);
  std::copy(x_frame.data(), x_frame.data() + 2 * K, cur.v.begin());
  std::copy(y_frame.data(), y_frame.data() + 2 * K, cur.v.begin() + 2 * K);

  if (cfg_.backbone == Backbone::mlp) {
    FrameBuf h;
    run.add_emb(mlp_.emb_in, emb, cur);
    run.conv1x1(mlp_.c1, cur, h);
    run.snake(mlp_.s1, h);
    run.add_emb(mlp_.emb_mid, emb, h);
    FrameBuf h2;
    run.conv1x1(mlp_.c2, h, h2);
    run.snake(mlp_.s2, h2);
    run.conv1x1(mlp_.c3, h2, h);
    Tensor out({2, K, 1});
    std::copy(h.v.begin(), h.v.end(), out.data());
    return out;
  }

  std::vector<FrameBuf> skips;
  FrameBuf tmp;
  for (const auto& lvl : enc_) {
    run.add_emb(lvl.emb, emb, cur);
    run.conv(lvl.entry, cur, tmp);
    std::swap(cur, tmp);
    run.snake(lvl.s, cur);
    run.invres(lvl.block, cur);
    if (lvl.has_attn) run.attention(lvl.attn, cur);
    skips.push_back(cur);
  }

  for (const auto& layer : tcn_) {
    FrameBuf h = cur;
    run.add_emb(layer.emb, emb, h);
    run.snake(layer.s, h);
    FrameBuf h2;
    run.conv(layer.conv, h, h2);
    for (size_t i = 0; i < cur.v.size(); ++i) cur.v[i] += h2.v[i];
  }
  {
    FrameBuf sk;
    run.conv1x1(enc4_skip_, skips.back(), sk);
    for (size_t i = 0; i < cur.v.size(); ++i) cur.v[i] += sk.v[i];
  }

  const int levels = static_cast<int>(enc_.size());
  for (size_t j = 0; j < dec_.size(); ++j) {
    const auto& d = dec_[j];
    if (d.has_attn) run.attention(d.attn, cur);
    run.add_emb(d.emb, emb, cur);
    if (d.transposed) {
      run.deconv(d.up, cur, tmp);
    } else {
      run.conv(d.up, cur, tmp);
    }
    std::swap(cur, tmp);
    run.snake(d.s, cur);
    const int skip_level = levels - 2 - static_cast<int>(j);
    if (d.skip.w >= 0 && skip_level >= 0) {
      FrameBuf sk;
      run.conv1x1(d.skip, skips[static_cast<size_t>(skip_level)], sk);
      for (size_t i = 0; i < cur.v.size(); ++i) cur.v[i] += sk.v[i];
    }
    run.invres(d.block, cur);
  }

  FrameBuf out_buf;
  run.conv1x1(head_, cur, out_buf);
  require(run.ring_idx == state.rings.size(),
          "forward_streaming: ring bookkeeping mismatch");

  Tensor out({2, K, 1});
  std::copy(out_buf.v.begin(), out_buf.v.end(), out.data());
  return out;
}

// ---------------------------------------------------------------------------
// closed-form accounting
// ---------------------------------------------------------------------------

CostReport count_params_macs(const ModelConfig& cfg,
                             const dsp::StftConfig& stft) {
  cfg.validate();
  stft.validate();
  CostReport rep;
  const int E = cfg.embed_dim;
  const int F = E / 2;
  const int K = stft.bins();

  int64_t params = 0, frozen = 0;
  double macs = 0.0;  // per frame, conv + attention multiplies
  int rf = 1;         // receptive field in frames

  frozen += 2 * F;          // fourier features for t and r
  params += 2 * F;
  params += static_cast<int64_t>(E) * E + E;  // shared projection + bias

  auto conv_cost = [&](int co, int ci, int kf, int kt, int kout) {
    params += static_cast<int64_t>(co) * ci * kf * kt + co;
    macs += static_cast<double>(co) * kout * ci * kf * kt;
  };
  auto snake_cost = [&](int c) { params += 2 * c; };
  auto emb_cost = [&](int c) { params += static_cast<int64_t>(c) * E + c; };
  auto invres_cost = [&](int c, int k, int dil, int kt) {
    conv_cost(2 * c, c, 1, 1, k);
    snake_cost(2 * c);
    params += static_cast<int64_t>(2 * c) * 3 * kt;  // depthwise, no bias
    macs += static_cast<double>(2 * c) * k * 3 * kt;
    rf += (kt - 1) * dil;
    snake_cost(2 * c);
    conv_cost(c, 2 * c, 1, 1, k);
  };
  auto attn_cost = [&](int c, int k) {
    for (int i = 0; i < 4; ++i) conv_cost(c, c, 1, 1, k);
    macs += 2.0 * c * k * k;  // scores + weighted values
  };

  if (cfg.backbone == Backbone::mlp) {
    const int H = cfg.mlp_hidden;
    emb_cost(4);
    conv_cost(H, 4, 1, 1, K);
    snake_cost(H);
    emb_cost(H);
    conv_cost(H, H, 1, 1, K);
    snake_cost(H);
    conv_cost(2, H, 1, 1, K);
  } else {
    const auto& C = cfg.channels;
    const int levels = static_cast<int>(C.size());
    std::vector<int> grid(static_cast<size_t>(levels));
    int cin = 4, g = K;
    for (int i = 0; i < levels; ++i) {
      const int c = C[static_cast<size_t>(i)];
      const int dil = cfg.enc_dilations[static_cast<size_t>(i)];
      emb_cost(cin);
      if (i >= 1) g = (g + 1) / 2;
      conv_cost(c, cin, cfg.enc_kernel_f, cfg.enc_kernel_t, g);
      rf += (cfg.enc_kernel_t - 1) * dil;
      snake_cost(c);
      invres_cost(c, g, dil, cfg.enc_kernel_t);
      if (cfg.freq_attention && i >= levels - 2) attn_cost(c, g);
      grid[static_cast<size_t>(i)] = g;
      cin = c;
    }
    const int c4 = C.back();
    conv_cost(c4, c4, 1, 1, g);  // deepest skip
    for (int l = 0; l < cfg.tcn_layers; ++l) {
      emb_cost(c4);
      snake_cost(c4);
      conv_cost(c4, c4, 1, cfg.tcn_kernel_t, g);
      rf += (cfg.tcn_kernel_t - 1) * cfg.tcn_dilations[static_cast<size_t>(l)];
    }
    for (int lvl = levels - 1; lvl >= 0; --lvl) {
      const int c = C[static_cast<size_t>(lvl)];
      const int cprev = lvl >= 1 ? C[static_cast<size_t>(lvl - 1)] : C[0];
      if (cfg.freq_attention && lvl >= levels - 2) attn_cost(c, g);
      emb_cost(c);
      if (lvl >= 1) {
        const int gout = 2 * g - 1;
        params += static_cast<int64_t>(c) * cprev * cfg.dec_kernel_f *
                      cfg.dec_kernel_t + cprev;
        macs += static_cast<double>(c) * g * cprev * cfg.dec_kernel_f *
                cfg.dec_kernel_t;
        g = gout;
        conv_cost(cprev, cprev, 1, 1, g);  // skip join
      } else {
        conv_cost(cprev, c, cfg.dec_kernel_f, cfg.dec_kernel_t, g);
      }
      rf += cfg.dec_kernel_t - 1;
      snake_cost(cprev);
      invres_cost(cprev, g, 1, cfg.enc_kernel_t);
    }
    conv_cost(2, C[0], 1, 1, K);
  }

  rep.params = params;
  rep.trainable_params = params - frozen;
  rep.macs_per_frame = macs;
  rep.macs_per_second = macs * stft.frames_per_second();  // NFE = 1
  rep.latency_ms = stft.window_ms;  // causal model: STFT window only
  rep.receptive_field_frames = rf;
  rep.context_seconds =
      (rf - 1) * (stft.hop_size() / static_cast<double>(stft.sample_rate)) +
      stft.window_size() / static_cast<double>(stft.sample_rate);
  return rep;
}

}  // namespace flowsr::model
