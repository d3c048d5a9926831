// Copyright (C) 2026 the flowsr authors
// SPDX-License-Identifier: Apache-2.0
#include "flowsr/autodiff.hpp"

#include <atomic>
#include <cmath>
#include <cstring>

#include "flowsr/common.hpp"
#include "flowsr/kernels.hpp"

namespace flowsr::autodiff {

namespace {

thread_local Tape* g_active_tape = nullptr;
thread_local int g_jvp_depth = 0;
std::atomic<uint64_t> g_tape_counter{1};

constexpr double kSnakeEps = 1e-9;

}  // namespace

// ---------------------------------------------------------------------------
// Tape
// ---------------------------------------------------------------------------

Tape::Tape() : id_(g_tape_counter.fetch_add(1)) {}

int Tape::leaf(const Tensor& t) {
  auto it = leaf_by_data_.find(t.data_id());
  if (it != leaf_by_data_.end()) return it->second;
  const int id = static_cast<int>(nodes_.size());
  nodes_.push_back(Node{t.size(), {}, nullptr, false});
  leaf_by_data_.emplace(t.data_id(), id);
  return id;
}

int Tape::append(int out_size, std::vector<int> inputs,
                 std::function<void(Tape&, const double*)> backward) {
  const int id = static_cast<int>(nodes_.size());
  nodes_.push_back(Node{out_size, std::move(inputs), std::move(backward), false});
  return id;
}

double* Tape::grad_buffer(int node, int size) {
  Node& nd = nodes_[static_cast<size_t>(node)];
  if (!nd.wanted) return nullptr;
  auto& buf = adj_[static_cast<size_t>(node)];
  if (buf.empty()) buf.assign(static_cast<size_t>(size), 0.0);
  return buf.data();
}

Tape::GradResult Tape::gradients(const Tensor& loss,
                                 const std::vector<Tensor>& params) {
  require(loss.size() == 1, "gradients: loss must be scalar, shape is ",
          loss.shape_str());
  require(loss.node() >= 0 && loss.tape_id() == id_,
          "gradients: loss was not recorded on this tape");

  adj_.assign(nodes_.size(), {});
  for (auto& n : nodes_) n.wanted = false;

  GradResult result;
  result.in_record.resize(params.size(), false);
  std::vector<int> param_ids(params.size(), -1);
  for (size_t i = 0; i < params.size(); ++i) {
    auto it = leaf_by_data_.find(params[i].data_id());
    if (it != leaf_by_data_.end()) {
      param_ids[i] = it->second;
      result.in_record[i] = true;
      nodes_[static_cast<size_t>(it->second)].wanted = true;
    }
  }

  // forward propagation of "leads to a requested param"
  for (auto& n : nodes_) {
    if (n.backward == nullptr) continue;  // leaf: wanted iff param
    for (int in : n.inputs) {
      if (nodes_[static_cast<size_t>(in)].wanted) {
        n.wanted = true;
        break;
      }
    }
  }

  adj_[static_cast<size_t>(loss.node())].assign(1, 1.0);

  for (int i = static_cast<int>(nodes_.size()) - 1; i >= 0; --i) {
    Node& n = nodes_[static_cast<size_t>(i)];
    if (!n.backward || !n.wanted) continue;
    auto& a = adj_[static_cast<size_t>(i)];
    if (a.empty()) continue;
    n.backward(*this, a.data());
    a.clear();
    a.shrink_to_fit();
  }

  result.grads.reserve(params.size());
  for (size_t i = 0; i < params.size(); ++i) {
    Tensor g(params[i].shape());
    if (param_ids[i] >= 0) {
      auto& buf = adj_[static_cast<size_t>(param_ids[i])];
      if (!buf.empty()) g.values() = buf;
    }
    result.grads.push_back(std::move(g));
  }
  adj_.clear();
  return result;
}

// ---------------------------------------------------------------------------
// scope / jvp / stop_gradient
// ---------------------------------------------------------------------------

TapeScope::TapeScope(Tape& tape) : prev_(g_active_tape) {
  require(g_jvp_depth == 0,
          "gradient recording must not be enabled inside a jvp evaluation");
  g_active_tape = &tape;
}

TapeScope::~TapeScope() { g_active_tape = prev_; }

Tape* active_tape() { return g_active_tape; }
bool in_jvp() { return g_jvp_depth > 0; }

JvpResult jvp(const std::function<Tensor(std::vector<Tensor>&)>& f,
              const std::vector<Tensor>& point,
              const std::vector<Tensor>& tangents) {
  require(g_active_tape == nullptr,
          "jvp: a gradient tape is active; modes must not interleave");
  require(point.size() == tangents.size(),
          "jvp: point/tangent count mismatch: ", point.size(), " vs ",
          tangents.size());
  std::vector<Tensor> args;
  args.reserve(point.size());
  for (size_t i = 0; i < point.size(); ++i) {
    Tensor t = point[i];
    t.set_node(-1, 0);
    if (tangents[i].defined()) {
      require(tangents[i].shape() == t.shape(),
              "jvp: tangent shape ", tangents[i].shape_str(),
              " does not match point shape ", t.shape_str());
      t.set_tangent(tangents[i].values());
    } else {
      t.clear_tangent();
    }
    args.push_back(std::move(t));
  }

  ++g_jvp_depth;
  Tensor out;
  try {
    out = f(args);
  } catch (...) {
    --g_jvp_depth;
    throw;
  }
  --g_jvp_depth;

  JvpResult r;
  r.tangent = out.has_tangent() ? Tensor(out.shape(), out.tangent())
                                : Tensor(out.shape());
  out.clear_tangent();
  out.set_node(-1, 0);
  r.value = std::move(out);
  return r;
}

Tensor stop_gradient(const Tensor& x) {
  // fresh buffer: downstream consumers see an unrelated constant leaf
  return x.detached_copy();
}

// ---------------------------------------------------------------------------
// op helpers
// ---------------------------------------------------------------------------

namespace ops {

namespace {

int node_of(Tape& t, const Tensor& x) {
  if (x.node() >= 0 && x.tape_id() == t.id()) return x.node();
  return t.leaf(x);
}

const double* tangent_or_null(const Tensor& x) {
  return x.has_tangent() ? x.tangent().data() : nullptr;
}

bool any_tangent(std::initializer_list<const Tensor*> xs) {
  for (auto* x : xs)
    if (x->has_tangent()) return true;
  return false;
}

// Elementwise unary with y = f(x), dy/dx = d(x, y).
template <typename F, typename D>
Tensor unary_op(const Tensor& x, F f, D d) {
  const int n = x.size();
  Tensor out(x.shape());
  const double* xv = x.data();
  double* yv = out.data();
  for (int i = 0; i < n; ++i) yv[i] = f(xv[i]);

  if (x.has_tangent()) {
    std::vector<double> tan(static_cast<size_t>(n));
    const double* dx = x.tangent().data();
    for (int i = 0; i < n; ++i) tan[i] = d(xv[i], yv[i]) * dx[i];
    out.set_tangent(std::move(tan));
  }
  if (Tape* tape = active_tape()) {
    const int ix = node_of(*tape, x);
    Tensor xs = x;     // keep values alive
    Tensor ys = out;
    const int node = tape->append(
        n, {ix}, [ix, n, xs, ys, d](Tape& t, const double* g) {
          if (double* gx = t.grad_buffer(ix, n)) {
            const double* xv2 = xs.data();
            const double* yv2 = ys.data();
            for (int i = 0; i < n; ++i) gx[i] += g[i] * d(xv2[i], yv2[i]);
          }
        });
    out.set_node(node, tape->id());
  }
  return out;
}

enum class Broadcast { same, a_scalar, b_scalar };

Broadcast binary_broadcast(const Tensor& a, const Tensor& b,
                           const char* name) {
  if (a.shape() == b.shape()) return Broadcast::same;
  if (a.is_scalar()) return Broadcast::a_scalar;
  if (b.is_scalar()) return Broadcast::b_scalar;
  throw Error(format_msg(name, ": shape mismatch ", a.shape_str(), " vs ",
                         b.shape_str()));
}

}  // namespace

// ---------------------------------------------------------------------------
// arithmetic
// ---------------------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
  const Broadcast bc = binary_broadcast(a, b, "add");
  const Tensor& big = (bc == Broadcast::a_scalar) ? b : a;
  const int n = big.size();
  Tensor out(big.shape());
  const double* av = a.data();
  const double* bv = b.data();
  double* yv = out.data();
  for (int i = 0; i < n; ++i)
    yv[i] = av[bc == Broadcast::a_scalar ? 0 : i] +
            bv[bc == Broadcast::b_scalar ? 0 : i];

  if (any_tangent({&a, &b})) {
    std::vector<double> tan(static_cast<size_t>(n), 0.0);
    if (a.has_tangent()) {
      const double* da = a.tangent().data();
      for (int i = 0; i < n; ++i)
        tan[i] += da[bc == Broadcast::a_scalar ? 0 : i];
    }
    if (b.has_tangent()) {
      const double* db = b.tangent().data();
      for (int i = 0; i < n; ++i)
        tan[i] += db[bc == Broadcast::b_scalar ? 0 : i];
    }
    out.set_tangent(std::move(tan));
  }
  if (Tape* tape = active_tape()) {
    const int ia = node_of(*tape, a);
    const int ib = node_of(*tape, b);
    const int na = a.size(), nb = b.size();
    const int node =
        tape->append(n, {ia, ib}, [=](Tape& t, const double* g) {
          if (double* ga = t.grad_buffer(ia, na)) {
            if (na == n)
              for (int i = 0; i < n; ++i) ga[i] += g[i];
            else
              for (int i = 0; i < n; ++i) ga[0] += g[i];
          }
          if (double* gb = t.grad_buffer(ib, nb)) {
            if (nb == n)
              for (int i = 0; i < n; ++i) gb[i] += g[i];
            else
              for (int i = 0; i < n; ++i) gb[0] += g[i];
          }
        });
    out.set_node(node, tape->id());
  }
  return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  const Broadcast bc = binary_broadcast(a, b, "sub");
  const Tensor& big = (bc == Broadcast::a_scalar) ? b : a;
  const int n = big.size();
  Tensor out(big.shape());
  const double* av = a.data();
  const double* bv = b.data();
  double* yv = out.data();
  for (int i = 0; i < n; ++i)
    yv[i] = av[bc == Broadcast::a_scalar ? 0 : i] -
            bv[bc == Broadcast::b_scalar ? 0 : i];

  if (any_tangent({&a, &b})) {
    std::vector<double> tan(static_cast<size_t>(n), 0.0);
    if (a.has_tangent()) {
      const double* da = a.tangent().data();
      for (int i = 0; i < n; ++i)
        tan[i] += da[bc == Broadcast::a_scalar ? 0 : i];
    }
    if (b.has_tangent()) {
      const double* db = b.tangent().data();
      for (int i = 0; i < n; ++i)
        tan[i] -= db[bc == Broadcast::b_scalar ? 0 : i];
    }
    out.set_tangent(std::move(tan));
  }
  if (Tape* tape = active_tape()) {
    const int ia = node_of(*tape, a);
    const int ib = node_of(*tape, b);
    const int na = a.size(), nb = b.size();
    const int node =
        tape->append(n, {ia, ib}, [=](Tape& t, const double* g) {
          if (double* ga = t.grad_buffer(ia, na)) {
            if (na == n)
              for (int i = 0; i < n; ++i) ga[i] += g[i];
            else
              for (int i = 0; i < n; ++i) ga[0] += g[i];
          }
          if (double* gb = t.grad_buffer(ib, nb)) {
            if (nb == n)
              for (int i = 0; i < n; ++i) gb[i] -= g[i];
            else
              for (int i = 0; i < n; ++i) gb[0] -= g[i];
          }
        });
    out.set_node(node, tape->id());
  }
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  const Broadcast bc = binary_broadcast(a, b, "mul");
  const Tensor& big = (bc == Broadcast::a_scalar) ? b : a;
  const int n = big.size();
  Tensor out(big.shape());
  const double* av = a.data();
  const double* bv = b.data();
  double* yv = out.data();
  auto aat = [&](int i) { return av[bc == Broadcast::a_scalar ? 0 : i]; };
  auto bat = [&](int i) { return bv[bc == Broadcast::b_scalar ? 0 : i]; };
  for (int i = 0; i < n; ++i) yv[i] = aat(i) * bat(i);

  if (any_tangent({&a, &b})) {
    std::vector<double> tan(static_cast<size_t>(n), 0.0);
    if (a.has_tangent()) {
      const double* da = a.tangent().data();
      for (int i = 0; i < n; ++i)
        tan[i] += da[bc == Broadcast::a_scalar ? 0 : i] * bat(i);
    }
    if (b.has_tangent()) {
      const double* db = b.tangent().data();
      for (int i = 0; i < n; ++i)
        tan[i] += aat(i) * db[bc == Broadcast::b_scalar ? 0 : i];
    }
    out.set_tangent(std::move(tan));
  }
  if (Tape* tape = active_tape()) {
    const int ia = node_of(*tape, a);
    const int ib = node_of(*tape, b);
    const int na = a.size(), nb = b.size();
    Tensor as = a, bs = b;
    const int node = tape->append(
        n, {ia, ib}, [=](Tape& t, const double* g) {
          const double* av2 = as.data();
          const double* bv2 = bs.data();
          if (double* ga = t.grad_buffer(ia, na)) {
            if (na == n)
              for (int i = 0; i < n; ++i)
                ga[i] += g[i] * bv2[nb == n ? i : 0];
            else
              for (int i = 0; i < n; ++i) ga[0] += g[i] * bv2[i];
          }
          if (double* gb = t.grad_buffer(ib, nb)) {
            if (nb == n)
              for (int i = 0; i < n; ++i)
                gb[i] += g[i] * av2[na == n ? i : 0];
            else
              for (int i = 0; i < n; ++i) gb[0] += g[i] * av2[i];
          }
        });
    out.set_node(node, tape->id());
  }
  return out;
}

Tensor scale(const Tensor& x, double c) {
  return unary_op(
      x, [c](double v) { return v * c; },
      [c](double, double) { return c; });
}

Tensor add_const(const Tensor& x, double c) {
  return unary_op(
      x, [c](double v) { return v + c; },
      [](double, double) { return 1.0; });
}

Tensor neg(const Tensor& x) { return scale(x, -1.0); }

Tensor sin(const Tensor& x) {
  return unary_op(
      x, [](double v) { return std::sin(v); },
      [](double v, double) { return std::cos(v); });
}

Tensor cos(const Tensor& x) {
  return unary_op(
      x, [](double v) { return std::cos(v); },
      [](double v, double) { return -std::sin(v); });
}

Tensor exp(const Tensor& x) {
  return unary_op(
      x, [](double v) { return std::exp(v); },
      [](double, double y) { return y; });
}

Tensor powc(const Tensor& x, double p) {
  return unary_op(
      x, [p](double v) { return std::pow(v, p); },
      [p](double v, double) { return p * std::pow(v, p - 1.0); });
}

// ---------------------------------------------------------------------------
// reductions
// ---------------------------------------------------------------------------

namespace {
Tensor reduce_all(const Tensor& x, double norm) {
  const int n = x.size();
  const double* xv = x.data();
  double acc = 0.0;
  for (int i = 0; i < n; ++i) acc += xv[i];
  Tensor out = Tensor::scalar(acc * norm);

  if (x.has_tangent()) {
    const double* dx = x.tangent().data();
    double dacc = 0.0;
    for (int i = 0; i < n; ++i) dacc += dx[i];
    out.set_tangent({dacc * norm});
  }
  if (Tape* tape = active_tape()) {
    const int ix = node_of(*tape, x);
    const int node =
        tape->append(1, {ix}, [ix, n, norm](Tape& t, const double* g) {
          if (double* gx = t.grad_buffer(ix, n)) {
            const double gv = g[0] * norm;
            for (int i = 0; i < n; ++i) gx[i] += gv;
          }
        });
    out.set_node(node, tape->id());
  }
  return out;
}
}  // namespace

Tensor mean(const Tensor& x) { return reduce_all(x, 1.0 / x.size()); }
Tensor sum(const Tensor& x) { return reduce_all(x, 1.0); }

// ---------------------------------------------------------------------------
// softmax over a named axis
// ---------------------------------------------------------------------------

Tensor softmax(const Tensor& x, int axis) {
  require(axis >= 0 && axis < x.ndim(), "softmax: axis ", axis,
          " out of range for shape ", x.shape_str());
  const int len = x.dim(axis);
  int outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= x.dim(i);
  for (int i = axis + 1; i < x.ndim(); ++i) inner *= x.dim(i);

  Tensor out(x.shape());
  const double* xv = x.data();
  double* yv = out.data();
  for (int o = 0; o < outer; ++o)
    for (int in = 0; in < inner; ++in) {
      const size_t base = static_cast<size_t>(o) * len * inner + in;
      double mx = xv[base];
      for (int j = 1; j < len; ++j)
        mx = std::max(mx, xv[base + static_cast<size_t>(j) * inner]);
      double s = 0.0;
      for (int j = 0; j < len; ++j) {
        const size_t idx = base + static_cast<size_t>(j) * inner;
        yv[idx] = std::exp(xv[idx] - mx);
        s += yv[idx];
      }
      const double invs = 1.0 / s;
      for (int j = 0; j < len; ++j)
        yv[base + static_cast<size_t>(j) * inner] *= invs;
    }

  auto apply_differential = [len, outer, inner](const double* y,
                                                const double* dx, double* dy) {
    for (int o = 0; o < outer; ++o)
      for (int in = 0; in < inner; ++in) {
        const size_t base = static_cast<size_t>(o) * len * inner + in;
        double dot = 0.0;
        for (int j = 0; j < len; ++j) {
          const size_t idx = base + static_cast<size_t>(j) * inner;
          dot += dx[idx] * y[idx];
        }
        for (int j = 0; j < len; ++j) {
          const size_t idx = base + static_cast<size_t>(j) * inner;
          dy[idx] += y[idx] * (dx[idx] - dot);
        }
      }
  };

  if (x.has_tangent()) {
    std::vector<double> tan(static_cast<size_t>(x.size()), 0.0);
    apply_differential(yv, x.tangent().data(), tan.data());
    out.set_tangent(std::move(tan));
  }
  if (Tape* tape = active_tape()) {
    const int ix = node_of(*tape, x);
    const int n = x.size();
    Tensor ys = out;
    const int node = tape->append(
        n, {ix}, [ix, n, ys, apply_differential](Tape& t, const double* g) {
          if (double* gx = t.grad_buffer(ix, n))
            apply_differential(ys.data(), g, gx);
        });
    out.set_node(node, tape->id());
  }
  return out;
}

// ---------------------------------------------------------------------------
// snakebeta
// ---------------------------------------------------------------------------

Tensor snakebeta(const Tensor& x, const Tensor& alpha, const Tensor& beta) {
  require(x.ndim() >= 1, "snakebeta: input must have a channel dim");
  const int C = x.dim(0);
  require(alpha.size() == C && beta.size() == C,
          "snakebeta: alpha/beta must have ", C, " entries, got ",
          alpha.size(), "/", beta.size());
  const int rest = x.size() / C;
  Tensor out(x.shape());
  const double* xv = x.data();
  const double* av = alpha.data();
  const double* bv = beta.data();
  double* yv = out.data();
  for (int c = 0; c < C; ++c) {
    const double a = av[c];
    const double binv = 1.0 / (bv[c] + kSnakeEps);
    const double* xc = xv + static_cast<size_t>(c) * rest;
    double* yc = yv + static_cast<size_t>(c) * rest;
    for (int i = 0; i < rest; ++i) {
      const double s = std::sin(a * xc[i]);
      yc[i] = xc[i] + binv * s * s;
    }
  }

  if (any_tangent({&x, &alpha, &beta})) {
    std::vector<double> tan(static_cast<size_t>(x.size()), 0.0);
    const double* dx = tangent_or_null(x);
    const double* da = tangent_or_null(alpha);
    const double* db = tangent_or_null(beta);
    for (int c = 0; c < C; ++c) {
      const double a = av[c];
      const double binv = 1.0 / (bv[c] + kSnakeEps);
      const double* xc = xv + static_cast<size_t>(c) * rest;
      double* tc = tan.data() + static_cast<size_t>(c) * rest;
      for (int i = 0; i < rest; ++i) {
        const double s = std::sin(a * xc[i]);
        const double s2 = std::sin(2.0 * a * xc[i]);
        if (dx) tc[i] += dx[(static_cast<size_t>(c) * rest) + i] *
                         (1.0 + a * binv * s2);
        if (da) tc[i] += da[c] * binv * xc[i] * s2;
        if (db) tc[i] += -db[c] * binv * binv * s * s;
      }
    }
    out.set_tangent(std::move(tan));
  }
  if (Tape* tape = active_tape()) {
    const int ix = node_of(*tape, x);
    const int ia = node_of(*tape, alpha);
    const int ib = node_of(*tape, beta);
    const int n = x.size();
    Tensor xs = x, as = alpha, bs = beta;
    const int node = tape->append(
        n, {ix, ia, ib}, [=](Tape& t, const double* g) {
          const double* xv2 = xs.data();
          const double* av2 = as.data();
          const double* bv2 = bs.data();
          double* gx = t.grad_buffer(ix, n);
          double* ga = t.grad_buffer(ia, C);
          double* gb = t.grad_buffer(ib, C);
          for (int c = 0; c < C; ++c) {
            const double a = av2[c];
            const double binv = 1.0 / (bv2[c] + kSnakeEps);
            const double* xc = xv2 + static_cast<size_t>(c) * rest;
            const double* gc = g + static_cast<size_t>(c) * rest;
            double acc_a = 0.0, acc_b = 0.0;
            for (int i = 0; i < rest; ++i) {
              const double s = std::sin(a * xc[i]);
              const double s2 = std::sin(2.0 * a * xc[i]);
              if (gx)
                gx[static_cast<size_t>(c) * rest + i] +=
                    gc[i] * (1.0 + a * binv * s2);
              acc_a += gc[i] * binv * xc[i] * s2;
              acc_b += -gc[i] * binv * binv * s * s;
            }
            if (ga) ga[c] += acc_a;
            if (gb) gb[c] += acc_b;
          }
        });
    out.set_node(node, tape->id());
  }
  return out;
}

// ---------------------------------------------------------------------------
// matmul
// ---------------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  require(a.ndim() == 2 && b.ndim() == 2, "matmul: expects rank-2 tensors, got ",
          a.shape_str(), " and ", b.shape_str());
  const int m = a.dim(0), k = a.dim(1), n = b.dim(1);
  require(b.dim(0) == k, "matmul: inner dims differ: ", a.shape_str(), " vs ",
          b.shape_str());
  Tensor out({m, n});
  kernels::matmul(a.data(), b.data(), out.data(), m, k, n);

  if (any_tangent({&a, &b})) {
    std::vector<double> tan(static_cast<size_t>(m) * n, 0.0);
    std::vector<double> tmp(static_cast<size_t>(m) * n);
    if (a.has_tangent()) {
      kernels::matmul(a.tangent().data(), b.data(), tmp.data(), m, k, n);
      for (size_t i = 0; i < tan.size(); ++i) tan[i] += tmp[i];
    }
    if (b.has_tangent()) {
      kernels::matmul(a.data(), b.tangent().data(), tmp.data(), m, k, n);
      for (size_t i = 0; i < tan.size(); ++i) tan[i] += tmp[i];
    }
    out.set_tangent(std::move(tan));
  }
  if (Tape* tape = active_tape()) {
    const int ia = node_of(*tape, a);
    const int ib = node_of(*tape, b);
    Tensor as = a, bs = b;
    const int node = tape->append(
        m * n, {ia, ib}, [=](Tape& t, const double* g) {
          if (double* ga = t.grad_buffer(ia, m * k)) {
            std::vector<double> tmp(static_cast<size_t>(m) * k);
            kernels::matmul_bt(g, bs.data(), tmp.data(), m, n, k);
            for (size_t i = 0; i < tmp.size(); ++i) ga[i] += tmp[i];
          }
          if (double* gb = t.grad_buffer(ib, k * n)) {
            std::vector<double> tmp(static_cast<size_t>(k) * n);
            kernels::matmul_at(as.data(), g, tmp.data(), k, m, n);
            for (size_t i = 0; i < tmp.size(); ++i) gb[i] += tmp[i];
          }
        });
    out.set_node(node, tape->id());
  }
  return out;
}

// ---------------------------------------------------------------------------
// convolutions
// ---------------------------------------------------------------------------

Tensor conv2d(const Tensor& x, const Tensor& w, int stride_f, int dil_t,
              int pad_f) {
  require(x.ndim() == 3, "conv2d: input must be [C,K,N], got ", x.shape_str());
  require(w.ndim() == 4, "conv2d: weight must be [Co,Ci,kf,kt], got ",
          w.shape_str());
  require(w.dim(1) == x.dim(0), "conv2d: channel mismatch: input has ",
          x.dim(0), " channels, weight expects ", w.dim(1));
  kernels::Conv2dDims d;
  d.ci = x.dim(0);
  d.co = w.dim(0);
  d.kf = w.dim(2);
  d.kt = w.dim(3);
  d.K = x.dim(1);
  d.N = x.dim(2);
  d.stride_f = stride_f;
  d.dil_t = dil_t;
  d.pad_f = pad_f;
  d.Kout = kernels::conv_out_freq(d.K, d.kf, d.pad_f, d.stride_f);
  require(d.Kout > 0, "conv2d: empty output (K=", d.K, ", kf=", d.kf, ")");

  Tensor out({d.co, d.Kout, d.N});
  kernels::conv2d_forward(x.data(), w.data(), out.data(), d);

  if (any_tangent({&x, &w})) {
    std::vector<double> tan(static_cast<size_t>(out.size()), 0.0);
    std::vector<double> tmp(tan.size());
    if (x.has_tangent()) {
      kernels::conv2d_forward(x.tangent().data(), w.data(), tmp.data(), d);
      for (size_t i = 0; i < tan.size(); ++i) tan[i] += tmp[i];
    }
    if (w.has_tangent()) {
      kernels::conv2d_forward(x.data(), w.tangent().data(), tmp.data(), d);
      for (size_t i = 0; i < tan.size(); ++i) tan[i] += tmp[i];
    }
    out.set_tangent(std::move(tan));
  }
  if (Tape* tape = active_tape()) {
    const int ix = node_of(*tape, x);
    const int iw = node_of(*tape, w);
    Tensor xs = x, ws = w;
    const int nx = x.size(), nw = w.size();
    const int node = tape->append(
        out.size(), {ix, iw}, [=](Tape& t, const double* g) {
          if (double* gx = t.grad_buffer(ix, nx)) {
            std::vector<double> tmp(static_cast<size_t>(nx));
            kernels::conv2d_backward_input(g, ws.data(), tmp.data(), d);
            for (int i = 0; i < nx; ++i) gx[i] += tmp[i];
          }
          if (double* gw = t.grad_buffer(iw, nw)) {
            std::vector<double> tmp(static_cast<size_t>(nw));
            kernels::conv2d_backward_weight(g, xs.data(), tmp.data(), d);
            for (int i = 0; i < nw; ++i) gw[i] += tmp[i];
          }
        });
    out.set_node(node, tape->id());
  }
  return out;
}

Tensor conv1d(const Tensor& x, const Tensor& w, int dil_t) {
  require(x.ndim() == 2, "conv1d: input must be [C,N], got ", x.shape_str());
  require(w.ndim() == 3, "conv1d: weight must be [Co,Ci,kt], got ",
          w.shape_str());
  const Tensor x3 = x.reshaped({x.dim(0), 1, x.dim(1)});
  const Tensor w4 = w.reshaped({w.dim(0), w.dim(1), 1, w.dim(2)});
  Tensor y = conv2d(x3, w4, 1, dil_t, 0);
  return y.reshaped({y.dim(0), y.dim(2)});
}

Tensor depthwise_conv2d(const Tensor& x, const Tensor& w, int dil_t,
                        int pad_f) {
  require(x.ndim() == 3, "depthwise_conv2d: input must be [C,K,N], got ",
          x.shape_str());
  require(w.ndim() == 3 && w.dim(0) == x.dim(0),
          "depthwise_conv2d: weight must be [C,kf,kt] with C=", x.dim(0),
          ", got ", w.shape_str());
  kernels::DwDims d;
  d.c = x.dim(0);
  d.kf = w.dim(1);
  d.kt = w.dim(2);
  d.K = x.dim(1);
  d.N = x.dim(2);
  d.dil_t = dil_t;
  d.pad_f = pad_f;

  Tensor out(x.shape());
  kernels::dw_conv2d_forward(x.data(), w.data(), out.data(), d);

  if (any_tangent({&x, &w})) {
    std::vector<double> tan(static_cast<size_t>(out.size()), 0.0);
    std::vector<double> tmp(tan.size());
    if (x.has_tangent()) {
      kernels::dw_conv2d_forward(x.tangent().data(), w.data(), tmp.data(), d);
      for (size_t i = 0; i < tan.size(); ++i) tan[i] += tmp[i];
    }
    if (w.has_tangent()) {
      kernels::dw_conv2d_forward(x.data(), w.tangent().data(), tmp.data(), d);
      for (size_t i = 0; i < tan.size(); ++i) tan[i] += tmp[i];
    }
    out.set_tangent(std::move(tan));
  }
  if (Tape* tape = active_tape()) {
    const int ix = node_of(*tape, x);
    const int iw = node_of(*tape, w);
    Tensor xs = x, ws = w;
    const int nx = x.size(), nw = w.size();
    const int node = tape->append(
        out.size(), {ix, iw}, [=](Tape& t, const double* g) {
          if (double* gx = t.grad_buffer(ix, nx)) {
            std::vector<double> tmp(static_cast<size_t>(nx));
            kernels::dw_conv2d_backward_input(g, ws.data(), tmp.data(), d);
            for (int i = 0; i < nx; ++i) gx[i] += tmp[i];
          }
          if (double* gw = t.grad_buffer(iw, nw)) {
            std::vector<double> tmp(static_cast<size_t>(nw));
            kernels::dw_conv2d_backward_weight(g, xs.data(), tmp.data(), d);
            for (int i = 0; i < nw; ++i) gw[i] += tmp[i];
          }
        });
    out.set_node(node, tape->id());
  }
  return out;
}

Tensor deconv2d(const Tensor& x, const Tensor& w, int stride_f, int pad_f) {
  require(x.ndim() == 3, "deconv2d: input must be [C,K,N], got ",
          x.shape_str());
  require(w.ndim() == 4 && w.dim(0) == x.dim(0),
          "deconv2d: weight must be [Ci,Co,kf,kt] with Ci=", x.dim(0),
          ", got ", w.shape_str());
  kernels::Deconv2dDims d;
  d.ci = x.dim(0);
  d.co = w.dim(1);
  d.kf = w.dim(2);
  d.kt = w.dim(3);
  d.K = x.dim(1);
  d.N = x.dim(2);
  d.stride_f = stride_f;
  d.pad_f = pad_f;
  d.Kout = kernels::deconv_out_freq(d.K, d.kf, d.pad_f, d.stride_f);
  require(d.Kout > 0, "deconv2d: empty output");

  Tensor out({d.co, d.Kout, d.N});
  kernels::deconv2d_forward(x.data(), w.data(), out.data(), d);

  if (any_tangent({&x, &w})) {
    std::vector<double> tan(static_cast<size_t>(out.size()), 0.0);
    std::vector<double> tmp(tan.size());
    if (x.has_tangent()) {
      kernels::deconv2d_forward(x.tangent().data(), w.data(), tmp.data(), d);
      for (size_t i = 0; i < tan.size(); ++i) tan[i] += tmp[i];
    }
    if (w.has_tangent()) {
      kernels::deconv2d_forward(x.data(), w.tangent().data(), tmp.data(), d);
      for (size_t i = 0; i < tan.size(); ++i) tan[i] += tmp[i];
    }
    out.set_tangent(std::move(tan));
  }
  if (Tape* tape = active_tape()) {
    const int ix = node_of(*tape, x);
    const int iw = node_of(*tape, w);
    Tensor xs = x, ws = w;
    const int nx = x.size(), nw = w.size();
    const int node = tape->append(
        out.size(), {ix, iw}, [=](Tape& t, const double* g) {
          if (double* gx = t.grad_buffer(ix, nx)) {
            std::vector<double> tmp(static_cast<size_t>(nx));
            kernels::deconv2d_backward_input(g, ws.data(), tmp.data(), d);
            for (int i = 0; i < nx; ++i) gx[i] += tmp[i];
          }
          if (double* gw = t.grad_buffer(iw, nw)) {
            std::vector<double> tmp(static_cast<size_t>(nw));
            kernels::deconv2d_backward_weight(g, xs.data(), tmp.data(), d);
            for (int i = 0; i < nw; ++i) gw[i] += tmp[i];
          }
        });
    out.set_node(node, tape->id());
  }
  return out;
}

// ---------------------------------------------------------------------------
// structural ops
// ---------------------------------------------------------------------------

Tensor add_channel_bias(const Tensor& x, const Tensor& b) {
  require(x.ndim() >= 1, "add_channel_bias: input must have a channel dim");
  const int C = x.dim(0);
  require(b.size() == C, "add_channel_bias: bias must have ", C,
          " entries, got ", b.size());
  const int rest = x.size() / C;
  Tensor out(x.shape());
  const double* xv = x.data();
  const double* bv = b.data();
  double* yv = out.data();
  for (int c = 0; c < C; ++c)
    for (int i = 0; i < rest; ++i)
      yv[static_cast<size_t>(c) * rest + i] =
          xv[static_cast<size_t>(c) * rest + i] + bv[c];

  if (any_tangent({&x, &b})) {
    std::vector<double> tan(static_cast<size_t>(x.size()), 0.0);
    if (x.has_tangent()) {
      const double* dx = x.tangent().data();
      for (size_t i = 0; i < tan.size(); ++i) tan[i] += dx[i];
    }
    if (b.has_tangent()) {
      const double* db = b.tangent().data();
      for (int c = 0; c < C; ++c)
        for (int i = 0; i < rest; ++i)
          tan[static_cast<size_t>(c) * rest + i] += db[c];
    }
    out.set_tangent(std::move(tan));
  }
  if (Tape* tape = active_tape()) {
    const int ix = node_of(*tape, x);
    const int ib = node_of(*tape, b);
    const int n = x.size();
    const int node = tape->append(
        n, {ix, ib}, [=](Tape& t, const double* g) {
          if (double* gx = t.grad_buffer(ix, n))
            for (int i = 0; i < n; ++i) gx[i] += g[i];
          if (double* gb = t.grad_buffer(ib, C))
            for (int c = 0; c < C; ++c) {
              double acc = 0.0;
              for (int i = 0; i < rest; ++i)
                acc += g[static_cast<size_t>(c) * rest + i];
              gb[c] += acc;
            }
        });
    out.set_node(node, tape->id());
  }
  return out;
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
  require(a.ndim() == b.ndim() && a.ndim() >= 1,
          "concat_channels: rank mismatch: ", a.shape_str(), " vs ",
          b.shape_str());
  for (int i = 1; i < a.ndim(); ++i)
    require(a.dim(i) == b.dim(i), "concat_channels: trailing dims differ: ",
            a.shape_str(), " vs ", b.shape_str());
  std::vector<int> shape = a.shape();
  shape[0] += b.dim(0);
  Tensor out(shape);
  const int na = a.size(), nb = b.size();
  std::memcpy(out.data(), a.data(), sizeof(double) * static_cast<size_t>(na));
  std::memcpy(out.data() + na, b.data(),
              sizeof(double) * static_cast<size_t>(nb));

  if (any_tangent({&a, &b})) {
    std::vector<double> tan(static_cast<size_t>(na + nb), 0.0);
    if (a.has_tangent())
      std::memcpy(tan.data(), a.tangent().data(),
                  sizeof(double) * static_cast<size_t>(na));
    if (b.has_tangent())
      std::memcpy(tan.data() + na, b.tangent().data(),
                  sizeof(double) * static_cast<size_t>(nb));
    out.set_tangent(std::move(tan));
  }
  if (Tape* tape = active_tape()) {
    const int ia = node_of(*tape, a);
    const int ib = node_of(*tape, b);
    const int node = tape->append(
        na + nb, {ia, ib}, [=](Tape& t, const double* g) {
          if (double* ga = t.grad_buffer(ia, na))
            for (int i = 0; i < na; ++i) ga[i] += g[i];
          if (double* gb = t.grad_buffer(ib, nb))
            for (int i = 0; i < nb; ++i) gb[i] += g[na + i];
        });
    out.set_node(node, tape->id());
  }
  return out;
}

// ---------------------------------------------------------------------------
// frequency attention
// ---------------------------------------------------------------------------

Tensor freq_attention(const Tensor& q, const Tensor& k, const Tensor& v) {
  require(q.ndim() == 3, "freq_attention: inputs must be [C,K,N], got ",
          q.shape_str());
  require(same_shape(q, k) && same_shape(q, v),
          "freq_attention: q/k/v shapes differ: ", q.shape_str(), " ",
          k.shape_str(), " ", v.shape_str());
  const int C = q.dim(0), K = q.dim(1), N = q.dim(2);
  Tensor out(q.shape());
  auto attn = std::make_shared<std::vector<double>>(
      static_cast<size_t>(N) * K * K);
  kernels::attention_forward(q.data(), k.data(), v.data(), attn->data(),
                             out.data(), C, K, N);

  if (any_tangent({&q, &k, &v})) {
    std::vector<double> tan(static_cast<size_t>(q.size()), 0.0);
    kernels::attention_tangent(q.data(), k.data(), v.data(), attn->data(),
                               tangent_or_null(q), tangent_or_null(k),
                               tangent_or_null(v), tan.data(), C, K, N);
    out.set_tangent(std::move(tan));
  }
  if (Tape* tape = active_tape()) {
    const int iq = node_of(*tape, q);
    const int ik = node_of(*tape, k);
    const int iv = node_of(*tape, v);
    Tensor qs = q, ks = k, vs = v;
    const int n = q.size();
    const int node = tape->append(
        n, {iq, ik, iv}, [=](Tape& t, const double* g) {
          std::vector<double> gq(static_cast<size_t>(n)),
              gk(static_cast<size_t>(n)), gv(static_cast<size_t>(n));
          kernels::attention_backward(qs.data(), ks.data(), vs.data(),
                                      attn->data(), g, gq.data(), gk.data(),
                                      gv.data(), C, K, N);
          if (double* p = t.grad_buffer(iq, n))
            for (int i = 0; i < n; ++i) p[i] += gq[i];
          if (double* p = t.grad_buffer(ik, n))
            for (int i = 0; i < n; ++i) p[i] += gk[i];
          if (double* p = t.grad_buffer(iv, n))
            for (int i = 0; i < n; ++i) p[i] += gv[i];
        });
    out.set_node(node, tape->id());
  }
  return out;
}

}  // namespace ops

}  // namespace flowsr::autodiff
