// Copyright (C) 2026 the flowsr authors
// SPDX-License-Identifier: Apache-2.0
#include "flowsr/kernels.hpp"

#include <atomic>
#include <cmath>
#include <cstring>
#include <vector>

#include "flowsr/common.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace flowsr::kernels {

namespace {
std::atomic<Backend> g_backend{
#ifdef _OPENMP
    Backend::openmp
#else
    Backend::serial
#endif
};

inline bool par() { return g_backend.load() == Backend::openmp; }
}  // namespace

Backend backend() { return g_backend.load(); }

void set_backend(Backend b) {
  if (b == Backend::openmp && !openmp_available()) b = Backend::serial;
  g_backend.store(b);
}

bool openmp_available() {
#ifdef _OPENMP
  return true;
#else
  return false;
#endif
}

int conv_out_freq(int K, int kf, int pad_f, int stride_f) {
  return (K + 2 * pad_f - kf) / stride_f + 1;
}

int deconv_out_freq(int K, int kf, int pad_f, int stride_f) {
  return (K - 1) * stride_f - 2 * pad_f + kf;
}

// ---------------------------------------------------------------------------
// conv2d
// ---------------------------------------------------------------------------

namespace {

// Reference: one output element at a time, accumulation order ci -> df -> dt.
void conv2d_forward_serial(const double* x, const double* w, double* y,
                           const Conv2dDims& d) {
  for (int co = 0; co < d.co; ++co)
    for (int ko = 0; ko < d.Kout; ++ko)
      for (int n = 0; n < d.N; ++n) {
        double acc = 0.0;
        for (int ci = 0; ci < d.ci; ++ci)
          for (int df = 0; df < d.kf; ++df) {
            const int ki = ko * d.stride_f + df - d.pad_f;
            if (ki < 0 || ki >= d.K) continue;
            for (int dt = 0; dt < d.kt; ++dt) {
              const int nn = n - dt * d.dil_t;
              if (nn < 0) continue;
              acc += w[((co * d.ci + ci) * d.kf + df) * d.kt + dt] *
                     x[(ci * d.K + ki) * d.N + nn];
            }
          }
        y[(co * d.Kout + ko) * d.N + n] = acc;
      }
}

// Optimized: rows over contiguous time; same per-element accumulation order.
void conv2d_forward_par(const double* x, const double* w, double* y,
                        const Conv2dDims& d) {
#pragma omp parallel for schedule(static)
  for (int row = 0; row < d.co * d.Kout; ++row) {
    const int co = row / d.Kout;
    const int ko = row % d.Kout;
    double* yrow = y + static_cast<size_t>(row) * d.N;
    std::memset(yrow, 0, sizeof(double) * static_cast<size_t>(d.N));
    for (int ci = 0; ci < d.ci; ++ci)
      for (int df = 0; df < d.kf; ++df) {
        const int ki = ko * d.stride_f + df - d.pad_f;
        if (ki < 0 || ki >= d.K) continue;
        const double* xrow = x + (static_cast<size_t>(ci) * d.K + ki) * d.N;
        const double* wp = w + ((co * d.ci + ci) * d.kf + df) * d.kt;
        for (int dt = 0; dt < d.kt; ++dt) {
          const int off = dt * d.dil_t;
          const double wv = wp[dt];
          for (int n = off; n < d.N; ++n) yrow[n] += wv * xrow[n - off];
        }
      }
  }
}

void conv2d_backward_input_serial(const double* gy, const double* w,
                                  double* gx, const Conv2dDims& d) {
  for (int ci = 0; ci < d.ci; ++ci)
    for (int ki = 0; ki < d.K; ++ki)
      for (int n = 0; n < d.N; ++n) {
        double acc = 0.0;
        for (int co = 0; co < d.co; ++co)
          for (int df = 0; df < d.kf; ++df) {
            const int t = ki + d.pad_f - df;
            if (t < 0 || t % d.stride_f != 0) continue;
            const int ko = t / d.stride_f;
            if (ko >= d.Kout) continue;
            for (int dt = 0; dt < d.kt; ++dt) {
              const int nn = n + dt * d.dil_t;
              if (nn >= d.N) continue;
              acc += w[((co * d.ci + ci) * d.kf + df) * d.kt + dt] *
                     gy[(co * d.Kout + ko) * d.N + nn];
            }
          }
        gx[(ci * d.K + ki) * d.N + n] = acc;
      }
}

void conv2d_backward_input_par(const double* gy, const double* w, double* gx,
                               const Conv2dDims& d) {
#pragma omp parallel for schedule(static)
  for (int row = 0; row < d.ci * d.K; ++row) {
    const int ci = row / d.K;
    const int ki = row % d.K;
    double* gxrow = gx + static_cast<size_t>(row) * d.N;
    std::memset(gxrow, 0, sizeof(double) * static_cast<size_t>(d.N));
    for (int co = 0; co < d.co; ++co)
      for (int df = 0; df < d.kf; ++df) {
        const int t = ki + d.pad_f - df;
        if (t < 0 || t % d.stride_f != 0) continue;
        const int ko = t / d.stride_f;
        if (ko >= d.Kout) continue;
        const double* gyrow = gy + (static_cast<size_t>(co) * d.Kout + ko) * d.N;
        const double* wp = w + ((co * d.ci + ci) * d.kf + df) * d.kt;
        for (int dt = 0; dt < d.kt; ++dt) {
          const int off = dt * d.dil_t;
          const double wv = wp[dt];
          for (int n = 0; n < d.N - off; ++n) gxrow[n] += wv * gyrow[n + off];
        }
      }
  }
}

void conv2d_backward_weight_serial(const double* gy, const double* x,
                                   double* gw, const Conv2dDims& d) {
  for (int co = 0; co < d.co; ++co)
    for (int ci = 0; ci < d.ci; ++ci)
      for (int df = 0; df < d.kf; ++df)
        for (int dt = 0; dt < d.kt; ++dt) {
          double acc = 0.0;
          const int off = dt * d.dil_t;
          for (int ko = 0; ko < d.Kout; ++ko) {
            const int ki = ko * d.stride_f + df - d.pad_f;
            if (ki < 0 || ki >= d.K) continue;
            for (int n = off; n < d.N; ++n)
              acc += gy[(co * d.Kout + ko) * d.N + n] *
                     x[(ci * d.K + ki) * d.N + n - off];
          }
          gw[((co * d.ci + ci) * d.kf + df) * d.kt + dt] = acc;
        }
}

void conv2d_backward_weight_par(const double* gy, const double* x, double* gw,
                                const Conv2dDims& d) {
#pragma omp parallel for schedule(static)
  for (int co = 0; co < d.co; ++co)
    for (int ci = 0; ci < d.ci; ++ci)
      for (int df = 0; df < d.kf; ++df)
        for (int dt = 0; dt < d.kt; ++dt) {
          double acc = 0.0;
          const int off = dt * d.dil_t;
          for (int ko = 0; ko < d.Kout; ++ko) {
            const int ki = ko * d.stride_f + df - d.pad_f;
            if (ki < 0 || ki >= d.K) continue;
            const double* gyrow =
                gy + (static_cast<size_t>(co) * d.Kout + ko) * d.N;
            const double* xrow =
                x + (static_cast<size_t>(ci) * d.K + ki) * d.N - off;
            for (int n = off; n < d.N; ++n) acc += gyrow[n] * xrow[n];
          }
          gw[((co * d.ci + ci) * d.kf + df) * d.kt + dt] = acc;
        }
}

}  // namespace

void conv2d_forward(const double* x, const double* w, double* y,
                    const Conv2dDims& d) {
  par() ? conv2d_forward_par(x, w, y, d) : conv2d_forward_serial(x, w, y, d);
}
void conv2d_backward_input(const double* gy, const double* w, double* gx,
                           const Conv2dDims& d) {
  par() ? conv2d_backward_input_par(gy, w, gx, d)
        : conv2d_backward_input_serial(gy, w, gx, d);
}
void conv2d_backward_weight(const double* gy, const double* x, double* gw,
                            const Conv2dDims& d) {
  par() ? conv2d_backward_weight_par(gy, x, gw, d)
        : conv2d_backward_weight_serial(gy, x, gw, d);
}

// ---------------------------------------------------------------------------
// depthwise conv2d
// ---------------------------------------------------------------------------

namespace {

void dw_forward_serial(const double* x, const double* w, double* y,
                       const DwDims& d) {
  for (int c = 0; c < d.c; ++c)
    for (int ko = 0; ko < d.K; ++ko)
      for (int n = 0; n < d.N; ++n) {
        double acc = 0.0;
        for (int df = 0; df < d.kf; ++df) {
          const int ki = ko + df - d.pad_f;
          if (ki < 0 || ki >= d.K) continue;
          for (int dt = 0; dt < d.kt; ++dt) {
            const int nn = n - dt * d.dil_t;
            if (nn < 0) continue;
            acc += w[(c * d.kf + df) * d.kt + dt] * x[(c * d.K + ki) * d.N + nn];
          }
        }
        y[(c * d.K + ko) * d.N + n] = acc;
      }
}

void dw_forward_par(const double* x, const double* w, double* y,
                    const DwDims& d) {
#pragma omp parallel for schedule(static)
  for (int row = 0; row < d.c * d.K; ++row) {
    const int c = row / d.K;
    const int ko = row % d.K;
    double* yrow = y + static_cast<size_t>(row) * d.N;
    std::memset(yrow, 0, sizeof(double) * static_cast<size_t>(d.N));
    for (int df = 0; df < d.kf; ++df) {
      const int ki = ko + df - d.pad_f;
      if (ki < 0 || ki >= d.K) continue;
      const double* xrow = x + (static_cast<size_t>(c) * d.K + ki) * d.N;
      const double* wp = w + (c * d.kf + df) * d.kt;
      for (int dt = 0; dt < d.kt; ++dt) {
        const int off = dt * d.dil_t;
        const double wv = wp[dt];
        for (int n = off; n < d.N; ++n) yrow[n] += wv * xrow[n - off];
      }
    }
  }
}

void dw_backward_input_serial(const double* gy, const double* w, double* gx,
                              const DwDims& d) {
  for (int c = 0; c < d.c; ++c)
    for (int ki = 0; ki < d.K; ++ki)
      for (int n = 0; n < d.N; ++n) {
        double acc = 0.0;
        for (int df = 0; df < d.kf; ++df) {
          const int ko = ki + d.pad_f - df;
          if (ko < 0 || ko >= d.K) continue;
          for (int dt = 0; dt < d.kt; ++dt) {
            const int nn = n + dt * d.dil_t;
            if (nn >= d.N) continue;
            acc +=
                w[(c * d.kf + df) * d.kt + dt] * gy[(c * d.K + ko) * d.N + nn];
          }
        }
        gx[(c * d.K + ki) * d.N + n] = acc;
      }
}

void dw_backward_input_par(const double* gy, const double* w, double* gx,
                           const DwDims& d) {
#pragma omp parallel for schedule(static)
  for (int row = 0; row < d.c * d.K; ++row) {
    const int c = row / d.K;
    const int ki = row % d.K;
    double* gxrow = gx + static_cast<size_t>(row) * d.N;
    std::memset(gxrow, 0, sizeof(double) * static_cast<size_t>(d.N));
    for (int df = 0; df < d.kf; ++df) {
      const int ko = ki + d.pad_f - df;
      if (ko < 0 || ko >= d.K) continue;
      const double* gyrow = gy + (static_cast<size_t>(c) * d.K + ko) * d.N;
      const double* wp = w + (c * d.kf + df) * d.kt;
      for (int dt = 0; dt < d.kt; ++dt) {
        const int off = dt * d.dil_t;
        const double wv = wp[dt];
        for (int n = 0; n < d.N - off; ++n) gxrow[n] += wv * gyrow[n + off];
      }
    }
  }
}

void dw_backward_weight_serial(const double* gy, const double* x, double* gw,
                               const DwDims& d) {
  for (int c = 0; c < d.c; ++c)
    for (int df = 0; df < d.kf; ++df)
      for (int dt = 0; dt < d.kt; ++dt) {
        double acc = 0.0;
        const int off = dt * d.dil_t;
        for (int ko = 0; ko < d.K; ++ko) {
          const int ki = ko + df - d.pad_f;
          if (ki < 0 || ki >= d.K) continue;
          for (int n = off; n < d.N; ++n)
            acc += gy[(c * d.K + ko) * d.N + n] *
                   x[(c * d.K + ki) * d.N + n - off];
        }
        gw[(c * d.kf + df) * d.kt + dt] = acc;
      }
}

void dw_backward_weight_par(const double* gy, const double* x, double* gw,
                            const DwDims& d) {
#pragma omp parallel for schedule(static)
  for (int c = 0; c < d.c; ++c)
    for (int df = 0; df < d.kf; ++df)
      for (int dt = 0; dt < d.kt; ++dt) {
        double acc = 0.0;
        const int off = dt * d.dil_t;
        for (int ko = 0; ko < d.K; ++ko) {
          const int ki = ko + df - d.pad_f;
          if (ki < 0 || ki >= d.K) continue;
          const double* gyrow = gy + (static_cast<size_t>(c) * d.K + ko) * d.N;
          const double* xrow =
              x + (static_cast<size_t>(c) * d.K + ki) * d.N - off;
          for (int n = off; n < d.N; ++n) acc += gyrow[n] * xrow[n];
        }
        gw[(c * d.kf + df) * d.kt + dt] = acc;
      }
}

}  // namespace

void dw_conv2d_forward(const double* x, const double* w, double* y,
                       const DwDims& d) {
  par() ? dw_forward_par(x, w, y, d) : dw_forward_serial(x, w, y, d);
}
void dw_conv2d_backward_input(const double* gy, const double* w, double* gx,
                              const DwDims& d) {
  par() ? dw_backward_input_par(gy, w, gx, d)
        : dw_backward_input_serial(gy, w, gx, d);
}
void dw_conv2d_backward_weight(const double* gy, const double* x, double* gw,
                               const DwDims& d) {
  par() ? dw_backward_weight_par(gy, x, gw, d)
        : dw_backward_weight_serial(gy, x, gw, d);
}

// ---------------------------------------------------------------------------
// transposed conv along frequency (gather form)
// ---------------------------------------------------------------------------

namespace {

void deconv_forward_serial(const double* x, const double* w, double* y,
                           const Deconv2dDims& d) {
  for (int co = 0; co < d.co; ++co)
    for (int ko = 0; ko < d.Kout; ++ko)
      for (int n = 0; n < d.N; ++n) {
        double acc = 0.0;
        for (int ci = 0; ci < d.ci; ++ci)
          for (int df = 0; df < d.kf; ++df) {
            const int t = ko + d.pad_f - df;
            if (t < 0 || t % d.stride_f != 0) continue;
            const int ki = t / d.stride_f;
            if (ki >= d.K) continue;
            for (int dt = 0; dt < d.kt; ++dt) {
              const int nn = n - dt;
              if (nn < 0) continue;
              acc += w[((ci * d.co + co) * d.kf + df) * d.kt + dt] *
                     x[(ci * d.K + ki) * d.N + nn];
            }
          }
        y[(co * d.Kout + ko) * d.N + n] = acc;
      }
}

void deconv_forward_par(const double* x, const double* w, double* y,
                        const Deconv2dDims& d) {
#pragma omp parallel for schedule(static)
  for (int row = 0; row < d.co * d.Kout; ++row) {
    const int co = row / d.Kout;
    const int ko = row % d.Kout;
    double* yrow = y + static_cast<size_t>(row) * d.N;
    std::memset(yrow, 0, sizeof(double) * static_cast<size_t>(d.N));
    for (int ci = 0; ci < d.ci; ++ci)
      for (int df = 0; df < d.kf; ++df) {
        const int t = ko + d.pad_f - df;
        if (t < 0 || t % d.stride_f != 0) continue;
        const int ki = t / d.stride_f;
        if (ki >= d.K) continue;
        const double* xrow = x + (static_cast<size_t>(ci) * d.K + ki) * d.N;
        const double* wp = w + ((ci * d.co + co) * d.kf + df) * d.kt;
        for (int dt = 0; dt < d.kt; ++dt) {
          const double wv = wp[dt];
          for (int n = dt; n < d.N; ++n) yrow[n] += wv * xrow[n - dt];
        }
      }
  }
}

void deconv_backward_input_serial(const double* gy, const double* w,
                                  double* gx, const Deconv2dDims& d) {
  for (int ci = 0; ci < d.ci; ++ci)
    for (int ki = 0; ki < d.K; ++ki)
      for (int n = 0; n < d.N; ++n) {
        double acc = 0.0;
        for (int co = 0; co < d.co; ++co)
          for (int df = 0; df < d.kf; ++df) {
            const int ko = ki * d.stride_f + df - d.pad_f;
            if (ko < 0 || ko >= d.Kout) continue;
            for (int dt = 0; dt < d.kt; ++dt) {
              const int nn = n + dt;
              if (nn >= d.N) continue;
              acc += w[((ci * d.co + co) * d.kf + df) * d.kt + dt] *
                     gy[(co * d.Kout + ko) * d.N + nn];
            }
          }
        gx[(ci * d.K + ki) * d.N + n] = acc;
      }
}

void deconv_backward_input_par(const double* gy, const double* w, double* gx,
                               const Deconv2dDims& d) {
#pragma omp parallel for schedule(static)
  for (int row = 0; row < d.ci * d.K; ++row) {
    const int ci = row / d.K;
    const int ki = row % d.K;
    double* gxrow = gx + static_cast<size_t>(row) * d.N;
    std::memset(gxrow, 0, sizeof(double) * static_cast<size_t>(d.N));
    for (int co = 0; co < d.co; ++co)
      for (int df = 0; df < d.kf; ++df) {
        const int ko = ki * d.stride_f + df - d.pad_f;
        if (ko < 0 || ko >= d.Kout) continue;
        const double* gyrow = gy + (static_cast<size_t>(co) * d.Kout + ko) * d.N;
        const double* wp = w + ((ci * d.co + co) * d.kf + df) * d.kt;
        for (int dt = 0; dt < d.kt; ++dt) {
          const double wv = wp[dt];
          for (int n = 0; n < d.N - dt; ++n) gxrow[n] += wv * gyrow[n + dt];
        }
      }
  }
}

void deconv_backward_weight_serial(const double* gy, const double* x,
                                   double* gw, const Deconv2dDims& d) {
  for (int ci = 0; ci < d.ci; ++ci)
    for (int co = 0; co < d.co; ++co)
      for (int df = 0; df < d.kf; ++df)
        for (int dt = 0; dt < d.kt; ++dt) {
          double acc = 0.0;
          for (int ki = 0; ki < d.K; ++ki) {
            const int ko = ki * d.stride_f + df - d.pad_f;
            if (ko < 0 || ko >= d.Kout) continue;
            for (int n = 0; n < d.N - dt; ++n)
              acc += x[(ci * d.K + ki) * d.N + n] *
                     gy[(co * d.Kout + ko) * d.N + n + dt];
          }
          gw[((ci * d.co + co) * d.kf + df) * d.kt + dt] = acc;
        }
}

void deconv_backward_weight_par(const double* gy, const double* x, double* gw,
                                const Deconv2dDims& d) {
#pragma omp parallel for schedule(static)
  for (int pair = 0; pair < d.ci * d.co; ++pair) {
    const int ci = pair / d.co;
    const int co = pair % d.co;
    for (int df = 0; df < d.kf; ++df)
      for (int dt = 0; dt < d.kt; ++dt) {
        double acc = 0.0;
        for (int ki = 0; ki < d.K; ++ki) {
          const int ko = ki * d.stride_f + df - d.pad_f;
          if (ko < 0 || ko >= d.Kout) continue;
          const double* xrow = x + (static_cast<size_t>(ci) * d.K + ki) * d.N;
          const double* gyrow =
              gy + (static_cast<size_t>(co) * d.Kout + ko) * d.N + dt;
          for (int n = 0; n < d.N - dt; ++n) acc += xrow[n] * gyrow[n];
        }
        gw[((ci * d.co + co) * d.kf + df) * d.kt + dt] = acc;
      }
  }
}

}  // namespace

void deconv2d_forward(const double* x, const double* w, double* y,
                      const Deconv2dDims& d) {
  par() ? deconv_forward_par(x, w, y, d) : deconv_forward_serial(x, w, y, d);
}
void deconv2d_backward_input(const double* gy, const double* w, double* gx,
                             const Deconv2dDims& d) {
  par() ? deconv_backward_input_par(gy, w, gx, d)
        : deconv_backward_input_serial(gy, w, gx, d);
}
void deconv2d_backward_weight(const double* gy, const double* x, double* gw,
                              const Deconv2dDims& d) {
  par() ? deconv_backward_weight_par(gy, x, gw, d)
        : deconv_backward_weight_serial(gy, x, gw, d);
}

// ---------------------------------------------------------------------------
// matmul family
// ---------------------------------------------------------------------------

namespace {

void matmul_serial(const double* a, const double* b, double* c, int m, int k,
                   int n) {
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) {
      double acc = 0.0;
      for (int l = 0; l < k; ++l) acc += a[i * k + l] * b[l * n + j];
      c[i * n + j] = acc;
    }
}

void matmul_par(const double* a, const double* b, double* c, int m, int k,
                int n) {
#pragma omp parallel for schedule(static)
  for (int i = 0; i < m; ++i) {
    double* crow = c + static_cast<size_t>(i) * n;
    std::memset(crow, 0, sizeof(double) * static_cast<size_t>(n));
    for (int l = 0; l < k; ++l) {
      const double av = a[i * k + l];
      const double* brow = b + static_cast<size_t>(l) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void matmul_at_serial(const double* a, const double* b, double* c, int m,
                      int k, int n) {
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) {
      double acc = 0.0;
      for (int l = 0; l < k; ++l) acc += a[l * m + i] * b[l * n + j];
      c[i * n + j] = acc;
    }
}

void matmul_at_par(const double* a, const double* b, double* c, int m, int k,
                   int n) {
#pragma omp parallel for schedule(static)
  for (int i = 0; i < m; ++i) {
    double* crow = c + static_cast<size_t>(i) * n;
    std::memset(crow, 0, sizeof(double) * static_cast<size_t>(n));
    for (int l = 0; l < k; ++l) {
      const double av = a[l * m + i];
      const double* brow = b + static_cast<size_t>(l) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void matmul_bt_serial(const double* a, const double* b, double* c, int m,
                      int k, int n) {
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) {
      double acc = 0.0;
      for (int l = 0; l < k; ++l) acc += a[i * k + l] * b[j * k + l];
      c[i * n + j] = acc;
    }
}

void matmul_bt_par(const double* a, const double* b, double* c, int m, int k,
                   int n) {
#pragma omp parallel for schedule(static)
  for (int i = 0; i < m; ++i) {
    const double* arow = a + static_cast<size_t>(i) * k;
    for (int j = 0; j < n; ++j) {
      const double* brow = b + static_cast<size_t>(j) * k;
      double acc = 0.0;
      for (int l = 0; l < k; ++l) acc += arow[l] * brow[l];
      c[i * n + j] = acc;
    }
  }
}

}  // namespace

void matmul(const double* a, const double* b, double* c, int m, int k, int n) {
  par() ? matmul_par(a, b, c, m, k, n) : matmul_serial(a, b, c, m, k, n);
}
void matmul_at(const double* a, const double* b, double* c, int m, int k,
               int n) {
  par() ? matmul_at_par(a, b, c, m, k, n) : matmul_at_serial(a, b, c, m, k, n);
}
void matmul_bt(const double* a, const double* b, double* c, int m, int k,
               int n) {
  par() ? matmul_bt_par(a, b, c, m, k, n) : matmul_bt_serial(a, b, c, m, k, n);
}

// ---------------------------------------------------------------------------
// frequency attention (per-frame, single head)
// ---------------------------------------------------------------------------

namespace {

inline size_t fidx(int c, int k, int n, int K, int N) {
  return (static_cast<size_t>(c) * K + k) * N + n;
}

void attention_frame_forward(const double* q, const double* k, const double* v,
                             double* A, double* out, int C, int K, int N,
                             int n) {
  const double invs = 1.0 / std::sqrt(static_cast<double>(C));
  // scores
  for (int a = 0; a < K; ++a)
    for (int b = 0; b < K; ++b) {
      double acc = 0.0;
      for (int c = 0; c < C; ++c)
        acc += q[fidx(c, a, n, K, N)] * k[fidx(c, b, n, K, N)];
      A[a * K + b] = acc * invs;
    }
  // row softmax
  for (int a = 0; a < K; ++a) {
    double* row = A + static_cast<size_t>(a) * K;
    double mx = row[0];
    for (int b = 1; b < K; ++b) mx = std::max(mx, row[b]);
    double sum = 0.0;
    for (int b = 0; b < K; ++b) {
      row[b] = std::exp(row[b] - mx);
      sum += row[b];
    }
    const double inv = 1.0 / sum;
    for (int b = 0; b < K; ++b) row[b] *= inv;
  }
  // weighted values
  for (int c = 0; c < C; ++c)
    for (int a = 0; a < K; ++a) {
      double acc = 0.0;
      const double* row = A + static_cast<size_t>(a) * K;
      for (int b = 0; b < K; ++b) acc += row[b] * v[fidx(c, b, n, K, N)];
      out[fidx(c, a, n, K, N)] = acc;
    }
}

void attention_frame_backward(const double* q, const double* k,
                              const double* v, const double* A,
                              const double* g, double* gq, double* gk,
                              double* gv, int C, int K, int N, int n) {
  const double invs = 1.0 / std::sqrt(static_cast<double>(C));
  std::vector<double> gA(static_cast<size_t>(K) * K, 0.0);
  // gV and gA
  for (int c = 0; c < C; ++c)
    for (int b = 0; b < K; ++b) {
      double acc = 0.0;
      for (int a = 0; a < K; ++a)
        acc += A[a * K + b] * g[fidx(c, a, n, K, N)];
      gv[fidx(c, b, n, K, N)] = acc;
    }
  for (int a = 0; a < K; ++a)
    for (int b = 0; b < K; ++b) {
      double acc = 0.0;
      for (int c = 0; c < C; ++c)
        acc += g[fidx(c, a, n, K, N)] * v[fidx(c, b, n, K, N)];
      gA[a * K + b] = acc;
    }
  // softmax backward into gA (in place -> gS)
  for (int a = 0; a < K; ++a) {
    const double* Arow = A + static_cast<size_t>(a) * K;
    double* grow = gA.data() + static_cast<size_t>(a) * K;
    double dot = 0.0;
    for (int b = 0; b < K; ++b) dot += grow[b] * Arow[b];
    for (int b = 0; b < K; ++b) grow[b] = Arow[b] * (grow[b] - dot);
  }
  // project to q and k
  for (int c = 0; c < C; ++c)
    for (int a = 0; a < K; ++a) {
      double acc = 0.0;
      for (int b = 0; b < K; ++b)
        acc += gA[a * K + b] * k[fidx(c, b, n, K, N)];
      gq[fidx(c, a, n, K, N)] = acc * invs;
    }
  for (int c = 0; c < C; ++c)
    for (int b = 0; b < K; ++b) {
      double acc = 0.0;
      for (int a = 0; a < K; ++a)
        acc += gA[a * K + b] * q[fidx(c, a, n, K, N)];
      gk[fidx(c, b, n, K, N)] = acc * invs;
    }
}

void attention_frame_tangent(const double* q, const double* k, const double* v,
                             const double* A, const double* dq,
                             const double* dk, const double* dv, double* dout,
                             int C, int K, int N, int n) {
  const double invs = 1.0 / std::sqrt(static_cast<double>(C));
  std::vector<double> dS(static_cast<size_t>(K) * K, 0.0);
  if (dq || dk) {
    for (int a = 0; a < K; ++a)
      for (int b = 0; b < K; ++b) {
        double acc = 0.0;
        for (int c = 0; c < C; ++c) {
          if (dq)
            acc += dq[fidx(c, a, n, K, N)] * k[fidx(c, b, n, K, N)];
          if (dk)
            acc += q[fidx(c, a, n, K, N)] * dk[fidx(c, b, n, K, N)];
        }
        dS[a * K + b] = acc * invs;
      }
    // softmax differential: dA = A o (dS - rowdot(dS o A))
    for (int a = 0; a < K; ++a) {
      const double* Arow = A + static_cast<size_t>(a) * K;
      double* drow = dS.data() + static_cast<size_t>(a) * K;
      double dot = 0.0;
      for (int b = 0; b < K; ++b) dot += drow[b] * Arow[b];
      for (int b = 0; b < K; ++b) drow[b] = Arow[b] * (drow[b] - dot);
    }
  }
  for (int c = 0; c < C; ++c)
    for (int a = 0; a < K; ++a) {
      double acc = 0.0;
      const double* Arow = A + static_cast<size_t>(a) * K;
      const double* dArow = dS.data() + static_cast<size_t>(a) * K;
      for (int b = 0; b < K; ++b) {
        acc += dArow[b] * v[fidx(c, b, n, K, N)];
        if (dv) acc += Arow[b] * dv[fidx(c, b, n, K, N)];
      }
      dout[fidx(c, a, n, K, N)] = acc;
    }
}

}  // namespace

void attention_forward(const double* q, const double* k, const double* v,
                       double* attn, double* out, int C, int K, int N) {
  if (par()) {
#pragma omp parallel for schedule(static)
    for (int n = 0; n < N; ++n)
      attention_frame_forward(q, k, v, attn + static_cast<size_t>(n) * K * K,
                              out, C, K, N, n);
  } else {
    for (int n = 0; n < N; ++n)
      attention_frame_forward(q, k, v, attn + static_cast<size_t>(n) * K * K,
                              out, C, K, N, n);
  }
}

void attention_backward(const double* q, const double* k, const double* v,
                        const double* attn, const double* gout, double* gq,
                        double* gk, double* gv, int C, int K, int N) {
  if (par()) {
#pragma omp parallel for schedule(static)
    for (int n = 0; n < N; ++n)
      attention_frame_backward(q, k, v, attn + static_cast<size_t>(n) * K * K,
                               gout, gq, gk, gv, C, K, N, n);
  } else {
    for (int n = 0; n < N; ++n)
      attention_frame_backward(q, k, v, attn + static_cast<size_t>(n) * K * K,
                               gout, gq, gk, gv, C, K, N, n);
  }
}

void attention_tangent(const double* q, const double* k, const double* v,
                       const double* attn, const double* dq, const double* dk,
                       const double* dv, double* dout, int C, int K, int N) {
  if (par()) {
#pragma omp parallel for schedule(static)
    for (int n = 0; n < N; ++n)
      attention_frame_tangent(q, k, v, attn + static_cast<size_t>(n) * K * K,
                              dq, dk, dv, dout, C, K, N, n);
  } else {
    for (int n = 0; n < N; ++n)
      attention_frame_tangent(q, k, v, attn + static_cast<size_t>(n) * K * K,
                              dq, dk, dv, dout, C, K, N, n);
  }
}

}  // namespace flowsr::kernels
