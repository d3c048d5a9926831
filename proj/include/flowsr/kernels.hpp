// Copyright (C) 2026 the flowsr authors
// SPDX-License-Identifier: Apache-2.0
#ifndef FLOWSR_KERNELS_HPP
#define FLOWSR_KERNELS_HPP

namespace flowsr::kernels {

// Every kernel has a serial reference implementation and an OpenMP variant.
// Both use the same per-element accumulation order, so results are
// bit-identical and the parallel path can be validated exactly against the
// reference. The backend is a process-wide switch.
enum class Backend { serial, openmp };

Backend backend();
void set_backend(Backend b);
bool openmp_available();

// Feature-map layout is [C, K, N] with N (time) fastest:
//   index(c, k, n) = (c*K + k)*N + n.
//
// Convolutions are causal in time: output frame n sees input frames
// n - dt*dil_t for dt in [0, kt). The frequency axis is zero padded by
// pad_f on both sides and may be strided.

struct Conv2dDims {
  int ci = 0, co = 0;      // channels in/out
  int kf = 0, kt = 0;      // kernel extent (freq, time)
  int K = 0, N = 0;        // input freq bins, frames
  int Kout = 0;            // output freq bins
  int stride_f = 1;
  int dil_t = 1;
  int pad_f = 0;
};

int conv_out_freq(int K, int kf, int pad_f, int stride_f);

// w layout: [co, ci, kf, kt]
void conv2d_forward(const double* x, const double* w, double* y,
                    const Conv2dDims& d);
void conv2d_backward_input(const double* gy, const double* w, double* gx,
                           const Conv2dDims& d);
void conv2d_backward_weight(const double* gy, const double* x, double* gw,
                            const Conv2dDims& d);

// Depthwise variant, stride 1 in frequency. w layout: [C, kf, kt]
struct DwDims {
  int c = 0, kf = 0, kt = 0, K = 0, N = 0, dil_t = 1, pad_f = 0;
};
void dw_conv2d_forward(const double* x, const double* w, double* y,
                       const DwDims& d);
void dw_conv2d_backward_input(const double* gy, const double* w, double* gx,
                              const DwDims& d);
void dw_conv2d_backward_weight(const double* gy, const double* x, double* gw,
                               const DwDims& d);

// Transposed convolution along frequency (time stays causal, dilation 1).
// w layout: [ci, co, kf, kt]; Kout = (K-1)*stride_f - 2*pad_f + kf.
struct Deconv2dDims {
  int ci = 0, co = 0;
  int kf = 0, kt = 0;
  int K = 0, N = 0;
  int Kout = 0;
  int stride_f = 1;
  int pad_f = 0;
};

int deconv_out_freq(int K, int kf, int pad_f, int stride_f);

void deconv2d_forward(const double* x, const double* w, double* y,
                      const Deconv2dDims& d);
void deconv2d_backward_input(const double* gy, const double* w, double* gx,
                             const Deconv2dDims& d);
void deconv2d_backward_weight(const double* gy, const double* x, double* gw,
                              const Deconv2dDims& d);

// c[m,n] = a[m,k] * b[k,n]
void matmul(const double* a, const double* b, double* c, int m, int k, int n);
// c[m,n] = a^T * b with a stored [k,m]
void matmul_at(const double* a, const double* b, double* c, int m, int k,
               int n);
// c[m,n] = a * b^T with b stored [n,k]
void matmul_bt(const double* a, const double* b, double* c, int m, int k,
               int n);

// Single-head softmax attention over the frequency axis, evaluated
// independently per time frame. q,k,v,out are [C,K,N]; attn is [N,K,K]
// (row a = query bin, softmax over key bin b; scores scaled by 1/sqrt(C)).
void attention_forward(const double* q, const double* k, const double* v,
                       double* attn, double* out, int C, int K, int N);
void attention_backward(const double* q, const double* k, const double* v,
                        const double* attn, const double* gout, double* gq,
                        double* gk, double* gv, int C, int K, int N);
// Directional derivative of the attention output along (dq, dk, dv); any of
// the tangent inputs may be null (treated as zero).
void attention_tangent(const double* q, const double* k, const double* v,
                       const double* attn, const double* dq, const double* dk,
                       const double* dv, double* dout, int C, int K, int N);

}  // namespace flowsr::kernels

#endif  // FLOWSR_KERNELS_HPP
