#pragma once

#include <cstddef>

namespace asdvid::nn {

// Dense double-precision kernels behind the model. Row-major throughout.
// Single-threaded; on one desk-scale CPU the whole training loop is
// bounded by these GEMMs, so they are written to autovectorize.

// C[M x N] += A[M x K] * B[K x N]
void gemm_nn(double* c, const double* a, const double* b, std::size_t m,
             std::size_t k, std::size_t n);

// C[M x N] += A^T * B, with A stored [K x M]
void gemm_tn(double* c, const double* a, const double* b, std::size_t m,
             std::size_t k, std::size_t n);

// C[M x N] += A * B^T, with B stored [N x K]
void gemm_nt(double* c, const double* a, const double* b, std::size_t m,
             std::size_t k, std::size_t n);

struct Conv2dShape {
  std::size_t in_c, in_h, in_w;
  std::size_t out_c;
  std::size_t kernel = 3, stride = 2, pad = 1;

  std::size_t out_h() const { return (in_h + 2 * pad - kernel) / stride + 1; }
  std::size_t out_w() const { return (in_w + 2 * pad - kernel) / stride + 1; }
  std::size_t patch() const { return in_c * kernel * kernel; }
};

// Feature maps are channel-major: x[c][h][w]. col is [patch x out_h*out_w].
void im2col(const Conv2dShape& s, const double* x, double* col);
void col2im_add(const Conv2dShape& s, const double* col, double* x);

// 2d average pooling with square window `size`, stride `size`; trailing
// rows/cols that do not fill a window are dropped.
void avgpool_fwd(const double* x, std::size_t c, std::size_t h, std::size_t w,
                 std::size_t size, double* y);
void avgpool_bwd(const double* dy, std::size_t c, std::size_t h, std::size_t w,
                 std::size_t size, double* dx);

void relu_fwd(double* x, std::size_t n);
// dx[i] = dy[i] if pre[i] > 0 else 0 (accumulated into dx)
void relu_bwd_add(const double* pre, const double* dy, double* dx,
                  std::size_t n);

double gelu(double x);
double gelu_grad(double x);

// In-place softmax over each row of x[rows x cols].
void softmax_rows(double* x, std::size_t rows, std::size_t cols);

// y = g * (x - mean) / sqrt(var + eps) + b over the last dim of x[rows x d];
// saves mean and rstd (1/sqrt(var+eps)) per row for the backward pass.
void layernorm_fwd(const double* x, const double* gamma, const double* beta,
                   std::size_t rows, std::size_t d, double* y, double* mean,
                   double* rstd);
// Accumulates into dx, dgamma, dbeta.
void layernorm_bwd(const double* x, const double* gamma, const double* dy,
                   const double* mean, const double* rstd, std::size_t rows,
                   std::size_t d, double* dx, double* dgamma, double* dbeta);

constexpr double kLayerNormEps = 1e-5;

}  // namespace asdvid::nn
