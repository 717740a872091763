#include "asdvid/nn/ops.hpp"

#include <cmath>
#include <cstring>
#include <numbers>

namespace asdvid::nn {

void gemm_nn(double* c, const double* a, const double* b, std::size_t m,
             std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* ci = c + i * n;
    const double* ai = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = ai[p];
      const double* bp = b + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
  }
}

void gemm_tn(double* c, const double* a, const double* b, std::size_t m,
             std::size_t k, std::size_t n) {
  for (std::size_t p = 0; p < k; ++p) {
    const double* ap = a + p * m;
    const double* bp = b + p * n;
    for (std::size_t i = 0; i < m; ++i) {
      const double av = ap[i];
      double* ci = c + i * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
  }
}

void gemm_nt(double* c, const double* a, const double* b, std::size_t m,
             std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* ai = a + i * k;
    double* ci = c + i * n;
    for (std::size_t j = 0; j < n; ++j) {
      const double* bj = b + j * k;
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += ai[p] * bj[p];
      ci[j] += acc;
    }
  }
}

void im2col(const Conv2dShape& s, const double* x, double* col) {
  const std::size_t oh = s.out_h(), ow = s.out_w();
  const std::size_t n = oh * ow;
  for (std::size_t c = 0; c < s.in_c; ++c) {
    const double* xc = x + c * s.in_h * s.in_w;
    for (std::size_t ky = 0; ky < s.kernel; ++ky) {
      for (std::size_t kx = 0; kx < s.kernel; ++kx) {
        double* row = col + ((c * s.kernel + ky) * s.kernel + kx) * n;
        for (std::size_t oy = 0; oy < oh; ++oy) {
          const std::ptrdiff_t iy =
              std::ptrdiff_t(oy * s.stride + ky) - std::ptrdiff_t(s.pad);
          if (iy < 0 || iy >= std::ptrdiff_t(s.in_h)) {
            std::memset(row + oy * ow, 0, ow * sizeof(double));
            continue;
          }
          const double* xr = xc + std::size_t(iy) * s.in_w;
          for (std::size_t ox = 0; ox < ow; ++ox) {
            const std::ptrdiff_t ix =
                std::ptrdiff_t(ox * s.stride + kx) - std::ptrdiff_t(s.pad);
            row[oy * ow + ox] =
                (ix < 0 || ix >= std::ptrdiff_t(s.in_w)) ? 0.0 : xr[ix];
          }
        }
      }
    }
  }
}

void col2im_add(const Conv2dShape& s, const double* col, double* x) {
  const std::size_t oh = s.out_h(), ow = s.out_w();
  const std::size_t n = oh * ow;
  for (std::size_t c = 0; c < s.in_c; ++c) {
    double* xc = x + c * s.in_h * s.in_w;
    for (std::size_t ky = 0; ky < s.kernel; ++ky) {
      for (std::size_t kx = 0; kx < s.kernel; ++kx) {
        const double* row = col + ((c * s.kernel + ky) * s.kernel + kx) * n;
        for (std::size_t oy = 0; oy < oh; ++oy) {
          const std::ptrdiff_t iy =
              std::ptrdiff_t(oy * s.stride + ky) - std::ptrdiff_t(s.pad);
          if (iy < 0 || iy >= std::ptrdiff_t(s.in_h)) continue;
          double* xr = xc + std::size_t(iy) * s.in_w;
          for (std::size_t ox = 0; ox < ow; ++ox) {
            const std::ptrdiff_t ix =
                std::ptrdiff_t(ox * s.stride + kx) - std::ptrdiff_t(s.pad);
            if (ix < 0 || ix >= std::ptrdiff_t(s.in_w)) continue;
            xr[ix] += row[oy * ow + ox];
          }
        }
      }
    }
  }
}

void avgpool_fwd(const double* x, std::size_t c, std::size_t h, std::size_t w,
                 std::size_t size, double* y) {
  const std::size_t oh = h / size, ow = w / size;
  const double inv = 1.0 / double(size * size);
  for (std::size_t ch = 0; ch < c; ++ch) {
    const double* xc = x + ch * h * w;
    double* yc = y + ch * oh * ow;
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox) {
        double acc = 0.0;
        for (std::size_t ky = 0; ky < size; ++ky) {
          const double* xr = xc + (oy * size + ky) * w + ox * size;
          for (std::size_t kx = 0; kx < size; ++kx) acc += xr[kx];
        }
        yc[oy * ow + ox] = acc * inv;
      }
    }
  }
}

void avgpool_bwd(const double* dy, std::size_t c, std::size_t h, std::size_t w,
                 std::size_t size, double* dx) {
  const std::size_t oh = h / size, ow = w / size;
  const double inv = 1.0 / double(size * size);
  for (std::size_t ch = 0; ch < c; ++ch) {
    const double* dyc = dy + ch * oh * ow;
    double* dxc = dx + ch * h * w;
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox) {
        const double g = dyc[oy * ow + ox] * inv;
        for (std::size_t ky = 0; ky < size; ++ky) {
          double* dxr = dxc + (oy * size + ky) * w + ox * size;
          for (std::size_t kx = 0; kx < size; ++kx) dxr[kx] += g;
        }
      }
    }
  }
}

void relu_fwd(double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i)
    if (x[i] < 0.0) x[i] = 0.0;
}

void relu_bwd_add(const double* pre, const double* dy, double* dx,
                  std::size_t n) {
  for (std::size_t i = 0; i < n; ++i)
    if (pre[i] > 0.0) dx[i] += dy[i];
}

constexpr double kInvSqrt2 = 1.0 / std::numbers::sqrt2;

double gelu(double x) {
  return 0.5 * x * (1.0 + std::erf(x * kInvSqrt2));
}

double gelu_grad(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x * kInvSqrt2));
  const double pdf =
      std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
  return cdf + x * pdf;
}

void softmax_rows(double* x, std::size_t rows, std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) {
    double* row = x + r * cols;
    double mx = row[0];
    for (std::size_t j = 1; j < cols; ++j) mx = std::max(mx, row[j]);
    double sum = 0.0;
    for (std::size_t j = 0; j < cols; ++j) {
      row[j] = std::exp(row[j] - mx);
      sum += row[j];
    }
    const double inv = 1.0 / sum;
    for (std::size_t j = 0; j < cols; ++j) row[j] *= inv;
  }
}

void layernorm_fwd(const double* x, const double* gamma, const double* beta,
                   std::size_t rows, std::size_t d, double* y, double* mean,
                   double* rstd) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = x + r * d;
    double* yr = y + r * d;
    double mu = 0.0;
    for (std::size_t j = 0; j < d; ++j) mu += xr[j];
    mu /= double(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double t = xr[j] - mu;
      var += t * t;
    }
    var /= double(d);
    const double rs = 1.0 / std::sqrt(var + kLayerNormEps);
    mean[r] = mu;
    rstd[r] = rs;
    for (std::size_t j = 0; j < d; ++j)
      yr[j] = gamma[j] * (xr[j] - mu) * rs + beta[j];
  }
}

void layernorm_bwd(const double* x, const double* gamma, const double* dy,
                   const double* mean, const double* rstd, std::size_t rows,
                   std::size_t d, double* dx, double* dgamma, double* dbeta) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = x + r * d;
    const double* dyr = dy + r * d;
    double* dxr = dx + r * d;
    const double mu = mean[r], rs = rstd[r];
    double sum_dg = 0.0, sum_dgx = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double xhat = (xr[j] - mu) * rs;
      const double g = dyr[j] * gamma[j];
      sum_dg += g;
      sum_dgx += g * xhat;
      dgamma[j] += dyr[j] * xhat;
      dbeta[j] += dyr[j];
    }
    const double inv_d = 1.0 / double(d);
    for (std::size_t j = 0; j < d; ++j) {
      const double xhat = (xr[j] - mu) * rs;
      const double g = dyr[j] * gamma[j];
      dxr[j] += rs * (g - inv_d * sum_dg - xhat * inv_d * sum_dgx);
    }
  }
}

}  // namespace asdvid::nn
