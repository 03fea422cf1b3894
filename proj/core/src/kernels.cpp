#include "kernels.hpp"

#include <algorithm>
#include <vector>

namespace dgvc::ad::kernels {

namespace {
constexpr std::size_t kColBlock = 256;
constexpr std::size_t kDepthBlock = 64;
}  // namespace

void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
             double* c) {
  for (std::size_t j0 = 0; j0 < n; j0 += kColBlock) {
    const std::size_t j1 = std::min(n, j0 + kColBlock);
    for (std::size_t k0 = 0; k0 < k; k0 += kDepthBlock) {
      const std::size_t k1 = std::min(k, k0 + kDepthBlock);
      for (std::size_t i = 0; i < m; ++i) {
        double* __restrict crow = c + i * n;
        const double* arow = a + i * k;
        for (std::size_t p = k0; p < k1; ++p) {
          const double av = arow[p];
          const double* __restrict brow = b + p * n;
          for (std::size_t j = j0; j < j1; ++j) crow[j] += av * brow[j];
        }
      }
    }
  }
}

void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
             double* c) {
  for (std::size_t j0 = 0; j0 < n; j0 += kColBlock) {
    const std::size_t j1 = std::min(n, j0 + kColBlock);
    for (std::size_t p = 0; p < k; ++p) {
      const double* acol = a + p * m;
      const double* __restrict brow = b + p * n;
      for (std::size_t i = 0; i < m; ++i) {
        const double av = acol[i];
        double* __restrict crow = c + i * n;
        for (std::size_t j = j0; j < j1; ++j) crow[j] += av * brow[j];
      }
    }
  }
}

void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
             double* c) {
  std::vector<double> bt(k * n);
  transpose(n, k, b, bt.data());
  gemm_nn(m, n, k, a, bt.data(), c);
}

void transpose(std::size_t rows, std::size_t cols, const double* src, double* dst) {
  constexpr std::size_t kTile = 32;
  for (std::size_t r0 = 0; r0 < rows; r0 += kTile) {
    const std::size_t r1 = std::min(rows, r0 + kTile);
    for (std::size_t c0 = 0; c0 < cols; c0 += kTile) {
      const std::size_t c1 = std::min(cols, c0 + kTile);
      for (std::size_t r = r0; r < r1; ++r) {
        for (std::size_t cc = c0; cc < c1; ++cc) dst[cc * rows + r] = src[r * cols + cc];
      }
    }
  }
}

void im2col(const ConvGeometry& g, const double* x, double* cols) {
  const std::size_t plane = g.in_h * g.in_w;
  const std::size_t npos = g.positions();
  const std::size_t out_plane = g.out_h * g.out_w;
  for (std::size_t c = 0; c < g.in_c; ++c) {
    for (std::size_t ky = 0; ky < g.kernel; ++ky) {
      for (std::size_t kx = 0; kx < g.kernel; ++kx) {
        double* row = cols + ((c * g.kernel + ky) * g.kernel + kx) * npos;
        for (std::size_t n = 0; n < g.batch; ++n) {
          const double* src = x + (n * g.in_c + c) * plane;
          double* dst = row + n * out_plane;
          for (std::size_t oy = 0; oy < g.out_h; ++oy) {
            const long iy = static_cast<long>(oy * g.stride + ky) - static_cast<long>(g.pad);
            double* drow = dst + oy * g.out_w;
            if (iy < 0 || iy >= static_cast<long>(g.in_h)) {
              std::fill(drow, drow + g.out_w, 0.0);
              continue;
            }
            const double* srow = src + static_cast<std::size_t>(iy) * g.in_w;
            for (std::size_t ox = 0; ox < g.out_w; ++ox) {
              const long ix = static_cast<long>(ox * g.stride + kx) - static_cast<long>(g.pad);
              drow[ox] = (ix < 0 || ix >= static_cast<long>(g.in_w))
                             ? 0.0
                             : srow[static_cast<std::size_t>(ix)];
            }
          }
        }
      }
    }
  }
}

void col2im(const ConvGeometry& g, const double* cols, double* x) {
  const std::size_t plane = g.in_h * g.in_w;
  const std::size_t npos = g.positions();
  const std::size_t out_plane = g.out_h * g.out_w;
  for (std::size_t c = 0; c < g.in_c; ++c) {
    for (std::size_t ky = 0; ky < g.kernel; ++ky) {
      for (std::size_t kx = 0; kx < g.kernel; ++kx) {
        const double* row = cols + ((c * g.kernel + ky) * g.kernel + kx) * npos;
        for (std::size_t n = 0; n < g.batch; ++n) {
          double* dst = x + (n * g.in_c + c) * plane;
          const double* src = row + n * out_plane;
          for (std::size_t oy = 0; oy < g.out_h; ++oy) {
            const long iy = static_cast<long>(oy * g.stride + ky) - static_cast<long>(g.pad);
            if (iy < 0 || iy >= static_cast<long>(g.in_h)) continue;
            double* drow = dst + static_cast<std::size_t>(iy) * g.in_w;
            const double* srow = src + oy * g.out_w;
            for (std::size_t ox = 0; ox < g.out_w; ++ox) {
              const long ix = static_cast<long>(ox * g.stride + kx) - static_cast<long>(g.pad);
              if (ix < 0 || ix >= static_cast<long>(g.in_w)) continue;
              drow[static_cast<std::size_t>(ix)] += srow[ox];
            }
          }
        }
      }
    }
  }
}

}  // namespace dgvc::ad::kernels
