#pragma once

// Dense kernels shared by the graph ops. Every reduction accumulates in a
// fixed index order; loops are arranged so the innermost loop is an
// elementwise update (vectorizable without reassociation).

#include <cstddef>

namespace dgvc::ad::kernels {

// c[m,n] += a[m,k] * b[k,n]
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
             double* c);

// c[m,n] += a[k,m]^T * b[k,n]
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
             double* c);

// c[m,n] += a[m,k] * b[n,k]^T   (b is transposed into scratch first)
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
             double* c);

void transpose(std::size_t rows, std::size_t cols, const double* src, double* dst);

struct ConvGeometry {
  std::size_t batch, in_c, in_h, in_w;
  std::size_t kernel, stride, pad;
  std::size_t out_h, out_w;

  std::size_t patch() const { return in_c * kernel * kernel; }
  std::size_t positions() const { return batch * out_h * out_w; }
};

// cols[(c*k + ky)*k + kx, (n*out_h + oy)*out_w + ox]
void im2col(const ConvGeometry& g, const double* x, double* cols);

// Adjoint of im2col: scatter-add columns back into x (x is not cleared).
void col2im(const ConvGeometry& g, const double* cols, double* x);

}  // namespace dgvc::ad::kernels
