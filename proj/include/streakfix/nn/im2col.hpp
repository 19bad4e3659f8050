#pragma once

#include "streakfix/tensor.hpp"

namespace streakfix::nn {

/// Geometry of a square-kernel convolution. `in_*` is the image side,
/// `out_*` the output grid.
struct ConvGeometry {
  Index kernel = 1;
  Index stride = 1;
  Index pad = 0;

  Index out_extent(Index in) const { return (in + 2 * pad - kernel) / stride + 1; }
  Index transposed_extent(Index in) const { return (in - 1) * stride - 2 * pad + kernel; }
};

/// Unfolds `x` into a (C*k*k, N*Ho*Wo) row-major matrix.
template <typename Scalar>
RowMatrix<Scalar> im2col(const Tensor<Scalar>& x, const ConvGeometry& g, Index out_h, Index out_w) {
  const Index k = g.kernel;
  const Index grid = out_h * out_w;
  RowMatrix<Scalar> cols(x.c() * k * k, x.n() * grid);
  for (Index c = 0; c < x.c(); ++c) {
    for (Index ky = 0; ky < k; ++ky) {
      for (Index kx = 0; kx < k; ++kx) {
        Scalar* row = cols.row((c * k + ky) * k + kx).data();
        for (Index n = 0; n < x.n(); ++n) {
          auto img = x.plane(n, c);
          Scalar* dst = row + n * grid;
          for (Index oy = 0; oy < out_h; ++oy) {
            const Index iy = oy * g.stride - g.pad + ky;
            if (iy < 0 || iy >= x.h()) {
              std::fill(dst + oy * out_w, dst + (oy + 1) * out_w, Scalar(0));
              continue;
            }
            for (Index ox = 0; ox < out_w; ++ox) {
              const Index ix = ox * g.stride - g.pad + kx;
              dst[oy * out_w + ox] = (ix < 0 || ix >= x.w()) ? Scalar(0) : img(iy, ix);
            }
          }
        }
      }
    }
  }
  return cols;
}

/// Adjoint of im2col: scatter-adds columns back into an image of `shape`.
template <typename Scalar>
Tensor<Scalar> col2im(const RowMatrix<Scalar>& cols, const Shape4& shape, const ConvGeometry& g,
                      Index out_h, Index out_w) {
  const Index k = g.kernel;
  const Index grid = out_h * out_w;
  Tensor<Scalar> x(shape);
  for (Index c = 0; c < shape.c; ++c) {
    for (Index ky = 0; ky < k; ++ky) {
      for (Index kx = 0; kx < k; ++kx) {
        const Scalar* row = cols.row((c * k + ky) * k + kx).data();
        for (Index n = 0; n < shape.n; ++n) {
          auto img = x.plane(n, c);
          const Scalar* src = row + n * grid;
          for (Index oy = 0; oy < out_h; ++oy) {
            const Index iy = oy * g.stride - g.pad + ky;
            if (iy < 0 || iy >= shape.h) continue;
            for (Index ox = 0; ox < out_w; ++ox) {
              const Index ix = ox * g.stride - g.pad + kx;
              if (ix >= 0 && ix < shape.w) img(iy, ix) += src[oy * out_w + ox];
            }
          }
        }
      }
    }
  }
  return x;
}

/// Packs a tensor as (C, N*H*W) so channels become GEMM rows.
template <typename Scalar>
RowMatrix<Scalar> channels_as_rows(const Tensor<Scalar>& t) {
  const Index p = t.shape().plane();
  RowMatrix<Scalar> m(t.c(), t.n() * p);
  for (Index n = 0; n < t.n(); ++n) m.middleCols(n * p, p) = t.sample(n);
  return m;
}

template <typename Scalar>
Tensor<Scalar> rows_as_channels(const RowMatrix<Scalar>& m, Index n, Index h, Index w) {
  Tensor<Scalar> t(n, m.rows(), h, w);
  const Index p = h * w;
  for (Index i = 0; i < n; ++i) t.sample(i) = m.middleCols(i * p, p);
  return t;
}

}  // namespace streakfix::nn
