#ifndef DOCGRID_OPS_HPP
#define DOCGRID_OPS_HPP

// Affine primitives: multi-channel 2D convolution and fully connected
// matrix multiplication, forward and backward.
//
// Convolution is cross-correlation (kernels are not flipped) and dense
// across channels. Every kernel is templated on its accumulator type; the
// default float accumulation is what training uses, double accumulation is
// available for tight gradient checks.

#include <algorithm>
#include <cstddef>
#include <string>
#include <vector>

#include "docgrid/parallel.hpp"
#include "docgrid/tensor.hpp"

namespace docgrid {

struct ConvGeometry {
  int kernel_h = 1;
  int kernel_w = 1;
  int stride = 1;
  int pad = 0;

  static ConvGeometry square(int k, int stride = 1, int pad = 0) { return {k, k, stride, pad}; }

  // Output extent along one axis, or <= 0 when the geometry does not fit.
  static int out_extent(int in, int k, int stride, int pad) {
    const int span = in + 2 * pad - k;
    return span < 0 ? 0 : span / stride + 1;
  }
  int out_h(int in_h) const { return out_extent(in_h, kernel_h, stride, pad); }
  int out_w(int in_w) const { return out_extent(in_w, kernel_w, stride, pad); }

  bool operator==(const ConvGeometry&) const = default;
};

inline void validate(const ConvGeometry& g) {
  if (g.kernel_h < 1 || g.kernel_w < 1 || g.stride < 1 || g.pad < 0)
    throw InvalidArgument("invalid conv geometry: kernel " + std::to_string(g.kernel_h) + "x" +
                          std::to_string(g.kernel_w) + " stride " + std::to_string(g.stride) +
                          " pad " + std::to_string(g.pad));
}

struct Conv2dGrads {
  Tensor input;
  Tensor kernels;
  Tensor bias;
};

struct AffineGrads {
  Tensor input;
  Tensor weight;
  Tensor bias;
};

namespace detail {

/**
 * C[M x N] += A[M x K] * B[K x N], all row-major. Rows of C are processed in
 * blocks of four so each streamed B row feeds four accumulators; columns are
 * tiled to keep a B panel cache resident. Each C element is reduced over k in
 * ascending order regardless of the tiling or thread count.
 */
template <typename Acc>
void gemm_acc(int M, int N, int K, const float* A, const float* B, Acc* C) {
  constexpr int kRows = 4;
  constexpr int kCols = 512;
  const int row_blocks = (M + kRows - 1) / kRows;
  const int col_blocks = (N + kCols - 1) / kCols;
  parallel_for(0, row_blocks * col_blocks, [&](int task) {
    const int rb = task / col_blocks;
    const int cb = task % col_blocks;
    const int i0 = rb * kRows;
    const int rows = std::min(kRows, M - i0);
    const int j0 = cb * kCols;
    const int cols = std::min(kCols, N - j0);
    Acc acc[kRows][kCols];
    for (int r = 0; r < rows; ++r)
      for (int j = 0; j < cols; ++j) acc[r][j] = C[static_cast<std::size_t>(i0 + r) * N + j0 + j];
    if (rows == kRows) {
      for (int k = 0; k < K; ++k) {
        const float* b = B + static_cast<std::size_t>(k) * N + j0;
        const Acc a0 = A[static_cast<std::size_t>(i0) * K + k];
        const Acc a1 = A[static_cast<std::size_t>(i0 + 1) * K + k];
        const Acc a2 = A[static_cast<std::size_t>(i0 + 2) * K + k];
        const Acc a3 = A[static_cast<std::size_t>(i0 + 3) * K + k];
        if (a0 == Acc(0) && a1 == Acc(0) && a2 == Acc(0) && a3 == Acc(0)) continue;
        for (int j = 0; j < cols; ++j) {
          const Acc bj = b[j];
          acc[0][j] += a0 * bj;
          acc[1][j] += a1 * bj;
          acc[2][j] += a2 * bj;
          acc[3][j] += a3 * bj;
        }
      }
    } else {
      for (int k = 0; k < K; ++k) {
        const float* b = B + static_cast<std::size_t>(k) * N + j0;
        for (int r = 0; r < rows; ++r) {
          const Acc a = A[static_cast<std::size_t>(i0 + r) * K + k];
          if (a == Acc(0)) continue;
          for (int j = 0; j < cols; ++j) acc[r][j] += a * static_cast<Acc>(b[j]);
        }
      }
    }
    for (int r = 0; r < rows; ++r)
      for (int j = 0; j < cols; ++j) C[static_cast<std::size_t>(i0 + r) * N + j0 + j] = acc[r][j];
  });
}

// Out[cols x rows] = In[rows x cols]^T
inline void transpose(int rows, int cols, const float* in, float* out) {
  constexpr int kTile = 32;
  for (int r0 = 0; r0 < rows; r0 += kTile)
    for (int c0 = 0; c0 < cols; c0 += kTile)
      for (int r = r0; r < std::min(rows, r0 + kTile); ++r)
        for (int c = c0; c < std::min(cols, c0 + kTile); ++c)
          out[static_cast<std::size_t>(c) * rows + r] = in[static_cast<std::size_t>(r) * cols + c];
}

// Unfolds one CHW image into [C*kh*kw x oh*ow] patch columns (zero padded).
inline void im2col(const float* img, int C, int H, int W, const ConvGeometry& g, int oh, int ow,
                   float* col) {
  const int P = oh * ow;
  for (int c = 0; c < C; ++c)
    for (int ky = 0; ky < g.kernel_h; ++ky)
      for (int kx = 0; kx < g.kernel_w; ++kx) {
        float* dst = col + (static_cast<std::size_t>(c) * g.kernel_h * g.kernel_w +
                            static_cast<std::size_t>(ky) * g.kernel_w + kx) * P;
        const float* plane = img + static_cast<std::size_t>(c) * H * W;
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = oy * g.stride - g.pad + ky;
          float* row = dst + static_cast<std::size_t>(oy) * ow;
          if (iy < 0 || iy >= H) {
            std::fill(row, row + ow, 0.0f);
            continue;
          }
          const float* src = plane + static_cast<std::size_t>(iy) * W;
          for (int ox = 0; ox < ow; ++ox) {
            const int ix = ox * g.stride - g.pad + kx;
            row[ox] = (ix >= 0 && ix < W) ? src[ix] : 0.0f;
          }
        }
      }
}

// Scatter-adds patch columns back onto a CHW image (adjoint of im2col).
template <typename Acc>
void col2im(const Acc* col, int C, int H, int W, const ConvGeometry& g, int oh, int ow, Acc* img) {
  const int P = oh * ow;
  for (int c = 0; c < C; ++c)
    for (int ky = 0; ky < g.kernel_h; ++ky)
      for (int kx = 0; kx < g.kernel_w; ++kx) {
        const Acc* src = col + (static_cast<std::size_t>(c) * g.kernel_h * g.kernel_w +
                                static_cast<std::size_t>(ky) * g.kernel_w + kx) * P;
        Acc* plane = img + static_cast<std::size_t>(c) * H * W;
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = oy * g.stride - g.pad + ky;
          if (iy < 0 || iy >= H) continue;
          for (int ox = 0; ox < ow; ++ox) {
            const int ix = ox * g.stride - g.pad + kx;
            if (ix >= 0 && ix < W)
              plane[static_cast<std::size_t>(iy) * W + ix] += src[static_cast<std::size_t>(oy) * ow + ox];
          }
        }
      }
}

inline void check_conv_shapes(const Tensor& input, const Tensor& kernels, const ConvGeometry& g) {
  validate(g);
  if (input.rank() != 4 || kernels.rank() != 4)
    throw InvalidArgument("conv2d: expected NCHW input and OCKK kernels, got input " +
                          shape_str(input.shape()) + " kernels " + shape_str(kernels.shape()));
  if (kernels.dim(1) != input.dim(1) || kernels.dim(2) != g.kernel_h || kernels.dim(3) != g.kernel_w)
    throw InvalidArgument("conv2d: kernel shape " + shape_str(kernels.shape()) +
                          " incompatible with input " + shape_str(input.shape()));
  if (g.out_h(input.dim(2)) < 1 || g.out_w(input.dim(3)) < 1)
    throw InvalidArgument("conv2d: geometry yields empty output for input " +
                          shape_str(input.shape()) + " kernels " + shape_str(kernels.shape()));
}

template <typename Acc>
Tensor store(const std::vector<Acc>& v, Shape s) {
  return Tensor(std::move(s), std::vector<float>(v.begin(), v.end()));
}

}  // namespace detail

/// out[n,o,y,x] = bias[o] + sum_{c,ky,kx} kernels[o,c,ky,kx] * padded_in[n,c,y*s+ky,x*s+kx]
template <typename Acc = float>
Tensor conv2d(const Tensor& input, const Tensor& kernels, const Tensor& bias, const ConvGeometry& g) {
  detail::check_conv_shapes(input, kernels, g);
  const int N = input.dim(0), C = input.dim(1), H = input.dim(2), W = input.dim(3);
  const int O = kernels.dim(0);
  if (bias.size() != static_cast<std::size_t>(O))
    throw InvalidArgument("conv2d: bias " + shape_str(bias.shape()) + " does not match kernels " +
                          shape_str(kernels.shape()));
  const int oh = g.out_h(H), ow = g.out_w(W);
  const int K = C * g.kernel_h * g.kernel_w;
  const int P = oh * ow;
  Tensor out({N, O, oh, ow});
  std::vector<float> col(static_cast<std::size_t>(K) * P);
  std::vector<Acc> acc(static_cast<std::size_t>(O) * P);
  for (int n = 0; n < N; ++n) {
    detail::im2col(input.data() + static_cast<std::size_t>(n) * C * H * W, C, H, W, g, oh, ow, col.data());
    for (int o = 0; o < O; ++o) std::fill_n(acc.begin() + static_cast<std::ptrdiff_t>(o) * P, P, Acc(bias[o]));
    detail::gemm_acc<Acc>(O, P, K, kernels.data(), col.data(), acc.data());
    std::copy(acc.begin(), acc.end(), out.vec().begin() + static_cast<std::ptrdiff_t>(n) * O * P);
  }
  return out;
}

/// Exact gradients of conv2d with respect to its input, kernels and bias.
template <typename Acc = float>
Conv2dGrads conv2d_grad(const Tensor& input, const Tensor& kernels, const ConvGeometry& g,
                        const Tensor& grad_out) {
  detail::check_conv_shapes(input, kernels, g);
  const int N = input.dim(0), C = input.dim(1), H = input.dim(2), W = input.dim(3);
  const int O = kernels.dim(0);
  const int oh = g.out_h(H), ow = g.out_w(W);
  const Shape expected{N, O, oh, ow};
  if (grad_out.shape() != expected)
    throw InvalidArgument("conv2d_grad: grad_out " + shape_str(grad_out.shape()) +
                          " does not match output " + shape_str(expected));
  const int K = C * g.kernel_h * g.kernel_w;
  const int P = oh * ow;

  std::vector<float> kernels_t(static_cast<std::size_t>(K) * O);
  detail::transpose(O, K, kernels.data(), kernels_t.data());

  std::vector<Acc> gk(static_cast<std::size_t>(O) * K, Acc(0));
  std::vector<Acc> gb(static_cast<std::size_t>(O), Acc(0));
  std::vector<Acc> gin(input.size(), Acc(0));
  std::vector<float> col(static_cast<std::size_t>(K) * P);
  std::vector<float> col_t(static_cast<std::size_t>(P) * K);
  std::vector<Acc> gcol(static_cast<std::size_t>(K) * P);

  for (int n = 0; n < N; ++n) {
    const float* go = grad_out.data() + static_cast<std::size_t>(n) * O * P;
    for (int o = 0; o < O; ++o) {
      Acc s = 0;
      for (int p = 0; p < P; ++p) s += go[static_cast<std::size_t>(o) * P + p];
      gb[o] += s;
    }
    detail::im2col(input.data() + static_cast<std::size_t>(n) * C * H * W, C, H, W, g, oh, ow, col.data());
    detail::transpose(K, P, col.data(), col_t.data());
    detail::gemm_acc<Acc>(O, K, P, go, col_t.data(), gk.data());
    std::fill(gcol.begin(), gcol.end(), Acc(0));
    detail::gemm_acc<Acc>(K, P, O, kernels_t.data(), go, gcol.data());
    detail::col2im<Acc>(gcol.data(), C, H, W, g, oh, ow, gin.data() + static_cast<std::size_t>(n) * C * H * W);
  }
  return {detail::store(gin, input.shape()), detail::store(gk, kernels.shape()), detail::store(gb, {O})};
}

/// out[n,u] = sum_f weight[u,f] * input[n,f] + bias[u]. Inputs of higher rank
/// are flattened per sample.
template <typename Acc = float>
Tensor matmul_affine(const Tensor& input, const Tensor& weight, const Tensor& bias) {
  if (weight.rank() != 2 || input.rank() < 2)
    throw InvalidArgument("matmul_affine: input " + shape_str(input.shape()) + " weight " +
                          shape_str(weight.shape()));
  const int N = input.dim(0);
  const int F = static_cast<int>(input.size() / static_cast<std::size_t>(N));
  const int U = weight.dim(0);
  if (weight.dim(1) != F || bias.size() != static_cast<std::size_t>(U))
    throw InvalidArgument("matmul_affine: input " + shape_str(input.shape()) + " incompatible with weight " +
                          shape_str(weight.shape()) + " / bias " + shape_str(bias.shape()));
  std::vector<float> wt(static_cast<std::size_t>(F) * U);
  detail::transpose(U, F, weight.data(), wt.data());
  std::vector<Acc> acc(static_cast<std::size_t>(N) * U);
  for (int n = 0; n < N; ++n)
    for (int u = 0; u < U; ++u) acc[static_cast<std::size_t>(n) * U + u] = bias[u];
  detail::gemm_acc<Acc>(N, U, F, input.data(), wt.data(), acc.data());
  return detail::store(acc, {N, U});
}

template <typename Acc = float>
AffineGrads matmul_affine_grad(const Tensor& input, const Tensor& weight, const Tensor& grad_out) {
  if (weight.rank() != 2 || input.rank() < 2)
    throw InvalidArgument("matmul_affine_grad: input " + shape_str(input.shape()) + " weight " +
                          shape_str(weight.shape()));
  const int N = input.dim(0);
  const int F = static_cast<int>(input.size() / static_cast<std::size_t>(N));
  const int U = weight.dim(0);
  if (weight.dim(1) != F || grad_out.shape() != Shape{N, U})
    throw InvalidArgument("matmul_affine_grad: input " + shape_str(input.shape()) + " weight " +
                          shape_str(weight.shape()) + " grad_out " + shape_str(grad_out.shape()));
  // grad_weight[U x F] = grad_out^T[U x N] * input[N x F]
  std::vector<float> go_t(static_cast<std::size_t>(U) * N);
  detail::transpose(N, U, grad_out.data(), go_t.data());
  std::vector<Acc> gw(static_cast<std::size_t>(U) * F, Acc(0));
  detail::gemm_acc<Acc>(U, F, N, go_t.data(), input.data(), gw.data());
  // grad_input[N x F] = grad_out[N x U] * weight[U x F]
  std::vector<Acc> gi(static_cast<std::size_t>(N) * F, Acc(0));
  detail::gemm_acc<Acc>(N, F, U, grad_out.data(), weight.data(), gi.data());
  std::vector<Acc> gb(static_cast<std::size_t>(U), Acc(0));
  for (int n = 0; n < N; ++n)
    for (int u = 0; u < U; ++u) gb[u] += grad_out[static_cast<std::size_t>(n) * U + u];
  return {detail::store(gi, input.shape()), detail::store(gw, weight.shape()), detail::store(gb, {U})};
}

}  // namespace docgrid

#endif  // DOCGRID_OPS_HPP
