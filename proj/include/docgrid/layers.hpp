#ifndef DOCGRID_LAYERS_HPP
#define DOCGRID_LAYERS_HPP

// Non-linearities and pooling: ReLU, max-pooling with switches, local
// response normalization, inverted dropout, batch normalization, spatial
// pyramid pooling and the softmax / cross-entropy head.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "docgrid/tensor.hpp"

namespace docgrid {

enum class Mode { train, eval };

// ---------------------------------------------------------------- ReLU

inline Tensor relu_forward(const Tensor& x) {
  Tensor y = x;
  for (float& v : y.vec()) v = v > 0.0f ? v : 0.0f;
  return y;
}

// `input` is the forward input; gradient passes only where it was positive.
inline Tensor relu_backward(const Tensor& input, const Tensor& grad) {
  if (input.shape() != grad.shape())
    throw InvalidArgument("relu_backward: input " + shape_str(input.shape()) + " grad " +
                          shape_str(grad.shape()));
  Tensor g = grad;
  for (std::size_t i = 0; i < g.size(); ++i)
    if (!(input[i] > 0.0f)) g[i] = 0.0f;
  return g;
}

// ------------------------------------------------------------- max-pool

struct PoolGeometry {
  int window = 2;
  int stride = 2;
  int out_extent(int in) const { return in < window ? 0 : (in - window) / stride + 1; }
  bool operator==(const PoolGeometry&) const = default;
};

/**
 * Max-pool output plus its switches: for every output element, the flat
 * (y * W + x) index of the winning input inside its channel plane. Ties go
 * to the first element in row-major scan order.
 */
struct PoolResult {
  Tensor output;
  std::vector<std::int32_t> switches;
};

inline PoolResult maxpool_forward(const Tensor& x, const PoolGeometry& g) {
  require_rank(x, 4, "maxpool_forward");
  if (g.window < 1 || g.stride < 1)
    throw InvalidArgument("maxpool: window and stride must be positive");
  const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int oh = g.out_extent(H), ow = g.out_extent(W);
  if (oh < 1 || ow < 1)
    throw InvalidArgument("maxpool: window " + std::to_string(g.window) + " larger than input " +
                          shape_str(x.shape()));
  PoolResult r{Tensor({N, C, oh, ow}), std::vector<std::int32_t>(static_cast<std::size_t>(N) * C * oh * ow)};
  std::size_t o = 0;
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c) {
      const float* plane = x.data() + (static_cast<std::size_t>(n) * C + c) * H * W;
      for (int oy = 0; oy < oh; ++oy)
        for (int ox = 0; ox < ow; ++ox, ++o) {
          int best = (oy * g.stride) * W + ox * g.stride;
          float bv = plane[best];
          for (int ky = 0; ky < g.window; ++ky)
            for (int kx = 0; kx < g.window; ++kx) {
              const int idx = (oy * g.stride + ky) * W + ox * g.stride + kx;
              if (plane[idx] > bv) {
                bv = plane[idx];
                best = idx;
              }
            }
          r.output[o] = bv;
          r.switches[o] = best;
        }
    }
  return r;
}

// Routes each output gradient to its switch location (accumulating overlaps).
inline Tensor unpool_switches(const std::vector<std::int32_t>& switches, const Tensor& grad,
                              const Shape& input_shape) {
  if (grad.size() != switches.size())
    throw InvalidArgument("maxpool_backward: grad " + shape_str(grad.shape()) + " does not match " +
                          std::to_string(switches.size()) + " switches");
  const int N = input_shape[0], C = input_shape[1];
  const std::size_t plane = static_cast<std::size_t>(input_shape[2]) * input_shape[3];
  const std::size_t per_plane = grad.size() / (static_cast<std::size_t>(N) * C);
  Tensor gi(input_shape);
  for (std::size_t p = 0; p < static_cast<std::size_t>(N) * C; ++p)
    for (std::size_t i = 0; i < per_plane; ++i) {
      const std::size_t o = p * per_plane + i;
      gi[p * plane + static_cast<std::size_t>(switches[o])] += grad[o];
    }
  return gi;
}

inline Tensor maxpool_backward(const std::vector<std::int32_t>& switches, const Tensor& grad,
                               const Shape& input_shape) {
  return unpool_switches(switches, grad, input_shape);
}

// ------------------------------------------------------------------ LRN

struct LrnParams {
  int size = 5;  // channels in the normalization window (odd)
  float k = 2.0f;
  float alpha = 1e-4f;
  float beta = 0.75f;
  bool operator==(const LrnParams&) const = default;
};

namespace detail {
// Per-element denominators d = k + (alpha/n) * sum of squares over the
// clipped channel window.
inline std::vector<double> lrn_denominators(const Tensor& x, const LrnParams& p) {
  const int N = x.dim(0), C = x.dim(1);
  const std::size_t HW = static_cast<std::size_t>(x.dim(2)) * x.dim(3);
  const int half = p.size / 2;
  std::vector<double> d(x.size());
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c) {
      const int lo = std::max(0, c - half), hi = std::min(C - 1, c + half);
      for (std::size_t i = 0; i < HW; ++i) {
        double s = 0;
        for (int j = lo; j <= hi; ++j) {
          const double v = x[(static_cast<std::size_t>(n) * C + j) * HW + i];
          s += v * v;
        }
        d[(static_cast<std::size_t>(n) * C + c) * HW + i] = p.k + p.alpha / p.size * s;
      }
    }
  return d;
}
}  // namespace detail

inline void validate(const LrnParams& p, int channels) {
  if (p.size < 1 || p.size % 2 == 0 || p.size > 2 * channels - 1)
    throw InvalidArgument("lrn: window size " + std::to_string(p.size) + " must be odd and <= " +
                          std::to_string(2 * channels - 1));
}

/// y = x / (k + (alpha/n) * sum_{neighbour channels} x^2)^beta
inline Tensor lrn_forward(const Tensor& x, const LrnParams& p) {
  require_rank(x, 4, "lrn_forward");
  validate(p, x.dim(1));
  const auto d = detail::lrn_denominators(x, p);
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = static_cast<float>(x[i] * std::pow(d[i], -p.beta));
  return y;
}

inline Tensor lrn_backward(const Tensor& x, const LrnParams& p, const Tensor& grad) {
  require_rank(x, 4, "lrn_backward");
  if (grad.shape() != x.shape())
    throw InvalidArgument("lrn_backward: grad " + shape_str(grad.shape()) + " input " + shape_str(x.shape()));
  validate(p, x.dim(1));
  const int N = x.dim(0), C = x.dim(1);
  const std::size_t HW = static_cast<std::size_t>(x.dim(2)) * x.dim(3);
  const int half = p.size / 2;
  const auto d = detail::lrn_denominators(x, p);
  // t_i = g_i * x_i * d_i^(-beta-1)
  std::vector<double> t(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) t[i] = grad[i] * static_cast<double>(x[i]) * std::pow(d[i], -p.beta - 1.0);
  const double coeff = 2.0 * p.beta * p.alpha / p.size;
  Tensor gi(x.shape());
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c) {
      const int lo = std::max(0, c - half), hi = std::min(C - 1, c + half);
      for (std::size_t i = 0; i < HW; ++i) {
        const std::size_t idx = (static_cast<std::size_t>(n) * C + c) * HW + i;
        double s = 0;
        for (int j = lo; j <= hi; ++j) s += t[(static_cast<std::size_t>(n) * C + j) * HW + i];
        gi[idx] = static_cast<float>(grad[idx] * std::pow(d[idx], -p.beta) - coeff * x[idx] * s);
      }
    }
  return gi;
}

// -------------------------------------------------------------- dropout

struct DropoutResult {
  Tensor output;
  Tensor mask;  // 1 where kept, 0 where dropped; all ones in eval mode
};

/// Inverted dropout: train-mode outputs are x * mask / keep_prob with
/// mask ~ Bernoulli(keep_prob); eval mode is the identity.
template <typename Rng>
DropoutResult dropout_forward(const Tensor& x, float keep_prob, Mode mode, Rng& rng) {
  if (!(keep_prob > 0.0f && keep_prob <= 1.0f))
    throw InvalidArgument("dropout: keep probability must be in (0, 1], got " + std::to_string(keep_prob));
  DropoutResult r{x, Tensor(x.shape(), 1.0f)};
  if (mode == Mode::eval || keep_prob == 1.0f) return r;
  std::bernoulli_distribution keep(keep_prob);
  const float scale = 1.0f / keep_prob;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (keep(rng)) {
      r.output[i] = x[i] * scale;
    } else {
      r.mask[i] = 0.0f;
      r.output[i] = 0.0f;
    }
  }
  return r;
}

// Forward with a precomputed mask.
inline Tensor dropout_apply(const Tensor& x, const Tensor& mask, float keep_prob) {
  if (mask.shape() != x.shape())
    throw InvalidArgument("dropout: mask " + shape_str(mask.shape()) + " input " + shape_str(x.shape()));
  Tensor y = x;
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = mask[i] != 0.0f ? x[i] / keep_prob : 0.0f;
  return y;
}

inline Tensor dropout_backward(const Tensor& mask, float keep_prob, const Tensor& grad) {
  return dropout_apply(grad, mask, keep_prob);
}

// ----------------------------------------------------------- batchnorm

struct BatchNormState {
  Tensor gamma;  // [C]
  Tensor beta;   // [C]
  Tensor running_mean;
  Tensor running_var;
  float eps = 1e-5f;
  float momentum = 0.9f;

  static BatchNormState identity(int channels, float eps = 1e-5f, float momentum = 0.9f) {
    return {Tensor({channels}, 1.0f), Tensor({channels}, 0.0f), Tensor({channels}, 0.0f),
            Tensor({channels}, 1.0f), eps, momentum};
  }
  bool operator==(const BatchNormState&) const = default;
};

struct BatchNormCache {
  Tensor normalized;           // x_hat, same shape as input
  std::vector<double> inv_std; // per channel
  Mode mode = Mode::train;
};

struct BatchNormResult {
  Tensor output;
  BatchNormCache cache;
};

struct BatchNormGrads {
  Tensor input;
  Tensor gamma;
  Tensor beta;
};

namespace detail {
// Treats rank-2 [N x F] input as F channels of 1x1 maps.
inline void bn_dims(const Tensor& x, int& N, int& C, std::size_t& HW) {
  if (x.rank() == 4) {
    N = x.dim(0);
    C = x.dim(1);
    HW = static_cast<std::size_t>(x.dim(2)) * x.dim(3);
  } else if (x.rank() == 2) {
    N = x.dim(0);
    C = x.dim(1);
    HW = 1;
  } else {
    throw InvalidArgument("batchnorm: expected NCHW or NxF input, got " + shape_str(x.shape()));
  }
}
}  // namespace detail

/**
 * Train mode normalizes each channel with the mini-batch statistics over
 * (N, H, W) and folds them into the running estimates by exponential moving
 * average; eval mode uses the running estimates only and leaves `state`
 * untouched.
 */
inline BatchNormResult batchnorm_forward(const Tensor& x, BatchNormState& state, Mode mode) {
  int N, C;
  std::size_t HW;
  detail::bn_dims(x, N, C, HW);
  if (state.gamma.size() != static_cast<std::size_t>(C))
    throw InvalidArgument("batchnorm: state has " + std::to_string(state.gamma.size()) +
                          " channels, input " + shape_str(x.shape()));
  const double count = static_cast<double>(N) * static_cast<double>(HW);
  if (mode == Mode::train && count < 2)
    throw InvalidArgument("batchnorm: train mode needs at least 2 values per channel, input " +
                          shape_str(x.shape()));
  BatchNormResult r{Tensor(x.shape()), {Tensor(x.shape()), std::vector<double>(C), mode}};
  for (int c = 0; c < C; ++c) {
    double mean, var;
    if (mode == Mode::train) {
      double s = 0;
      for (int n = 0; n < N; ++n)
        for (std::size_t i = 0; i < HW; ++i) s += x[(static_cast<std::size_t>(n) * C + c) * HW + i];
      mean = s / count;
      double ss = 0;
      for (int n = 0; n < N; ++n)
        for (std::size_t i = 0; i < HW; ++i) {
          const double dv = x[(static_cast<std::size_t>(n) * C + c) * HW + i] - mean;
          ss += dv * dv;
        }
      var = ss / count;
      state.running_mean[c] = static_cast<float>(state.momentum * state.running_mean[c] + (1.0 - state.momentum) * mean);
      state.running_var[c] = static_cast<float>(state.momentum * state.running_var[c] + (1.0 - state.momentum) * var);
    } else {
      mean = state.running_mean[c];
      var = state.running_var[c];
    }
    const double inv_std = 1.0 / std::sqrt(var + state.eps);
    r.cache.inv_std[c] = inv_std;
    for (int n = 0; n < N; ++n)
      for (std::size_t i = 0; i < HW; ++i) {
        const std::size_t idx = (static_cast<std::size_t>(n) * C + c) * HW + i;
        const double xh = (x[idx] - mean) * inv_std;
        r.cache.normalized[idx] = static_cast<float>(xh);
        r.output[idx] = static_cast<float>(state.gamma[c] * xh + state.beta[c]);
      }
  }
  return r;
}

inline BatchNormGrads batchnorm_backward(const BatchNormCache& cache, const BatchNormState& state,
                                         const Tensor& grad) {
  const Tensor& xh = cache.normalized;
  if (grad.shape() != xh.shape())
    throw InvalidArgument("batchnorm_backward: grad " + shape_str(grad.shape()) + " cache " +
                          shape_str(xh.shape()));
  int N, C;
  std::size_t HW;
  detail::bn_dims(xh, N, C, HW);
  const double count = static_cast<double>(N) * static_cast<double>(HW);
  BatchNormGrads g{Tensor(xh.shape()), Tensor({C}), Tensor({C})};
  for (int c = 0; c < C; ++c) {
    double sg = 0, sgx = 0;
    for (int n = 0; n < N; ++n)
      for (std::size_t i = 0; i < HW; ++i) {
        const std::size_t idx = (static_cast<std::size_t>(n) * C + c) * HW + i;
        sg += grad[idx];
        sgx += grad[idx] * static_cast<double>(xh[idx]);
      }
    g.beta[c] = static_cast<float>(sg);
    g.gamma[c] = static_cast<float>(sgx);
    const double gamma = state.gamma[c];
    const double inv_std = cache.inv_std[c];
    for (int n = 0; n < N; ++n)
      for (std::size_t i = 0; i < HW; ++i) {
        const std::size_t idx = (static_cast<std::size_t>(n) * C + c) * HW + i;
        if (cache.mode == Mode::train) {
          g.input[idx] = static_cast<float>(gamma * inv_std *
                                            (grad[idx] - sg / count - xh[idx] * sgx / count));
        } else {
          g.input[idx] = static_cast<float>(gamma * inv_std * grad[idx]);
        }
      }
  }
  return g;
}

// ------------------------------------------------------------------ SPP

inline std::size_t spp_bins(const std::vector<int>& levels) {
  std::size_t b = 0;
  for (int l : levels) b += static_cast<std::size_t>(l) * l;
  return b;
}

inline void validate_spp_levels(const std::vector<int>& levels) {
  if (levels.empty()) throw InvalidArgument("spp: pyramid levels must be non-empty");
  for (int l : levels)
    if (l < 1) throw InvalidArgument("spp: pyramid level " + std::to_string(l) + " must be >= 1");
}

/**
 * Spatial pyramid max-pooling. Level l splits the plane into an l x l grid;
 * bin i spans rows floor(i*H/l) .. floor((i+1)*H/l)-1 (likewise columns).
 * Output is N x (C * sum l^2): levels in declared order, channel-major
 * within a level. Switches hold the winning (y * W + x) per output.
 */
inline PoolResult spp_forward(const Tensor& x, const std::vector<int>& levels) {
  require_rank(x, 4, "spp_forward");
  validate_spp_levels(levels);
  const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int max_level = *std::max_element(levels.begin(), levels.end());
  if (H < max_level || W < max_level)
    throw InvalidArgument("spp: input " + shape_str(x.shape()) + " smaller than pyramid level " +
                          std::to_string(max_level));
  const std::size_t F = static_cast<std::size_t>(C) * spp_bins(levels);
  PoolResult r{Tensor({N, static_cast<int>(F)}), std::vector<std::int32_t>(static_cast<std::size_t>(N) * F)};
  for (int n = 0; n < N; ++n) {
    std::size_t o = static_cast<std::size_t>(n) * F;
    for (int l : levels)
      for (int c = 0; c < C; ++c) {
        const float* plane = x.data() + (static_cast<std::size_t>(n) * C + c) * H * W;
        for (int by = 0; by < l; ++by)
          for (int bx = 0; bx < l; ++bx, ++o) {
            const int y0 = by * H / l, y1 = (by + 1) * H / l;
            const int x0 = bx * W / l, x1 = (bx + 1) * W / l;
            int best = y0 * W + x0;
            float bv = plane[best];
            for (int yy = y0; yy < y1; ++yy)
              for (int xx = x0; xx < x1; ++xx)
                if (plane[yy * W + xx] > bv) {
                  bv = plane[yy * W + xx];
                  best = yy * W + xx;
                }
            r.output[o] = bv;
            r.switches[o] = best;
          }
      }
  }
  return r;
}

inline Tensor spp_backward(const std::vector<std::int32_t>& switches, const std::vector<int>& levels,
                           const Tensor& grad, const Shape& input_shape) {
  const int N = input_shape[0], C = input_shape[1];
  const std::size_t plane = static_cast<std::size_t>(input_shape[2]) * input_shape[3];
  const std::size_t F = static_cast<std::size_t>(C) * spp_bins(levels);
  if (grad.size() != static_cast<std::size_t>(N) * F || switches.size() != grad.size())
    throw InvalidArgument("spp_backward: grad " + shape_str(grad.shape()) + " input " + shape_str(input_shape));
  Tensor gi(input_shape);
  for (int n = 0; n < N; ++n) {
    std::size_t o = static_cast<std::size_t>(n) * F;
    for (int l : levels)
      for (int c = 0; c < C; ++c)
        for (int b = 0; b < l * l; ++b, ++o)
          gi[(static_cast<std::size_t>(n) * C + c) * plane + static_cast<std::size_t>(switches[o])] += grad[o];
  }
  return gi;
}

// -------------------------------------------------------------- softmax

// Row-wise softmax of N x C logits with max subtraction.
inline Tensor softmax(const Tensor& logits) {
  require_rank(logits, 2, "softmax");
  const int N = logits.dim(0), C = logits.dim(1);
  Tensor p(logits.shape());
  for (int n = 0; n < N; ++n) {
    float m = -std::numeric_limits<float>::infinity();
    for (int c = 0; c < C; ++c) m = std::max(m, logits.at(n, c));
    double s = 0;
    for (int c = 0; c < C; ++c) s += std::exp(static_cast<double>(logits.at(n, c)) - m);
    for (int c = 0; c < C; ++c) p.at(n, c) = static_cast<float>(std::exp(static_cast<double>(logits.at(n, c)) - m) / s);
  }
  return p;
}

struct SoftmaxXentResult {
  Tensor probs;
  double loss = 0;  // mean over the batch
};

inline void check_labels(const std::vector<int>& labels, int N, int C) {
  if (labels.size() != static_cast<std::size_t>(N))
    throw InvalidArgument("softmax_xent: " + std::to_string(labels.size()) + " labels for batch of " +
                          std::to_string(N));
  for (int l : labels)
    if (l < 0 || l >= C)
      throw InvalidArgument("softmax_xent: label " + std::to_string(l) + " outside [0, " + std::to_string(C) + ")");
}

inline SoftmaxXentResult softmax_xent(const Tensor& logits, const std::vector<int>& labels) {
  require_rank(logits, 2, "softmax_xent");
  const int N = logits.dim(0), C = logits.dim(1);
  check_labels(labels, N, C);
  SoftmaxXentResult r{softmax(logits), 0.0};
  for (int n = 0; n < N; ++n) {
    // log-sum-exp form keeps the loss finite even when a probability underflows
    float m = -std::numeric_limits<float>::infinity();
    for (int c = 0; c < C; ++c) m = std::max(m, logits.at(n, c));
    double s = 0;
    for (int c = 0; c < C; ++c) s += std::exp(static_cast<double>(logits.at(n, c)) - m);
    r.loss += std::log(s) + m - logits.at(n, labels[static_cast<std::size_t>(n)]);
  }
  r.loss /= N;
  return r;
}

// Gradient of the mean loss with respect to the logits: (probs - onehot) / N.
inline Tensor softmax_xent_grad(const Tensor& probs, const std::vector<int>& labels) {
  require_rank(probs, 2, "softmax_xent_grad");
  const int N = probs.dim(0), C = probs.dim(1);
  check_labels(labels, N, C);
  Tensor g = probs;
  for (int n = 0; n < N; ++n) {
    g.at(n, labels[static_cast<std::size_t>(n)]) -= 1.0f;
    for (int c = 0; c < C; ++c) g.at(n, c) /= static_cast<float>(N);
  }
  return g;
}

// Index of the largest entry; ties go to the lowest index.
inline int argmax(std::span<const float> v) {
  int best = 0;
  for (int i = 1; i < static_cast<int>(v.size()); ++i)
    if (v[static_cast<std::size_t>(i)] > v[static_cast<std::size_t>(best)]) best = i;
  return best;
}

}  // namespace docgrid

#endif  // DOCGRID_LAYERS_HPP
