#ifndef DOCGRID_MODEL_HPP
#define DOCGRID_MODEL_HPP

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "docgrid/arch.hpp"
#include "docgrid/layers.hpp"
#include "docgrid/ops.hpp"

namespace docgrid {

// Parameters owned by one layer. Empty tensors for layers without weights.
struct LayerParams {
  Tensor weight;
  Tensor bias;
  std::optional<BatchNormState> bn;
  bool operator==(const LayerParams&) const = default;
};

struct Model {
  ArchSpec spec;
  std::vector<LayerParams> params;  // one entry per layer in spec.layers
  bool operator==(const Model&) const = default;
};

// Parameter tensors in declaration order (the checkpoint order).
inline std::vector<Tensor*> parameter_tensors(Model& m) {
  std::vector<Tensor*> v;
  for (auto& p : m.params) {
    if (!p.weight.empty()) v.push_back(&p.weight);
    if (!p.bias.empty()) v.push_back(&p.bias);
    if (p.bn) {
      v.push_back(&p.bn->gamma);
      v.push_back(&p.bn->beta);
      v.push_back(&p.bn->running_mean);
      v.push_back(&p.bn->running_var);
    }
  }
  return v;
}

inline std::vector<const Tensor*> parameter_tensors(const Model& m) {
  std::vector<const Tensor*> v;
  for (const Tensor* t : parameter_tensors(const_cast<Model&>(m))) v.push_back(t);
  return v;
}

inline std::size_t parameter_count(const Model& m) {
  std::size_t n = 0;
  for (const Tensor* t : parameter_tensors(m)) n += t->size();
  return n;
}

namespace detail {

// Input shape (without batch) seen by each layer at the spec's nominal size.
inline std::vector<Shape> layer_input_shapes(const ArchSpec& spec) {
  const auto shapes = propagate_shapes(spec);
  std::vector<Shape> in;
  Shape cur{spec.channels, spec.height, spec.width};
  for (const auto& s : shapes) {
    in.push_back(cur);
    cur = s.output;
  }
  return in;
}

inline Model allocate(const ArchSpec& spec) {
  Model m{spec, std::vector<LayerParams>(spec.layers.size())};
  const auto in = layer_input_shapes(spec);
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const auto& l = spec.layers[i];
    auto& p = m.params[i];
    switch (l.kind) {
      case LayerKind::conv:
        p.weight = Tensor({l.outputs, in[i][0], l.conv.kernel_h, l.conv.kernel_w});
        p.bias = Tensor({l.outputs});
        break;
      case LayerKind::fc:
        p.weight = Tensor({l.outputs, static_cast<int>(shape_numel(in[i]))});
        p.bias = Tensor({l.outputs});
        break;
      case LayerKind::batchnorm:
        p.bn = BatchNormState::identity(in[i][0], l.bn_eps, l.bn_momentum);
        break;
      default: break;
    }
  }
  return m;
}

}  // namespace detail

/**
 * Fan-in scaled Gaussian weights (std sqrt(2 / fan_in)) and zero biases.
 * Each layer draws from its own stream seeded by (seed, layer index), so the
 * result depends only on the spec and the seed.
 */
inline Model init_params(const ArchSpec& spec, std::uint64_t seed) {
  Model m = detail::allocate(spec);
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    auto& p = m.params[i];
    if (p.weight.empty()) continue;
    const std::size_t fan_in = p.weight.size() / static_cast<std::size_t>(p.weight.dim(0));
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(i), 0x44475244u};
    std::mt19937_64 rng(seq);
    std::normal_distribution<float> normal(0.0f, static_cast<float>(std::sqrt(2.0 / static_cast<double>(fan_in))));
    for (float& w : p.weight.vec()) w = normal(rng);
  }
  return m;
}

// All weights zero; useful when only shapes matter.
inline Model zero_params(const ArchSpec& spec) { return detail::allocate(spec); }

// -------------------------------------------------------------- forward

struct LayerCache {
  std::vector<std::int32_t> switches;  // maxpool / spp
  Tensor dropout_mask;
  BatchNormCache bn;
};

/**
 * Activations of one forward pass. outputs[i] is layer i's output; the
 * input of layer i is outputs[i-1] (or `input` for i == 0). The last entry
 * holds the class probabilities.
 */
struct ForwardPass {
  Tensor input;
  std::vector<Tensor> outputs;
  std::vector<LayerCache> caches;
  Mode mode = Mode::eval;

  const Tensor& input_of(std::size_t i) const { return i == 0 ? input : outputs[i - 1]; }
  const Tensor& probs() const { return outputs.back(); }
};

namespace detail {

inline Tensor as_matrix(const Tensor& x) {
  if (x.rank() == 2) return x;
  const int N = x.dim(0);
  return x.reshaped({N, static_cast<int>(x.size() / static_cast<std::size_t>(N))});
}

template <typename Rng>
Tensor layer_forward(const LayerConfig& l, LayerParams& p, const Tensor& x, Mode mode, Rng* rng,
                     LayerCache& cache) {
  switch (l.kind) {
    case LayerKind::conv: return conv2d(x, p.weight, p.bias, l.conv);
    case LayerKind::fc: return matmul_affine(as_matrix(x), p.weight, p.bias);
    case LayerKind::relu: return relu_forward(x);
    case LayerKind::maxpool: {
      auto r = maxpool_forward(x, l.pool);
      cache.switches = std::move(r.switches);
      return std::move(r.output);
    }
    case LayerKind::lrn: return lrn_forward(x, l.lrn);
    case LayerKind::dropout: {
      if (mode == Mode::eval || rng == nullptr) {
        cache.dropout_mask = Tensor(x.shape(), 1.0f);
        return x;
      }
      auto r = dropout_forward(x, l.keep_prob, mode, *rng);
      cache.dropout_mask = std::move(r.mask);
      return std::move(r.output);
    }
    case LayerKind::batchnorm: {
      auto r = batchnorm_forward(x, *p.bn, mode);
      cache.bn = std::move(r.cache);
      return std::move(r.output);
    }
    case LayerKind::spp: {
      auto r = spp_forward(x, l.spp_levels);
      cache.switches = std::move(r.switches);
      return std::move(r.output);
    }
    case LayerKind::softmax: return softmax(as_matrix(x));
  }
  throw InvalidArgument("unknown layer kind");
}

inline void check_input(const ArchSpec& spec, const Tensor& batch) {
  if (batch.rank() != 4 || batch.dim(1) != spec.channels)
    throw InvalidArgument("model expects N x " + std::to_string(spec.channels) + " x H x W input, got " +
                          shape_str(batch.shape()));
  if (!spec.has_spp() && (batch.dim(2) != spec.height || batch.dim(3) != spec.width))
    throw InvalidArgument("fixed-size model expects " + std::to_string(spec.height) + "x" +
                          std::to_string(spec.width) + " input, got " + shape_str(batch.shape()));
}

}  // namespace detail

/**
 * Runs the network on an NCHW batch, keeping every activation and cache.
 * Train mode updates batchnorm running statistics and draws dropout masks
 * from `rng`; `last_layer` stops early (inclusive).
 */
template <typename Rng = std::mt19937_64>
ForwardPass forward(Model& m, const Tensor& batch, Mode mode, Rng* rng = nullptr, int last_layer = -1) {
  detail::check_input(m.spec, batch);
  const int end = last_layer < 0 ? static_cast<int>(m.spec.layers.size()) : last_layer + 1;
  ForwardPass fp{batch, {}, std::vector<LayerCache>(static_cast<std::size_t>(end)), mode};
  fp.outputs.reserve(static_cast<std::size_t>(end));
  for (int i = 0; i < end; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    const Tensor& x = fp.input_of(idx);
    fp.outputs.push_back(detail::layer_forward(m.spec.layers[idx], m.params[idx], x, mode, rng, fp.caches[idx]));
  }
  return fp;
}

// Eval-mode forward that leaves the model untouched.
inline ForwardPass forward_eval(const Model& m, const Tensor& batch, int last_layer = -1) {
  detail::check_input(m.spec, batch);
  const int end = last_layer < 0 ? static_cast<int>(m.spec.layers.size()) : last_layer + 1;
  ForwardPass fp{batch, {}, std::vector<LayerCache>(static_cast<std::size_t>(end)), Mode::eval};
  fp.outputs.reserve(static_cast<std::size_t>(end));
  for (int i = 0; i < end; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    // layers only read parameters in eval mode
    auto& p = const_cast<LayerParams&>(m.params[idx]);
    fp.outputs.push_back(detail::layer_forward<std::mt19937_64>(m.spec.layers[idx], p, fp.input_of(idx),
                                                                Mode::eval, nullptr, fp.caches[idx]));
  }
  return fp;
}

// Class probabilities (N x C) in eval mode.
inline Tensor predict_batch(const Model& m, const Tensor& batch) { return forward_eval(m, batch).probs(); }

// ------------------------------------------------------------- backward

struct ParamGrads {
  Tensor weight;
  Tensor bias;
  Tensor gamma;
  Tensor beta;
};

struct BackwardResult {
  std::vector<ParamGrads> params;  // aligned with spec.layers
  Tensor input;                    // gradient with respect to the network input
};

/**
 * Backpropagates a gradient with respect to the logits (the input of the
 * softmax layer) through every layer below it.
 */
inline BackwardResult backward(const Model& m, const ForwardPass& fp, const Tensor& grad_logits) {
  const auto& layers = m.spec.layers;
  if (fp.outputs.size() != layers.size() || layers.back().kind != LayerKind::softmax)
    throw InvalidArgument("backward needs a complete forward pass ending in softmax");
  BackwardResult r{std::vector<ParamGrads>(layers.size()), {}};
  Tensor g = grad_logits;
  for (int i = static_cast<int>(layers.size()) - 2; i >= 0; --i) {
    const auto idx = static_cast<std::size_t>(i);
    const auto& l = layers[idx];
    const Tensor& x = fp.input_of(idx);
    const auto& cache = fp.caches[idx];
    switch (l.kind) {
      case LayerKind::conv: {
        auto cg = conv2d_grad(x, m.params[idx].weight, l.conv, g.reshaped(fp.outputs[idx].shape()));
        r.params[idx].weight = std::move(cg.kernels);
        r.params[idx].bias = std::move(cg.bias);
        g = std::move(cg.input);
        break;
      }
      case LayerKind::fc: {
        auto ag = matmul_affine_grad(detail::as_matrix(x), m.params[idx].weight, g.reshaped(fp.outputs[idx].shape()));
        r.params[idx].weight = std::move(ag.weight);
        r.params[idx].bias = std::move(ag.bias);
        g = std::move(ag.input).reshaped(x.shape());
        break;
      }
      case LayerKind::relu: g = relu_backward(x, g.reshaped(x.shape())); break;
      case LayerKind::maxpool: g = maxpool_backward(cache.switches, g, x.shape()); break;
      case LayerKind::lrn: g = lrn_backward(x, l.lrn, g.reshaped(x.shape())); break;
      case LayerKind::dropout: g = dropout_backward(cache.dropout_mask, l.keep_prob, g.reshaped(x.shape())); break;
      case LayerKind::batchnorm: {
        auto bg = batchnorm_backward(cache.bn, *m.params[idx].bn, g.reshaped(x.shape()));
        r.params[idx].gamma = std::move(bg.gamma);
        r.params[idx].beta = std::move(bg.beta);
        g = std::move(bg.input);
        break;
      }
      case LayerKind::spp: g = spp_backward(cache.switches, l.spp_levels, g, x.shape()); break;
      case LayerKind::softmax: throw InvalidArgument("softmax must be the terminal layer");
    }
  }
  r.input = std::move(g);
  return r;
}

}  // namespace docgrid

#endif  // DOCGRID_MODEL_HPP
