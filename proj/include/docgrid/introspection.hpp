#ifndef DOCGRID_INTROSPECTION_HPP
#define DOCGRID_INTROSPECTION_HPP

// Receptive fields, maximally exciting patches, deconvnet reconstructions
// and per-filter mean response maps.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "docgrid/model.hpp"
#include "docgrid/parallel.hpp"
#include "docgrid/pipeline.hpp"

namespace docgrid {

struct NeuronRef {
  int layer = 0;
  int channel = 0;
  std::optional<std::pair<int, int>> position;  // (y, x); strongest position when absent
};

// Input-space rectangle; top/left may be negative before clamping.
struct Rect {
  int top = 0;
  int left = 0;
  int height = 0;
  int width = 0;

  int bottom() const { return top + height; }  // exclusive
  int right() const { return left + width; }   // exclusive
  bool contains(int y, int x) const { return y >= top && y < bottom() && x >= left && x < right(); }
  Rect clamped(int H, int W) const {
    const int t = std::clamp(top, 0, H), l = std::clamp(left, 0, W);
    const int b = std::clamp(bottom(), 0, H), r = std::clamp(right(), 0, W);
    return {t, l, b - t, r - l};
  }
  bool operator==(const Rect&) const = default;
};

inline int layer_index(const ArchSpec& spec, const std::string& name) {
  for (std::size_t i = 0; i < spec.layers.size(); ++i)
    if (spec.layers[i].name == name) return static_cast<int>(i);
  throw InvalidArgument("no layer named '" + name + "'");
}

// "conv5:12" or "conv5:12@3,4" (channel 12 at y=3, x=4).
inline NeuronRef parse_neuron(const ArchSpec& spec, const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) throw InvalidArgument("neuron '" + text + "' is not layer:channel");
  NeuronRef n;
  n.layer = layer_index(spec, text.substr(0, colon));
  std::string rest = text.substr(colon + 1);
  try {
    const auto at = rest.find('@');
    if (at != std::string::npos) {
      const std::string pos = rest.substr(at + 1);
      const auto comma = pos.find(',');
      if (comma == std::string::npos) throw InvalidArgument("position must be y,x");
      n.position = std::pair{std::stoi(pos.substr(0, comma)), std::stoi(pos.substr(comma + 1))};
      rest = rest.substr(0, at);
    }
    std::size_t used = 0;
    n.channel = std::stoi(rest, &used);
    if (used != rest.size()) throw InvalidArgument("trailing characters");
  } catch (const std::logic_error&) {
    throw InvalidArgument("cannot parse neuron '" + text + "'");
  }
  return n;
}

namespace detail {

inline void check_neuron(const ArchSpec& spec, const NeuronRef& n, int in_h, int in_w) {
  if (n.layer < 0 || n.layer >= static_cast<int>(spec.layers.size()))
    throw InvalidArgument("layer index " + std::to_string(n.layer) + " out of range");
  if (spec.layers[static_cast<std::size_t>(n.layer)].kind == LayerKind::softmax)
    throw InvalidArgument("cannot inspect the softmax layer");
  const Shape s = propagate_shapes(spec, in_h, in_w)[static_cast<std::size_t>(n.layer)].output;
  if (n.channel < 0 || n.channel >= s[0])
    throw InvalidArgument("channel " + std::to_string(n.channel) + " out of range for layer " +
                          spec.layers[static_cast<std::size_t>(n.layer)].name);
  if (n.position) {
    if (s.size() != 3) throw InvalidArgument("layer " + spec.layers[static_cast<std::size_t>(n.layer)].name + " has no spatial positions");
    const auto [y, x] = *n.position;
    if (y < 0 || y >= s[1] || x < 0 || x >= s[2])
      throw InvalidArgument("position (" + std::to_string(y) + "," + std::to_string(x) + ") outside " + shape_str(s));
  }
}

}  // namespace detail

/**
 * Input rectangle that can influence position (y, x) of layer `layer`'s
 * output, composed backward through every conv and pooling stage. Layers
 * at or after the first fc/spp see the whole input.
 */
inline Rect receptive_field(const ArchSpec& spec, int layer, int y, int x, int in_h, int in_w) {
  detail::check_neuron(spec, {layer, 0, std::pair{y, x}}, in_h, in_w);
  int y0 = y, y1 = y, x0 = x, x1 = x;  // inclusive
  for (int i = layer; i >= 0; --i) {
    const auto& l = spec.layers[static_cast<std::size_t>(i)];
    if (l.kind == LayerKind::conv) {
      y0 = y0 * l.conv.stride - l.conv.pad;
      y1 = y1 * l.conv.stride - l.conv.pad + l.conv.kernel_h - 1;
      x0 = x0 * l.conv.stride - l.conv.pad;
      x1 = x1 * l.conv.stride - l.conv.pad + l.conv.kernel_w - 1;
    } else if (l.kind == LayerKind::maxpool) {
      y0 = y0 * l.pool.stride;
      y1 = y1 * l.pool.stride + l.pool.window - 1;
      x0 = x0 * l.pool.stride;
      x1 = x1 * l.pool.stride + l.pool.window - 1;
    }
  }
  return {y0, x0, y1 - y0 + 1, x1 - x0 + 1};
}

inline Rect receptive_field(const ArchSpec& spec, int layer, int y, int x) {
  return receptive_field(spec, layer, y, x, spec.height, spec.width);
}

// Receptive field of a neuron; the whole input for non-spatial layers.
inline Rect receptive_field(const ArchSpec& spec, const NeuronRef& n, int in_h, int in_w) {
  if (!n.position) return {0, 0, in_h, in_w};
  return receptive_field(spec, n.layer, n.position->first, n.position->second, in_h, in_w);
}

// ------------------------------------------------------------ top-k

struct PatchRecord {
  std::string image_id;
  std::size_t image_index = 0;
  int y = 0, x = 0;  // activation position (0, 0 for non-spatial layers)
  float activation = 0;
  Rect field;        // clamped to the image
  Tensor patch;      // C x field.height x field.width
};

namespace detail {

inline Tensor crop(const Tensor& img, const Rect& r) {
  Tensor out({img.dim(0), r.height, r.width});
  for (int c = 0; c < img.dim(0); ++c)
    for (int y = 0; y < r.height; ++y)
      for (int x = 0; x < r.width; ++x) out.at(c, y, x) = img.at(c, r.top + y, r.left + x);
  return out;
}

// Strongest activation of the neuron's channel (first in scan order on ties).
inline std::pair<std::pair<int, int>, float> strongest(const Tensor& out, const NeuronRef& n) {
  if (out.rank() == 2) return {{0, 0}, out.at(0, n.channel)};
  const int H = out.dim(2), W = out.dim(3);
  if (n.position) return {*n.position, out.at(0, n.channel, n.position->first, n.position->second)};
  std::pair<int, int> best{0, 0};
  float bv = out.at(0, n.channel, 0, 0);
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x)
      if (out.at(0, n.channel, y, x) > bv) bv = out.at(0, n.channel, y, x), best = {y, x};
  return {best, bv};
}

}  // namespace detail

/**
 * The k strongest activations of a neuron's channel over `inputs` (each a
 * preprocessed C x H x W tensor), at most one per image, in descending
 * order (ties by image order). Patches are cut from `display` when given
 * (same geometry as `inputs`), otherwise from the inputs.
 */
inline std::vector<PatchRecord> top_k_patches(const Model& m, const std::vector<Tensor>& inputs,
                                              const std::vector<std::string>& ids, const NeuronRef& n, int k = 9,
                                              const std::vector<Tensor>* display = nullptr) {
  if (k < 1) throw InvalidArgument("k must be >= 1");
  if (ids.size() != inputs.size()) throw InvalidArgument("need one id per input");
  if (display && display->size() != inputs.size()) throw InvalidArgument("need one display image per input");
  std::vector<PatchRecord> per_image(inputs.size());
  parallel_for(0, static_cast<int>(inputs.size()), [&](int i) {
    const auto idx = static_cast<std::size_t>(i);
    const Tensor& x = inputs[idx];
    require_rank(x, 3, "top_k_patches");
    detail::check_neuron(m.spec, n, x.dim(1), x.dim(2));
    const auto fp = forward_eval(m, x.reshaped({1, x.dim(0), x.dim(1), x.dim(2)}), n.layer);
    const auto [pos, act] = detail::strongest(fp.outputs.back(), n);
    const bool spatial = fp.outputs.back().rank() == 4;
    NeuronRef at = n;
    if (spatial) at.position = pos;
    PatchRecord r;
    r.image_id = ids[idx];
    r.image_index = idx;
    r.y = pos.first;
    r.x = pos.second;
    r.activation = act;
    r.field = receptive_field(m.spec, at, x.dim(1), x.dim(2)).clamped(x.dim(1), x.dim(2));
    r.patch = detail::crop(display ? (*display)[idx] : x, r.field);
    per_image[idx] = std::move(r);
  });
  std::stable_sort(per_image.begin(), per_image.end(),
                   [](const PatchRecord& a, const PatchRecord& b) { return a.activation > b.activation; });
  if (per_image.size() > static_cast<std::size_t>(k)) per_image.resize(static_cast<std::size_t>(k));
  return per_image;
}

// Same over an image set: first AR view of each image, patches in pixel space.
inline std::vector<PatchRecord> top_k_patches(const Model& m, const ImageSet& set, const Preprocess& pp,
                                              const NeuronRef& n, int k = 9) {
  std::vector<Tensor> inputs(set.size()), display(set.size());
  std::vector<std::string> ids(set.size());
  parallel_for(0, static_cast<int>(set.size()), [&](int i) {
    const auto idx = static_cast<std::size_t>(i);
    display[idx] = prepare_views(*set.image(idx), pp).front();
    inputs[idx] = finish(display[idx], pp);
    ids[idx] = set.id(idx);
  });
  return top_k_patches(m, inputs, ids, n, k, &display);
}

inline std::string patch_records_csv(const std::vector<PatchRecord>& records) {
  std::ostringstream o;
  o << "rank,image,y,x,activation,top,left,height,width\n";
  char buf[32];
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    std::snprintf(buf, sizeof buf, "%.6g", r.activation);
    o << i << ',' << r.image_id << ',' << r.y << ',' << r.x << ',' << buf << ',' << r.field.top << ','
      << r.field.left << ',' << r.field.height << ',' << r.field.width << '\n';
  }
  return o.str();
}

// ------------------------------------------------------------ deconv

/**
 * Runs `signal` (shaped like layer `layer`'s output in `fp`) back to input
 * space: transposed convolution with the forward weights, unpooling via
 * the recorded switches, rectification of the backward signal at ReLUs,
 * and identity through LRN, batchnorm and dropout. Returns N x C x H x W.
 */
inline Tensor deconv_signal(const Model& m, const ForwardPass& fp, int layer, Tensor signal) {
  if (layer < 0 || static_cast<std::size_t>(layer) >= fp.outputs.size() || fp.caches.size() < fp.outputs.size())
    throw PreconditionError("no forward cache covers layer " + std::to_string(layer));
  if (signal.size() != fp.outputs[static_cast<std::size_t>(layer)].size())
    throw InvalidArgument("signal " + shape_str(signal.shape()) + " does not match layer output " +
                          shape_str(fp.outputs[static_cast<std::size_t>(layer)].shape()));
  for (int i = layer; i >= 0; --i) {
    const auto idx = static_cast<std::size_t>(i);
    const auto& l = m.spec.layers[idx];
    const Tensor& x = fp.input_of(idx);
    signal = signal.reshaped(fp.outputs[idx].shape());
    switch (l.kind) {
      case LayerKind::conv: signal = conv2d_grad(x, m.params[idx].weight, l.conv, signal).input; break;
      case LayerKind::fc:
        signal = matmul_affine_grad(detail::as_matrix(x), m.params[idx].weight, signal).input;
        break;
      case LayerKind::relu: signal = relu_forward(signal); break;
      case LayerKind::maxpool: signal = unpool_switches(fp.caches[idx].switches, signal, x.shape()); break;
      case LayerKind::spp: signal = spp_backward(fp.caches[idx].switches, l.spp_levels, signal, x.shape()); break;
      case LayerKind::lrn:
      case LayerKind::batchnorm:
      case LayerKind::dropout: break;
      case LayerKind::softmax: throw InvalidArgument("cannot deconvolve through softmax");
    }
    signal = signal.reshaped(x.shape());
  }
  return signal;
}

// Reconstruction of one neuron (all other activations zeroed) for a one-image pass.
inline Tensor deconv_visualize(const Model& m, const ForwardPass& fp, const NeuronRef& n) {
  if (fp.outputs.empty() || static_cast<std::size_t>(n.layer) >= fp.outputs.size())
    throw PreconditionError("forward cache does not reach layer " + std::to_string(n.layer));
  const Tensor& out = fp.outputs[static_cast<std::size_t>(n.layer)];
  if (out.dim(0) != 1) throw InvalidArgument("deconv expects a single-image forward pass");
  detail::check_neuron(m.spec, n, fp.input.dim(2), fp.input.dim(3));
  const auto [pos, act] = detail::strongest(out, n);
  Tensor signal(out.shape());
  if (out.rank() == 4)
    signal.at(0, n.channel, pos.first, pos.second) = act;
  else
    signal.at(0, n.channel) = act;
  Tensor r = deconv_signal(m, fp, n.layer, std::move(signal));
  return r.reshaped({r.dim(1), r.dim(2), r.dim(3)});
}

inline Tensor deconv_visualize(const Model& m, const Tensor& image, const NeuronRef& n) {
  require_rank(image, 3, "deconv_visualize");
  const auto fp = forward_eval(m, image.reshaped({1, image.dim(0), image.dim(1), image.dim(2)}), n.layer);
  return deconv_visualize(m, fp, n);
}

// ------------------------------------------------------ response maps

// Elementwise mean of `layer`'s activation maps (C x h x w) over inputs.
inline Tensor spatial_response_map(const Model& m, const std::vector<Tensor>& inputs, int layer) {
  if (inputs.empty()) throw InvalidArgument("no inputs");
  if (layer < 0 || layer >= static_cast<int>(m.spec.layers.size())) throw InvalidArgument("layer out of range");
  std::vector<Tensor> maps(inputs.size());
  parallel_for(0, static_cast<int>(inputs.size()), [&](int i) {
    const Tensor& x = inputs[static_cast<std::size_t>(i)];
    require_rank(x, 3, "spatial_response_map");
    maps[static_cast<std::size_t>(i)] =
        forward_eval(m, x.reshaped({1, x.dim(0), x.dim(1), x.dim(2)}), layer).outputs.back();
  });
  const Tensor& first = maps.front();
  if (first.rank() != 4)
    throw InvalidArgument("layer " + m.spec.layers[static_cast<std::size_t>(layer)].name + " has no spatial output");
  std::vector<double> acc(first.size(), 0.0);
  for (const auto& t : maps) {
    if (t.shape() != first.shape()) throw InvalidArgument("inputs produce differently sized maps");
    for (std::size_t k = 0; k < acc.size(); ++k) acc[k] += t[k];
  }
  Tensor out({first.dim(1), first.dim(2), first.dim(3)});
  for (std::size_t k = 0; k < acc.size(); ++k) out[k] = static_cast<float>(acc[k] / static_cast<double>(maps.size()));
  return out;
}

// ------------------------------------------------------------ images

// Min-max rescale to [0, 1]; constant tensors map to 0.
inline Tensor rescale_unit(const Tensor& t) {
  if (t.empty()) return t;
  const auto [lo, hi] = std::minmax_element(t.vec().begin(), t.vec().end());
  Tensor out(t.shape());
  const float range = *hi - *lo;
  if (range > 0)
    for (std::size_t i = 0; i < t.size(); ++i) out[i] = (t[i] - *lo) / range;
  return out;
}

// Signed saliency as gray around 0.5 (channels summed).
inline Tensor saliency_image(const Tensor& s) {
  require_rank(s, 3, "saliency_image");
  Tensor g({1, s.dim(1), s.dim(2)});
  for (int c = 0; c < s.dim(0); ++c)
    for (int y = 0; y < s.dim(1); ++y)
      for (int x = 0; x < s.dim(2); ++x) g.at(0, y, x) += s.at(c, y, x);
  float peak = 0;
  for (float v : g.vec()) peak = std::max(peak, std::abs(v));
  if (peak > 0)
    for (float& v : g.vec()) v = 0.5f + 0.5f * v / peak;
  else
    g.fill(0.5f);
  return g;
}

/**
 * Tiles C x h x w images (1 or 3 channels, values in [0, 1]) row-major into
 * a grid with `cols` columns and a `gap`-pixel white border. Cells take the
 * largest tile size; smaller tiles sit at the top left.
 */
inline Tensor tile_grid(const std::vector<Tensor>& tiles, int cols, int gap = 1) {
  if (tiles.empty()) throw InvalidArgument("no tiles");
  if (cols < 1) throw InvalidArgument("cols must be >= 1");
  int C = 1, ch = 1, cw = 1;
  for (const auto& t : tiles) {
    require_rank(t, 3, "tile_grid");
    C = std::max(C, t.dim(0));
    ch = std::max(ch, t.dim(1));
    cw = std::max(cw, t.dim(2));
  }
  const int n = static_cast<int>(tiles.size());
  const int rows = (n + cols - 1) / cols;
  const int used_cols = std::min(cols, n);
  Tensor g({C, gap + rows * (ch + gap), gap + used_cols * (cw + gap)}, 1.0f);
  for (int i = 0; i < n; ++i) {
    const Tensor& t = tiles[static_cast<std::size_t>(i)];
    const int oy = gap + (i / cols) * (ch + gap), ox = gap + (i % cols) * (cw + gap);
    for (int c = 0; c < C; ++c)
      for (int y = 0; y < t.dim(1); ++y)
        for (int x = 0; x < t.dim(2); ++x) g.at(c, oy + y, ox + x) = t.at(std::min(c, t.dim(0) - 1), y, x);
  }
  return g;
}

// One tile per filter, each rescaled independently.
inline Tensor response_map_grid(const Tensor& maps, int max_filters = 36, int cols = 6) {
  require_rank(maps, 3, "response_map_grid");
  std::vector<Tensor> tiles;
  for (int c = 0; c < std::min(maps.dim(0), max_filters); ++c) {
    Tensor t({1, maps.dim(1), maps.dim(2)});
    std::copy_n(maps.data() + static_cast<std::size_t>(c) * t.size(), t.size(), t.data());
    tiles.push_back(rescale_unit(t));
  }
  return tile_grid(tiles, cols);
}

inline Tensor patch_grid(const std::vector<PatchRecord>& records, int cols = 3) {
  std::vector<Tensor> tiles;
  for (const auto& r : records) tiles.push_back(r.patch);
  return tile_grid(tiles, cols);
}

}  // namespace docgrid

#endif  // DOCGRID_INTROSPECTION_HPP
