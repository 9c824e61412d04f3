#ifndef DOCGRID_ARCH_HPP
#define DOCGRID_ARCH_HPP

// Declarative network descriptions and the three editing axes used in the
// experiments: conv depth, layer width, and input size.

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "docgrid/layers.hpp"
#include "docgrid/ops.hpp"

namespace docgrid {

class UnsupportedInputSize : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

enum class LayerKind { conv, fc, relu, maxpool, lrn, dropout, batchnorm, spp, softmax };

NLOHMANN_JSON_SERIALIZE_ENUM(LayerKind, {{LayerKind::conv, "conv"},
                                         {LayerKind::fc, "fc"},
                                         {LayerKind::relu, "relu"},
                                         {LayerKind::maxpool, "maxpool"},
                                         {LayerKind::lrn, "lrn"},
                                         {LayerKind::dropout, "dropout"},
                                         {LayerKind::batchnorm, "batchnorm"},
                                         {LayerKind::spp, "spp"},
                                         {LayerKind::softmax, "softmax"}})

inline std::string to_string(LayerKind k) { return nlohmann::json(k).get<std::string>(); }

struct LayerConfig {
  LayerKind kind = LayerKind::relu;
  std::string name;
  int outputs = 0;  // conv channels or fc units
  ConvGeometry conv;
  PoolGeometry pool;
  LrnParams lrn;
  float keep_prob = 0.5f;
  float bn_eps = 1e-5f;
  float bn_momentum = 0.9f;
  std::vector<int> spp_levels;

  bool parameterized() const { return kind == LayerKind::conv || kind == LayerKind::fc; }
  bool operator==(const LayerConfig&) const = default;
};

struct ArchSpec {
  int channels = 1;
  int height = 227;
  int width = 227;
  int classes = 16;
  std::vector<LayerConfig> layers;
  bool use_lrn = true;
  bool use_bn = false;
  bool use_dropout = true;
  std::vector<int> spp_levels;  // empty: fixed final pool

  bool has_spp() const {
    return std::any_of(layers.begin(), layers.end(), [](const LayerConfig& l) { return l.kind == LayerKind::spp; });
  }
  int index_of(const std::string& name) const {
    for (std::size_t i = 0; i < layers.size(); ++i)
      if (layers[i].name == name) return static_cast<int>(i);
    return -1;
  }
  std::vector<std::string> conv_names() const {
    std::vector<std::string> v;
    for (const auto& l : layers)
      if (l.kind == LayerKind::conv) v.push_back(l.name);
    return v;
  }
  bool operator==(const ArchSpec&) const = default;
};

// ------------------------------------------------------------ encoding

inline void to_json(nlohmann::json& j, const LayerConfig& l) {
  j = {{"kind", l.kind}, {"name", l.name}};
  switch (l.kind) {
    case LayerKind::conv:
      j["outputs"] = l.outputs;
      j["kernel"] = {l.conv.kernel_h, l.conv.kernel_w};
      j["stride"] = l.conv.stride;
      j["pad"] = l.conv.pad;
      break;
    case LayerKind::fc: j["outputs"] = l.outputs; break;
    case LayerKind::maxpool:
      j["window"] = l.pool.window;
      j["stride"] = l.pool.stride;
      break;
    case LayerKind::lrn:
      j["size"] = l.lrn.size;
      j["k"] = l.lrn.k;
      j["alpha"] = l.lrn.alpha;
      j["beta"] = l.lrn.beta;
      break;
    case LayerKind::dropout: j["keep_prob"] = l.keep_prob; break;
    case LayerKind::batchnorm:
      j["eps"] = l.bn_eps;
      j["momentum"] = l.bn_momentum;
      break;
    case LayerKind::spp: j["levels"] = l.spp_levels; break;
    case LayerKind::relu:
    case LayerKind::softmax: break;
  }
}

inline void from_json(const nlohmann::json& j, LayerConfig& l) {
  l = LayerConfig{};
  l.kind = j.at("kind").get<LayerKind>();
  l.name = j.at("name").get<std::string>();
  switch (l.kind) {
    case LayerKind::conv: {
      l.outputs = j.at("outputs").get<int>();
      const auto k = j.at("kernel").get<std::vector<int>>();
      if (k.size() != 2) throw InvalidArgument("layer " + l.name + ": kernel must have two entries");
      l.conv = {k[0], k[1], j.at("stride").get<int>(), j.at("pad").get<int>()};
      break;
    }
    case LayerKind::fc: l.outputs = j.at("outputs").get<int>(); break;
    case LayerKind::maxpool: l.pool = {j.at("window").get<int>(), j.at("stride").get<int>()}; break;
    case LayerKind::lrn:
      l.lrn = {j.at("size").get<int>(), j.at("k").get<float>(), j.at("alpha").get<float>(), j.at("beta").get<float>()};
      break;
    case LayerKind::dropout: l.keep_prob = j.at("keep_prob").get<float>(); break;
    case LayerKind::batchnorm:
      l.bn_eps = j.at("eps").get<float>();
      l.bn_momentum = j.at("momentum").get<float>();
      break;
    case LayerKind::spp: l.spp_levels = j.at("levels").get<std::vector<int>>(); break;
    case LayerKind::relu:
    case LayerKind::softmax: break;
  }
}

inline void to_json(nlohmann::json& j, const ArchSpec& a) {
  j = {{"input", {a.channels, a.height, a.width}},
       {"classes", a.classes},
       {"layers", a.layers},
       {"use_lrn", a.use_lrn},
       {"use_bn", a.use_bn},
       {"use_dropout", a.use_dropout},
       {"spp_levels", a.spp_levels}};
}

inline void from_json(const nlohmann::json& j, ArchSpec& a) {
  const auto in = j.at("input").get<std::vector<int>>();
  if (in.size() != 3) throw InvalidArgument("arch: input must be [channels, height, width]");
  a.channels = in[0];
  a.height = in[1];
  a.width = in[2];
  a.classes = j.at("classes").get<int>();
  a.layers = j.at("layers").get<std::vector<LayerConfig>>();
  a.use_lrn = j.at("use_lrn").get<bool>();
  a.use_bn = j.at("use_bn").get<bool>();
  a.use_dropout = j.at("use_dropout").get<bool>();
  a.spp_levels = j.at("spp_levels").get<std::vector<int>>();
}

// Canonical text form: compact JSON with lexicographically ordered keys.
inline std::string encode_arch(const ArchSpec& a) { return nlohmann::json(a).dump(); }
inline ArchSpec decode_arch(const std::string& text) { return nlohmann::json::parse(text).get<ArchSpec>(); }

// ------------------------------------------------------ shape propagation

struct LayerShape {
  std::string name;
  LayerKind kind;
  Shape output;  // without the batch dimension
};

/**
 * Walks the layer list from a C x H x W input and returns each layer's
 * output shape. Throws InvalidArgument naming the first layer whose
 * geometry does not fit, or when the terminal structure is wrong.
 */
inline std::vector<LayerShape> propagate_shapes(const ArchSpec& a, int height, int width) {
  std::vector<LayerShape> out;
  Shape cur{a.channels, height, width};
  int softmax_count = 0;
  auto fail = [&](const LayerConfig& l, const std::string& why) {
    throw InvalidArgument("layer " + l.name + " (" + to_string(l.kind) + "): " + why + ", input " + shape_str(cur));
  };
  for (const auto& l : a.layers) {
    if (softmax_count) fail(l, "layer after softmax");
    switch (l.kind) {
      case LayerKind::conv: {
        if (cur.size() != 3) fail(l, "conv needs a spatial input");
        if (l.outputs < 1) fail(l, "needs at least one output channel");
        validate(l.conv);
        const int oh = l.conv.out_h(cur[1]), ow = l.conv.out_w(cur[2]);
        if (oh < 1 || ow < 1) fail(l, "kernel larger than padded input");
        cur = {l.outputs, oh, ow};
        break;
      }
      case LayerKind::fc:
        if (l.outputs < 1) fail(l, "needs at least one unit");
        cur = {l.outputs};
        break;
      case LayerKind::maxpool: {
        if (cur.size() != 3) fail(l, "pooling needs a spatial input");
        const int oh = l.pool.out_extent(cur[1]), ow = l.pool.out_extent(cur[2]);
        if (l.pool.window < 1 || l.pool.stride < 1 || oh < 1 || ow < 1) fail(l, "window does not fit");
        cur = {cur[0], oh, ow};
        break;
      }
      case LayerKind::lrn:
        if (cur.size() != 3) fail(l, "lrn needs a spatial input");
        validate(l.lrn, cur[0]);
        break;
      case LayerKind::spp: {
        if (cur.size() != 3) fail(l, "spp needs a spatial input");
        validate_spp_levels(l.spp_levels);
        const int m = *std::max_element(l.spp_levels.begin(), l.spp_levels.end());
        if (cur[1] < m || cur[2] < m) fail(l, "spatial size smaller than pyramid level " + std::to_string(m));
        cur = {static_cast<int>(static_cast<std::size_t>(cur[0]) * spp_bins(l.spp_levels))};
        break;
      }
      case LayerKind::dropout:
        if (!(l.keep_prob > 0.0f && l.keep_prob <= 1.0f)) fail(l, "keep probability outside (0, 1]");
        break;
      case LayerKind::batchnorm:
        if (!(l.bn_eps > 0.0f)) fail(l, "epsilon must be positive");
        break;
      case LayerKind::relu: break;
      case LayerKind::softmax:
        ++softmax_count;
        if (cur.size() != 1 || cur[0] != a.classes)
          fail(l, "softmax input must be a vector of " + std::to_string(a.classes) + " classes");
        break;
    }
    out.push_back({l.name, l.kind, cur});
  }
  if (softmax_count != 1) throw InvalidArgument("architecture must end in exactly one softmax layer");
  return out;
}

inline std::vector<LayerShape> propagate_shapes(const ArchSpec& a) { return propagate_shapes(a, a.height, a.width); }

// Spatial shape entering the first fully connected layer (the final conv
// feature map after its pooling stage).
inline std::pair<int, int> final_conv_map(const ArchSpec& a, int height, int width) {
  const auto shapes = propagate_shapes(a, height, width);
  std::pair<int, int> last{0, 0};
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    if (a.layers[i].kind == LayerKind::fc || a.layers[i].kind == LayerKind::spp) break;
    if (shapes[i].output.size() == 3) last = {shapes[i].output[1], shapes[i].output[2]};
  }
  return last;
}

// Length of the vector entering the first fully connected layer.
inline int fc_input_length(const ArchSpec& a, int height, int width) {
  const auto shapes = propagate_shapes(a, height, width);
  for (std::size_t i = 0; i < shapes.size(); ++i)
    if (a.layers[i].kind == LayerKind::fc) {
      const Shape& s = i ? shapes[i - 1].output : Shape{a.channels, height, width};
      return static_cast<int>(shape_numel(s));
    }
  return 0;
}

// ------------------------------------------------------ geometry table

/**
 * Per-input-size front end. conv3..conv5 use 3x3 kernels with unit padding
 * and the final 3x3 / 2 pool, so every entry lands on a 6x6 map before the
 * fully connected layers. Widths are multipliers on the AlexNet channel
 * counts (conv: 96, 256, 384, 384, 256; fc: 4096, 4096).
 */
struct ScaleGeometry {
  int input = 227;
  ConvGeometry conv1 = ConvGeometry::square(11, 4, 0);
  PoolGeometry pool1{3, 2};
  int conv2_kernel = 5;
  PoolGeometry pool2{3, 2};
  PoolGeometry pool5{3, 2};
  double conv_width = 1.0;
  double fc_width = 1.0;
  bool operator==(const ScaleGeometry&) const = default;
};

inline void to_json(nlohmann::json& j, const ScaleGeometry& g) {
  j = {{"input", g.input},
       {"conv1", {{"kernel", g.conv1.kernel_h}, {"stride", g.conv1.stride}, {"pad", g.conv1.pad}}},
       {"pool1", {g.pool1.window, g.pool1.stride}},
       {"conv2_kernel", g.conv2_kernel},
       {"pool2", {g.pool2.window, g.pool2.stride}},
       {"pool5", {g.pool5.window, g.pool5.stride}},
       {"conv_width", g.conv_width},
       {"fc_width", g.fc_width}};
}

inline void from_json(const nlohmann::json& j, ScaleGeometry& g) {
  g.input = j.at("input").get<int>();
  const auto& c1 = j.at("conv1");
  g.conv1 = ConvGeometry::square(c1.at("kernel").get<int>(), c1.at("stride").get<int>(), c1.at("pad").get<int>());
  auto pool = [](const nlohmann::json& p) { return PoolGeometry{p.at(0).get<int>(), p.at(1).get<int>()}; };
  g.pool1 = pool(j.at("pool1"));
  g.conv2_kernel = j.at("conv2_kernel").get<int>();
  g.pool2 = pool(j.at("pool2"));
  g.pool5 = pool(j.at("pool5"));
  g.conv_width = j.at("conv_width").get<double>();
  g.fc_width = j.at("fc_width").get<double>();
}

inline const std::vector<ScaleGeometry>& geometry_table() {
  static const std::vector<ScaleGeometry> table = {
      {32, ConvGeometry::square(3, 1, 0), {3, 2}, 3, {2, 1}, {3, 2}, 0.25, 0.25},
      {64, ConvGeometry::square(5, 2, 2), {3, 2}, 5, {2, 1}, {3, 2}, 0.375, 0.375},
      {100, ConvGeometry::square(7, 3, 1), {3, 2}, 5, {2, 1}, {3, 2}, 0.5, 0.5},
      {150, ConvGeometry::square(9, 5, 2), {3, 2}, 5, {2, 1}, {3, 2}, 0.75, 0.75},
      {227, ConvGeometry::square(11, 4, 0), {3, 2}, 5, {3, 2}, {3, 2}, 1.0, 1.0},
      {256, ConvGeometry::square(11, 4, 0), {3, 2}, 5, {3, 2}, {3, 2}, 1.0, 1.0},
      {320, ConvGeometry::square(13, 5, 0), {3, 2}, 5, {3, 2}, {3, 2}, 1.125, 1.0},
      {384, ConvGeometry::square(15, 6, 0), {3, 2}, 5, {3, 2}, {3, 2}, 1.25, 1.0},
      {512, ConvGeometry::square(17, 8, 0), {3, 2}, 5, {3, 2}, {3, 2}, 1.25, 1.0},
  };
  return table;
}

// Spatial extent after conv1 -> pool1 -> conv2 -> pool2 -> conv3..5 -> pool5.
inline int front_end_extent(const ScaleGeometry& g, int n) {
  int x = g.conv1.out_h(n);
  if (x < 1) return 0;
  x = g.pool1.out_extent(x);
  if (x < 1) return 0;
  x = g.pool2.out_extent(x);  // conv2..conv5 preserve size
  if (x < 1) return 0;
  return g.pool5.out_extent(x);
}

/**
 * Geometry for an n x n input: the tabulated entry when n is listed,
 * otherwise the closest-kernel solution (searched over conv1 kernel,
 * stride, padding and the two intermediate pools) that lands on 6x6, with
 * widths taken from the largest tabulated size not above n.
 */
inline ScaleGeometry geometry_for_input(int n) {
  const auto& table = geometry_table();
  for (const auto& g : table)
    if (g.input == n) return g;
  if (n < 16) throw UnsupportedInputSize("no 6x6 geometry for input size " + std::to_string(n));
  const ScaleGeometry* ref = &table.front();
  for (const auto& g : table)
    if (g.input <= n) ref = &g;
  const PoolGeometry pools[] = {{3, 2}, {2, 1}, {3, 1}, {2, 2}};
  std::optional<ScaleGeometry> best;
  int best_cost = 0;
  for (int k = 3; k <= 17; k += 2)
    for (int s = 1; s <= 8 && s <= k; ++s)
      for (int p = 0; p <= k / 2; ++p)
        for (std::size_t i1 = 0; i1 < 4; ++i1)
          for (std::size_t i2 = 0; i2 < 4; ++i2) {
            ScaleGeometry g = *ref;
            g.input = n;
            g.conv1 = ConvGeometry::square(k, s, p);
            g.pool1 = pools[i1];
            g.pool2 = pools[i2];
            if (front_end_extent(g, n) != 6) continue;
            const int cost = 100 * std::abs(k - ref->conv1.kernel_h) + 10 * static_cast<int>(i1 + i2) + p;
            if (!best || cost < best_cost) {
              best = g;
              best_cost = cost;
            }
          }
  if (!best) throw UnsupportedInputSize("no 6x6 geometry for input size " + std::to_string(n));
  return *best;
}

// ------------------------------------------------------------ builder

struct ArchFlags {
  bool use_lrn = true;
  bool use_bn = false;
  bool use_dropout = true;
  std::vector<int> spp_levels;  // non-empty replaces the final pool
  int in_channels = 1;
  int classes = 16;
  float keep_prob = 0.5f;
  LrnParams lrn{};
};

inline int scaled_width(int base, double factor) {
  return std::max(1, static_cast<int>(std::lround(base * factor)));
}

namespace detail {

inline void push_conv_block(std::vector<LayerConfig>& layers, const std::string& name, int outputs,
                            ConvGeometry geom, const ArchFlags& f, bool lrn, int suffix_from = 0) {
  const std::string tag = name.substr(suffix_from);
  LayerConfig c;
  c.kind = LayerKind::conv;
  c.name = name;
  c.outputs = outputs;
  c.conv = geom;
  layers.push_back(c);
  if (f.use_bn) layers.push_back({.kind = LayerKind::batchnorm, .name = "bn" + tag});
  layers.push_back({.kind = LayerKind::relu, .name = "relu" + tag});
  if (lrn && f.use_lrn) {
    LayerConfig l{.kind = LayerKind::lrn, .name = "norm" + tag};
    l.lrn = f.lrn;
    // clip the window to what the channel count admits (odd, <= 2C-1)
    const int cap = 2 * outputs - 1;
    if (l.lrn.size > cap) l.lrn.size = cap;
    layers.push_back(l);
  }
}

inline void push_pool(std::vector<LayerConfig>& layers, const std::string& name, PoolGeometry g) {
  LayerConfig p{.kind = LayerKind::maxpool, .name = name};
  p.pool = g;
  layers.push_back(p);
}

// Range [first, last) of the block that starts at conv layer `name`.
inline std::pair<std::size_t, std::size_t> conv_block_range(const std::vector<LayerConfig>& layers,
                                                            const std::string& name) {
  std::size_t first = layers.size();
  for (std::size_t i = 0; i < layers.size(); ++i)
    if (layers[i].name == name) first = i;
  if (first == layers.size()) throw InvalidArgument("no layer named " + name);
  std::size_t last = first + 1;
  while (last < layers.size() &&
         (layers[last].kind == LayerKind::batchnorm || layers[last].kind == LayerKind::relu ||
          layers[last].kind == LayerKind::lrn))
    ++last;
  return {first, last};
}

inline std::string suffix_of(const std::string& conv_name) { return conv_name.substr(4); }

}  // namespace detail

/**
 * Changes the number of conv layers of an AlexNet-style spec. Shallower
 * nets drop conv3, then conv4, then conv5; deeper nets insert copies of
 * conv3's configuration right after conv3 (named conv3_1, conv3_2, ...).
 * conv1 and conv2 and all pooling stages are kept, so downsampling is
 * unchanged.
 */
inline ArchSpec with_conv_depth(const ArchSpec& spec, int conv_depth) {
  if (conv_depth < 2)
    throw InvalidArgument("conv depth must be >= 2 (conv1 and conv2 are always kept), got " +
                          std::to_string(conv_depth));
  ArchSpec a = spec;
  // inserted copies go first, newest first, then conv3, conv4, conv5
  std::vector<std::string> removal_order;
  for (const auto& name : a.conv_names())
    if (name.rfind("conv3_", 0) == 0) removal_order.insert(removal_order.begin(), name);
  for (const char* base : {"conv3", "conv4", "conv5"}) removal_order.emplace_back(base);
  for (const auto& victim : removal_order) {
    if (static_cast<int>(a.conv_names().size()) <= conv_depth) break;
    if (a.index_of(victim) < 0) continue;
    auto [first, last] = detail::conv_block_range(a.layers, victim);
    a.layers.erase(a.layers.begin() + static_cast<std::ptrdiff_t>(first),
                   a.layers.begin() + static_cast<std::ptrdiff_t>(last));
  }
  if (static_cast<int>(a.conv_names().size()) > conv_depth)
    throw InvalidArgument("cannot reduce to conv depth " + std::to_string(conv_depth));
  while (static_cast<int>(a.conv_names().size()) < conv_depth) {
    if (a.index_of("conv3") < 0) throw InvalidArgument("cannot deepen a spec without conv3");
    auto [first, last] = detail::conv_block_range(a.layers, "conv3");
    std::vector<LayerConfig> block(a.layers.begin() + static_cast<std::ptrdiff_t>(first),
                                   a.layers.begin() + static_cast<std::ptrdiff_t>(last));
    int copy = 1;
    while (a.index_of("conv3_" + std::to_string(copy)) >= 0) ++copy;
    const std::string suffix = "3_" + std::to_string(copy);
    for (auto& l : block) {
      const std::string stem = l.kind == LayerKind::conv ? "conv" : l.kind == LayerKind::batchnorm ? "bn"
                               : l.kind == LayerKind::relu ? "relu" : "norm";
      l.name = stem + suffix;
    }
    // after conv3 and any copies already inserted
    std::size_t at = last;
    for (int c = 1; c < copy; ++c) at = detail::conv_block_range(a.layers, "conv3_" + std::to_string(c)).second;
    a.layers.insert(a.layers.begin() + static_cast<std::ptrdiff_t>(at), block.begin(), block.end());
  }
  return a;
}

/**
 * AlexNet-style spec (5 conv + 3 fc, dense across channels) for an n x n
 * input using the geometry table, then edited to `conv_depth` conv layers
 * and scaled by separate conv and fc width factors.
 */
inline ArchSpec build_alexnet(const ScaleGeometry& geo, double conv_width, double fc_width, int conv_depth,
                              const ArchFlags& flags = {}) {
  if (!(conv_width > 0) || !(fc_width > 0))
    throw InvalidArgument("width factors must be positive");
  if (conv_depth < 2)
    throw InvalidArgument("conv depth must be >= 2 (conv1 and conv2 are always kept), got " +
                          std::to_string(conv_depth));
  ArchSpec a;
  a.channels = flags.in_channels;
  a.height = a.width = geo.input;
  a.classes = flags.classes;
  a.use_lrn = flags.use_lrn;
  a.use_bn = flags.use_bn;
  a.use_dropout = flags.use_dropout;
  a.spp_levels = flags.spp_levels;
  const double cw = geo.conv_width * conv_width;
  const double fw = geo.fc_width * fc_width;
  auto& L = a.layers;
  detail::push_conv_block(L, "conv1", scaled_width(96, cw), geo.conv1, flags, true, 4);
  detail::push_pool(L, "pool1", geo.pool1);
  detail::push_conv_block(L, "conv2", scaled_width(256, cw),
                          ConvGeometry::square(geo.conv2_kernel, 1, geo.conv2_kernel / 2), flags, true, 4);
  detail::push_pool(L, "pool2", geo.pool2);
  const auto same3 = ConvGeometry::square(3, 1, 1);
  detail::push_conv_block(L, "conv3", scaled_width(384, cw), same3, flags, false, 4);
  detail::push_conv_block(L, "conv4", scaled_width(384, cw), same3, flags, false, 4);
  detail::push_conv_block(L, "conv5", scaled_width(256, cw), same3, flags, false, 4);
  if (flags.spp_levels.empty()) {
    detail::push_pool(L, "pool5", geo.pool5);
  } else {
    validate_spp_levels(flags.spp_levels);
    L.push_back({.kind = LayerKind::spp, .name = "spp5", .spp_levels = flags.spp_levels});
  }
  for (int i : {6, 7}) {
    const std::string t = std::to_string(i);
    L.push_back({.kind = LayerKind::fc, .name = "fc" + t, .outputs = scaled_width(4096, fw)});
    if (flags.use_bn) L.push_back({.kind = LayerKind::batchnorm, .name = "bn" + t});
    L.push_back({.kind = LayerKind::relu, .name = "relu" + t});
    if (flags.use_dropout) L.push_back({.kind = LayerKind::dropout, .name = "drop" + t, .keep_prob = flags.keep_prob});
  }
  L.push_back({.kind = LayerKind::fc, .name = "fc8", .outputs = flags.classes});
  L.push_back({.kind = LayerKind::softmax, .name = "prob"});
  a = with_conv_depth(a, conv_depth);
  propagate_shapes(a);
  return a;
}

inline ArchSpec build_alexnet(int input_size, double width_factor, int conv_depth, const ArchFlags& flags = {}) {
  return build_alexnet(geometry_for_input(input_size), width_factor, width_factor, conv_depth, flags);
}

inline ArchSpec build_alexnet(int input_size, double conv_width, double fc_width, int conv_depth,
                              const ArchFlags& flags) {
  return build_alexnet(geometry_for_input(input_size), conv_width, fc_width, conv_depth, flags);
}

// Depth-5, width-1 network for an n x n input.
inline ArchSpec scale_for_input(int n, const ArchFlags& flags = {}) { return build_alexnet(n, 1.0, 5, flags); }

}  // namespace docgrid

#endif  // DOCGRID_ARCH_HPP
