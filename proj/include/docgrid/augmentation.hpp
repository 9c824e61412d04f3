#ifndef DOCGRID_AUGMENTATION_HPP
#define DOCGRID_AUGMENTATION_HPP

// Label-preserving image transforms, aspect-ratio policies and view sets
// for multi-view / multi-scale testing. Images are C x H x W in [0, 1].

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "docgrid/error.hpp"
#include "docgrid/imaging.hpp"
#include "docgrid/tensor.hpp"

namespace docgrid {

enum class TransformKind {
  none,
  color_jitter,
  crop,
  elastic,
  gaussian_blur,
  gaussian_noise,
  mirror,
  perspective,
  rotation,
  salt_pepper,
  shear
};

NLOHMANN_JSON_SERIALIZE_ENUM(TransformKind, {{TransformKind::none, "none"},
                                             {TransformKind::color_jitter, "color_jitter"},
                                             {TransformKind::crop, "crop"},
                                             {TransformKind::elastic, "elastic"},
                                             {TransformKind::gaussian_blur, "gaussian_blur"},
                                             {TransformKind::gaussian_noise, "gaussian_noise"},
                                             {TransformKind::mirror, "mirror"},
                                             {TransformKind::perspective, "perspective"},
                                             {TransformKind::rotation, "rotation"},
                                             {TransformKind::salt_pepper, "salt_pepper"},
                                             {TransformKind::shear, "shear"}})

inline const std::vector<TransformKind>& all_transform_kinds() {
  static const std::vector<TransformKind> k{
      TransformKind::none,       TransformKind::color_jitter, TransformKind::crop,     TransformKind::elastic,
      TransformKind::gaussian_blur, TransformKind::gaussian_noise, TransformKind::mirror, TransformKind::perspective,
      TransformKind::rotation,   TransformKind::salt_pepper,  TransformKind::shear};
  return k;
}

inline std::string to_string(TransformKind k) { return nlohmann::json(k).get<std::string>(); }

inline TransformKind parse_transform_kind(const std::string& s) {
  for (auto k : all_transform_kinds())
    if (to_string(k) == s) return k;
  throw InvalidArgument("unknown transform kind '" + s + "'");
}

enum class ShearAxis { horizontal, vertical, both };  // both: axis drawn per sample

NLOHMANN_JSON_SERIALIZE_ENUM(ShearAxis, {{ShearAxis::horizontal, "horizontal"},
                                         {ShearAxis::vertical, "vertical"},
                                         {ShearAxis::both, "both"}})

struct Range {
  double lo = 0, hi = 0;
  bool operator==(const Range&) const = default;
};

inline void to_json(nlohmann::json& j, const Range& r) { j = nlohmann::json::array({r.lo, r.hi}); }
inline void from_json(const nlohmann::json& j, Range& r) {
  if (!j.is_array() || j.size() != 2) throw ConfigError("range must be [lo, hi]");
  r = {j[0].get<double>(), j[1].get<double>()};
}

// Parameter ranges for one transform kind. Only the fields of `kind` are
// used; the rest keep their defaults.
struct TransformSpec {
  TransformKind kind = TransformKind::none;
  Range rotation_deg{-10, 10};
  double crop_fraction = 0.9;     // side fraction kept
  double perspective = 0.05;      // max corner displacement, fraction of side
  double elastic_sigma = 4.0;     // px
  double elastic_alpha = 8.0;     // px
  Range blur_sigma{0.5, 1.5};     // px
  double noise_sigma = 0.02;
  double salt_pepper_rate = 0.02;
  double jitter = 0.1;            // brightness offset and contrast gain deviation
  Range shear_deg{-10, 10};
  ShearAxis shear_axis = ShearAxis::both;

  void validate() const {
    auto ordered = [](const Range& r, const char* what) {
      if (!(r.lo <= r.hi)) throw ConfigError(std::string(what) + " range is empty");
    };
    ordered(rotation_deg, "rotation");
    ordered(blur_sigma, "blur sigma");
    ordered(shear_deg, "shear");
    if (std::max(std::abs(rotation_deg.lo), std::abs(rotation_deg.hi)) > 45)
      throw ConfigError("rotation must stay within +-45 degrees");
    if (std::max(std::abs(shear_deg.lo), std::abs(shear_deg.hi)) > 45)
      throw ConfigError("shear must stay within +-45 degrees");
    if (!(crop_fraction > 0 && crop_fraction <= 1)) throw ConfigError("crop fraction must be in (0, 1]");
    if (!(perspective >= 0 && perspective < 0.5)) throw ConfigError("perspective must be in [0, 0.5)");
    if (!(elastic_sigma > 0) || !(elastic_alpha >= 0)) throw ConfigError("elastic sigma must be > 0, alpha >= 0");
    if (!(blur_sigma.lo >= 0)) throw ConfigError("blur sigma must be >= 0");
    if (!(noise_sigma >= 0)) throw ConfigError("noise sigma must be >= 0");
    if (!(salt_pepper_rate >= 0 && salt_pepper_rate <= 1)) throw ConfigError("salt/pepper rate must be in [0, 1]");
    if (!(jitter >= 0 && jitter < 1)) throw ConfigError("jitter must be in [0, 1)");
  }
  bool operator==(const TransformSpec&) const = default;
};

inline void to_json(nlohmann::json& j, const TransformSpec& s) {
  j = {{"kind", s.kind},
       {"rotation_deg", s.rotation_deg},
       {"crop_fraction", s.crop_fraction},
       {"perspective", s.perspective},
       {"elastic_sigma", s.elastic_sigma},
       {"elastic_alpha", s.elastic_alpha},
       {"blur_sigma", s.blur_sigma},
       {"noise_sigma", s.noise_sigma},
       {"salt_pepper_rate", s.salt_pepper_rate},
       {"jitter", s.jitter},
       {"shear_deg", s.shear_deg},
       {"shear_axis", s.shear_axis}};
}

// Missing keys keep their defaults.
inline void from_json(const nlohmann::json& j, TransformSpec& s) {
  s = TransformSpec{};
  if (j.contains("kind")) s.kind = parse_transform_kind(j.at("kind").get<std::string>());
  auto opt = [&](const char* key, auto& field) {
    if (j.contains(key)) j.at(key).get_to(field);
  };
  opt("rotation_deg", s.rotation_deg);
  opt("crop_fraction", s.crop_fraction);
  opt("perspective", s.perspective);
  opt("elastic_sigma", s.elastic_sigma);
  opt("elastic_alpha", s.elastic_alpha);
  opt("blur_sigma", s.blur_sigma);
  opt("noise_sigma", s.noise_sigma);
  opt("salt_pepper_rate", s.salt_pepper_rate);
  opt("jitter", s.jitter);
  opt("shear_deg", s.shear_deg);
  if (j.contains("shear_axis")) {
    const auto a = j.at("shear_axis").get<std::string>();
    if (a == "horizontal") s.shear_axis = ShearAxis::horizontal;
    else if (a == "vertical") s.shear_axis = ShearAxis::vertical;
    else if (a == "both") s.shear_axis = ShearAxis::both;
    else throw ConfigError("shear_axis must be horizontal, vertical or both");
  }
  s.validate();
}

// A transform with every random quantity drawn.
struct ConcreteTransform {
  TransformKind kind = TransformKind::none;
  double angle_deg = 0;              // rotation, shear
  bool vertical = false;             // shear axis
  double crop_fraction = 1, crop_x = 0, crop_y = 0;  // crop offsets as fractions of the slack
  std::array<double, 8> corners{};   // perspective: (dx, dy) per corner tl, tr, br, bl, fraction of side
  double sigma = 0;                  // blur, noise, elastic smoothing
  double alpha = 0;                  // elastic magnitude
  double rate = 0;                   // salt/pepper
  double brightness = 0, contrast = 1;
  std::uint64_t seed = 0;            // elastic field, noise, salt/pepper

  static ConcreteTransform identity() { return {}; }
  bool operator==(const ConcreteTransform&) const = default;
};

inline void to_json(nlohmann::json& j, const ConcreteTransform& t) {
  j = {{"kind", t.kind},   {"angle_deg", t.angle_deg}, {"vertical", t.vertical}, {"crop", {t.crop_fraction, t.crop_x, t.crop_y}},
       {"corners", t.corners}, {"sigma", t.sigma},   {"alpha", t.alpha},       {"rate", t.rate},
       {"brightness", t.brightness}, {"contrast", t.contrast}, {"seed", t.seed}};
}

template <class Rng>
ConcreteTransform sample_transform(const TransformSpec& spec, Rng& rng) {
  spec.validate();
  auto uni = [&](double lo, double hi) { return lo == hi ? lo : std::uniform_real_distribution<double>(lo, hi)(rng); };
  ConcreteTransform t;
  t.kind = spec.kind;
  switch (spec.kind) {
    case TransformKind::none:
    case TransformKind::mirror: break;
    case TransformKind::rotation: t.angle_deg = uni(spec.rotation_deg.lo, spec.rotation_deg.hi); break;
    case TransformKind::shear:
      t.angle_deg = uni(spec.shear_deg.lo, spec.shear_deg.hi);
      t.vertical = spec.shear_axis == ShearAxis::vertical ||
                   (spec.shear_axis == ShearAxis::both && std::bernoulli_distribution(0.5)(rng));
      break;
    case TransformKind::crop:
      t.crop_fraction = spec.crop_fraction;
      t.crop_x = uni(0, 1);
      t.crop_y = uni(0, 1);
      break;
    case TransformKind::perspective:
      for (double& c : t.corners) c = uni(-spec.perspective, spec.perspective);
      break;
    case TransformKind::elastic:
      t.sigma = spec.elastic_sigma;
      t.alpha = spec.elastic_alpha;
      t.seed = rng();
      break;
    case TransformKind::gaussian_blur: t.sigma = uni(spec.blur_sigma.lo, spec.blur_sigma.hi); break;
    case TransformKind::gaussian_noise:
      t.sigma = spec.noise_sigma;
      t.seed = rng();
      break;
    case TransformKind::salt_pepper:
      t.rate = spec.salt_pepper_rate;
      t.seed = rng();
      break;
    case TransformKind::color_jitter:
      t.brightness = uni(-spec.jitter, spec.jitter);
      t.contrast = 1 + uni(-spec.jitter, spec.jitter);
      break;
  }
  return t;
}

namespace detail {

inline constexpr float kFill = 1.0f;  // white outside the source image

// Bilinear read with white outside [0, W-1] x [0, H-1].
inline float sample_or_fill(const Tensor& img, int c, double x, double y) {
  const int H = img.dim(1), W = img.dim(2);
  const double x0f = std::floor(x), y0f = std::floor(y);
  const int x0 = static_cast<int>(x0f), y0 = static_cast<int>(y0f);
  const double fx = x - x0f, fy = y - y0f;
  auto px = [&](int xx, int yy) { return xx < 0 || yy < 0 || xx >= W || yy >= H ? kFill : img.at(c, yy, xx); };
  if (fx == 0 && fy == 0) return px(x0, y0);
  const double top = px(x0, y0) * (1 - fx) + px(x0 + 1, y0) * fx;
  const double bot = px(x0, y0 + 1) * (1 - fx) + px(x0 + 1, y0 + 1) * fx;
  return static_cast<float>(top * (1 - fy) + bot * fy);
}

// out(x, y) = in(map(x, y)) for every channel.
inline Tensor inverse_map(const Tensor& img, const std::function<std::pair<double, double>(int, int)>& map) {
  Tensor out(img.shape());
  const int C = img.dim(0), H = img.dim(1), W = img.dim(2);
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      const auto [sx, sy] = map(x, y);
      for (int c = 0; c < C; ++c) out.at(c, y, x) = sample_or_fill(img, c, sx, sy);
    }
  return out;
}

inline std::vector<float> gaussian_kernel(double sigma) {
  const int r = std::max(1, static_cast<int>(std::ceil(3 * sigma)));
  std::vector<float> k(static_cast<std::size_t>(2 * r + 1));
  double s = 0;
  for (int i = -r; i <= r; ++i) s += k[static_cast<std::size_t>(i + r)] = static_cast<float>(std::exp(-i * i / (2 * sigma * sigma)));
  for (float& v : k) v = static_cast<float>(v / s);
  return k;
}

// Separable Gaussian blur of each H x W plane with clamped borders.
inline Tensor gaussian_blur(const Tensor& img, double sigma) {
  const auto k = gaussian_kernel(sigma);
  const int r = static_cast<int>(k.size() / 2);
  const int C = img.dim(0), H = img.dim(1), W = img.dim(2);
  Tensor tmp(img.shape()), out(img.shape());
  for (int c = 0; c < C; ++c) {
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x) {
        float s = 0;
        for (int i = -r; i <= r; ++i) s += k[static_cast<std::size_t>(i + r)] * img.at(c, y, std::clamp(x + i, 0, W - 1));
        tmp.at(c, y, x) = s;
      }
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x) {
        float s = 0;
        for (int i = -r; i <= r; ++i) s += k[static_cast<std::size_t>(i + r)] * tmp.at(c, std::clamp(y + i, 0, H - 1), x);
        out.at(c, y, x) = s;
      }
  }
  return out;
}

// 3x3 homography taking the unit-square-ish destination corners to sources.
inline std::array<double, 9> homography(const std::array<std::pair<double, double>, 4>& from,
                                        const std::array<std::pair<double, double>, 4>& to) {
  // Solve the 8x8 DLT system by Gaussian elimination with partial pivoting.
  double A[8][9] = {};
  for (int i = 0; i < 4; ++i) {
    const auto [x, y] = from[static_cast<std::size_t>(i)];
    const auto [u, v] = to[static_cast<std::size_t>(i)];
    double* r0 = A[2 * i];
    double* r1 = A[2 * i + 1];
    r0[0] = x, r0[1] = y, r0[2] = 1, r0[6] = -u * x, r0[7] = -u * y, r0[8] = u;
    r1[3] = x, r1[4] = y, r1[5] = 1, r1[6] = -v * x, r1[7] = -v * y, r1[8] = v;
  }
  for (int col = 0; col < 8; ++col) {
    int piv = col;
    for (int r = col + 1; r < 8; ++r)
      if (std::abs(A[r][col]) > std::abs(A[piv][col])) piv = r;
    std::swap(A[col], A[piv]);
    if (std::abs(A[col][col]) < 1e-12) throw InvalidArgument("degenerate perspective corners");
    for (int r = 0; r < 8; ++r) {
      if (r == col) continue;
      const double f = A[r][col] / A[col][col];
      for (int c = col; c < 9; ++c) A[r][c] -= f * A[col][c];
    }
  }
  std::array<double, 9> h{};
  for (int i = 0; i < 8; ++i) h[static_cast<std::size_t>(i)] = A[i][8] / A[i][i];
  h[8] = 1;
  return h;
}

}  // namespace detail

/**
 * Applies a sampled transform. Geometric kinds use inverse mapping with
 * bilinear interpolation and white fill; intensity kinds clamp to [0, 1].
 * Zero-magnitude parameters return the input unchanged.
 */
inline Tensor apply_transform(const Tensor& img, const ConcreteTransform& t) {
  require_rank(img, 3, "apply_transform");
  const int H = img.dim(1), W = img.dim(2);
  switch (t.kind) {
    case TransformKind::none: return img;
    case TransformKind::mirror: {
      Tensor out(img.shape());
      for (int c = 0; c < img.dim(0); ++c)
        for (int y = 0; y < H; ++y)
          for (int x = 0; x < W; ++x) out.at(c, y, x) = img.at(c, y, W - 1 - x);
      return out;
    }
    case TransformKind::rotation: {
      if (t.angle_deg == 0) return img;
      const double a = t.angle_deg * std::numbers::pi / 180, ca = std::cos(a), sa = std::sin(a);
      const double cx = (W - 1) / 2.0, cy = (H - 1) / 2.0;
      return detail::inverse_map(img, [&](int x, int y) {
        const double dx = x - cx, dy = y - cy;
        return std::pair{ca * dx + sa * dy + cx, -sa * dx + ca * dy + cy};
      });
    }
    case TransformKind::shear: {
      if (t.angle_deg == 0) return img;
      const double k = std::tan(t.angle_deg * std::numbers::pi / 180);
      if (t.vertical) return detail::inverse_map(img, [&](int x, int y) { return std::pair{double(x), y - x * k}; });
      return detail::inverse_map(img, [&](int x, int y) { return std::pair{x - y * k, double(y)}; });
    }
    case TransformKind::crop: {
      if (t.crop_fraction >= 1) return img;
      const int ch = std::max(1, static_cast<int>(std::lround(H * t.crop_fraction)));
      const int cw = std::max(1, static_cast<int>(std::lround(W * t.crop_fraction)));
      const int oy = static_cast<int>(std::lround((H - ch) * t.crop_y));
      const int ox = static_cast<int>(std::lround((W - cw) * t.crop_x));
      Tensor part({img.dim(0), ch, cw});
      for (int c = 0; c < img.dim(0); ++c)
        for (int y = 0; y < ch; ++y)
          for (int x = 0; x < cw; ++x) part.at(c, y, x) = img.at(c, oy + y, ox + x);
      return resize_bilinear(part, H, W);
    }
    case TransformKind::perspective: {
      if (std::all_of(t.corners.begin(), t.corners.end(), [](double v) { return v == 0; })) return img;
      const double w = W - 1, h = H - 1;
      const std::array<std::pair<double, double>, 4> dst{{{0, 0}, {w, 0}, {w, h}, {0, h}}};
      std::array<std::pair<double, double>, 4> src{};
      for (std::size_t i = 0; i < 4; ++i)
        src[i] = {dst[i].first + t.corners[2 * i] * W, dst[i].second + t.corners[2 * i + 1] * H};
      const auto m = detail::homography(dst, src);
      return detail::inverse_map(img, [&](int x, int y) {
        const double d = m[6] * x + m[7] * y + m[8];
        return std::pair{(m[0] * x + m[1] * y + m[2]) / d, (m[3] * x + m[4] * y + m[5]) / d};
      });
    }
    case TransformKind::elastic: {
      if (t.alpha == 0) return img;
      std::mt19937_64 rng(t.seed);
      std::uniform_real_distribution<float> u(-1, 1);
      Tensor field({2, H, W});
      for (float& v : field.vec()) v = u(rng);
      field = detail::gaussian_blur(field, t.sigma);
      // rescale to unit max magnitude so alpha is the peak displacement in px
      float peak = 0;
      for (float v : field.vec()) peak = std::max(peak, std::abs(v));
      const double scale = peak > 0 ? t.alpha / peak : 0;
      return detail::inverse_map(img, [&](int x, int y) {
        return std::pair{x + scale * field.at(0, y, x), y + scale * field.at(1, y, x)};
      });
    }
    case TransformKind::gaussian_blur: {
      if (t.sigma == 0) return img;
      Tensor out = detail::gaussian_blur(img, t.sigma);
      for (float& v : out.vec()) v = std::clamp(v, 0.0f, 1.0f);
      return out;
    }
    case TransformKind::gaussian_noise: {
      if (t.sigma == 0) return img;
      std::mt19937_64 rng(t.seed);
      std::normal_distribution<float> n(0.0f, static_cast<float>(t.sigma));
      Tensor out = img;
      for (float& v : out.vec()) v = std::clamp(v + n(rng), 0.0f, 1.0f);
      return out;
    }
    case TransformKind::salt_pepper: {
      if (t.rate == 0) return img;
      std::mt19937_64 rng(t.seed);
      std::bernoulli_distribution hit(t.rate), salt(0.5);
      Tensor out = img;
      for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x)
          if (hit(rng)) {
            const float v = salt(rng) ? 1.0f : 0.0f;
            for (int c = 0; c < img.dim(0); ++c) out.at(c, y, x) = v;
          }
      return out;
    }
    case TransformKind::color_jitter: {
      if (t.brightness == 0 && t.contrast == 1) return img;
      Tensor out = img;
      for (float& v : out.vec())
        v = std::clamp(static_cast<float>((v - 0.5) * t.contrast + 0.5 + t.brightness), 0.0f, 1.0f);
      return out;
    }
  }
  return img;
}

// ------------------------------------------------------- aspect ratio

enum class ARKind { warp, pad, crop3, variable };

NLOHMANN_JSON_SERIALIZE_ENUM(ARKind, {{ARKind::warp, "warp"},
                                      {ARKind::pad, "pad"},
                                      {ARKind::crop3, "crop3"},
                                      {ARKind::variable, "variable"}})

struct ARPolicy {
  ARKind kind = ARKind::warp;
  float pad_fill = 1.0f;
  long pixel_budget = 0;  // variable policy; 0 means target height x width

  void validate() const {
    if (!(pad_fill >= 0 && pad_fill <= 1)) throw ConfigError("pad fill must be in [0, 1]");
    if (pixel_budget < 0) throw ConfigError("pixel budget must be >= 0");
  }
  bool operator==(const ARPolicy&) const = default;
};

inline void to_json(nlohmann::json& j, const ARPolicy& p) {
  j = {{"kind", p.kind}, {"pad_fill", p.pad_fill}, {"pixel_budget", p.pixel_budget}};
}
inline void from_json(const nlohmann::json& j, ARPolicy& p) {
  p = ARPolicy{};
  if (j.contains("kind")) {
    const auto k = j.at("kind").get<std::string>();
    if (k == "warp") p.kind = ARKind::warp;
    else if (k == "pad") p.kind = ARKind::pad;
    else if (k == "crop3") p.kind = ARKind::crop3;
    else if (k == "variable") p.kind = ARKind::variable;
    else throw ConfigError("unknown aspect-ratio policy '" + k + "'");
  }
  if (j.contains("pad_fill")) p.pad_fill = j.at("pad_fill").get<float>();
  if (j.contains("pixel_budget")) p.pixel_budget = j.at("pixel_budget").get<long>();
  p.validate();
}

// How one view is cut from the source: resize the whole source to
// resize_h x resize_w, then take (or pad to) the target window.
struct ARView {
  int resize_h = 0, resize_w = 0;
  int out_h = 0, out_w = 0;
  int offset_y = 0, offset_x = 0;  // crop start (>= 0) or pad start (<= 0) of the window in resized coordinates
};

inline std::vector<ARView> plan_ar_views(int src_h, int src_w, const ARPolicy& policy, int target_h, int target_w) {
  if (src_h <= 0 || src_w <= 0 || target_h <= 0 || target_w <= 0) throw InvalidArgument("AR policy sizes must be positive");
  policy.validate();
  const double ar = static_cast<double>(src_w) / src_h;
  switch (policy.kind) {
    case ARKind::warp: return {{target_h, target_w, target_h, target_w, 0, 0}};
    case ARKind::pad: {
      const double s = std::min(static_cast<double>(target_h) / src_h, static_cast<double>(target_w) / src_w);
      const int rh = std::clamp(static_cast<int>(std::lround(src_h * s)), 1, target_h);
      const int rw = std::clamp(static_cast<int>(std::lround(src_w * s)), 1, target_w);
      return {{rh, rw, target_h, target_w, -((target_h - rh) / 2), -((target_w - rw) / 2)}};
    }
    case ARKind::crop3: {
      const double s = std::max(static_cast<double>(target_h) / src_h, static_cast<double>(target_w) / src_w);
      const int rh = std::max(target_h, static_cast<int>(std::lround(src_h * s)));
      const int rw = std::max(target_w, static_cast<int>(std::lround(src_w * s)));
      std::vector<ARView> v;
      const bool along_x = rw - target_w >= rh - target_h;
      const int slack = along_x ? rw - target_w : rh - target_h;
      for (int off : {0, slack / 2, slack})
        v.push_back({rh, rw, target_h, target_w, along_x ? 0 : off, along_x ? off : 0});
      return v;
    }
    case ARKind::variable: {
      const double budget = policy.pixel_budget > 0 ? static_cast<double>(policy.pixel_budget)
                                                    : static_cast<double>(target_h) * target_w;
      int h = std::max(1, static_cast<int>(std::floor(std::sqrt(budget / ar))));
      int w = std::max(1, static_cast<int>(std::floor(h * ar)));
      while (static_cast<double>(h) * w > budget && (h > 1 || w > 1)) (w >= h ? w : h) -= 1;
      return {{h, w, h, w, 0, 0}};
    }
  }
  return {};
}

// Cuts (or pads) the view window out of an already resized image.
inline Tensor cut_view(const Tensor& resized, const ARView& v, float fill) {
  if (v.offset_x == 0 && v.offset_y == 0 && v.out_h == resized.dim(1) && v.out_w == resized.dim(2)) return resized;
  Tensor out({resized.dim(0), v.out_h, v.out_w}, fill);
  for (int c = 0; c < resized.dim(0); ++c)
    for (int y = 0; y < v.out_h; ++y) {
      const int sy = y + v.offset_y;
      if (sy < 0 || sy >= resized.dim(1)) continue;
      for (int x = 0; x < v.out_w; ++x) {
        const int sx = x + v.offset_x;
        if (sx >= 0 && sx < resized.dim(2)) out.at(c, y, x) = resized.at(c, sy, sx);
      }
    }
  return out;
}

/**
 * warp: plain resize. pad: fit inside the target preserving AR, centred on
 * the fill value. crop3: cover the target, then start/middle/end crops
 * along the long axis. variable: preserve AR with at most the pixel budget.
 */
inline std::vector<Tensor> apply_ar_policy(const Tensor& img, const ARPolicy& policy, int target_h, int target_w) {
  require_rank(img, 3, "apply_ar_policy");
  std::vector<Tensor> out;
  for (const auto& v : plan_ar_views(img.dim(1), img.dim(2), policy, target_h, target_w))
    out.push_back(cut_view(resize_bilinear(img, v.resize_h, v.resize_w), v, policy.pad_fill));
  return out;
}

// ------------------------------------------------------------ views

// FNV-1a, stable across platforms.
inline std::uint64_t stable_hash(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

// View 0 is the identity; the rest are drawn with a seed derived from the image id.
inline std::vector<ConcreteTransform> make_views(const std::string& image_id, const TransformSpec& spec, int n,
                                                 std::uint64_t seed = 0) {
  if (n < 1) throw InvalidArgument("view count must be >= 1");
  std::vector<ConcreteTransform> v{ConcreteTransform::identity()};
  std::mt19937_64 rng(stable_hash(image_id) ^ (seed * 0x9e3779b97f4a7c15ull));
  for (int i = 1; i < n; ++i) v.push_back(sample_transform(spec, rng));
  return v;
}

template <class Rng>
int sample_scale(const std::vector<int>& sizes, Rng& rng) {
  if (sizes.empty()) throw InvalidArgument("scale range is empty");
  if (sizes.size() == 1) return sizes.front();
  return sizes[std::uniform_int_distribution<std::size_t>(0, sizes.size() - 1)(rng)];
}

}  // namespace docgrid

#endif  // DOCGRID_AUGMENTATION_HPP
