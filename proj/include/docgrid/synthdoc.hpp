#ifndef DOCGRID_SYNTHDOC_HPP
#define DOCGRID_SYNTHDOC_HPP

// Seeded generator of synthetic document pages in four layout archetypes:
// letter, memo, form and email. Pages are white with dark "ink" built from
// dash runs (text lines), blocks, rules and squiggles, plus scan noise.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "docgrid/error.hpp"
#include "docgrid/imaging.hpp"
#include "docgrid/tensor.hpp"

namespace docgrid {

inline const std::vector<std::string>& synth_class_names() {
  static const std::vector<std::string> names{"letter", "memo", "form", "email"};
  return names;
}

inline int synth_class_index(const std::string& name) {
  const auto& n = synth_class_names();
  const auto it = std::find(n.begin(), n.end(), name);
  if (it == n.end()) throw InvalidArgument("unknown document class '" + name + "'");
  return static_cast<int>(it - n.begin());
}

struct SynthOptions {
  double noise_sigma = 0.03;  // additive scan noise
  bool tint = false;          // colored paper and ink (3 channels)
};

struct SynthSample {
  Tensor image;  // 1 x n x n (3 x n x n when tinted), values in [0, 1]
  int label = 0;
  std::uint64_t seed = 0;
};

namespace detail {

// Grayscale canvas with page coordinates in [0, 1].
class Page {
 public:
  Page(int n, std::mt19937_64& rng) : n_(n), px_(static_cast<std::size_t>(n) * n, 1.0f), rng_(rng) {}

  // Content placement: page point u maps to offset + scale * u.
  void place(double ox, double oy, double scale) { ox_ = ox, oy_ = oy, s_ = scale; }

  int size() const { return n_; }
  double uni(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
  int pick(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
  bool coin(double p = 0.5) { return std::bernoulli_distribution(p)(rng_); }

  int to_px(double u) const { return static_cast<int>(std::floor(u * n_)); }
  int px_x(double u) const { return to_px(ox_ + s_ * u); }
  int px_y(double u) const { return to_px(oy_ + s_ * u); }
  int thickness(double t) const { return std::max(1, static_cast<int>(std::lround(t * s_ * n_))); }

  // Darkens pixels of [x0, x1) x [y0, y1) in page units to at most `ink`.
  void rect(double x0, double y0, double x1, double y1, float ink) {
    const int a = std::clamp(px_x(x0), 0, n_), b = std::clamp(std::max(px_x(x1), px_x(x0) + 1), 0, n_);
    const int c = std::clamp(px_y(y0), 0, n_), d = std::clamp(std::max(px_y(y1), px_y(y0) + 1), 0, n_);
    for (int y = c; y < d; ++y)
      for (int x = a; x < b; ++x) dot(x, y, ink);
  }
  void dot(int x, int y, float ink) {
    if (x < 0 || y < 0 || x >= n_ || y >= n_) return;
    float& p = px_[static_cast<std::size_t>(y) * n_ + x];
    p = std::min(p, ink);
  }
  // Full-width rule through page row y.
  void rule(double y, int thick, float ink) {
    const int r = std::clamp(px_y(y), 0, n_ - thick);
    for (int t = 0; t < thick; ++t)
      for (int x = 0; x < n_; ++x) dot(x, r + t, ink);
  }
  void vline(double x, double y0, double y1, float ink) {
    const int c = px_x(x);
    for (int y = std::max(0, px_y(y0)); y <= std::min(n_ - 1, px_y(y1)); ++y) dot(c, y, ink);
  }
  // A text line: word-length dashes between x0 and x1 at baseline y.
  void text_line(double x0, double x1, double y, double height, float ink) {
    double x = x0;
    while (x < x1) {
      const double w = uni(0.02, 0.09);
      const double jitter = uni(-0.15, 0.15) * height;
      rect(x, y + jitter, std::min(x + w, x1), y + jitter + height, ink);
      x += w + uni(0.012, 0.03);
    }
  }
  // Sinusoidal pen stroke, used for signatures.
  void squiggle(double x0, double x1, double y, double amp, float ink) {
    const int a = px_x(x0), b = px_x(x1);
    const double freq = uni(3, 6), phase = uni(0, 2 * std::numbers::pi);
    for (int x = a; x <= b; ++x) {
      const double t = static_cast<double>(x - a) / std::max(1, b - a);
      const int yy = px_y(y + amp * std::sin(2 * std::numbers::pi * freq * t + phase));
      dot(x, yy, ink);
      dot(x, yy + 1, ink);
    }
  }
  const std::vector<float>& pixels() const { return px_; }

 private:
  int n_;
  std::vector<float> px_;
  std::mt19937_64& rng_;
  double ox_ = 0, oy_ = 0, s_ = 1;
};

inline float ink(Page& p) { return static_cast<float>(p.uni(0.0, 0.35)); }

// Body text block from y downward; returns the y after the last line.
inline double body(Page& p, double x0, double x1, double y, double y_end, double line_h, double gap, float k,
                   double para_prob = 0.15) {
  while (y + line_h < y_end) {
    const double right = p.coin(0.2) ? x0 + (x1 - x0) * p.uni(0.4, 0.9) : x1;
    p.text_line(x0, right, y, line_h, k);
    y += line_h + gap;
    if (p.coin(para_prob)) y += gap * 1.5;
  }
  return y;
}

inline void render_letter(Page& p) {
  const float k = ink(p);
  const double m = p.uni(0.1, 0.16);  // side margins; nothing reaches the page edge
  const double lh = p.uni(0.014, 0.022), gap = p.uni(0.018, 0.03);
  // letterhead: logo block plus centred or left address
  const double top = p.uni(0.05, 0.1);
  const bool centred = p.coin();
  const double lx = centred ? 0.5 - p.uni(0.08, 0.14) : m;
  p.rect(lx, top, lx + p.uni(0.12, 0.25), top + p.uni(0.04, 0.07), k);
  for (int i = 0; i < p.pick(1, 2); ++i) {
    const double y = top + 0.09 + i * (lh + gap * 0.6);
    p.text_line(centred ? 0.35 : m, centred ? 0.65 : m + 0.3, y, lh * 0.8, k);
  }
  double y = top + p.uni(0.17, 0.22);
  p.text_line(1 - m - 0.2, 1 - m, y, lh, k);  // date, right aligned
  y += 0.05;
  p.text_line(m, m + p.uni(0.1, 0.2), y, lh, k);  // salutation
  y += lh + gap * 2;
  y = body(p, m, 1 - m, y, p.uni(0.68, 0.78), lh, gap, k, 0.25);
  y += gap;
  p.text_line(m, m + p.uni(0.1, 0.18), y, lh, k);  // closing
  p.squiggle(m, m + p.uni(0.18, 0.3), y + 0.07, p.uni(0.01, 0.025), k);
  p.text_line(m, m + p.uni(0.12, 0.22), y + 0.12, lh, k);
}

inline void render_memo(Page& p) {
  const float k = ink(p);
  const double m = p.uni(0.07, 0.12);
  const double lh = p.uni(0.014, 0.022), gap = p.uni(0.016, 0.026);
  double y = p.uni(0.05, 0.09);
  p.rect(m, y, m + p.uni(0.35, 0.55), y + p.uni(0.045, 0.07), k);  // MEMORANDUM banner
  y += 0.1;
  p.rule(y, p.thickness(0.012), k);
  y += 0.04;
  const int fields = p.pick(3, 5);
  for (int i = 0; i < fields; ++i) {
    p.text_line(m, m + 0.1, y, lh, k);  // label
    p.text_line(m + 0.16, m + 0.16 + p.uni(0.15, 0.45), y, lh, k);
    y += lh + gap * 1.3;
  }
  p.rule(y + gap * 0.5, p.thickness(0.008), k);
  y += gap * 2.5;
  body(p, m, 1 - m, y, p.uni(0.85, 0.94), lh, gap, k);
}

inline void render_form(Page& p) {
  const float k = ink(p);
  const double lh = p.uni(0.012, 0.018);
  double y = p.uni(0.04, 0.1);
  p.rect(0.5 - p.uni(0.15, 0.25), y, 0.5 + p.uni(0.15, 0.25), y + p.uni(0.03, 0.05), k);  // title
  y += p.uni(0.1, 0.14);
  const int rows = p.pick(5, 9);
  const double row_h = (p.uni(0.8, 0.92) - y) / rows;
  const int cols = p.pick(2, 4);
  std::vector<double> xs{0.0};
  for (int c = 1; c < cols; ++c) xs.push_back(static_cast<double>(c) / cols + p.uni(-0.05, 0.05));
  xs.push_back(1.0);
  const int thick = p.thickness(0.008);
  for (int r = 0; r <= rows; ++r) p.rule(y + r * row_h, thick, k);
  for (std::size_t c = 1; c + 1 < xs.size(); ++c) p.vline(xs[c], y, y + rows * row_h, k);
  for (int r = 0; r < rows; ++r)
    for (std::size_t c = 0; c + 1 < xs.size(); ++c) {
      const double cx = xs[c] + 0.02, cy = y + r * row_h + row_h * 0.3;
      if (p.coin(0.3)) {
        const double b = std::min(row_h * 0.45, 0.03);
        p.rect(cx, cy, cx + b, cy + 0.004, k);
        p.rect(cx, cy + b, cx + b, cy + b + 0.004, k);
        p.rect(cx, cy, cx + 0.004, cy + b, k);
        p.rect(cx + b, cy, cx + b + 0.004, cy + b + 0.004, k);
      } else {
        p.text_line(cx, cx + (xs[c + 1] - xs[c]) * p.uni(0.3, 0.8), cy, lh, k);
      }
    }
}

inline void render_email(Page& p) {
  const float k = ink(p);
  const double m = p.uni(0.04, 0.08);
  const double lh = p.uni(0.012, 0.018), gap = p.uni(0.012, 0.02);
  double y = p.uni(0.03, 0.07);
  const int fields = p.pick(4, 6);
  for (int i = 0; i < fields; ++i) {  // short key: value lines hugging the left margin
    p.text_line(m, m + 0.06, y, lh, k);
    p.text_line(m + 0.09, m + 0.09 + p.uni(0.1, 0.35), y, lh, k);
    y += lh + gap;
  }
  y += gap * 2;
  y = body(p, m, 1 - p.uni(0.15, 0.35), y, p.uni(0.55, 0.75), lh, gap, k, 0.3);
  if (p.coin(0.6)) {  // quoted reply, indented with a bar
    y += gap * 2;
    const double end = p.uni(0.85, 0.95);
    p.vline(m + 0.02, y, end, k);
    body(p, m + 0.05, 1 - p.uni(0.2, 0.4), y, end, lh, gap, k);
  }
}

inline std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

}  // namespace detail

/** Renders one page; bit-deterministic in (class, seed, size, options). */
inline SynthSample generate_sample(const std::string& cls, std::uint64_t seed, int size, const SynthOptions& opt = {}) {
  const int label = synth_class_index(cls);
  if (size < 32) throw InvalidArgument("synthetic page size must be >= 32, got " + std::to_string(size));
  std::mt19937_64 rng(detail::splitmix(seed ^ detail::splitmix(static_cast<std::uint64_t>(label) + 1)));
  detail::Page page(size, rng);
  const double scale = page.uni(0.8, 1.1);
  page.place(page.uni(-0.15, 0.15) + (1 - scale) / 2, page.uni(-0.15, 0.15) + (1 - scale) / 2, scale);
  switch (label) {
    case 0: detail::render_letter(page); break;
    case 1: detail::render_memo(page); break;
    case 2: detail::render_form(page); break;
    default: detail::render_email(page); break;
  }
  std::normal_distribution<float> noise(0.0f, static_cast<float>(opt.noise_sigma));
  const int C = opt.tint ? 3 : 1;
  std::array<float, 3> paper{1, 1, 1}, inkc{0, 0, 0};
  if (opt.tint) {
    std::uniform_real_distribution<float> u(0, 1);
    for (int c = 0; c < 3; ++c) paper[static_cast<std::size_t>(c)] = 0.85f + 0.15f * u(rng);
    for (int c = 0; c < 3; ++c) inkc[static_cast<std::size_t>(c)] = 0.4f * u(rng);
  }
  Tensor img({C, size, size});
  const auto& px = page.pixels();
  for (std::size_t i = 0; i < px.size(); ++i) {
    const float n = opt.noise_sigma > 0 ? noise(rng) : 0.0f;
    for (int c = 0; c < C; ++c) {
      const auto cc = static_cast<std::size_t>(c);
      const float v = inkc[cc] + (paper[cc] - inkc[cc]) * px[i];
      img[static_cast<std::size_t>(c) * px.size() + i] = std::clamp(v + n, 0.0f, 1.0f);
    }
  }
  return {std::move(img), label, seed};
}

/**
 * Writes n_per_class pages for the first `classes` archetypes under
 * out_dir/<class>/ plus out_dir/manifest.csv. Each class is split 8:1:1
 * into train/val/test by sample index. Returns the manifest path.
 */
inline std::filesystem::path generate_dataset(int n_per_class, int classes, std::uint64_t seed, int size,
                                              const std::filesystem::path& out_dir, const SynthOptions& opt = {}) {
  if (n_per_class < 1) throw InvalidArgument("per-class count must be >= 1");
  const auto& names = synth_class_names();
  if (classes < 1 || classes > static_cast<int>(names.size()))
    throw InvalidArgument("class count must be in [1, " + std::to_string(names.size()) + "]");
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());
  const int n_train = static_cast<int>(std::lround(0.8 * n_per_class));
  const int n_val = static_cast<int>(std::lround(0.1 * n_per_class));
  std::vector<ManifestEntry> entries;
  for (int c = 0; c < classes; ++c) {
    const std::string& name = names[static_cast<std::size_t>(c)];
    std::filesystem::create_directories(out_dir / name, ec);
    if (ec) throw IoError("cannot create " + (out_dir / name).string() + ": " + ec.message());
    for (int i = 0; i < n_per_class; ++i) {
      const std::uint64_t s = detail::splitmix(seed * 1000003ull + static_cast<std::uint64_t>(c) * 100000007ull +
                                               static_cast<std::uint64_t>(i));
      const SynthSample smp = generate_sample(name, s, size, opt);
      char file[64];
      std::snprintf(file, sizeof file, "%s_%05d.%s", name.c_str(), i, opt.tint ? "ppm" : "pgm");
      const std::string rel = name + "/" + file;
      write_image(to_raw(smp.image), out_dir / rel);
      entries.push_back({rel, c, i < n_train ? "train" : i < n_train + n_val ? "val" : "test"});
    }
  }
  std::stable_sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
    auto rank = [](const std::string& s) { return s == "train" ? 0 : s == "val" ? 1 : 2; };
    return rank(a.split) < rank(b.split);
  });
  const auto path = out_dir / "manifest.csv";
  write_manifest(entries, path);
  return path;
}

}  // namespace docgrid

#endif  // DOCGRID_SYNTHDOC_HPP
