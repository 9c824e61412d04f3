#ifndef DOCGRID_IMAGING_HPP
#define DOCGRID_IMAGING_HPP

// Image ingestion and the five input representations: grayscale (G),
// RGB, HSV, Otsu binary (B) and dense upright SURF (S). Float images are
// C x H x W tensors with values in [0, 1].

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <png.h>

#include "docgrid/error.hpp"
#include "docgrid/tensor.hpp"

namespace docgrid {

struct RawImage {
  int width = 0;
  int height = 0;
  int channels = 1;  // 1 or 3
  std::vector<std::uint8_t> samples;  // row-major, channel-interleaved

  RawImage() = default;
  RawImage(int w, int h, int c, std::uint8_t fill = 0)
      : width(w), height(h), channels(c), samples(static_cast<std::size_t>(w) * h * c, fill) {
    validate();
  }

  void validate() const {
    if (width <= 0 || height <= 0) throw InvalidArgument("image dimensions must be positive");
    if (channels != 1 && channels != 3) throw InvalidArgument("image must have 1 or 3 channels");
    if (samples.size() != static_cast<std::size_t>(width) * height * channels)
      throw InvalidArgument("image sample count does not match " + std::to_string(width) + "x" +
                            std::to_string(height) + "x" + std::to_string(channels));
  }
  std::uint8_t& at(int x, int y, int c = 0) {
    return samples[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  std::uint8_t at(int x, int y, int c = 0) const {
    return samples[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  bool operator==(const RawImage&) const = default;
};

// ---------------------------------------------------------------- file IO

namespace detail {

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write " + path.string());
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError("failed writing " + path.string());
}

// Next whitespace-delimited header token, skipping '#' comments.
inline std::string pnm_token(const std::string& b, std::size_t& pos) {
  for (;;) {
    while (pos < b.size() && std::isspace(static_cast<unsigned char>(b[pos]))) ++pos;
    if (pos < b.size() && b[pos] == '#') {
      while (pos < b.size() && b[pos] != '\n') ++pos;
      continue;
    }
    break;
  }
  const std::size_t start = pos;
  while (pos < b.size() && !std::isspace(static_cast<unsigned char>(b[pos]))) ++pos;
  if (start == pos) throw FormatError("truncated PNM header");
  return b.substr(start, pos - start);
}

inline int pnm_int(const std::string& b, std::size_t& pos) {
  const std::string t = pnm_token(b, pos);
  if (t.find_first_not_of("0123456789") != std::string::npos || t.size() > 9)
    throw FormatError("bad PNM header field '" + t + "'");
  return std::stoi(t);
}

}  // namespace detail

// Binary PGM (P5) or PPM (P6), maxval up to 255 (rescaled to 255).
inline RawImage decode_pnm(const std::string& b) {
  if (b.size() < 2 || b[0] != 'P' || (b[1] != '5' && b[1] != '6')) throw FormatError("not a binary PGM/PPM file");
  std::size_t pos = 2;
  RawImage img;
  img.channels = b[1] == '5' ? 1 : 3;
  img.width = detail::pnm_int(b, pos);
  img.height = detail::pnm_int(b, pos);
  const int maxval = detail::pnm_int(b, pos);
  if (img.width <= 0 || img.height <= 0) throw FormatError("PNM dimensions must be positive");
  if (maxval <= 0 || maxval > 255) throw FormatError("unsupported PNM maxval " + std::to_string(maxval));
  ++pos;  // single whitespace before raster
  const std::size_t n = static_cast<std::size_t>(img.width) * img.height * img.channels;
  if (b.size() < pos + n) throw FormatError("truncated PNM raster");
  img.samples.assign(b.begin() + static_cast<std::ptrdiff_t>(pos), b.begin() + static_cast<std::ptrdiff_t>(pos + n));
  if (maxval != 255)
    for (auto& s : img.samples) s = static_cast<std::uint8_t>(std::lround(std::min(s, static_cast<std::uint8_t>(maxval)) * 255.0 / maxval));
  return img;
}

inline std::string encode_pnm(const RawImage& img) {
  img.validate();
  std::string out = (img.channels == 1 ? "P5\n" : "P6\n") + std::to_string(img.width) + " " +
                    std::to_string(img.height) + "\n255\n";
  out.append(img.samples.begin(), img.samples.end());
  return out;
}

// PNG through libpng's simplified API; alpha is composited onto white.
inline RawImage read_png(const std::filesystem::path& path) {
  const std::string bytes = detail::read_file(path);
  png_image im{};
  im.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&im, bytes.data(), bytes.size()))
    throw FormatError("cannot decode PNG " + path.string() + ": " + im.message);
  const bool color = (im.format & PNG_FORMAT_FLAG_COLOR) != 0;
  im.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  RawImage img;
  img.width = static_cast<int>(im.width);
  img.height = static_cast<int>(im.height);
  img.channels = color ? 3 : 1;
  img.samples.resize(PNG_IMAGE_SIZE(im));
  const png_color white{255, 255, 255};
  if (!png_image_finish_read(&im, &white, img.samples.data(), 0, nullptr)) {
    png_image_free(&im);
    throw FormatError("cannot decode PNG " + path.string() + ": " + im.message);
  }
  return img;
}

inline void write_png(const RawImage& img, const std::filesystem::path& path) {
  img.validate();
  png_image im{};
  im.version = PNG_IMAGE_VERSION;
  im.width = static_cast<png_uint_32>(img.width);
  im.height = static_cast<png_uint_32>(img.height);
  im.format = img.channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&im, path.string().c_str(), 0, img.samples.data(), 0, nullptr))
    throw IoError("cannot write PNG " + path.string() + ": " + im.message);
}

// Dispatches on file content: P5/P6 or PNG signature.
inline RawImage read_image(const std::filesystem::path& path) {
  const std::string head = detail::read_file(path);
  if (head.size() >= 8 && png_sig_cmp(reinterpret_cast<png_const_bytep>(head.data()), 0, 8) == 0)
    return read_png(path);
  if (head.size() >= 2 && head[0] == 'P') return decode_pnm(head);
  throw FormatError("unrecognized image format: " + path.string());
}

// Writes PNG for a .png extension, PGM/PPM otherwise.
inline void write_image(const RawImage& img, const std::filesystem::path& path) {
  if (path.extension() == ".png")
    write_png(img, path);
  else
    detail::write_file(path, encode_pnm(img));
}

// ---------------------------------------------------------- conversions

// C x H x W tensor in [0, 1].
inline Tensor to_tensor(const RawImage& img) {
  img.validate();
  Tensor t({img.channels, img.height, img.width});
  for (int c = 0; c < img.channels; ++c)
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width; ++x) t.at(c, y, x) = img.at(x, y, c) / 255.0f;
  return t;
}

// Clamps to [0, 1] and rounds to 8 bits; tensor must have 1 or 3 channels.
inline RawImage to_raw(const Tensor& t) {
  require_rank(t, 3, "to_raw");
  RawImage img(t.dim(2), t.dim(1), t.dim(0));
  for (int c = 0; c < img.channels; ++c)
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width; ++x)
        img.at(x, y, c) = static_cast<std::uint8_t>(std::lround(std::clamp(t.at(c, y, x), 0.0f, 1.0f) * 255.0f));
  return img;
}

/**
 * Bilinear resize with pixel-centre alignment (output pixel centre maps to
 * (x + 0.5) * W / w - 0.5 in the source, clamped to the border). Resizing
 * to the same size returns the input unchanged.
 */
inline Tensor resize_bilinear(const Tensor& img, int out_h, int out_w) {
  require_rank(img, 3, "resize_bilinear");
  if (out_h <= 0 || out_w <= 0) throw InvalidArgument("resize target must be positive");
  const int C = img.dim(0), H = img.dim(1), W = img.dim(2);
  if (H == out_h && W == out_w) return img;
  Tensor out({C, out_h, out_w});
  auto taps = [](int n_out, int n_in) {
    std::vector<std::pair<int, float>> t(static_cast<std::size_t>(n_out));
    const double scale = static_cast<double>(n_in) / n_out;
    for (int i = 0; i < n_out; ++i) {
      const double s = std::clamp((i + 0.5) * scale - 0.5, 0.0, static_cast<double>(n_in - 1));
      const int i0 = std::min(static_cast<int>(s), n_in - 1);
      t[static_cast<std::size_t>(i)] = {i0, static_cast<float>(s - i0)};
    }
    return t;
  };
  const auto ty = taps(out_h, H), tx = taps(out_w, W);
  for (int c = 0; c < C; ++c)
    for (int y = 0; y < out_h; ++y) {
      const auto [y0, fy] = ty[static_cast<std::size_t>(y)];
      const int y1 = std::min(y0 + 1, H - 1);
      for (int x = 0; x < out_w; ++x) {
        const auto [x0, fx] = tx[static_cast<std::size_t>(x)];
        const int x1 = std::min(x0 + 1, W - 1);
        const float top = img.at(c, y0, x0) * (1 - fx) + img.at(c, y0, x1) * fx;
        const float bot = img.at(c, y1, x0) * (1 - fx) + img.at(c, y1, x1) * fx;
        out.at(c, y, x) = top * (1 - fy) + bot * fy;
      }
    }
  return out;
}

// Nearest-neighbour resize (keeps binary images binary).
inline Tensor resize_nearest(const Tensor& img, int out_h, int out_w) {
  require_rank(img, 3, "resize_nearest");
  if (out_h <= 0 || out_w <= 0) throw InvalidArgument("resize target must be positive");
  const int C = img.dim(0), H = img.dim(1), W = img.dim(2);
  if (H == out_h && W == out_w) return img;
  Tensor out({C, out_h, out_w});
  for (int c = 0; c < C; ++c)
    for (int y = 0; y < out_h; ++y) {
      const int sy = std::min(H - 1, static_cast<int>((y + 0.5) * H / out_h));
      for (int x = 0; x < out_w; ++x)
        out.at(c, y, x) = img.at(c, sy, std::min(W - 1, static_cast<int>((x + 0.5) * W / out_w)));
    }
  return out;
}

// ITU-R 601 luma; single-channel input passes through.
inline Tensor to_grayscale(const Tensor& img) {
  require_rank(img, 3, "to_grayscale");
  if (img.dim(0) == 1) return img;
  if (img.dim(0) != 3) throw InvalidArgument("to_grayscale expects 1 or 3 channels, got " + shape_str(img.shape()));
  const int H = img.dim(1), W = img.dim(2);
  Tensor g({1, H, W});
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x)
      g.at(0, y, x) = 0.299f * img.at(0, y, x) + 0.587f * img.at(1, y, x) + 0.114f * img.at(2, y, x);
  return g;
}

inline Tensor to_grayscale(const RawImage& img) { return to_grayscale(to_tensor(img)); }

// Grayscale input is replicated into three channels.
inline Tensor to_rgb(const Tensor& img) {
  require_rank(img, 3, "to_rgb");
  if (img.dim(0) == 3) return img;
  if (img.dim(0) != 1) throw InvalidArgument("to_rgb expects 1 or 3 channels, got " + shape_str(img.shape()));
  Tensor out({3, img.dim(1), img.dim(2)});
  for (int c = 0; c < 3; ++c) std::copy(img.vec().begin(), img.vec().end(), out.data() + c * img.size());
  return out;
}

// Hexcone HSV, all components in [0, 1]; hue is angle / 360, 0 for grays.
inline Tensor rgb_to_hsv(const Tensor& rgb) {
  require_rank(rgb, 3, "rgb_to_hsv");
  if (rgb.dim(0) != 3) throw InvalidArgument("rgb_to_hsv needs a 3-channel image, got " + shape_str(rgb.shape()));
  const int H = rgb.dim(1), W = rgb.dim(2);
  Tensor out({3, H, W});
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      const float r = rgb.at(0, y, x), g = rgb.at(1, y, x), b = rgb.at(2, y, x);
      const float mx = std::max({r, g, b}), mn = std::min({r, g, b}), d = mx - mn;
      float h = 0;
      if (d > 0) {
        if (mx == r)
          h = std::fmod((g - b) / d + 6.0f, 6.0f);
        else if (mx == g)
          h = (b - r) / d + 2.0f;
        else
          h = (r - g) / d + 4.0f;
        h /= 6.0f;
        if (h >= 1.0f) h -= 1.0f;
      }
      out.at(0, y, x) = h;
      out.at(1, y, x) = mx > 0 ? d / mx : 0.0f;
      out.at(2, y, x) = mx;
    }
  return out;
}

inline Tensor rgb_to_hsv(const RawImage& img) {
  if (img.channels != 3) throw InvalidArgument("rgb_to_hsv needs a 3-channel image");
  return rgb_to_hsv(to_tensor(img));
}

inline Tensor hsv_to_rgb(const Tensor& hsv) {
  require_rank(hsv, 3, "hsv_to_rgb");
  if (hsv.dim(0) != 3) throw InvalidArgument("hsv_to_rgb needs a 3-channel image");
  const int H = hsv.dim(1), W = hsv.dim(2);
  Tensor out({3, H, W});
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      const float h6 = hsv.at(0, y, x) * 6.0f, s = hsv.at(1, y, x), v = hsv.at(2, y, x);
      const float c = v * s;
      const float xx = c * (1 - std::abs(std::fmod(h6, 2.0f) - 1));
      float r = 0, g = 0, b = 0;
      switch (static_cast<int>(h6) % 6) {
        case 0: r = c, g = xx; break;
        case 1: r = xx, g = c; break;
        case 2: g = c, b = xx; break;
        case 3: g = xx, b = c; break;
        case 4: r = xx, b = c; break;
        default: r = c, b = xx; break;
      }
      const float m = v - c;
      out.at(0, y, x) = r + m;
      out.at(1, y, x) = g + m;
      out.at(2, y, x) = b + m;
    }
  return out;
}

// ------------------------------------------------------------------ Otsu

/**
 * Threshold t in [0, 255] maximizing the between-class variance
 * w0 * w1 * (mu0 - mu1)^2 for classes {<= t} and {> t}. Ties, including
 * the all-degenerate constant histogram, resolve to the smallest t.
 */
inline int otsu_threshold(const std::array<std::uint64_t, 256>& hist) {
  double total = 0, sum = 0;
  for (int i = 0; i < 256; ++i) {
    total += static_cast<double>(hist[static_cast<std::size_t>(i)]);
    sum += static_cast<double>(i) * static_cast<double>(hist[static_cast<std::size_t>(i)]);
  }
  int best_t = 0;
  double best = -1;
  double w0 = 0, s0 = 0;
  for (int t = 0; t < 256; ++t) {
    w0 += static_cast<double>(hist[static_cast<std::size_t>(t)]);
    s0 += static_cast<double>(t) * static_cast<double>(hist[static_cast<std::size_t>(t)]);
    const double w1 = total - w0;
    double between = 0;
    if (w0 > 0 && w1 > 0) {
      const double d = s0 / w0 - (sum - s0) / w1;
      between = w0 * w1 * d * d;
    }
    if (between > best) {
      best = between;
      best_t = t;
    }
  }
  return best_t;
}

inline std::array<std::uint64_t, 256> gray_histogram(const Tensor& gray) {
  std::array<std::uint64_t, 256> h{};
  for (float v : gray.vec()) ++h[static_cast<std::size_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f))];
  return h;
}

// {0, 1} image: 1 where the 8-bit gray level exceeds the Otsu threshold.
// A constant image has no class split and maps to all zeros.
inline Tensor otsu_binarize(const Tensor& img) {
  const Tensor gray = to_grayscale(img);
  const auto hist = gray_histogram(gray);
  const bool constant = std::count_if(hist.begin(), hist.end(), [](auto c) { return c > 0; }) <= 1;
  Tensor out(gray.shape());
  if (constant) return out;
  const int t = otsu_threshold(hist);
  for (std::size_t i = 0; i < gray.size(); ++i)
    out[i] = std::lround(std::clamp(gray[i], 0.0f, 1.0f) * 255.0f) > t ? 1.0f : 0.0f;
  return out;
}

inline Tensor otsu_binarize(const RawImage& img) { return otsu_binarize(to_tensor(img)); }

// ------------------------------------------------------- integral image

// Summed-area table with I(x, y) = sum of v(i, j) over i <= x, j <= y.
class IntegralImage {
 public:
  explicit IntegralImage(const Tensor& gray) {
    if (gray.rank() == 3 && gray.dim(0) != 1) throw InvalidArgument("integral image needs one channel");
    if (gray.rank() != 2 && gray.rank() != 3) throw InvalidArgument("integral image needs H x W or 1 x H x W");
    h_ = gray.dim(gray.rank() - 2);
    w_ = gray.dim(gray.rank() - 1);
    s_.assign(static_cast<std::size_t>(w_ + 1) * (h_ + 1), 0.0);
    for (int y = 0; y < h_; ++y) {
      double row = 0;
      for (int x = 0; x < w_; ++x) {
        row += gray[static_cast<std::size_t>(y) * w_ + x];
        s_[idx(x + 1, y + 1)] = s_[idx(x + 1, y)] + row;
      }
    }
  }
  int width() const { return w_; }
  int height() const { return h_; }
  double at(int x, int y) const { return s_[idx(x + 1, y + 1)]; }
  // Sum over the half-open box [x0, x1) x [y0, y1), clipped to the image.
  double box(int x0, int y0, int x1, int y1) const {
    x0 = std::clamp(x0, 0, w_), x1 = std::clamp(x1, 0, w_);
    y0 = std::clamp(y0, 0, h_), y1 = std::clamp(y1, 0, h_);
    if (x1 <= x0 || y1 <= y0) return 0.0;
    return s_[idx(x1, y1)] - s_[idx(x0, y1)] - s_[idx(x1, y0)] + s_[idx(x0, y0)];
  }
  // Clipped area of the same box.
  int area(int x0, int y0, int x1, int y1) const {
    const int w = std::clamp(x1, 0, w_) - std::clamp(x0, 0, w_), h = std::clamp(y1, 0, h_) - std::clamp(y0, 0, h_);
    return w > 0 && h > 0 ? w * h : 0;
  }

 private:
  std::size_t idx(int x, int y) const { return static_cast<std::size_t>(y) * (w_ + 1) + x; }
  int w_ = 0, h_ = 0;
  std::vector<double> s_;
};

// H x W tensor of I(x, y) (float copy of the double table).
inline Tensor integral_image(const Tensor& gray) {
  IntegralImage ii(gray);
  Tensor out({ii.height(), ii.width()});
  for (int y = 0; y < ii.height(); ++y)
    for (int x = 0; x < ii.width(); ++x) out.at(y, x) = static_cast<float>(ii.at(x, y));
  return out;
}

// ---------------------------------------------------------- dense SURF

inline constexpr int kSurfScale = 2;
inline constexpr int kSurfChannels = 64;

namespace detail {

// Mean over the clipped box times the unclipped area, so a constant
// image gives exactly zero response even where the box leaves the image.
inline double haar_half(const IntegralImage& ii, int x0, int y0, int x1, int y1) {
  const int a = ii.area(x0, y0, x1, y1);
  return a > 0 ? ii.box(x0, y0, x1, y1) / a * ((x1 - x0) * (y1 - y0)) : 0.0;
}

inline void surf_descriptor(const IntegralImage& ii, double cx, double cy, float* out, std::size_t stride) {
  const int s = kSurfScale;
  const int win = 20 * s;  // 4 x 4 subregions of 5 x 5 samples, spacing s
  const int W = ii.width(), H = ii.height();
  // keep the window inside the image where it fits
  const double half = win / 2.0;
  cx = W >= win ? std::clamp(cx, half, W - half) : W / 2.0;
  cy = H >= win ? std::clamp(cy, half, H - half) : H / 2.0;
  const double sigma = 3.3 * s;
  double v[kSurfChannels] = {};
  for (int sy = 0; sy < 4; ++sy)
    for (int sx = 0; sx < 4; ++sx) {
      double* d = v + 4 * (sy * 4 + sx);
      for (int j = 0; j < 5; ++j)
        for (int i = 0; i < 5; ++i) {
          const double ox = -half + (sx * 5 + i + 0.5) * s, oy = -half + (sy * 5 + j + 0.5) * s;
          const int px = static_cast<int>(std::floor(cx + ox)), py = static_cast<int>(std::floor(cy + oy));
          // Haar wavelets of side 2s centred on (px, py)
          const double dx = haar_half(ii, px, py - s, px + s, py + s) - haar_half(ii, px - s, py - s, px, py + s);
          const double dy = haar_half(ii, px - s, py, px + s, py + s) - haar_half(ii, px - s, py - s, px + s, py);
          const double g = std::exp(-(ox * ox + oy * oy) / (2 * sigma * sigma));
          d[0] += g * dx;
          d[1] += g * std::abs(dx);
          d[2] += g * dy;
          d[3] += g * std::abs(dy);
        }
    }
  double norm = 0;
  for (double x : v) norm += x * x;
  norm = std::sqrt(norm);
  const bool zero = norm < 1e-9;
  for (int k = 0; k < kSurfChannels; ++k)
    out[static_cast<std::size_t>(k) * stride] = zero ? 0.0f : static_cast<float>(v[k] / norm);
}

}  // namespace detail

/**
 * Upright SURF descriptors at scale s = 2 (20s window) on a grid_h x
 * grid_w lattice of cell centres spanning the image. Each descriptor is
 * (sum dx, sum |dx|, sum dy, sum |dy|) over 4 x 4 subregions, Gaussian
 * weighted and L2-normalized; flat regions give the zero vector. Windows
 * are shifted inside the image where they fit and clipped otherwise.
 * Returns 64 x grid_h x grid_w with components in [-1, 1].
 */
inline Tensor dense_surf_grid(const Tensor& img, int grid_h, int grid_w) {
  if (grid_h <= 0 || grid_w <= 0) throw InvalidArgument("SURF grid must be positive");
  const IntegralImage ii(to_grayscale(img));
  Tensor out({kSurfChannels, grid_h, grid_w});
  const std::size_t plane = static_cast<std::size_t>(grid_h) * grid_w;
  const double sx = static_cast<double>(ii.width()) / grid_w, sy = static_cast<double>(ii.height()) / grid_h;
  for (int gy = 0; gy < grid_h; ++gy)
    for (int gx = 0; gx < grid_w; ++gx)
      detail::surf_descriptor(ii, (gx + 0.5) * sx, (gy + 0.5) * sy,
                              out.data() + static_cast<std::size_t>(gy) * grid_w + gx, plane);
  return out;
}

inline Tensor dense_surf_grid(const Tensor& img, int grid) { return dense_surf_grid(img, grid, grid); }
inline Tensor dense_surf_grid(const RawImage& img, int grid) { return dense_surf_grid(to_tensor(img), grid, grid); }

// Maps descriptor components from [-1, 1] into [0, 1].
inline Tensor surf_to_unit(Tensor s) {
  for (float& v : s.vec()) v = 0.5f * (v + 1.0f);
  return s;
}

// ------------------------------------------------------ representations

enum class Representation { G, RGB, HSV, B, S };

inline int channel_count(Representation r) {
  switch (r) {
    case Representation::G:
    case Representation::B: return 1;
    case Representation::RGB:
    case Representation::HSV: return 3;
    case Representation::S: return kSurfChannels;
  }
  return 0;
}

inline std::string to_string(Representation r) {
  switch (r) {
    case Representation::G: return "G";
    case Representation::RGB: return "RGB";
    case Representation::HSV: return "HSV";
    case Representation::B: return "B";
    case Representation::S: return "S";
  }
  return "?";
}

inline Representation parse_representation(const std::string& s) {
  if (s == "G") return Representation::G;
  if (s == "RGB" || s == "C") return Representation::RGB;
  if (s == "HSV" || s == "H") return Representation::HSV;
  if (s == "B") return Representation::B;
  if (s == "S") return Representation::S;
  throw InvalidArgument("unknown representation '" + s + "' (expected G, RGB, HSV, B or S)");
}

struct RepresentationSpec {
  std::vector<Representation> channels{Representation::G};
  int surf_grid = 227;

  void validate() const {
    if (channels.empty()) throw InvalidArgument("representation spec is empty");
    for (std::size_t i = 0; i < channels.size(); ++i)
      for (std::size_t j = i + 1; j < channels.size(); ++j)
        if (channels[i] == channels[j]) throw InvalidArgument("duplicate representation " + to_string(channels[i]));
    if (surf_grid <= 0) throw InvalidArgument("surf grid must be positive");
  }
  int total_channels() const {
    int n = 0;
    for (auto r : channels) n += channel_count(r);
    return n;
  }
  bool uses_surf() const { return std::find(channels.begin(), channels.end(), Representation::S) != channels.end(); }
  std::string str() const {
    std::string s;
    for (auto r : channels) s += (s.empty() ? "" : ",") + to_string(r);
    return s;
  }
  static RepresentationSpec parse(const std::string& text, int surf_grid = 227) {
    RepresentationSpec r;
    r.channels.clear();
    r.surf_grid = surf_grid;
    std::stringstream ss(text);
    for (std::string item; std::getline(ss, item, ',');)
      if (!item.empty()) r.channels.push_back(parse_representation(item));
    r.validate();
    return r;
  }
  bool operator==(const RepresentationSpec&) const = default;
};

inline Tensor concat_channels(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw InvalidArgument("nothing to concatenate");
  const int H = parts[0].dim(1), W = parts[0].dim(2);
  int C = 0;
  for (const auto& p : parts) {
    require_rank(p, 3, "concat_channels");
    if (p.dim(1) != H || p.dim(2) != W)
      throw InvalidArgument("channel blocks differ in size: " + shape_str(parts[0].shape()) + " vs " +
                            shape_str(p.shape()));
    C += p.dim(0);
  }
  Tensor out({C, H, W});
  float* dst = out.data();
  for (const auto& p : parts) dst = std::copy(p.vec().begin(), p.vec().end(), dst);
  return out;
}

/**
 * Pixel representations (everything except S) of a float image that is
 * already at network size. `surf` supplies the S block at the same size
 * when the spec includes S.
 */
inline Tensor pixel_representations(const Tensor& img, const RepresentationSpec& spec, const Tensor* surf = nullptr) {
  spec.validate();
  std::vector<Tensor> parts;
  for (auto r : spec.channels) switch (r) {
      case Representation::G: parts.push_back(to_grayscale(img)); break;
      case Representation::RGB: parts.push_back(to_rgb(img)); break;
      case Representation::HSV: parts.push_back(rgb_to_hsv(to_rgb(img))); break;
      case Representation::B: parts.push_back(otsu_binarize(img)); break;
      case Representation::S:
        if (!surf) throw InvalidArgument("representation S requested without a SURF block");
        parts.push_back(*surf);
        break;
    }
  return concat_channels(parts);
}

/**
 * All representations of `img` resized to out_h x out_w, stacked in spec
 * order. Pixel channels use bilinear resampling (nearest for B, after
 * binarizing the resized gray image); S is computed on the original image
 * at the spec's grid, mapped to [0, 1], then resized.
 */
inline Tensor stack_representations(const Tensor& img, const RepresentationSpec& spec, int out_h, int out_w) {
  spec.validate();
  const Tensor resized = resize_bilinear(img, out_h, out_w);
  Tensor surf;
  if (spec.uses_surf()) surf = resize_bilinear(surf_to_unit(dense_surf_grid(img, spec.surf_grid)), out_h, out_w);
  return pixel_representations(resized, spec, spec.uses_surf() ? &surf : nullptr);
}

inline Tensor stack_representations(const RawImage& img, const RepresentationSpec& spec, int out_h, int out_w) {
  return stack_representations(to_tensor(img), spec, out_h, out_w);
}

// --------------------------------------------------------- normalization

inline Tensor normalize(Tensor t, const std::vector<float>& channel_means) {
  require_rank(t, 3, "normalize");
  if (static_cast<int>(channel_means.size()) != t.dim(0))
    throw InvalidArgument("normalize: " + std::to_string(channel_means.size()) + " means for " +
                          std::to_string(t.dim(0)) + " channels");
  const std::size_t plane = static_cast<std::size_t>(t.dim(1)) * t.dim(2);
  for (int c = 0; c < t.dim(0); ++c) {
    float* p = t.data() + static_cast<std::size_t>(c) * plane;
    for (std::size_t i = 0; i < plane; ++i) p[i] -= channel_means[static_cast<std::size_t>(c)];
  }
  return t;
}

// Accumulates per-channel means over C x H x W tensors in a fixed order.
class ChannelMeanAccumulator {
 public:
  void add(const Tensor& t) {
    require_rank(t, 3, "channel mean");
    if (sums_.empty()) sums_.assign(static_cast<std::size_t>(t.dim(0)), 0.0);
    if (static_cast<int>(sums_.size()) != t.dim(0)) throw InvalidArgument("channel count changed between images");
    const std::size_t plane = static_cast<std::size_t>(t.dim(1)) * t.dim(2);
    for (std::size_t c = 0; c < sums_.size(); ++c) {
      double s = 0;
      const float* p = t.data() + c * plane;
      for (std::size_t i = 0; i < plane; ++i) s += p[i];
      sums_[c] += s;
    }
    count_ += plane;
  }
  std::vector<float> means() const {
    if (count_ == 0) throw InvalidArgument("no images for channel means");
    std::vector<float> m(sums_.size());
    for (std::size_t c = 0; c < m.size(); ++c) m[c] = static_cast<float>(sums_[c] / static_cast<double>(count_));
    return m;
  }

 private:
  std::vector<double> sums_;
  std::size_t count_ = 0;
};

// ---------------------------------------------------------------- manifest

struct ManifestEntry {
  std::string path;  // as written; resolved against the manifest directory
  int label = 0;
  std::string split;  // train, val or test
  bool operator==(const ManifestEntry&) const = default;
};

struct Manifest {
  std::filesystem::path root;
  std::vector<ManifestEntry> entries;

  std::filesystem::path resolve(const ManifestEntry& e) const {
    const std::filesystem::path p(e.path);
    return p.is_absolute() ? p : root / p;
  }
  std::vector<ManifestEntry> split(const std::string& name) const {
    std::vector<ManifestEntry> out;
    for (const auto& e : entries)
      if (e.split == name) out.push_back(e);
    return out;
  }
  int num_classes() const {
    int m = -1;
    for (const auto& e : entries) m = std::max(m, e.label);
    return m + 1;
  }
};

inline Manifest parse_manifest(const std::string& text, const std::filesystem::path& root = {}) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw FormatError("empty manifest");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "path,label,split") throw FormatError("manifest header must be 'path,label,split', got '" + line + "'");
  Manifest m{root, {}};
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto c2 = line.rfind(',');
    const auto c1 = c2 == std::string::npos || c2 == 0 ? std::string::npos : line.rfind(',', c2 - 1);
    if (c1 == std::string::npos) throw FormatError("manifest line " + std::to_string(lineno) + ": expected 3 fields");
    ManifestEntry e{line.substr(0, c1), 0, line.substr(c2 + 1)};
    const std::string label = line.substr(c1 + 1, c2 - c1 - 1);
    if (label.empty() || label.find_first_not_of("0123456789") != std::string::npos)
      throw FormatError("manifest line " + std::to_string(lineno) + ": bad label '" + label + "'");
    e.label = std::stoi(label);
    if (e.split != "train" && e.split != "val" && e.split != "test")
      throw FormatError("manifest line " + std::to_string(lineno) + ": unknown split '" + e.split + "'");
    m.entries.push_back(std::move(e));
  }
  return m;
}

inline Manifest read_manifest(const std::filesystem::path& path) {
  return parse_manifest(detail::read_file(path), path.parent_path());
}

inline std::string format_manifest(const std::vector<ManifestEntry>& entries) {
  std::string out = "path,label,split\n";
  for (const auto& e : entries) out += e.path + "," + std::to_string(e.label) + "," + e.split + "\n";
  return out;
}

inline void write_manifest(const std::vector<ManifestEntry>& entries, const std::filesystem::path& path) {
  detail::write_file(path, format_manifest(entries));
}

}  // namespace docgrid

#endif  // DOCGRID_IMAGING_HPP
