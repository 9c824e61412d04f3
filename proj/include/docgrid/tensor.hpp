#ifndef DOCGRID_TENSOR_HPP
#define DOCGRID_TENSOR_HPP

#include <algorithm>
#include <cstddef>
#include <cstring>
#include <initializer_list>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "docgrid/error.hpp"

namespace docgrid {

using Shape = std::vector<int>;

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) os << 'x';
    os << s[i];
  }
  os << ']';
  return os.str();
}

inline std::size_t shape_numel(const Shape& s) {
  std::size_t n = 1;
  for (int d : s) {
    if (d <= 0) throw InvalidArgument("non-positive dimension in shape " + shape_str(s));
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

/**
 * Dense row-major float32 tensor. Images use NCHW; a single image is often
 * carried as CHW (rank 3).
 */
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, float fill = 0.0f)
      : shape_(std::move(shape)), data_(shape_numel(shape_), fill) {}
  Tensor(Shape shape, std::vector<float> data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != shape_numel(shape_))
      throw InvalidArgument("data length " + std::to_string(data_.size()) +
                            " does not match shape " + shape_str(shape_));
  }

  const Shape& shape() const noexcept { return shape_; }
  int rank() const noexcept { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_.at(static_cast<std::size_t>(i)); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  float* data() noexcept { return data_.data(); }
  const float* data() const noexcept { return data_.data(); }
  std::span<float> span() noexcept { return data_; }
  std::span<const float> span() const noexcept { return data_; }
  std::vector<float>& vec() noexcept { return data_; }
  const std::vector<float>& vec() const noexcept { return data_; }

  float& operator[](std::size_t i) noexcept { return data_[i]; }
  float operator[](std::size_t i) const noexcept { return data_[i]; }

  // NCHW element access.
  float& at(int n, int c, int h, int w) noexcept { return data_[offset4(n, c, h, w)]; }
  float at(int n, int c, int h, int w) const noexcept { return data_[offset4(n, c, h, w)]; }
  // CHW element access for rank-3 tensors.
  float& at(int c, int h, int w) noexcept { return data_[offset3(c, h, w)]; }
  float at(int c, int h, int w) const noexcept { return data_[offset3(c, h, w)]; }
  float& at(int r, int c) noexcept { return data_[static_cast<std::size_t>(r) * shape_[1] + c]; }
  float at(int r, int c) const noexcept { return data_[static_cast<std::size_t>(r) * shape_[1] + c]; }

  Tensor reshaped(Shape s) const& {
    if (shape_numel(s) != data_.size())
      throw InvalidArgument("cannot reshape " + shape_str(shape_) + " to " + shape_str(s));
    return Tensor(std::move(s), data_);
  }
  Tensor reshaped(Shape s) && {
    if (shape_numel(s) != data_.size())
      throw InvalidArgument("cannot reshape " + shape_str(shape_) + " to " + shape_str(s));
    Tensor t;
    t.shape_ = std::move(s);
    t.data_ = std::move(data_);
    return t;
  }

  void fill(float v) { std::fill(data_.begin(), data_.end(), v); }

  bool operator==(const Tensor& o) const = default;

 private:
  std::size_t offset4(int n, int c, int h, int w) const noexcept {
    return ((static_cast<std::size_t>(n) * shape_[1] + c) * shape_[2] + h) * shape_[3] + w;
  }
  std::size_t offset3(int c, int h, int w) const noexcept {
    return (static_cast<std::size_t>(c) * shape_[1] + h) * shape_[2] + w;
  }

  Shape shape_;
  std::vector<float> data_;
};

// Bitwise equality, including NaN payloads and signed zeros.
inline bool bit_identical(const Tensor& a, const Tensor& b) {
  return a.shape() == b.shape() &&
         std::equal(a.vec().begin(), a.vec().end(), b.vec().begin(), [](float x, float y) {
           return std::memcmp(&x, &y, sizeof(float)) == 0;
         });
}

inline void require_rank(const Tensor& t, int r, const char* what) {
  if (t.rank() != r)
    throw InvalidArgument(std::string(what) + ": expected rank " + std::to_string(r) + ", got " +
                          shape_str(t.shape()));
}

// Slice image n out of an NCHW batch as CHW.
inline Tensor batch_item(const Tensor& batch, int n) {
  require_rank(batch, 4, "batch_item");
  const std::size_t per = batch.size() / static_cast<std::size_t>(batch.dim(0));
  std::vector<float> d(batch.vec().begin() + static_cast<std::ptrdiff_t>(per * n),
                       batch.vec().begin() + static_cast<std::ptrdiff_t>(per * (n + 1)));
  return Tensor({batch.dim(1), batch.dim(2), batch.dim(3)}, std::move(d));
}

// Stack equally shaped CHW tensors into NCHW.
inline Tensor stack_batch(std::span<const Tensor> items) {
  if (items.empty()) throw InvalidArgument("stack_batch: empty");
  const Shape& s = items.front().shape();
  require_rank(items.front(), 3, "stack_batch");
  Tensor out({static_cast<int>(items.size()), s[0], s[1], s[2]});
  const std::size_t per = items.front().size();
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (items[i].shape() != s)
      throw InvalidArgument("stack_batch: mixed shapes " + shape_str(s) + " and " +
                            shape_str(items[i].shape()));
    std::copy(items[i].vec().begin(), items[i].vec().end(), out.vec().begin() + static_cast<std::ptrdiff_t>(per * i));
  }
  return out;
}

}  // namespace docgrid

#endif  // DOCGRID_TENSOR_HPP
