#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "ddrppg/core/error.hpp"

namespace ddrppg {

/// Dense row-major array of fixed rank. Value semantics; the storage is a
/// std::vector so copies are deep.
template <class T, std::size_t Rank>
class Array {
 public:
  using value_type = T;
  using Shape = std::array<std::size_t, Rank>;

  Array() { shape_.fill(0); }
  explicit Array(const Shape& shape, T fill = T{}) : shape_(shape), data_(count(shape), fill) {}
  Array(const Shape& shape, std::vector<T> data) : shape_(shape), data_(std::move(data)) {
    require(data_.size() == count(shape_), ErrorCode::shape_mismatch, "array data does not match shape");
  }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t dim(std::size_t i) const noexcept { return shape_[i]; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  T* data() noexcept { return data_.data(); }
  const T* data() const noexcept { return data_.data(); }
  std::span<T> values() noexcept { return data_; }
  std::span<const T> values() const noexcept { return data_; }
  std::vector<T>& storage() noexcept { return data_; }
  const std::vector<T>& storage() const noexcept { return data_; }

  T& operator[](std::size_t i) noexcept { return data_[i]; }
  const T& operator[](std::size_t i) const noexcept { return data_[i]; }

  template <class... I>
  T& operator()(I... idx) noexcept {
    static_assert(sizeof...(I) == Rank);
    return data_[offset({static_cast<std::size_t>(idx)...})];
  }
  template <class... I>
  const T& operator()(I... idx) const noexcept {
    static_assert(sizeof...(I) == Rank);
    return data_[offset({static_cast<std::size_t>(idx)...})];
  }

  std::size_t offset(const Shape& idx) const noexcept {
    std::size_t o = 0;
    for (std::size_t d = 0; d < Rank; ++d) o = o * shape_[d] + idx[d];
    return o;
  }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  bool same_shape(const Array& other) const noexcept { return shape_ == other.shape_; }

  Array& operator+=(const Array& o) {
    check_same(o, "+=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
    return *this;
  }
  Array& operator-=(const Array& o) {
    check_same(o, "-=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
    return *this;
  }
  Array& operator*=(T s) {
    for (auto& v : data_) v *= s;
    return *this;
  }

  friend Array operator+(Array a, const Array& b) { return a += b; }
  friend Array operator-(Array a, const Array& b) { return a -= b; }
  friend Array operator*(Array a, T s) { return a *= s; }
  friend Array operator*(T s, Array a) { return a *= s; }

  friend bool operator==(const Array& a, const Array& b) { return a.shape_ == b.shape_ && a.data_ == b.data_; }

  static std::size_t count(const Shape& s) {
    return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
  }

  std::string shape_string() const {
    std::string s = "(";
    for (std::size_t d = 0; d < Rank; ++d) {
      if (d) s += ",";
      s += std::to_string(shape_[d]);
    }
    return s + ")";
  }

 private:
  void check_same(const Array& o, const char* op) const {
    require(shape_ == o.shape_, ErrorCode::shape_mismatch,
            std::string("operator") + op + " on " + shape_string() + " vs " + o.shape_string());
  }

  Shape shape_;
  std::vector<T> data_;
};

/// Feature volume laid out as (channels, T, H, W).
template <class T>
class Volume : public Array<T, 4> {
 public:
  using Base = Array<T, 4>;
  using Base::Base;
  Volume() = default;
  Volume(std::size_t c, std::size_t t, std::size_t h, std::size_t w, T fill = T{}) : Base({c, t, h, w}, fill) {}
  explicit Volume(Base a) : Base(std::move(a)) {}

  std::size_t channels() const noexcept { return this->dim(0); }
  std::size_t frames() const noexcept { return this->dim(1); }
  std::size_t height() const noexcept { return this->dim(2); }
  std::size_t width() const noexcept { return this->dim(3); }
  std::size_t plane() const noexcept { return this->dim(1) * this->dim(2) * this->dim(3); }

  template <class U>
  Volume<U> cast() const {
    Volume<U> out(channels(), frames(), height(), width());
    for (std::size_t i = 0; i < this->size(); ++i) out[i] = static_cast<U>((*this)[i]);
    return out;
  }
};

/// Convolution kernel laid out as (out, in, kt, kh, kw).
template <class T>
class Kernel : public Array<T, 5> {
 public:
  using Base = Array<T, 5>;
  using Base::Base;
  Kernel() = default;
  Kernel(std::size_t out, std::size_t in, std::size_t kt, std::size_t kh, std::size_t kw, T fill = T{})
      : Base({out, in, kt, kh, kw}, fill) {}
  explicit Kernel(Base a) : Base(std::move(a)) {}

  std::size_t out_channels() const noexcept { return this->dim(0); }
  std::size_t in_channels() const noexcept { return this->dim(1); }
  std::size_t kt() const noexcept { return this->dim(2); }
  std::size_t kh() const noexcept { return this->dim(3); }
  std::size_t kw() const noexcept { return this->dim(4); }
  std::size_t taps() const noexcept { return kt() * kh() * kw(); }

  template <class U>
  Kernel<U> cast() const {
    Kernel<U> out(out_channels(), in_channels(), kt(), kh(), kw());
    for (std::size_t i = 0; i < this->size(); ++i) out[i] = static_cast<U>((*this)[i]);
    return out;
  }
};

template <class T>
using Vector = Array<T, 1>;

template <class T, std::size_t R>
T max_abs_diff(const Array<T, R>& a, const Array<T, R>& b) {
  require(a.same_shape(b), ErrorCode::shape_mismatch, "max_abs_diff shape mismatch");
  T m{};
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, static_cast<T>(std::abs(a[i] - b[i])));
  return m;
}

template <class T, std::size_t R>
bool all_finite(const Array<T, R>& a) {
  return std::all_of(a.values().begin(), a.values().end(), [](T v) { return std::isfinite(v); });
}

}  // namespace ddrppg
