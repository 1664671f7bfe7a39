// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "hsnet/error.hpp"

namespace hsnet {

using Shape = std::vector<std::size_t>;

enum class DType : std::uint8_t { kFloat32 = 0, kFloat64 = 1 };

template <typename T>
constexpr DType dtype_of();
template <>
constexpr DType dtype_of<float>() { return DType::kFloat32; }
template <>
constexpr DType dtype_of<double>() { return DType::kFloat64; }

inline std::size_t shape_size(const Shape& dims) {
  return std::accumulate(dims.begin(), dims.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& dims);

// Dense row-major array. A default-constructed tensor is an empty
// placeholder (rank 0); every tensor built from a shape has rank >= 1 and
// positive extents.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;

  explicit Tensor(Shape dims, T fill = T{}) : dims_(std::move(dims)) {
    validate();
    data_.assign(shape_size(dims_), fill);
  }

  Tensor(Shape dims, std::vector<T> data) : dims_(std::move(dims)), data_(std::move(data)) {
    validate();
    if (data_.size() != shape_size(dims_)) {
      throw Error(ErrorCode::kInvalidShape, "buffer of " + std::to_string(data_.size()) +
                                                " elements does not fit " + shape_string(dims_));
    }
  }

  static Tensor zeros(Shape dims) { return Tensor(std::move(dims), T{0}); }
  static Tensor ones(Shape dims) { return Tensor(std::move(dims), T{1}); }

  const Shape& dims() const noexcept { return dims_; }
  std::size_t rank() const noexcept { return dims_.size(); }
  std::size_t dim(std::size_t axis) const { return dims_.at(axis); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return dims_.empty(); }

  T* data() noexcept { return data_.data(); }
  const T* data() const noexcept { return data_.data(); }
  std::span<T> values() noexcept { return data_; }
  std::span<const T> values() const noexcept { return data_; }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  // Row-major offset: the last index varies fastest.
  std::size_t offset(std::span<const std::size_t> index) const {
    if (index.size() != dims_.size()) {
      throw Error(ErrorCode::kInvalidShape, "index rank mismatch");
    }
    std::size_t off = 0;
    for (std::size_t a = 0; a < dims_.size(); ++a) {
      if (index[a] >= dims_[a]) throw Error(ErrorCode::kInvalidShape, "index out of range");
      off = off * dims_[a] + index[a];
    }
    return off;
  }

  template <typename... I>
  T& operator()(I... idx) {
    return data_[unchecked_offset({static_cast<std::size_t>(idx)...})];
  }
  template <typename... I>
  const T& operator()(I... idx) const {
    return data_[unchecked_offset({static_cast<std::size_t>(idx)...})];
  }

  Tensor reshaped(Shape dims) const {
    return Tensor(std::move(dims), data_);
  }

  template <typename U>
  Tensor<U> cast() const {
    std::vector<U> out(data_.begin(), data_.end());
    return Tensor<U>(dims_, std::move(out));
  }

  bool operator==(const Tensor& other) const = default;

 private:
  void validate() const {
    if (dims_.empty()) throw Error(ErrorCode::kInvalidShape, "tensor rank must be >= 1");
    for (auto d : dims_) {
      if (d == 0) throw Error(ErrorCode::kInvalidShape, "zero extent in " + shape_string(dims_));
    }
  }

  std::size_t unchecked_offset(std::initializer_list<std::size_t> idx) const {
    std::size_t off = 0;
    std::size_t a = 0;
    for (auto i : idx) off = off * dims_[a++] + i;
    return off;
  }

  Shape dims_;
  std::vector<T> data_;
};

template <typename T>
void require_rank(const Tensor<T>& t, std::size_t rank, const char* what) {
  if (t.rank() != rank) {
    throw Error(ErrorCode::kInvalidShape, std::string(what) + ": expected rank " +
                                              std::to_string(rank) + ", got " + shape_string(t.dims()));
  }
}

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* what) {
  if (a.dims() != b.dims()) {
    throw Error(ErrorCode::kInvalidShape,
                std::string(what) + ": " + shape_string(a.dims()) + " vs " + shape_string(b.dims()));
  }
}

}  // namespace hsnet
