#pragma once

#include <cassert>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "eegnet/error.hpp"

namespace eegnet {

inline std::string shape_str(const std::vector<std::int64_t>& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ')';
  return os.str();
}

inline std::int64_t shape_numel(const std::vector<std::int64_t>& shape) {
  std::int64_t n = 1;
  for (std::int64_t e : shape) {
    if (e < 0) throw ShapeError("negative extent in shape " + shape_str(shape));
    n *= e;
  }
  return n;
}

// Dense row-major tensor. Rank is dynamic; indexing is unchecked in release
// builds because the conv/pool kernels sit on raw pointers anyway and the
// operator() forms are for tests and glue code.
template <class Real>
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<std::int64_t> shape, Real fill = Real(0))
      : shape_(std::move(shape)),
        data_(static_cast<std::size_t>(shape_numel(shape_)), fill) {}

  static Tensor from(std::vector<std::int64_t> shape, std::vector<Real> data) {
    if (shape_numel(shape) != static_cast<std::int64_t>(data.size())) {
      throw ShapeError("data length does not match shape " + shape_str(shape));
    }
    Tensor t;
    t.shape_ = std::move(shape);
    t.data_ = std::move(data);
    return t;
  }

  const std::vector<std::int64_t>& shape() const { return shape_; }
  std::int64_t rank() const { return static_cast<std::int64_t>(shape_.size()); }
  std::int64_t extent(std::int64_t axis) const {
    return shape_[static_cast<std::size_t>(axis)];
  }
  std::int64_t size() const { return static_cast<std::int64_t>(data_.size()); }
  bool empty() const { return data_.empty(); }

  Real* data() { return data_.data(); }
  const Real* data() const { return data_.data(); }
  std::vector<Real>& storage() { return data_; }
  const std::vector<Real>& storage() const { return data_; }

  Real& operator[](std::int64_t i) {
    assert(i >= 0 && i < size());
    return data_[static_cast<std::size_t>(i)];
  }
  const Real& operator[](std::int64_t i) const {
    assert(i >= 0 && i < size());
    return data_[static_cast<std::size_t>(i)];
  }

  Real& operator()(std::int64_t i) { return (*this)[offset({i})]; }
  Real& operator()(std::int64_t i, std::int64_t j) {
    return (*this)[offset({i, j})];
  }
  Real& operator()(std::int64_t i, std::int64_t j, std::int64_t k) {
    return (*this)[offset({i, j, k})];
  }
  Real& operator()(std::int64_t i, std::int64_t j, std::int64_t k,
                   std::int64_t l) {
    return (*this)[offset({i, j, k, l})];
  }
  const Real& operator()(std::int64_t i) const { return (*this)[offset({i})]; }
  const Real& operator()(std::int64_t i, std::int64_t j) const {
    return (*this)[offset({i, j})];
  }
  const Real& operator()(std::int64_t i, std::int64_t j, std::int64_t k) const {
    return (*this)[offset({i, j, k})];
  }
  const Real& operator()(std::int64_t i, std::int64_t j, std::int64_t k,
                         std::int64_t l) const {
    return (*this)[offset({i, j, k, l})];
  }

  // Same storage, new extents. Element count must match.
  Tensor reshaped(std::vector<std::int64_t> shape) const {
    if (shape_numel(shape) != size()) {
      throw ShapeError("reshape from " + shape_str(shape_) + " to " +
                       shape_str(shape) + " changes element count");
    }
    Tensor t;
    t.shape_ = std::move(shape);
    t.data_ = data_;
    return t;
  }

  void fill(Real v) { std::fill(data_.begin(), data_.end(), v); }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  bool all_finite() const {
    for (Real v : data_) {
      if (!std::isfinite(static_cast<double>(v))) return false;
    }
    return true;
  }

 private:
  std::int64_t offset(std::initializer_list<std::int64_t> idx) const {
    assert(static_cast<std::int64_t>(idx.size()) == rank());
    std::int64_t off = 0;
    std::size_t axis = 0;
    for (std::int64_t i : idx) {
      assert(i >= 0 && i < shape_[axis]);
      off = off * shape_[axis] + i;
      ++axis;
    }
    return off;
  }

  std::vector<std::int64_t> shape_;
  std::vector<Real> data_;
};

template <class To, class From>
Tensor<To> tensor_cast(const Tensor<From>& src) {
  Tensor<To> out(src.shape());
  const From* s = src.data();
  To* d = out.data();
  for (std::int64_t i = 0; i < src.size(); ++i) {
    d[i] = static_cast<To>(s[i]);
  }
  return out;
}

}  // namespace eegnet
