#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "sprune/errors.hpp"

namespace sprune {

using Index = std::int64_t;
using Shape = std::vector<Index>;

inline Index shape_numel(const Shape& s) {
  Index n = 1;
  for (Index d : s) n *= d;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
  os << "]";
  return os.str();
}

/// Dense row-major tensor of arbitrary rank. Arithmetic goes through Eigen
/// maps; the tensor itself only owns storage and shape. Storage is kept at
/// Eigen's preferred alignment so vectorized code paths do not depend on
/// where the allocator happened to place a buffer (bit-for-bit determinism
/// across runs relies on this).
template <typename Scalar>
class Tensor {
 public:
  using Storage = std::vector<Scalar, Eigen::aligned_allocator<Scalar>>;
  using MatrixMap = Eigen::Map<
      Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
  using ConstMatrixMap = Eigen::Map<const Eigen::Matrix<Scalar, Eigen::Dynamic,
                                                        Eigen::Dynamic,
                                                        Eigen::RowMajor>>;
  using ArrayMap = Eigen::Map<Eigen::Array<Scalar, Eigen::Dynamic, 1>>;
  using ConstArrayMap = Eigen::Map<const Eigen::Array<Scalar, Eigen::Dynamic, 1>>;

  Tensor() = default;

  explicit Tensor(Shape shape)
      : shape_(std::move(shape)), data_(static_cast<std::size_t>(shape_numel(shape_)), Scalar(0)) {
    check_shape();
  }

  Tensor(Shape shape, std::vector<Scalar> data)
      : shape_(std::move(shape)), data_(data.begin(), data.end()) {
    check_shape();
    if (shape_numel(shape_) != static_cast<Index>(data_.size()))
      throw DimensionError("tensor data size " + std::to_string(data_.size()) +
                           " does not match shape " + shape_str(shape_));
  }


  static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }

  static Tensor full(Shape shape, Scalar v) {
    Tensor t(std::move(shape));
    t.fill(v);
    return t;
  }

  static Tensor scalar(Scalar v) {
    Tensor t(Shape{1});
    t[0] = v;
    return t;
  }

  const Shape& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  Index dim(int axis) const { return shape_.at(static_cast<std::size_t>(axis)); }
  Index size() const { return static_cast<Index>(data_.size()); }
  bool empty() const { return data_.empty(); }

  Scalar* data() { return data_.data(); }
  const Scalar* data() const { return data_.data(); }
  Storage& storage() { return data_; }
  const Storage& storage() const { return data_; }

  Scalar& operator[](Index i) { return data_[static_cast<std::size_t>(i)]; }
  Scalar operator[](Index i) const { return data_[static_cast<std::size_t>(i)]; }

  Scalar& operator()(Index i, Index j) {
    return data_[static_cast<std::size_t>(i * shape_[1] + j)];
  }
  Scalar operator()(Index i, Index j) const {
    return data_[static_cast<std::size_t>(i * shape_[1] + j)];
  }
  Scalar& operator()(Index b, Index c, Index h, Index w) {
    return data_[static_cast<std::size_t>(((b * shape_[1] + c) * shape_[2] + h) * shape_[3] + w)];
  }
  Scalar operator()(Index b, Index c, Index h, Index w) const {
    return data_[static_cast<std::size_t>(((b * shape_[1] + c) * shape_[2] + h) * shape_[3] + w)];
  }

  void fill(Scalar v) { std::fill(data_.begin(), data_.end(), v); }

  /// Same storage reinterpreted under a new shape with equal element count.
  Tensor reshaped(Shape shape) const {
    if (shape_numel(shape) != size())
      throw DimensionError("reshape " + shape_str(shape_) + " -> " + shape_str(shape) +
                           " changes element count");
    Tensor out;
    out.shape_ = std::move(shape);
    out.data_ = data_;
    return out;
  }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  bool all_finite() const {
    for (Scalar v : data_)
      if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
  }

  /// 2-D Eigen view; the tensor must hold exactly rows*cols elements.
  MatrixMap mat(Index rows, Index cols) {
    view_check(rows * cols);
    return MatrixMap(data_.data(), rows, cols);
  }
  ConstMatrixMap mat(Index rows, Index cols) const {
    view_check(rows * cols);
    return ConstMatrixMap(data_.data(), rows, cols);
  }

  ArrayMap array() { return ArrayMap(data_.data(), static_cast<Index>(data_.size())); }
  ConstArrayMap array() const {
    return ConstArrayMap(data_.data(), static_cast<Index>(data_.size()));
  }

  template <typename Other>
  Tensor<Other> cast() const {
    Tensor<Other> out(shape_);
    for (std::size_t i = 0; i < data_.size(); ++i)
      out[static_cast<Index>(i)] = static_cast<Other>(data_[i]);
    return out;
  }

 private:
  void check_shape() const {
    for (Index d : shape_)
      if (d <= 0) throw DimensionError("non-positive dimension in shape " + shape_str(shape_));
  }
  void view_check(Index n) const {
    if (n != size())
      throw DimensionError("view of " + std::to_string(n) + " elements over tensor " +
                           shape_str(shape_));
  }

  Shape shape_;
  Storage data_;
};

}  // namespace sprune
