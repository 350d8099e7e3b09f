#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "fisum/memory.hpp"
#include "fisum/semiring.hpp"

namespace fisum {

using GridPoint = std::vector<std::size_t>;

/// Extents of an order-p rectangular grid, row-major (last axis fastest).
class GridShape {
 public:
  GridShape() = default;
  explicit GridShape(std::vector<std::size_t> extents);
  GridShape(std::initializer_list<std::size_t> extents)
      : GridShape(std::vector<std::size_t>(extents)) {}

  std::size_t order() const { return extents_.size(); }
  std::size_t extent(std::size_t axis) const { return extents_[axis]; }
  const std::vector<std::size_t>& extents() const { return extents_; }
  /// Distance in elements between neighbours along `axis`.
  std::size_t stride(std::size_t axis) const { return strides_[axis]; }
  std::size_t size() const { return size_; }

  std::size_t offset(std::span<const std::size_t> point) const;
  GridPoint point(std::size_t offset) const;
  bool contains(std::span<const std::size_t> point) const;

  bool operator==(const GridShape& other) const { return extents_ == other.extents_; }

 private:
  std::vector<std::size_t> extents_;
  std::vector<std::size_t> strides_;
  std::size_t size_ = 0;
};

/// Dense grid of d-channel feature vectors, channels-last.
class DataTensor {
 public:
  DataTensor() = default;
  DataTensor(GridShape shape, std::size_t channels);
  /// Takes ownership of `values`; validates the count and finiteness.
  DataTensor(GridShape shape, std::size_t channels, std::vector<double> values);

  const GridShape& shape() const { return shape_; }
  std::size_t channels() const { return channels_; }
  std::size_t points() const { return shape_.size(); }

  /// The d channel values at linear grid offset `point`.
  std::span<const double> at(std::size_t point) const {
    return {values_.data() + point * channels_, channels_};
  }
  std::span<double> at(std::size_t point) { return {values_.data() + point * channels_, channels_}; }

  double& operator()(std::size_t point, std::size_t channel) {
    return values_[point * channels_ + channel];
  }
  double operator()(std::size_t point, std::size_t channel) const {
    return values_[point * channels_ + channel];
  }

  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }

  bool operator==(const DataTensor& other) const = default;

 private:
  GridShape shape_;
  std::size_t channels_ = 0;
  Buffer values_;
};

/// Dense grid of semiring values, one per point.
class ScalarField {
 public:
  ScalarField() = default;
  /// Field filled with the semiring zero.
  ScalarField(GridShape shape, SemiringTag tag);
  ScalarField(GridShape shape, SemiringTag tag, Value fill);
  /// Validates count and that every value is legal for `tag`.
  ScalarField(GridShape shape, SemiringTag tag, std::span<const double> values);

  const GridShape& shape() const { return shape_; }
  SemiringTag tag() const { return tag_; }
  std::size_t size() const { return values_.size(); }

  Value& operator[](std::size_t i) { return values_[i]; }
  Value operator[](std::size_t i) const { return values_[i]; }
  Value& at(std::span<const std::size_t> point) { return values_[shape_.offset(point)]; }
  Value at(std::span<const std::size_t> point) const { return values_[shape_.offset(point)]; }

  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }

  bool operator==(const ScalarField& other) const = default;

 private:
  GridShape shape_;
  SemiringTag tag_ = SemiringTag::Real;
  Buffer values_;
};

/// ⊕-fold of all entries. Real fields use pairwise summation.
Value field_reduce(const ScalarField& field);

/// Bitwise comparison of two fields (distinguishes -0.0 from 0.0).
bool bit_equal(const ScalarField& a, const ScalarField& b);

}  // namespace fisum
