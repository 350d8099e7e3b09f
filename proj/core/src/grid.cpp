#include "fisum/grid.hpp"

#include <bit>
#include <cmath>
#include <limits>
#include <string>

#include "fisum/error.hpp"

namespace fisum {

GridShape::GridShape(std::vector<std::size_t> extents) : extents_(std::move(extents)) {
  if (extents_.empty()) throw ValidationError("grid shape needs at least one axis");
  strides_.assign(extents_.size(), 1);
  size_ = 1;
  for (std::size_t k = extents_.size(); k-- > 0;) {
    if (extents_[k] == 0) {
      throw ValidationError("grid extent along axis " + std::to_string(k) + " is zero");
    }
    strides_[k] = size_;
    if (size_ > std::numeric_limits<std::size_t>::max() / extents_[k]) {
      throw ValidationError("grid shape is too large to address");
    }
    size_ *= extents_[k];
  }
}

std::size_t GridShape::offset(std::span<const std::size_t> point) const {
  std::size_t off = 0;
  for (std::size_t k = 0; k < extents_.size(); ++k) off += point[k] * strides_[k];
  return off;
}

GridPoint GridShape::point(std::size_t offset) const {
  GridPoint p(extents_.size());
  for (std::size_t k = 0; k < extents_.size(); ++k) {
    p[k] = offset / strides_[k];
    offset %= strides_[k];
  }
  return p;
}

bool GridShape::contains(std::span<const std::size_t> point) const {
  if (point.size() != extents_.size()) return false;
  for (std::size_t k = 0; k < extents_.size(); ++k) {
    if (point[k] >= extents_[k]) return false;
  }
  return true;
}

DataTensor::DataTensor(GridShape shape, std::size_t channels)
    : shape_(std::move(shape)), channels_(channels) {
  if (channels_ == 0) throw ValidationError("tensor needs at least one channel");
  values_.assign(shape_.size() * channels_, 0.0);
}

DataTensor::DataTensor(GridShape shape, std::size_t channels, std::vector<double> values)
    : shape_(std::move(shape)), channels_(channels) {
  if (channels_ == 0) throw ValidationError("tensor needs at least one channel");
  if (values.size() != shape_.size() * channels_) {
    throw ValidationError("tensor expects " + std::to_string(shape_.size() * channels_) +
                          " values, got " + std::to_string(values.size()));
  }
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      throw IngestionError("tensor value at point " + std::to_string(i / channels_) +
                           ", channel " + std::to_string(i % channels_) + " is not finite");
    }
  }
  values_.assign(values.begin(), values.end());
}

ScalarField::ScalarField(GridShape shape, SemiringTag tag)
    : ScalarField(std::move(shape), tag, szero(tag)) {}

ScalarField::ScalarField(GridShape shape, SemiringTag tag, Value fill)
    : shape_(std::move(shape)), tag_(tag) {
  check_valid(tag_, fill, "field fill");
  values_.assign(shape_.size(), fill);
}

ScalarField::ScalarField(GridShape shape, SemiringTag tag, std::span<const double> values)
    : shape_(std::move(shape)), tag_(tag) {
  if (values.size() != shape_.size()) {
    throw ValidationError("field expects " + std::to_string(shape_.size()) + " values, got " +
                          std::to_string(values.size()));
  }
  for (std::size_t i = 0; i < values.size(); ++i) {
    check_valid(tag_, values[i], "field entry " + std::to_string(i));
  }
  values_.assign(values.begin(), values.end());
}

namespace {

constexpr std::size_t kPairwiseBlock = 128;

template <Semiring S>
Value pairwise(std::span<const double> v) {
  if (v.size() <= kPairwiseBlock) {
    Value acc = S::zero();
    for (double x : v) acc = S::add(acc, x);
    return acc;
  }
  const std::size_t half = v.size() / 2;
  return S::add(pairwise<S>(v.first(half)), pairwise<S>(v.subspan(half)));
}

}  // namespace

Value field_reduce(const ScalarField& field) {
  return dispatch(field.tag(), [&]<class S>(S) { return pairwise<S>(field.values()); });
}

bool bit_equal(const ScalarField& a, const ScalarField& b) {
  if (a.tag() != b.tag() || !(a.shape() == b.shape())) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (std::bit_cast<std::uint64_t>(a[i]) != std::bit_cast<std::uint64_t>(b[i])) return false;
  }
  return true;
}

}  // namespace fisum
