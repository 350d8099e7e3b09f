#pragma once

#include <cstddef>
#include <numeric>
#include <span>
#include <vector>

#include "fisum/corner_tree.hpp"
#include "fisum/grid.hpp"
#include "fisum/semiring.hpp"

namespace fisum {

namespace detail {

/// Exclusive semiring scan of every line along `axis`. Minus scans forward
/// (out_t = ⊕_{r<t} x_r), Plus scans backward (out_t = ⊕_{r>t} x_r).
template <Semiring S>
void scan_axis(std::span<double> values, const GridShape& shape, std::size_t axis, Sign sign,
               std::vector<double>& acc) {
  const std::size_t n = shape.extent(axis);
  const std::size_t inner = shape.stride(axis);
  const std::size_t outer = shape.size() / (n * inner);
  acc.resize(inner);
  for (std::size_t o = 0; o < outer; ++o) {
    double* base = values.data() + o * n * inner;
    std::fill(acc.begin(), acc.end(), S::zero());
    for (std::size_t step = 0; step < n; ++step) {
      const std::size_t t = sign == Sign::Minus ? step : n - 1 - step;
      double* row = base + t * inner;
      for (std::size_t i = 0; i < inner; ++i) {
        const double x = row[i];
        row[i] = acc[i];
        acc[i] = S::add(acc[i], x);
      }
    }
  }
}

/// Scans axes [axis, order) of one contiguous block in a single sweep: each
/// hyperplane along `axis` is finished by the deeper axes as soon as its
/// exclusive scan value is written, while it is still in cache.
template <Semiring S>
void scan_block(double* block, const GridShape& shape, const Direction& dir, std::size_t axis,
                std::vector<std::vector<double>>& accs) {
  if (axis == shape.order()) return;
  const std::size_t n = shape.extent(axis);
  const std::size_t slice = shape.stride(axis);
  const Sign sign = dir.signs[axis];
  if (axis + 1 == shape.order()) {
    if (sign == Sign::Equal) return;
    double acc = S::zero();
    if (sign == Sign::Minus) {
      for (std::size_t t = 0; t < n; ++t) {
        const double x = block[t];
        block[t] = acc;
        acc = S::add(acc, x);
      }
    } else {
      for (std::size_t t = n; t-- > 0;) {
        const double x = block[t];
        block[t] = acc;
        acc = S::add(acc, x);
      }
    }
    return;
  }
  if (sign == Sign::Equal) {
    for (std::size_t t = 0; t < n; ++t) scan_block<S>(block + t * slice, shape, dir, axis + 1, accs);
    return;
  }
  std::vector<double>& acc = accs[axis];
  acc.assign(slice, S::zero());
  for (std::size_t step = 0; step < n; ++step) {
    const std::size_t t = sign == Sign::Minus ? step : n - 1 - step;
    double* row = block + t * slice;
    for (std::size_t i = 0; i < slice; ++i) {
      const double x = row[i];
      row[i] = acc[i];
      acc[i] = S::add(acc[i], x);
    }
    scan_block<S>(row, shape, dir, axis + 1, accs);
  }
}

}  // namespace detail

/// In-place directional cumulative sum: out_t = ⊕ x_r over all r standing in
/// direction `dir` from t. Without `axis_order` the axes are fused into one
/// sweep; with it, each axis is scanned over the whole grid in the given
/// order. Both give the same result.
template <Semiring S>
void cumsum_inplace(const Direction& dir, const GridShape& shape, std::span<double> values,
                    std::span<const std::size_t> axis_order = {}) {
  if (axis_order.empty()) {
    std::vector<std::vector<double>> accs(shape.order());
    detail::scan_block<S>(values.data(), shape, dir, 0, accs);
    return;
  }
  std::vector<double> acc;
  for (std::size_t axis : axis_order) {
    if (dir.signs[axis] != Sign::Equal) {
      detail::scan_axis<S>(values, shape, axis, dir.signs[axis], acc);
    }
  }
}

/// Directional cumulative sum of `x` under semiring `tag`.
ScalarField cumsum_dir(SemiringTag tag, const Direction& dir, const ScalarField& x);
ScalarField cumsum_dir(SemiringTag tag, const Direction& dir, const ScalarField& x,
                       std::span<const std::size_t> axis_order);

/// Adjoint of the real cumsum_dir: the scan in the flipped direction.
ScalarField cumsum_dir_vjp(SemiringTag tag, const Direction& dir, const ScalarField& cotangent);

/// Reverse-mode derivative of the max-plus cumsum_dir at `primal`: each output
/// cotangent flows to the point that attained the max. Ties go to the first
/// element in scan order; outputs with no contributing point (-inf) pass
/// nothing back.
std::vector<double> maxplus_cumsum_vjp(const Direction& dir, const GridShape& shape,
                                       std::span<const double> primal,
                                       std::span<const double> cotangent);

}  // namespace fisum
