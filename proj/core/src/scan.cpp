#include "fisum/scan.hpp"

#include <cstdint>
#include <string>

#include "fisum/error.hpp"

namespace fisum {

namespace {

void check_order(const Direction& dir, const GridShape& shape) {
  if (dir.order() != shape.order()) {
    throw ValidationError("direction '" + dir.to_string() + "' has order " +
                          std::to_string(dir.order()) + " but the field has order " +
                          std::to_string(shape.order()));
  }
}

void check_axis_order(std::span<const std::size_t> axis_order, std::size_t order) {
  std::vector<bool> seen(order, false);
  if (axis_order.size() != order) throw ValidationError("axis order must list every axis once");
  for (std::size_t a : axis_order) {
    if (a >= order || seen[a]) throw ValidationError("axis order must list every axis once");
    seen[a] = true;
  }
}

}  // namespace

ScalarField cumsum_dir(SemiringTag tag, const Direction& dir, const ScalarField& x,
                       std::span<const std::size_t> axis_order) {
  check_order(dir, x.shape());
  if (x.tag() != tag) throw ValidationError("field semiring does not match the scan semiring");
  if (!axis_order.empty()) check_axis_order(axis_order, x.shape().order());
  ScalarField out = x;
  dispatch(tag, [&]<class S>(S) { cumsum_inplace<S>(dir, out.shape(), out.values(), axis_order); });
  return out;
}

ScalarField cumsum_dir(SemiringTag tag, const Direction& dir, const ScalarField& x) {
  return cumsum_dir(tag, dir, x, {});
}

ScalarField cumsum_dir_vjp(SemiringTag tag, const Direction& dir, const ScalarField& cotangent) {
  if (tag != SemiringTag::Real) {
    throw ValidationError("cumsum_dir_vjp is the adjoint of a linear map and needs the real semiring");
  }
  return cumsum_dir(tag, dir.flipped(), cotangent);
}

std::vector<double> maxplus_cumsum_vjp(const Direction& dir, const GridShape& shape,
                                       std::span<const double> primal,
                                       std::span<const double> cotangent) {
  check_order(dir, shape);
  if (primal.size() != shape.size() || cotangent.size() != shape.size()) {
    throw ValidationError("max-plus scan vjp: size mismatch");
  }

  // Forward again, one axis pass at a time, remembering for every output the
  // line position that supplied its max (-1: nothing did).
  struct Pass {
    std::size_t axis;
    std::vector<std::int32_t> source;
  };
  std::vector<Pass> passes;
  std::vector<double> values(primal.begin(), primal.end());
  std::vector<double> acc;
  std::vector<std::int32_t> acc_pos;
  for (std::size_t axis = 0; axis < shape.order(); ++axis) {
    const Sign sign = dir.signs[axis];
    if (sign == Sign::Equal) continue;
    const std::size_t n = shape.extent(axis);
    const std::size_t inner = shape.stride(axis);
    const std::size_t outer = shape.size() / (n * inner);
    Pass pass{axis, std::vector<std::int32_t>(shape.size(), -1)};
    acc.resize(inner);
    acc_pos.resize(inner);
    for (std::size_t o = 0; o < outer; ++o) {
      const std::size_t base = o * n * inner;
      std::fill(acc.begin(), acc.end(), kNegInf);
      std::fill(acc_pos.begin(), acc_pos.end(), -1);
      for (std::size_t step = 0; step < n; ++step) {
        const std::size_t t = sign == Sign::Minus ? step : n - 1 - step;
        for (std::size_t i = 0; i < inner; ++i) {
          const std::size_t idx = base + t * inner + i;
          const double x = values[idx];
          values[idx] = acc[i];
          pass.source[idx] = acc_pos[i];
          // Strict comparison keeps the first maximizer in scan order.
          if (x > acc[i]) {
            acc[i] = x;
            acc_pos[i] = static_cast<std::int32_t>(t);
          }
        }
      }
    }
    passes.push_back(std::move(pass));
  }

  std::vector<double> grad(cotangent.begin(), cotangent.end());
  std::vector<double> next(shape.size());
  for (auto it = passes.rbegin(); it != passes.rend(); ++it) {
    const std::size_t n = shape.extent(it->axis);
    const std::size_t inner = shape.stride(it->axis);
    std::fill(next.begin(), next.end(), 0.0);
    for (std::size_t idx = 0; idx < shape.size(); ++idx) {
      const std::int32_t src = it->source[idx];
      if (src < 0) continue;
      const std::size_t t = (idx / inner) % n;
      const std::size_t from = idx - t * inner + static_cast<std::size_t>(src) * inner;
      next[from] += grad[idx];
    }
    grad.swap(next);
  }
  return grad;
}

}  // namespace fisum
