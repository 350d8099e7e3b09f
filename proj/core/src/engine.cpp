#include "fisum/engine.hpp"

#include <limits>
#include <string>

#include "fisum/error.hpp"
#include "fisum/scan.hpp"

namespace fisum {

namespace {

double int_power(double x, unsigned exponent) {
  double result = 1.0;
  for (unsigned i = 0; i < exponent; ++i) result *= x;
  return result;
}

void check_channels(const NodeFunction& fn, std::size_t channels) {
  const auto fail = [&](std::size_t channel) {
    throw ValidationError("channel out of range (" + std::to_string(channel) +
                          " >= " + std::to_string(channels) + ")");
  };
  if (const auto* id = std::get_if<Identity>(&fn)) {
    if (id->channel >= channels) fail(id->channel);
  } else if (const auto* mono = std::get_if<Monomial>(&fn)) {
    if (mono->channel >= channels) fail(mono->channel);
  } else if (std::get<LinearProjection>(fn).weights.size() != channels) {
    throw ValidationError("channel out of range (projection has " +
                          std::to_string(std::get<LinearProjection>(fn).weights.size()) +
                          " weights for " + std::to_string(channels) + " channels)");
  }
}

Value eval_unchecked(const NodeFunction& fn, std::span<const double> z) {
  if (const auto* id = std::get_if<Identity>(&fn)) return z[id->channel];
  if (const auto* mono = std::get_if<Monomial>(&fn)) return int_power(z[mono->channel], mono->exponent);
  const auto& lin = std::get<LinearProjection>(fn);
  double acc = lin.bias.value_or(0.0);
  for (std::size_t c = 0; c < lin.weights.size(); ++c) acc += lin.weights[c] * z[c];
  return acc;
}

void check_tree_for(const CornerTree& tree, const DataTensor& z) {
  validate(tree, z.channels());
  if (tree.order != z.shape().order()) {
    throw ValidationError("tree order " + std::to_string(tree.order) +
                          " does not match tensor order " + std::to_string(z.shape().order()));
  }
}

template <Semiring S>
ScalarField subtree_field(const CornerTree& tree,
                          const std::vector<std::vector<std::size_t>>& children, std::size_t v,
                          const DataTensor& z, CtpsCache* cache) {
  ScalarField acc = node_field(tree.vertices[v].function, z, S::tag);
  if (cache) cache->node[v] = acc;
  for (std::size_t c : children[v]) {
    ScalarField child = subtree_field<S>(tree, children, c, z, cache);
    cumsum_inplace<S>(tree.vertices[c].direction, child.shape(), child.values());
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] = S::mul(acc[i], child[i]);
  }
  if (cache) cache->subtree[v] = acc;
  return acc;
}

}  // namespace

Value eval_node(const NodeFunction& function, std::span<const double> point) {
  check_channels(function, point.size());
  return eval_unchecked(function, point);
}

ScalarField node_field(const NodeFunction& function, const DataTensor& z, SemiringTag tag) {
  check_channels(function, z.channels());
  ScalarField out(z.shape(), tag, sone(tag));
  for (std::size_t p = 0; p < z.points(); ++p) out[p] = eval_unchecked(function, z.at(p));
  return out;
}

bool allowed(const CornerTree& tree, const Placement& placement) {
  for (std::size_t i = 1; i < tree.vertices.size(); ++i) {
    const auto& v = tree.vertices[i];
    if (!v.direction.holds(placement[v.parent], placement[i])) return false;
  }
  return true;
}

Value cts_bruteforce(const CornerTree& tree, const DataTensor& z, SemiringTag tag,
                     std::uint64_t cap) {
  check_tree_for(tree, z);
  const std::size_t n = tree.size();
  const std::size_t points = z.points();

  std::uint64_t total = 1;
  for (std::size_t i = 0; i < n; ++i) {
    if (total > cap / points) {
      throw CapExceededError("brute force would enumerate " + std::to_string(points) + "^" +
                             std::to_string(n) + " placements, over the cap of " +
                             std::to_string(cap));
    }
    total *= points;
  }

  std::vector<GridPoint> coords(points);
  for (std::size_t p = 0; p < points; ++p) coords[p] = z.shape().point(p);
  std::vector<std::vector<Value>> values(n, std::vector<Value>(points));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t p = 0; p < points; ++p) {
      values[i][p] = eval_node(tree.vertices[i].function, z.at(p));
    }
  }

  return dispatch(tag, [&]<class S>(S) {
    Value sum = S::zero();
    std::vector<std::size_t> index(n, 0);
    Placement placement(n);
    for (;;) {
      for (std::size_t i = 0; i < n; ++i) placement[i] = coords[index[i]];
      if (allowed(tree, placement)) {
        Value product = S::one();
        for (std::size_t i = 0; i < n; ++i) product = S::mul(product, values[i][index[i]]);
        sum = S::add(sum, product);
      }
      std::size_t k = 0;
      while (k < n && ++index[k] == points) index[k++] = 0;
      if (k == n) break;
    }
    return sum;
  });
}

ScalarField ctps(const CornerTree& tree, const DataTensor& z, SemiringTag tag, CtpsCache* cache) {
  check_tree_for(tree, z);
  if (cache) {
    cache->node.assign(tree.size(), {});
    cache->subtree.assign(tree.size(), {});
  }
  const auto children = tree.children();
  return dispatch(tag, [&]<class S>(S) { return subtree_field<S>(tree, children, 0, z, cache); });
}

Value cts(const CornerTree& tree, const DataTensor& z, SemiringTag tag) {
  return field_reduce(ctps(tree, z, tag));
}

std::vector<Value> iterated_sum_1d(std::span<const double> x, std::span<const unsigned> exponents,
                                   SemiringTag tag) {
  if (exponents.empty()) throw ValidationError("iterated sum needs at least one exponent");
  for (unsigned a : exponents) {
    if (a == 0) throw ValidationError("iterated sum exponents must be >= 1");
  }
  return dispatch(tag, [&]<class S>(S) {
    const std::size_t k = exponents.size();
    // state[j]: sum over i1 < ... < ij <= t of the first j factors.
    std::vector<Value> state(k + 1, S::zero());
    state[0] = S::one();
    std::vector<Value> out;
    out.reserve(x.size());
    for (double xt : x) {
      for (std::size_t j = k; j >= 1; --j) {
        state[j] = S::add(state[j], S::mul(state[j - 1], int_power(xt, exponents[j - 1])));
      }
      out.push_back(state[k]);
    }
    return out;
  });
}

DataTensor mixed_difference(const DataTensor& x) {
  const auto& shape = x.shape();
  if (shape.order() != 2) throw ValidationError("mixed difference needs an order-2 tensor");
  if (shape.extent(0) < 2 || shape.extent(1) < 2) {
    throw ValidationError("mixed difference needs both extents >= 2");
  }
  const std::size_t rows = shape.extent(0) - 1;
  const std::size_t cols = shape.extent(1) - 1;
  const std::size_t d = x.channels();
  DataTensor out(GridShape{rows, cols}, d);
  const std::size_t w = shape.extent(1);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) {
      for (std::size_t c = 0; c < d; ++c) {
        out(i * cols + j, c) = x((i + 1) * w + j + 1, c) - x(i * w + j + 1, c) -
                               x((i + 1) * w + j, c) + x(i * w + j, c);
      }
    }
  }
  return out;
}

}  // namespace fisum
