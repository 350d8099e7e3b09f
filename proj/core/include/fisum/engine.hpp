#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "fisum/corner_tree.hpp"
#include "fisum/grid.hpp"
#include "fisum/semiring.hpp"

namespace fisum {

/// Evaluates a node function on one d-channel point. The real result is used
/// directly as an element of the semiring.
Value eval_node(const NodeFunction& function, std::span<const double> point);

/// Field of eval_node over every grid point.
ScalarField node_field(const NodeFunction& function, const DataTensor& z, SemiringTag tag);

/// Grid point of each tree vertex, indexed like the vertices.
using Placement = std::vector<GridPoint>;

/// Conjunction of every edge's direction predicate on (parent, child) points.
bool allowed(const CornerTree& tree, const Placement& placement);

inline constexpr std::uint64_t kDefaultEnumerationCap = 100'000'000;

/// Exhaustive corner tree sum over all placements. Exponential; throws
/// CapExceededError when points^vertices exceeds `cap`.
Value cts_bruteforce(const CornerTree& tree, const DataTensor& z, SemiringTag tag,
                     std::uint64_t cap = kDefaultEnumerationCap);

/// Per-vertex intermediates kept for reverse-mode differentiation.
struct CtpsCache {
  /// eval_node field of each vertex.
  std::vector<ScalarField> node;
  /// Pre-sum field of the subtree rooted at each vertex.
  std::vector<ScalarField> subtree;
};

/// Corner-tree pre-sum field. Subtrees are evaluated depth first and each
/// child field is released once merged, unless `cache` is given, in which case
/// every vertex's node and subtree field is retained there.
ScalarField ctps(const CornerTree& tree, const DataTensor& z, SemiringTag tag,
                 CtpsCache* cache = nullptr);

/// Corner tree sum in linear time: field_reduce(ctps(...)).
Value cts(const CornerTree& tree, const DataTensor& z, SemiringTag tag);

/// One-parameter iterated sums y_t = ⊕_{i1<...<ik<=t} ⊙_j x_{ij}^{αj} for
/// t = 1..T via the k-state dynamic program.
std::vector<Value> iterated_sum_1d(std::span<const double> x, std::span<const unsigned> exponents,
                                   SemiringTag tag);

/// Per-channel mixed second difference of an order-2 tensor; extents shrink
/// by one along both axes.
DataTensor mixed_difference(const DataTensor& x);

}  // namespace fisum
