#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace fisum {

/// Relation of a child coordinate to its parent coordinate along one axis.
enum class Sign : std::uint8_t { Minus, Equal, Plus };

/// Generalized cardinal direction: one Sign per grid axis. Position k
/// constrains axis k; Plus means the child coordinate is strictly greater.
struct Direction {
  std::vector<Sign> signs;

  std::size_t order() const { return signs.size(); }
  bool degenerate() const;
  /// Plus <-> Minus, Equal fixed.
  Direction flipped() const;
  /// True when point `child` stands in this direction relative to `parent`.
  bool holds(std::span<const std::size_t> parent, std::span<const std::size_t> child) const;

  /// "+-=" form.
  std::string to_string() const;
  /// Parses "+-=" patterns, and for two axes also the compass names.
  static Direction parse(std::string_view text);

  bool operator==(const Direction&) const = default;
};

/// All 3^p - 1 non-degenerate patterns, in base-3 counting order with axis 0
/// most significant and digits Minus < Equal < Plus.
std::vector<Direction> all_directions(std::size_t order);

/// Compass names for p = 2: N, NE, E, SE, S, SW, W, NW.
Direction compass_alias(std::string_view name);

struct Identity {
  std::size_t channel = 0;
  bool operator==(const Identity&) const = default;
};

struct Monomial {
  std::size_t channel = 0;
  unsigned exponent = 1;
  bool operator==(const Monomial&) const = default;
};

struct LinearProjection {
  std::vector<double> weights;
  /// Present iff the bias is enabled.
  std::optional<double> bias;
  bool operator==(const LinearProjection&) const = default;
};

using NodeFunction = std::variant<Identity, Monomial, LinearProjection>;

/// Rooted corner tree with vertices numbered root-first: vertex 0 is the root
/// and every other vertex names a parent with a smaller index.
struct CornerTree {
  struct Vertex {
    NodeFunction function;
    /// Unused for the root.
    std::size_t parent = 0;
    /// Direction of the incoming edge; unused for the root.
    Direction direction;
    bool operator==(const Vertex&) const = default;
  };

  std::size_t order = 2;
  std::vector<Vertex> vertices;

  CornerTree() = default;
  CornerTree(std::size_t order, NodeFunction root);

  /// Appends a child of `parent` and returns its index.
  std::size_t add_child(std::size_t parent, Direction direction, NodeFunction function);

  std::size_t size() const { return vertices.size(); }
  /// Children of every vertex, in increasing index order.
  std::vector<std::vector<std::size_t>> children() const;

  bool operator==(const CornerTree&) const = default;
};

/// Throws ValidationError naming the offending vertex when `tree` is not a
/// root-first tree of order-matched, non-degenerate edges with every channel
/// reference below `channels`.
void validate(const CornerTree& tree, std::size_t channels);

enum class TreeFamily { Random, Linear, LinearNE };

std::string_view to_string(TreeFamily family);
/// "random", "linear", "linear-ne".
TreeFamily parse_family(std::string_view name);

/// Seeded tree generator. One splitmix64 stream is consumed in a fixed order:
/// parent choices for vertices 1..n-1, then edge directions for 1..n-1, then
/// the projection weights vertex by vertex. Weights are uniform on
/// [-1/sqrt(d), 1/sqrt(d)]; the bias is 0 and only present if `with_bias`.
CornerTree generate(TreeFamily family, std::size_t n_nodes, std::size_t order,
                    std::size_t channels, std::uint64_t seed, bool with_bias = false);

std::string to_json(const CornerTree& tree, int indent = 2);
/// Parses and validates. Schema errors carry a JSON pointer to the culprit.
/// `channels`, when given, is forwarded to validate().
CornerTree tree_from_json(std::string_view text, std::optional<std::size_t> channels = {});

}  // namespace fisum
