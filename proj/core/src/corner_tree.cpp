#include "fisum/corner_tree.hpp"

#include <array>
#include <cmath>
#include <string>

#include "fisum/error.hpp"
#include "fisum/random.hpp"
#include "tree_json.hpp"

namespace fisum {

bool Direction::degenerate() const {
  for (Sign s : signs) {
    if (s != Sign::Equal) return false;
  }
  return true;
}

Direction Direction::flipped() const {
  Direction out = *this;
  for (Sign& s : out.signs) {
    if (s == Sign::Plus) {
      s = Sign::Minus;
    } else if (s == Sign::Minus) {
      s = Sign::Plus;
    }
  }
  return out;
}

bool Direction::holds(std::span<const std::size_t> parent, std::span<const std::size_t> child) const {
  for (std::size_t k = 0; k < signs.size(); ++k) {
    switch (signs[k]) {
      case Sign::Plus:
        if (!(child[k] > parent[k])) return false;
        break;
      case Sign::Minus:
        if (!(child[k] < parent[k])) return false;
        break;
      case Sign::Equal:
        if (child[k] != parent[k]) return false;
        break;
    }
  }
  return true;
}

std::string Direction::to_string() const {
  std::string s;
  for (Sign sign : signs) s += sign == Sign::Plus ? '+' : sign == Sign::Minus ? '-' : '=';
  return s;
}

namespace {

struct CompassEntry {
  std::string_view name;
  std::array<Sign, 2> signs;
};

constexpr std::array<CompassEntry, 8> kCompass{{
    {"N", {Sign::Equal, Sign::Plus}},
    {"NE", {Sign::Plus, Sign::Plus}},
    {"E", {Sign::Plus, Sign::Equal}},
    {"SE", {Sign::Plus, Sign::Minus}},
    {"S", {Sign::Equal, Sign::Minus}},
    {"SW", {Sign::Minus, Sign::Minus}},
    {"W", {Sign::Minus, Sign::Equal}},
    {"NW", {Sign::Minus, Sign::Plus}},
}};

}  // namespace

Direction compass_alias(std::string_view name) {
  for (const auto& entry : kCompass) {
    if (entry.name == name) return Direction{{entry.signs.begin(), entry.signs.end()}};
  }
  throw ValidationError("unknown compass direction '" + std::string(name) + "'");
}

Direction Direction::parse(std::string_view text) {
  for (const auto& entry : kCompass) {
    if (entry.name == text) return compass_alias(text);
  }
  if (text.empty()) throw ValidationError("empty direction");
  Direction dir;
  for (char c : text) {
    switch (c) {
      case '+':
        dir.signs.push_back(Sign::Plus);
        break;
      case '-':
        dir.signs.push_back(Sign::Minus);
        break;
      case '=':
        dir.signs.push_back(Sign::Equal);
        break;
      default:
        throw ValidationError("bad direction '" + std::string(text) +
                              "' (use +, -, = per axis or a compass name)");
    }
  }
  return dir;
}

std::vector<Direction> all_directions(std::size_t order) {
  std::size_t count = 1;
  for (std::size_t k = 0; k < order; ++k) count *= 3;
  std::vector<Direction> out;
  out.reserve(count - 1);
  for (std::size_t code = 0; code < count; ++code) {
    Direction dir;
    dir.signs.resize(order);
    std::size_t rest = code;
    for (std::size_t k = order; k-- > 0;) {
      dir.signs[k] = static_cast<Sign>(rest % 3);
      rest /= 3;
    }
    if (!dir.degenerate()) out.push_back(std::move(dir));
  }
  return out;
}

CornerTree::CornerTree(std::size_t order, NodeFunction root) : order(order) {
  vertices.push_back(Vertex{std::move(root), 0, {}});
}

std::size_t CornerTree::add_child(std::size_t parent, Direction direction, NodeFunction function) {
  vertices.push_back(Vertex{std::move(function), parent, std::move(direction)});
  return vertices.size() - 1;
}

std::vector<std::vector<std::size_t>> CornerTree::children() const {
  std::vector<std::vector<std::size_t>> out(vertices.size());
  for (std::size_t i = 1; i < vertices.size(); ++i) out[vertices[i].parent].push_back(i);
  return out;
}

namespace {

void validate_structure(const CornerTree& tree) {
  if (tree.order == 0) throw ValidationError("tree order must be at least 1");
  if (tree.vertices.empty()) throw ValidationError("tree has no vertices");
  for (std::size_t i = 1; i < tree.vertices.size(); ++i) {
    const auto& v = tree.vertices[i];
    const std::string where = "vertex " + std::to_string(i) + ": ";
    if (v.parent >= i) {
      throw ValidationError(where + "not a tree (parent " + std::to_string(v.parent) +
                            " is not an earlier vertex)");
    }
    if (v.direction.order() != tree.order) {
      throw ValidationError(where + "direction '" + v.direction.to_string() + "' has length " +
                            std::to_string(v.direction.order()) + ", tree order is " +
                            std::to_string(tree.order));
    }
    if (v.direction.degenerate()) {
      throw ValidationError(where + "degenerate direction '" + v.direction.to_string() + "'");
    }
  }
}

void validate_function(const NodeFunction& fn, std::size_t i, std::optional<std::size_t> channels) {
  const std::string where = "vertex " + std::to_string(i) + ": ";
  const auto check_channel = [&](std::size_t channel) {
    if (channels && channel >= *channels) {
      throw ValidationError(where + "channel out of range (" + std::to_string(channel) +
                            " >= " + std::to_string(*channels) + ")");
    }
  };
  if (const auto* id = std::get_if<Identity>(&fn)) {
    check_channel(id->channel);
  } else if (const auto* mono = std::get_if<Monomial>(&fn)) {
    check_channel(mono->channel);
    if (mono->exponent == 0) throw ValidationError(where + "monomial exponent must be >= 1");
  } else {
    const auto& lin = std::get<LinearProjection>(fn);
    if (channels && lin.weights.size() != *channels) {
      throw ValidationError(where + "channel out of range (projection has " +
                            std::to_string(lin.weights.size()) + " weights for " +
                            std::to_string(*channels) + " channels)");
    }
    if (lin.weights.empty()) throw ValidationError(where + "projection has no weights");
    for (double w : lin.weights) {
      if (!std::isfinite(w)) throw ValidationError(where + "non-finite projection weight");
    }
    if (lin.bias && !std::isfinite(*lin.bias)) throw ValidationError(where + "non-finite bias");
  }
}

void validate_impl(const CornerTree& tree, std::optional<std::size_t> channels) {
  validate_structure(tree);
  for (std::size_t i = 0; i < tree.vertices.size(); ++i) {
    validate_function(tree.vertices[i].function, i, channels);
  }
}

}  // namespace

void validate(const CornerTree& tree, std::size_t channels) { validate_impl(tree, channels); }

std::string_view to_string(TreeFamily family) {
  switch (family) {
    case TreeFamily::Linear:
      return "linear";
    case TreeFamily::LinearNE:
      return "linear-ne";
    case TreeFamily::Random:
      break;
  }
  return "random";
}

TreeFamily parse_family(std::string_view name) {
  if (name == "random") return TreeFamily::Random;
  if (name == "linear") return TreeFamily::Linear;
  if (name == "linear-ne") return TreeFamily::LinearNE;
  throw ValidationError("unknown tree family '" + std::string(name) +
                        "' (expected random, linear or linear-ne)");
}

CornerTree generate(TreeFamily family, std::size_t n_nodes, std::size_t order,
                    std::size_t channels, std::uint64_t seed, bool with_bias) {
  if (n_nodes == 0) throw ValidationError("a corner tree needs at least one node");
  if (order == 0) throw ValidationError("tree order must be at least 1");
  if (channels == 0) throw ValidationError("channel count must be at least 1");

  SplitMix64 rng(seed);
  std::vector<std::size_t> parents(n_nodes, 0);
  for (std::size_t i = 1; i < n_nodes; ++i) {
    parents[i] = family == TreeFamily::Random ? rng.below(i) : i - 1;
  }

  std::vector<Direction> directions(n_nodes);
  if (family == TreeFamily::LinearNE) {
    for (std::size_t i = 1; i < n_nodes; ++i) {
      directions[i].signs.assign(order, Sign::Plus);
    }
  } else {
    const auto patterns = all_directions(order);
    for (std::size_t i = 1; i < n_nodes; ++i) directions[i] = patterns[rng.below(patterns.size())];
  }

  const double scale = 1.0 / std::sqrt(static_cast<double>(channels));
  CornerTree tree;
  tree.order = order;
  for (std::size_t i = 0; i < n_nodes; ++i) {
    LinearProjection proj;
    proj.weights.resize(channels);
    for (double& w : proj.weights) w = rng.uniform(-scale, scale);
    if (with_bias) proj.bias = 0.0;
    tree.vertices.push_back({std::move(proj), parents[i], std::move(directions[i])});
  }
  return tree;
}

// ---- JSON -----------------------------------------------------------------

namespace detail {

nlohmann::ordered_json tree_to_value(const CornerTree& tree) {
  nlohmann::ordered_json nodes = nlohmann::ordered_json::array();
  for (const auto& v : tree.vertices) {
    nlohmann::ordered_json node;
    if (const auto* id = std::get_if<Identity>(&v.function)) {
      node["kind"] = "identity";
      node["channel"] = id->channel;
    } else if (const auto* mono = std::get_if<Monomial>(&v.function)) {
      node["kind"] = "monomial";
      node["channel"] = mono->channel;
      node["exponent"] = mono->exponent;
    } else {
      const auto& lin = std::get<LinearProjection>(v.function);
      node["kind"] = "linear";
      node["weights"] = lin.weights;
      if (lin.bias) node["bias"] = *lin.bias;
    }
    nodes.push_back(std::move(node));
  }
  nlohmann::ordered_json edges = nlohmann::ordered_json::array();
  for (std::size_t i = 1; i < tree.vertices.size(); ++i) {
    edges.push_back({{"parent", tree.vertices[i].parent},
                     {"child", i},
                     {"dir", tree.vertices[i].direction.to_string()}});
  }
  nlohmann::ordered_json out;
  out["order"] = tree.order;
  out["nodes"] = std::move(nodes);
  out["edges"] = std::move(edges);
  return out;
}

namespace {

[[noreturn]] void schema_error(const std::string& pointer, const std::string& what) {
  throw ValidationError(pointer + ": " + what);
}

const nlohmann::json& member(const nlohmann::json& obj, const std::string& pointer,
                             const char* key) {
  if (!obj.is_object()) schema_error(pointer, "expected an object");
  const auto it = obj.find(key);
  if (it == obj.end()) schema_error(pointer + "/" + key, "missing");
  return *it;
}

std::size_t as_index(const nlohmann::json& v, const std::string& pointer) {
  if (!v.is_number_integer() || v.get<std::int64_t>() < 0) {
    schema_error(pointer, "expected a non-negative integer");
  }
  return v.get<std::size_t>();
}

NodeFunction node_from_value(const nlohmann::json& node, const std::string& pointer) {
  const auto& kind = member(node, pointer, "kind");
  if (!kind.is_string()) schema_error(pointer + "/kind", "expected a string");
  const std::string k = kind.get<std::string>();
  if (k == "identity") {
    return Identity{as_index(member(node, pointer, "channel"), pointer + "/channel")};
  }
  if (k == "monomial") {
    const std::size_t channel = as_index(member(node, pointer, "channel"), pointer + "/channel");
    const std::size_t exponent =
        as_index(member(node, pointer, "exponent"), pointer + "/exponent");
    if (exponent == 0) schema_error(pointer + "/exponent", "must be >= 1");
    return Monomial{channel, static_cast<unsigned>(exponent)};
  }
  if (k == "linear") {
    const auto& weights = member(node, pointer, "weights");
    if (!weights.is_array()) schema_error(pointer + "/weights", "expected an array");
    LinearProjection proj;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      if (!weights[i].is_number()) {
        schema_error(pointer + "/weights/" + std::to_string(i), "expected a number");
      }
      proj.weights.push_back(weights[i].get<double>());
    }
    if (const auto it = node.find("bias"); it != node.end()) {
      if (!it->is_number()) schema_error(pointer + "/bias", "expected a number");
      proj.bias = it->get<double>();
    }
    return proj;
  }
  schema_error(pointer + "/kind", "unknown kind '" + k + "'");
}

}  // namespace

CornerTree tree_from_value(const nlohmann::json& value, const std::string& pointer) {
  CornerTree tree;
  tree.order = as_index(member(value, pointer, "order"), pointer + "/order");
  const auto& nodes = member(value, pointer, "nodes");
  if (!nodes.is_array() || nodes.empty()) {
    schema_error(pointer + "/nodes", "expected a non-empty array");
  }
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    tree.vertices.push_back(
        {node_from_value(nodes[i], pointer + "/nodes/" + std::to_string(i)), 0, {}});
  }

  const nlohmann::json empty = nlohmann::json::array();
  const auto edges_it = value.find("edges");
  const auto& edges = edges_it == value.end() ? empty : *edges_it;
  if (!edges.is_array()) schema_error(pointer + "/edges", "expected an array");
  std::vector<bool> has_parent(tree.vertices.size(), false);
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const std::string ep = pointer + "/edges/" + std::to_string(e);
    const std::size_t parent = as_index(member(edges[e], ep, "parent"), ep + "/parent");
    const std::size_t child = as_index(member(edges[e], ep, "child"), ep + "/child");
    const auto& dir = member(edges[e], ep, "dir");
    if (!dir.is_string()) schema_error(ep + "/dir", "expected a string");
    if (child == 0 || child >= tree.vertices.size() || has_parent[child]) {
      schema_error(ep + "/child", "not a tree (vertex " + std::to_string(child) +
                                      " cannot take this edge)");
    }
    if (parent >= child) {
      schema_error(ep + "/parent", "not a tree (parent " + std::to_string(parent) +
                                       " is not an earlier vertex than child " +
                                       std::to_string(child) + ")");
    }
    try {
      tree.vertices[child].direction = Direction::parse(dir.get<std::string>());
    } catch (const ValidationError& err) {
      schema_error(ep + "/dir", err.what());
    }
    tree.vertices[child].parent = parent;
    has_parent[child] = true;
  }
  for (std::size_t i = 1; i < has_parent.size(); ++i) {
    if (!has_parent[i]) {
      schema_error(pointer + "/edges", "not a tree (vertex " + std::to_string(i) + " has no parent)");
    }
  }
  return tree;
}

}  // namespace detail

std::string to_json(const CornerTree& tree, int indent) {
  return detail::tree_to_value(tree).dump(indent);
}

CornerTree tree_from_json(std::string_view text, std::optional<std::size_t> channels) {
  nlohmann::json value;
  try {
    value = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(std::string("tree json: ") + e.what());
  }
  CornerTree tree = detail::tree_from_value(value, "");
  validate_impl(tree, channels);
  return tree;
}

}  // namespace fisum
