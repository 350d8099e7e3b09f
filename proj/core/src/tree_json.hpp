#pragma once

// nlohmann-level tree codec shared by the tree and layer checkpoint formats.

#include <nlohmann/json.hpp>
#include <string>

#include "fisum/corner_tree.hpp"

namespace fisum::detail {

nlohmann::ordered_json tree_to_value(const CornerTree& tree);
/// `pointer` is the JSON pointer of `value` inside the enclosing document.
CornerTree tree_from_value(const nlohmann::json& value, const std::string& pointer);

}  // namespace fisum::detail
