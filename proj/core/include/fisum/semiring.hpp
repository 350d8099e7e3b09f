#pragma once

#include <concepts>
#include <limits>
#include <string>
#include <string_view>
#include <utility>

namespace fisum {

enum class SemiringTag { Real, MaxPlus };

/// Element of a semiring. Real values are finite; max-plus values are finite or
/// -inf (the max-plus zero).
using Value = double;

inline constexpr Value kNegInf = -std::numeric_limits<double>::infinity();

/// A commutative semiring over doubles, expressed as a stateless policy type.
/// Scans and the engine are written against this concept only; adding a new
/// semiring means adding a policy, a tag and a case in `dispatch`.
template <class S>
concept Semiring = requires(Value a, Value b) {
  { S::tag } -> std::convertible_to<SemiringTag>;
  { S::zero() } -> std::same_as<Value>;
  { S::one() } -> std::same_as<Value>;
  { S::add(a, b) } -> std::same_as<Value>;
  { S::mul(a, b) } -> std::same_as<Value>;
};

struct RealSemiring {
  static constexpr SemiringTag tag = SemiringTag::Real;
  static constexpr Value zero() { return 0.0; }
  static constexpr Value one() { return 1.0; }
  static constexpr Value add(Value a, Value b) { return a + b; }
  static constexpr Value mul(Value a, Value b) { return a * b; }
};

struct MaxPlusSemiring {
  static constexpr SemiringTag tag = SemiringTag::MaxPlus;
  static constexpr Value zero() { return kNegInf; }
  static constexpr Value one() { return 0.0; }
  static constexpr Value add(Value a, Value b) { return a < b ? b : a; }
  // +inf never enters a max-plus value, so -inf + x = -inf natively.
  static constexpr Value mul(Value a, Value b) { return a + b; }
};

static_assert(Semiring<RealSemiring>);
static_assert(Semiring<MaxPlusSemiring>);

/// Calls `f` with the policy object matching `tag`.
template <class F>
decltype(auto) dispatch(SemiringTag tag, F&& f) {
  switch (tag) {
    case SemiringTag::MaxPlus:
      return std::forward<F>(f)(MaxPlusSemiring{});
    case SemiringTag::Real:
      break;
  }
  return std::forward<F>(f)(RealSemiring{});
}

Value szero(SemiringTag tag);
Value sone(SemiringTag tag);
Value sadd(SemiringTag tag, Value a, Value b);
Value smul(SemiringTag tag, Value a, Value b);

/// True when `v` is a legal element of the tagged semiring.
bool is_valid(SemiringTag tag, Value v);

/// Throws IngestionError naming `what` if `v` is not a legal element.
void check_valid(SemiringTag tag, Value v, std::string_view what);

/// "real" / "max-plus".
std::string_view to_string(SemiringTag tag);
SemiringTag parse_semiring(std::string_view name);

/// Text encoding that round-trips every value bit-exactly. -inf is "-inf".
std::string format_value(Value v);
Value parse_value(std::string_view text);

}  // namespace fisum
