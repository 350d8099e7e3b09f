#include "fisum/semiring.hpp"

#include <charconv>
#include <cmath>
#include <string>

#include "fisum/error.hpp"

namespace fisum {

Value szero(SemiringTag tag) {
  return dispatch(tag, []<class S>(S) { return S::zero(); });
}

Value sone(SemiringTag tag) {
  return dispatch(tag, []<class S>(S) { return S::one(); });
}

Value sadd(SemiringTag tag, Value a, Value b) {
  return dispatch(tag, [=]<class S>(S) { return S::add(a, b); });
}

Value smul(SemiringTag tag, Value a, Value b) {
  return dispatch(tag, [=]<class S>(S) { return S::mul(a, b); });
}

bool is_valid(SemiringTag tag, Value v) {
  switch (tag) {
    case SemiringTag::MaxPlus:
      return std::isfinite(v) || v == kNegInf;
    case SemiringTag::Real:
      break;
  }
  return std::isfinite(v);
}

void check_valid(SemiringTag tag, Value v, std::string_view what) {
  if (!is_valid(tag, v)) {
    throw IngestionError(std::string(what) + ": value " + format_value(v) +
                         " is not an element of the " + std::string(to_string(tag)) +
                         " semiring");
  }
}

std::string_view to_string(SemiringTag tag) {
  return tag == SemiringTag::MaxPlus ? "max-plus" : "real";
}

SemiringTag parse_semiring(std::string_view name) {
  if (name == "real") return SemiringTag::Real;
  if (name == "max-plus") return SemiringTag::MaxPlus;
  throw ValidationError("unknown semiring '" + std::string(name) +
                        "' (expected \"real\" or \"max-plus\")");
}

std::string format_value(Value v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v < 0 ? "-inf" : "inf";
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

Value parse_value(std::string_view text) {
  if (text == "-inf") return kNegInf;
  if (text == "inf") return -kNegInf;
  double v = 0.0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  if (!text.empty() && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc{} || ptr != last || text.empty()) {
    throw IngestionError("cannot parse number '" + std::string(text) + "'");
  }
  return v;
}

}  // namespace fisum
