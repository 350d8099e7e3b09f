#pragma once

#include <stdexcept>
#include <string>

namespace fisum {

/// Invalid structure or arguments: bad trees, shape mismatches, bad flags.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Malformed or unsupported input files, non-finite data.
class IngestionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The brute-force oracle refused to run because it would enumerate too many
/// placements.
class CapExceededError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace fisum
