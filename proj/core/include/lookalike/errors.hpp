#pragma once

#include <stdexcept>
#include <string>

namespace lookalike {

/// Raised when input data or an on-disk artifact is invalid: malformed
/// lines, duplicate ids, bad magic bytes, truncated files, unknown seed
/// ids. Distinct from std::invalid_argument, which signals a caller-side
/// precondition violation (mismatched dimensions, out-of-range knobs).
class DataError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

} // namespace lookalike
