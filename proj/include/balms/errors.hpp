#pragma once

#include <stdexcept>
#include <string>

namespace balms {

// Bad user-facing configuration: sizes, profiles, thresholds, loss specs.
struct invalid_spec : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Mismatched tensor dimensions between otherwise valid objects.
struct shape_error : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Non-finite values where finite ones are required (divergence and friends).
struct numeric_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A caller broke a documented precondition that is not a plain config error.
struct contract_violation : std::logic_error {
  using std::logic_error::logic_error;
};

inline void require_spec(bool ok, const std::string& what) {
  if (!ok) throw invalid_spec(what);
}

inline void require_shape(bool ok, const std::string& what) {
  if (!ok) throw shape_error(what);
}

inline void require_finite(bool ok, const std::string& what) {
  if (!ok) throw numeric_error(what);
}

}  // namespace balms
