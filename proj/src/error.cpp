#include "viscogs/error.hpp"

namespace viscogs {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_parameter: return "invalid-parameter";
    case ErrorKind::assumption_violation: return "assumption-violation";
    case ErrorKind::dimension_mismatch: return "dimension-mismatch";
    case ErrorKind::invalid_resolution: return "invalid-resolution";
    case ErrorKind::invalid_level: return "invalid-level";
    case ErrorKind::invariant: return "invariant";
    case ErrorKind::left_domain: return "left-domain";
    case ErrorKind::stiffness_failure: return "stiffness-failure";
    case ErrorKind::integrity_failure: return "integrity-failure";
    case ErrorKind::property_violation: return "property-violation";
    case ErrorKind::unsupported_law: return "unsupported-law";
    case ErrorKind::construction_bug: return "construction-bug";
  }
  return "unknown";
}

Error::Error(ErrorKind kind, const std::string& what)
    : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

}  // namespace viscogs
