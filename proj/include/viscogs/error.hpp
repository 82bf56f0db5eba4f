#pragma once

#include <stdexcept>
#include <string>

namespace viscogs {

enum class ErrorKind {
  invalid_parameter,
  assumption_violation,
  dimension_mismatch,
  invalid_resolution,
  invalid_level,
  invariant,
  left_domain,
  stiffness_failure,
  integrity_failure,
  property_violation,
  unsupported_law,
  construction_bug,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, const std::string& what);
  ErrorKind kind() const { return kind_; }

private:
  ErrorKind kind_;
};

// Thrown by geodesic_shoot; carries the parameter at which a cell hit zero.
class LeftDomain : public Error {
public:
  LeftDomain(double s_exit, const std::string& what)
      : Error(ErrorKind::left_domain, what), s_exit_(s_exit) {}
  double s_exit() const { return s_exit_; }

private:
  double s_exit_;
};

}  // namespace viscogs
