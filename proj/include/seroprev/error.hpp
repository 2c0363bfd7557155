#pragma once

#include <stdexcept>
#include <string>

namespace seroprev {

enum class ErrorKind {
  input,           // malformed or out-of-range user input
  no_data,         // nothing left to estimate from (e.g. every stratum dropped)
  degenerate_assay,// sensitivity + specificity == 1
  design,          // rank-deficient regression design
  separation,      // logistic fit drifting to infinity
  nonconvergence,  // iteration cap reached
  singular,        // singular bread / linear system
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::input: return "input";
    case ErrorKind::no_data: return "no-data";
    case ErrorKind::degenerate_assay: return "degenerate-assay";
    case ErrorKind::design: return "design";
    case ErrorKind::separation: return "separation";
    case ErrorKind::nonconvergence: return "non-convergence";
    case ErrorKind::singular: return "singular";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

  // Numeric failures (non-convergence, singular systems, separation, bad
  // design) are distinguished from input and assay problems by callers that
  // map errors onto process exit codes.
  bool is_numeric() const noexcept {
    return kind_ == ErrorKind::design || kind_ == ErrorKind::separation ||
           kind_ == ErrorKind::nonconvergence || kind_ == ErrorKind::singular;
  }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

}  // namespace seroprev
