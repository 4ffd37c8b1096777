#ifndef MCFLOW_ERRORS_HPP_
#define MCFLOW_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace mcflow {

enum class ErrorKind {
  invalid_parameter,
  domain_too_small,
  out_of_stencil,
  stability,
  numerical_blowup,
  incomplete_sweep,
  invalid_crossing,
  near_critical,
  partial_field,
  empty_shell,
  no_interior_max,
  mixed_stratum,
  insufficient_data,
  outside_domain,
  not_mean_convex,
  format,
  config,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_parameter: return "invalid-parameter";
    case ErrorKind::domain_too_small: return "domain-too-small";
    case ErrorKind::out_of_stencil: return "out-of-stencil";
    case ErrorKind::stability: return "stability";
    case ErrorKind::numerical_blowup: return "numerical-blowup";
    case ErrorKind::incomplete_sweep: return "incomplete-sweep";
    case ErrorKind::invalid_crossing: return "invalid-crossing";
    case ErrorKind::near_critical: return "near-critical";
    case ErrorKind::partial_field: return "partial-field";
    case ErrorKind::empty_shell: return "empty-shell";
    case ErrorKind::no_interior_max: return "no-interior-max";
    case ErrorKind::mixed_stratum: return "mixed-stratum";
    case ErrorKind::insufficient_data: return "insufficient-data";
    case ErrorKind::outside_domain: return "outside-domain";
    case ErrorKind::not_mean_convex: return "not-mean-convex";
    case ErrorKind::format: return "format";
    case ErrorKind::config: return "config";
  }
  return "unknown";
}

//! Every failure raised by the library carries a kind so callers (and the
//! CLI exit-code mapping) can dispatch without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what),
        kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace mcflow

#endif  // MCFLOW_ERRORS_HPP_
