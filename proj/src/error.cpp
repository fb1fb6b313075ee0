#include "robayes/error.hpp"

namespace robayes {

const char* errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::invalid_range: return "invalid-range";
    case Errc::invalid_argument: return "invalid-argument";
    case Errc::non_finite_integrand: return "non-finite-integrand";
    case Errc::length_mismatch: return "length-mismatch";
    case Errc::no_sign_change: return "no-sign-change";
    case Errc::non_uniform_grid: return "non-uniform-grid";
    case Errc::invalid_epsilon: return "invalid-epsilon";
    case Errc::grid_coverage: return "grid-coverage";
    case Errc::empty_support: return "empty-support";
    case Errc::not_log_concave: return "not-log-concave";
    case Errc::no_bracket: return "no-bracket";
    case Errc::missing_derivative: return "missing-derivative";
    case Errc::empty_contamination: return "empty-contamination";
    case Errc::malformed_file: return "malformed-file";
    case Errc::unknown_subcommand: return "unknown-subcommand";
    case Errc::not_converged: return "not-converged";
  }
  return "unknown";
}

Error::Error(Errc code, const std::string& what)
    : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

}  // namespace robayes
