#pragma once

#include <stdexcept>
#include <string>

namespace robayes {

enum class Errc {
  invalid_range,
  invalid_argument,
  non_finite_integrand,
  length_mismatch,
  no_sign_change,
  non_uniform_grid,
  invalid_epsilon,
  grid_coverage,
  empty_support,
  not_log_concave,
  no_bracket,
  missing_derivative,
  empty_contamination,
  malformed_file,
  unknown_subcommand,
  not_converged,
};

const char* errc_name(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what);
  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace robayes
