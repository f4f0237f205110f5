#pragma once

#include <stdexcept>
#include <string>

namespace eegvad {

// Stable, machine-readable failure categories. The string form (see
// to_string) is what tools print and what tests match on.
enum class Errc {
  invalid_cutoffs,
  invalid_center,
  invalid_argument,
  non_finite_output,
  non_finite_input,
  incompatible_rates,
  empty_window,
  invalid_config,
  multichannel_audio,
  rate_mismatch,
  length_mismatch,
  dim_mismatch,
  shape_mismatch,
  insufficient_samples,
  insufficient_rank,
  all_zero_spectrum,
  invalid_rate,
  non_one_hot,
  no_forward_state,
  unknown_variant,
  invalid_input_dim,
  too_few_sequences,
  divergence,
  empty,
  io_failure,
  format_error,
};

const char* to_string(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace eegvad
