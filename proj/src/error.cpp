#include "eegvad/error.hpp"

namespace eegvad {

const char* to_string(Errc code) noexcept {
  switch (code) {
    case Errc::invalid_cutoffs: return "invalid-cutoffs";
    case Errc::invalid_center: return "invalid-center";
    case Errc::invalid_argument: return "invalid-argument";
    case Errc::non_finite_output: return "non-finite-output";
    case Errc::non_finite_input: return "non-finite-input";
    case Errc::incompatible_rates: return "incompatible-rates";
    case Errc::empty_window: return "empty-window";
    case Errc::invalid_config: return "invalid-config";
    case Errc::multichannel_audio: return "multichannel-audio";
    case Errc::rate_mismatch: return "rate-mismatch";
    case Errc::length_mismatch: return "length-mismatch";
    case Errc::dim_mismatch: return "dim-mismatch";
    case Errc::shape_mismatch: return "shape-mismatch";
    case Errc::insufficient_samples: return "insufficient-samples";
    case Errc::insufficient_rank: return "insufficient-rank";
    case Errc::all_zero_spectrum: return "all-zero-spectrum";
    case Errc::invalid_rate: return "invalid-rate";
    case Errc::non_one_hot: return "non-one-hot";
    case Errc::no_forward_state: return "no-forward-state";
    case Errc::unknown_variant: return "unknown-variant";
    case Errc::invalid_input_dim: return "invalid-input-dim";
    case Errc::too_few_sequences: return "too-few-sequences";
    case Errc::divergence: return "divergence";
    case Errc::empty: return "empty";
    case Errc::io_failure: return "io-failure";
    case Errc::format_error: return "format-error";
  }
  return "unknown";
}

}  // namespace eegvad
