#pragma once

#include <span>

#include "eegvad/exec.hpp"
#include "eegvad/frame_sequence.hpp"
#include "eegvad/time_series.hpp"

namespace eegvad {

inline constexpr int kEegFeaturesPerChannel = 5;
inline constexpr const char* kEegFeatureLayout = "per-channel:rms,zcr,mwa,kurtosis,pse";

double rms(std::span<const double> window);

// Sign changes between consecutive samples over (length - 1). A zero sample
// inherits the sign of the previous nonzero sample.
double zero_crossing_rate(std::span<const double> window);

double moving_window_average(std::span<const double> window);

struct KurtosisResult {
  double value = 0.0;
  bool zero_variance = false;
};

// Non-excess kurtosis m4 / m2^2 from biased central moments. Constant
// windows yield {0, zero_variance = true}.
KurtosisResult kurtosis(std::span<const double> window);

// Shannon entropy (nats) of the normalized periodogram over the
// positive-frequency bins 1..n/2 of a rectangular-window DFT.
double power_spectral_entropy(std::span<const double> window);

struct EegFeatureConfig {
  double frame_rate_hz = 100.0;
  double window_s = 0.1;
};

struct EegFeatureStats {
  std::size_t zero_variance_windows = 0;
};

// One frame per window; row layout is five contiguous values per channel
// (rms, zcr, mwa, kurtosis, pse).
FrameSequence extract_eeg_features(const TimeSeries& eeg, const EegFeatureConfig& config = {},
                                   Exec exec = Exec::parallel, EegFeatureStats* stats = nullptr);

}  // namespace eegvad
