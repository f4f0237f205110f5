#pragma once

#include <complex>
#include <string>
#include <vector>

#include "eegvad/exec.hpp"
#include "eegvad/time_series.hpp"

namespace eegvad {

// One second-order section, a0 normalized to 1:
//   y[n] = b0 x[n] + b1 x[n-1] + b2 x[n-2] - a1 y[n-1] - a2 y[n-2]
struct Biquad {
  double b0 = 1.0, b1 = 0.0, b2 = 0.0;
  double a1 = 0.0, a2 = 0.0;

  std::complex<double> response(double omega) const;
  // Magnitudes of the two poles (roots of z^2 + a1 z + a2).
  std::pair<double, double> pole_magnitudes() const;
};

struct BiquadCascade {
  std::vector<Biquad> sections;
  std::string description;

  // Complex frequency response at normalized angular frequency omega
  // (radians/sample).
  std::complex<double> response(double omega) const;
  double gain_db(double freq_hz, double sample_rate_hz) const;
  bool stable() const;
};

BiquadCascade identity_cascade();

// Second-order Butterworth low-pass prototype mapped to a band-pass (fourth
// order overall, two sections) through the bilinear transform with
// pre-warped band edges. Unity gain at the geometric centre frequency.
BiquadCascade design_bandpass(double low_hz, double high_hz, double sample_rate_hz);

// Single-section notch with zeros on the unit circle at center_hz.
BiquadCascade design_notch(double center_hz, double sample_rate_hz, double quality = 30.0);

// Causal single-pass filtering of each channel, zero initial state.
TimeSeries filter_series(const BiquadCascade& filter, const TimeSeries& x,
                         Exec exec = Exec::parallel);

// In-place filtering of one channel.
void filter_channel(const BiquadCascade& filter, std::span<double> samples);

// The EEG preprocessing chain: 0.1-70 Hz band-pass followed by a 60 Hz notch.
struct EegPreprocessConfig {
  double bandpass_low_hz = 0.1;
  double bandpass_high_hz = 70.0;
  double notch_hz = 60.0;
  double notch_quality = 30.0;
};

TimeSeries preprocess_eeg(const TimeSeries& eeg, const EegPreprocessConfig& config = {},
                          Exec exec = Exec::parallel);

}  // namespace eegvad
