#pragma once

#include "eegvad/exec.hpp"
#include "eegvad/frame_sequence.hpp"
#include "eegvad/time_series.hpp"

namespace eegvad {

struct MfccConfig {
  int n_coeffs = 13;
  int n_mel_filters = 26;
  double window_s = 0.025;
  double hop_s = 0.01;
  int fft_size = 512;
  double preemphasis = 0.97;
  double fmin_hz = 0.0;
  double fmax_hz = 8000.0;
  double sample_rate_hz = 16000.0;
  double log_floor = 1e-10;

  int window_samples() const;
  int hop_samples() const;
  // Throws invalid_config.
  void validate() const;
};

double hz_to_mel(double hz);
double mel_to_hz(double mel);

// n_mel_filters x (fft_size/2 + 1) triangular filters with centres
// equally spaced on the mel scale.
RowMatrix mel_filterbank(const MfccConfig& config);

// Centre frequency (Hz) of each mel filter.
std::vector<double> mel_centers_hz(const MfccConfig& config);

// Orthonormal DCT-II matrix, rows are basis vectors (n x n).
RowMatrix dct2_matrix(int n);

// Pre-emphasis, Hann window, power spectrum, mel energies, log with floor,
// orthonormal DCT-II; keeps the first n_coeffs coefficients.
FrameSequence extract_mfcc(const TimeSeries& audio, const MfccConfig& config = {},
                           Exec exec = Exec::parallel);

}  // namespace eegvad
