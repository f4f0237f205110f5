#pragma once

#include <span>
#include <vector>

namespace eegvad {

// |X_k|^2 for k = 0..n/2 of the real DFT of `input` zero-padded (or
// truncated) to `fft_size`. Backed by FFTW; plans are cached per size and
// safe to use from concurrent threads.
void power_spectrum(std::span<const double> input, std::size_t fft_size,
                    std::vector<double>& out);

}  // namespace eegvad
