#pragma once

#include <cstddef>
#include <span>

#include "eegvad/time_series.hpp"

namespace eegvad {

// Fixed-rate sliding windows over a signal. Frame k covers samples
// [k*hop, k*hop + window); frames overrunning the end are dropped.
struct Framing {
  std::size_t hop = 0;
  std::size_t window = 0;
  std::size_t count = 0;

  std::size_t start(std::size_t k) const { return k * hop; }

  std::span<const double> slice(const TimeSeries& x, Eigen::Index channel, std::size_t k) const {
    return x.channel(channel).subspan(start(k), window);
  }
};

// Throws incompatible_rates when sample_rate / frame_rate is not an integer,
// invalid_argument when the window is shorter than two samples.
Framing frame_signal(const TimeSeries& x, double frame_rate_hz, double window_s);
Framing frame_signal(std::size_t samples, double sample_rate_hz, double frame_rate_hz,
                     double window_s);

}  // namespace eegvad
