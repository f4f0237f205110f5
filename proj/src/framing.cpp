#include "eegvad/framing.hpp"

#include <cmath>

#include "eegvad/error.hpp"

namespace eegvad {

Framing frame_signal(std::size_t samples, double sample_rate_hz, double frame_rate_hz,
                     double window_s) {
  if (!(frame_rate_hz > 0.0) || !(window_s > 0.0) || !(sample_rate_hz > 0.0))
    throw Error(Errc::invalid_argument, "rates and window must be positive");
  const double hop = sample_rate_hz / frame_rate_hz;
  const double hop_rounded = std::round(hop);
  if (hop_rounded < 1.0 || std::abs(hop - hop_rounded) > 1e-9 * hop)
    throw Error(Errc::incompatible_rates, "hop of " + std::to_string(hop) +
                                              " samples is not a positive integer");
  const double window = std::round(window_s * sample_rate_hz);
  if (window < 2.0) throw Error(Errc::invalid_argument, "window shorter than two samples");

  Framing f;
  f.hop = static_cast<std::size_t>(hop_rounded);
  f.window = static_cast<std::size_t>(window);
  f.count = samples < f.window ? 0 : (samples - f.window) / f.hop + 1;
  return f;
}

Framing frame_signal(const TimeSeries& x, double frame_rate_hz, double window_s) {
  return frame_signal(static_cast<std::size_t>(x.samples()), x.sample_rate_hz, frame_rate_hz,
                      window_s);
}

}  // namespace eegvad
