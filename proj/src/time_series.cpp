#include "eegvad/time_series.hpp"

#include <cmath>

#include "eegvad/error.hpp"

namespace eegvad {

void TimeSeries::validate() const {
  if (!(sample_rate_hz > 0.0) || !std::isfinite(sample_rate_hz))
    throw Error(Errc::invalid_argument, "sample rate must be positive");
  if (static_cast<Eigen::Index>(channel_names.size()) != channels())
    throw Error(Errc::invalid_argument, "expected one name per channel");
  if (!data.allFinite()) throw Error(Errc::non_finite_input, "signal contains non-finite samples");
}

TimeSeries make_series(RowMatrix data, double sample_rate_hz) {
  TimeSeries ts;
  ts.channel_names.reserve(static_cast<std::size_t>(data.rows()));
  for (Eigen::Index c = 0; c < data.rows(); ++c) ts.channel_names.push_back("ch" + std::to_string(c));
  ts.data = std::move(data);
  ts.sample_rate_hz = sample_rate_hz;
  return ts;
}

}  // namespace eegvad
