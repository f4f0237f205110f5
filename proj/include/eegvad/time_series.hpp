#pragma once

#include <Eigen/Core>
#include <span>
#include <string>
#include <vector>

namespace eegvad {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Uniformly sampled multichannel signal. Rows are channels, so each channel
// is contiguous in memory.
struct TimeSeries {
  RowMatrix data;
  double sample_rate_hz = 0.0;
  std::vector<std::string> channel_names;

  Eigen::Index channels() const { return data.rows(); }
  Eigen::Index samples() const { return data.cols(); }
  double duration_s() const { return static_cast<double>(samples()) / sample_rate_hz; }

  std::span<const double> channel(Eigen::Index c) const {
    return {data.row(c).data(), static_cast<std::size_t>(data.cols())};
  }
  std::span<double> channel(Eigen::Index c) {
    return {data.row(c).data(), static_cast<std::size_t>(data.cols())};
  }

  // Throws Error(invalid_argument / non_finite_input) when the invariants
  // (positive rate, finite values, one name per channel) do not hold.
  void validate() const;
};

// Builds a series with default channel names "ch0", "ch1", ...
TimeSeries make_series(RowMatrix data, double sample_rate_hz);

}  // namespace eegvad
