#include "eegvad/eeg_features.hpp"

#include <cmath>
#include <vector>

#include "eegvad/error.hpp"
#include "eegvad/framing.hpp"
#include "eegvad/spectrum.hpp"

namespace eegvad {

namespace {

void require_length(std::span<const double> w, std::size_t n, const char* what) {
  if (w.empty()) throw Error(Errc::empty_window, std::string(what) + " of an empty window");
  if (w.size() < n)
    throw Error(Errc::empty_window,
                std::string(what) + " needs at least " + std::to_string(n) + " samples");
}

}  // namespace

double rms(std::span<const double> window) {
  require_length(window, 1, "rms");
  double acc = 0.0;
  for (double v : window) acc += v * v;
  return std::sqrt(acc / static_cast<double>(window.size()));
}

double zero_crossing_rate(std::span<const double> window) {
  require_length(window, 2, "zero crossing rate");
  int prev_sign = 0;
  std::size_t changes = 0;
  for (double v : window) {
    const int s = (v > 0.0) - (v < 0.0);
    if (s == 0) continue;
    if (prev_sign != 0 && s != prev_sign) ++changes;
    prev_sign = s;
  }
  return static_cast<double>(changes) / static_cast<double>(window.size() - 1);
}

double moving_window_average(std::span<const double> window) {
  require_length(window, 1, "average");
  double acc = 0.0;
  for (double v : window) acc += v;
  return acc / static_cast<double>(window.size());
}

KurtosisResult kurtosis(std::span<const double> window) {
  require_length(window, 4, "kurtosis");
  const double n = static_cast<double>(window.size());
  const double mean = moving_window_average(window);
  double m2 = 0.0, m4 = 0.0, peak = 0.0;
  for (double v : window) {
    const double d = v - mean;
    const double d2 = d * d;
    m2 += d2;
    m4 += d2 * d2;
    peak = std::max(peak, std::abs(v));
  }
  m2 /= n;
  m4 /= n;
  // Constant windows leave only rounding residue in m2.
  const double floor = 1e-12 * peak;
  if (m2 <= floor * floor) return {0.0, true};
  return {m4 / (m2 * m2), false};
}

double power_spectral_entropy(std::span<const double> window) {
  require_length(window, 2, "power spectral entropy");
  thread_local std::vector<double> power;
  power_spectrum(window, window.size(), power);
  double total = 0.0;
  for (std::size_t k = 1; k < power.size(); ++k) total += power[k];
  if (!(total > 0.0)) return 0.0;
  double h = 0.0;
  for (std::size_t k = 1; k < power.size(); ++k) {
    const double p = power[k] / total;
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

namespace {

std::size_t extract_frame(const TimeSeries& eeg, const Framing& framing, std::size_t k,
                          double* row) {
  std::size_t degenerate = 0;
  for (Eigen::Index c = 0; c < eeg.channels(); ++c) {
    const auto w = framing.slice(eeg, c, k);
    double* out = row + c * kEegFeaturesPerChannel;
    out[0] = rms(w);
    out[1] = zero_crossing_rate(w);
    out[2] = moving_window_average(w);
    const KurtosisResult kurt = kurtosis(w);
    out[3] = kurt.value;
    degenerate += kurt.zero_variance ? 1 : 0;
    out[4] = power_spectral_entropy(w);
  }
  return degenerate;
}

}  // namespace

FrameSequence extract_eeg_features(const TimeSeries& eeg, const EegFeatureConfig& config,
                                   Exec exec, EegFeatureStats* stats) {
  const Framing framing = frame_signal(eeg, config.frame_rate_hz, config.window_s);
  if (framing.window < 4)
    throw Error(Errc::empty_window, "EEG feature window needs at least 4 samples");

  FrameSequence out;
  out.frame_rate_hz = config.frame_rate_hz;
  out.layout = kEegFeatureLayout;
  const auto count = static_cast<Eigen::Index>(framing.count);
  out.values.resize(count, eeg.channels() * kEegFeaturesPerChannel);

  std::size_t degenerate = 0;
  if (exec == Exec::parallel) {
#pragma omp parallel for schedule(static) reduction(+ : degenerate)
    for (Eigen::Index k = 0; k < count; ++k)
      degenerate += extract_frame(eeg, framing, static_cast<std::size_t>(k), out.values.row(k).data());
  } else {
    for (Eigen::Index k = 0; k < count; ++k)
      degenerate += extract_frame(eeg, framing, static_cast<std::size_t>(k), out.values.row(k).data());
  }
  if (stats) stats->zero_variance_windows = degenerate;
  return out;
}

}  // namespace eegvad
