#include "eegvad/mfcc.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "eegvad/error.hpp"
#include "eegvad/framing.hpp"
#include "eegvad/spectrum.hpp"

namespace eegvad {

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

int MfccConfig::window_samples() const {
  return static_cast<int>(std::lround(window_s * sample_rate_hz));
}
int MfccConfig::hop_samples() const { return static_cast<int>(std::lround(hop_s * sample_rate_hz)); }

void MfccConfig::validate() const {
  auto bad = [](const std::string& why) { return Error(Errc::invalid_config, "mfcc: " + why); };
  if (n_coeffs < 1 || n_mel_filters < 1) throw bad("coefficient and filter counts must be positive");
  if (n_coeffs > n_mel_filters) throw bad("n_coeffs exceeds n_mel_filters");
  if (!(sample_rate_hz > 0.0) || !(window_s > 0.0) || !(hop_s > 0.0)) throw bad("non-positive timing");
  if (fft_size < window_samples()) throw bad("fft_size smaller than the window");
  if (!(fmin_hz >= 0.0 && fmin_hz < fmax_hz && fmax_hz <= sample_rate_hz / 2.0))
    throw bad("need 0 <= fmin < fmax <= fs/2");
  if (!(preemphasis >= 0.0 && preemphasis < 1.0)) throw bad("pre-emphasis outside [0, 1)");
  if (!(log_floor > 0.0)) throw bad("log floor must be positive");
}

std::vector<double> mel_centers_hz(const MfccConfig& config) {
  const double lo = hz_to_mel(config.fmin_hz);
  const double hi = hz_to_mel(config.fmax_hz);
  std::vector<double> centers(static_cast<std::size_t>(config.n_mel_filters));
  for (int m = 0; m < config.n_mel_filters; ++m)
    centers[static_cast<std::size_t>(m)] = mel_to_hz(lo + (hi - lo) * (m + 1) / (config.n_mel_filters + 1));
  return centers;
}

RowMatrix mel_filterbank(const MfccConfig& config) {
  config.validate();
  const int bins = config.fft_size / 2 + 1;
  const double lo = hz_to_mel(config.fmin_hz);
  const double hi = hz_to_mel(config.fmax_hz);
  const int n = config.n_mel_filters;
  std::vector<double> edges(static_cast<std::size_t>(n + 2));
  for (int i = 0; i < n + 2; ++i) edges[static_cast<std::size_t>(i)] = mel_to_hz(lo + (hi - lo) * i / (n + 1));

  RowMatrix fb = RowMatrix::Zero(n, bins);
  for (int m = 0; m < n; ++m) {
    const double left = edges[static_cast<std::size_t>(m)];
    const double center = edges[static_cast<std::size_t>(m + 1)];
    const double right = edges[static_cast<std::size_t>(m + 2)];
    for (int k = 0; k < bins; ++k) {
      const double f = k * config.sample_rate_hz / config.fft_size;
      double w = 0.0;
      if (f > left && f <= center)
        w = (f - left) / (center - left);
      else if (f > center && f < right)
        w = (right - f) / (right - center);
      fb(m, k) = w;
    }
    if (fb.row(m).maxCoeff() <= 0.0)
      throw Error(Errc::invalid_config,
                  "mel filter " + std::to_string(m) + " covers no FFT bin; use fewer filters");
  }
  return fb;
}

RowMatrix dct2_matrix(int n) {
  RowMatrix c(n, n);
  for (int k = 0; k < n; ++k) {
    const double s = k == 0 ? std::sqrt(1.0 / n) : std::sqrt(2.0 / n);
    for (int i = 0; i < n; ++i) c(k, i) = s * std::cos(std::numbers::pi * k * (2 * i + 1) / (2.0 * n));
  }
  return c;
}

FrameSequence extract_mfcc(const TimeSeries& audio, const MfccConfig& config, Exec exec) {
  config.validate();
  if (audio.channels() != 1)
    throw Error(Errc::multichannel_audio,
                "MFCC expects mono audio, got " + std::to_string(audio.channels()) + " channels");
  if (std::abs(audio.sample_rate_hz - config.sample_rate_hz) > 1e-9)
    throw Error(Errc::rate_mismatch, "audio at " + std::to_string(audio.sample_rate_hz) +
                                         " Hz, config expects " +
                                         std::to_string(config.sample_rate_hz));

  const Framing framing = frame_signal(audio, 1.0 / config.hop_s, config.window_s);
  const RowMatrix fb = mel_filterbank(config);
  const RowMatrix dct = dct2_matrix(config.n_mel_filters).topRows(config.n_coeffs);

  const auto x = audio.channel(0);
  std::vector<double> emphasized(x.size());
  for (std::size_t i = 0; i < x.size(); ++i)
    emphasized[i] = x[i] - (i > 0 ? config.preemphasis * x[i - 1] : 0.0);

  std::vector<double> hann(framing.window);
  for (std::size_t i = 0; i < framing.window; ++i)
    hann[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / (framing.window - 1));

  FrameSequence out;
  out.frame_rate_hz = 1.0 / config.hop_s;
  out.layout = "mfcc:" + std::to_string(config.n_coeffs);
  const auto count = static_cast<Eigen::Index>(framing.count);
  out.values.resize(count, config.n_coeffs);

  auto one_frame = [&](Eigen::Index k) {
    thread_local std::vector<double> frame, power;
    frame.resize(framing.window);
    const std::size_t start = framing.start(static_cast<std::size_t>(k));
    for (std::size_t i = 0; i < framing.window; ++i) frame[i] = emphasized[start + i] * hann[i];
    power_spectrum(frame, static_cast<std::size_t>(config.fft_size), power);
    const Eigen::Map<const Eigen::VectorXd> p(power.data(), static_cast<Eigen::Index>(power.size()));
    Eigen::VectorXd mel = fb * p;
    for (Eigen::Index m = 0; m < mel.size(); ++m) mel(m) = std::log(std::max(mel(m), config.log_floor));
    out.values.row(k) = (dct * mel).transpose();
  };

  if (exec == Exec::parallel) {
#pragma omp parallel for schedule(static)
    for (Eigen::Index k = 0; k < count; ++k) one_frame(k);
  } else {
    for (Eigen::Index k = 0; k < count; ++k) one_frame(k);
  }
  return out;
}

}  // namespace eegvad
