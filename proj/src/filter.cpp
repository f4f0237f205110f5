#include "eegvad/filter.hpp"

#include <cmath>
#include <numbers>

#include "eegvad/error.hpp"

namespace eegvad {

using cplx = std::complex<double>;

cplx Biquad::response(double omega) const {
  const cplx z1 = std::polar(1.0, -omega);
  const cplx z2 = z1 * z1;
  return (b0 + b1 * z1 + b2 * z2) / (1.0 + a1 * z1 + a2 * z2);
}

std::pair<double, double> Biquad::pole_magnitudes() const {
  const cplx disc = std::sqrt(cplx(a1 * a1 - 4.0 * a2, 0.0));
  const cplx p1 = (-a1 + disc) / 2.0;
  const cplx p2 = (-a1 - disc) / 2.0;
  return {std::abs(p1), std::abs(p2)};
}

cplx BiquadCascade::response(double omega) const {
  cplx h = 1.0;
  for (const auto& s : sections) h *= s.response(omega);
  return h;
}

double BiquadCascade::gain_db(double freq_hz, double sample_rate_hz) const {
  const double omega = 2.0 * std::numbers::pi * freq_hz / sample_rate_hz;
  return 20.0 * std::log10(std::abs(response(omega)));
}

bool BiquadCascade::stable() const {
  if (sections.empty()) return false;
  for (const auto& s : sections) {
    auto [m1, m2] = s.pole_magnitudes();
    if (!(m1 < 1.0) || !(m2 < 1.0)) return false;
  }
  return true;
}

BiquadCascade identity_cascade() { return {{Biquad{}}, "identity"}; }

namespace {

// Conjugate pole pair at z, zeros at +1 and -1.
Biquad bandpass_section(cplx z) {
  Biquad s;
  s.b0 = 1.0;
  s.b1 = 0.0;
  s.b2 = -1.0;
  s.a1 = -2.0 * z.real();
  s.a2 = std::norm(z);
  return s;
}

}  // namespace

BiquadCascade design_bandpass(double low_hz, double high_hz, double sample_rate_hz) {
  if (!(low_hz > 0.0 && low_hz < high_hz && high_hz < sample_rate_hz / 2.0))
    throw Error(Errc::invalid_cutoffs, "need 0 < low < high < fs/2, got low=" +
                                           std::to_string(low_hz) +
                                           " high=" + std::to_string(high_hz));
  const double pi = std::numbers::pi;
  const double k = 2.0 * sample_rate_hz;
  const double w1 = k * std::tan(pi * low_hz / sample_rate_hz);
  const double w2 = k * std::tan(pi * high_hz / sample_rate_hz);
  const double w0_sq = w1 * w2;
  const double bw = w2 - w1;

  // Upper-half-plane pole of the 2nd-order Butterworth prototype; its
  // conjugate yields the conjugate band-pass poles.
  const cplx proto = std::polar(1.0, 3.0 * pi / 4.0);
  // Each prototype pole p maps to the roots of s^2 - p*bw*s + w0^2.
  const cplx disc = std::sqrt(proto * proto * bw * bw - 4.0 * w0_sq);
  cplx s_a = (proto * bw + disc) / 2.0;
  cplx s_b = (proto * bw - disc) / 2.0;
  // The small root loses precision when w0 << bw; recover it from the
  // product of the roots.
  if (std::abs(s_a) >= std::abs(s_b))
    s_b = w0_sq / s_a;
  else
    s_a = w0_sq / s_b;

  auto bilinear = [k](cplx s) { return (k + s) / (k - s); };

  BiquadCascade out;
  out.description = "butterworth-bandpass order=4 low=" + std::to_string(low_hz) +
                    " high=" + std::to_string(high_hz) + " fs=" + std::to_string(sample_rate_hz);
  const double omega0 = 2.0 * std::atan(std::sqrt(w0_sq) / k);
  for (cplx s : {s_a, s_b}) {
    Biquad sec = bandpass_section(bilinear(s));
    const double g = std::abs(sec.response(omega0));
    sec.b0 /= g;
    sec.b1 /= g;
    sec.b2 /= g;
    out.sections.push_back(sec);
  }
  return out;
}

BiquadCascade design_notch(double center_hz, double sample_rate_hz, double quality) {
  if (!(center_hz > 0.0 && center_hz < sample_rate_hz / 2.0))
    throw Error(Errc::invalid_center, "need 0 < center < fs/2, got " + std::to_string(center_hz));
  if (!(quality > 0.0)) throw Error(Errc::invalid_argument, "notch quality must be positive");
  const double w0 = 2.0 * std::numbers::pi * center_hz / sample_rate_hz;
  const double alpha = std::sin(w0) / (2.0 * quality);
  const double a0 = 1.0 + alpha;
  Biquad s;
  s.b0 = 1.0 / a0;
  s.b1 = -2.0 * std::cos(w0) / a0;
  s.b2 = 1.0 / a0;
  s.a1 = -2.0 * std::cos(w0) / a0;
  s.a2 = (1.0 - alpha) / a0;
  return {{s}, "notch center=" + std::to_string(center_hz) + " q=" + std::to_string(quality)};
}

void filter_channel(const BiquadCascade& filter, std::span<double> x) {
  // Transposed direct form II, zero initial state.
  for (const Biquad& s : filter.sections) {
    double z1 = 0.0, z2 = 0.0;
    for (double& v : x) {
      const double in = v;
      const double out = s.b0 * in + z1;
      z1 = s.b1 * in - s.a1 * out + z2;
      z2 = s.b2 * in - s.a2 * out;
      v = out;
    }
  }
}

TimeSeries filter_series(const BiquadCascade& filter, const TimeSeries& x, Exec exec) {
  if (x.channels() == 0 || x.samples() == 0)
    throw Error(Errc::invalid_argument, "cannot filter an empty series");
  TimeSeries y = x;
  const Eigen::Index channels = y.channels();
  if (exec == Exec::parallel) {
#pragma omp parallel for schedule(static)
    for (Eigen::Index c = 0; c < channels; ++c) filter_channel(filter, y.channel(c));
  } else {
    for (Eigen::Index c = 0; c < channels; ++c) filter_channel(filter, y.channel(c));
  }
  if (!y.data.allFinite())
    throw Error(Errc::non_finite_output, "filter produced non-finite samples (" +
                                             filter.description + ")");
  return y;
}

TimeSeries preprocess_eeg(const TimeSeries& eeg, const EegPreprocessConfig& config, Exec exec) {
  BiquadCascade chain =
      design_bandpass(config.bandpass_low_hz, config.bandpass_high_hz, eeg.sample_rate_hz);
  const BiquadCascade notch = design_notch(config.notch_hz, eeg.sample_rate_hz, config.notch_quality);
  chain.sections.insert(chain.sections.end(), notch.sections.begin(), notch.sections.end());
  chain.description += " + " + notch.description;
  return filter_series(chain, eeg, exec);
}

}  // namespace eegvad
