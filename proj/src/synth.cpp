#include "eegvad/synth.hpp"

#include <cmath>
#include <numbers>

#include "eegvad/error.hpp"
#include "eegvad/io.hpp"
#include "eegvad/models.hpp"

namespace eegvad {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kSpeechPower = 0.01;  // clean speech RMS 0.1
constexpr double kEegScale = 10.0;
constexpr double kSegmentLevelDb[2] = {-18.0, 6.0};

enum StreamTag : std::uint64_t { kActivity = 1, kAudio = 2, kEeg = 3, kLayout = 4 };

std::size_t samples_per_label(double rate_hz) {
  return static_cast<std::size_t>(std::lround(rate_hz / kLabelRateHz));
}

std::vector<std::pair<std::size_t, std::size_t>> runs(const std::vector<std::uint8_t>& a) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  std::size_t i = 0;
  while (i < a.size()) {
    if (!a[i]) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < a.size() && a[j]) ++j;
    out.emplace_back(i, j);
    i = j;
  }
  return out;
}

bool finite_or_inf(double v) { return !std::isnan(v); }

// Sum of three leaky integrators driven by white noise, roughly 1/f over
// the EEG band, normalized to unit variance.
std::vector<double> pinkish_noise(std::size_t n, Rng& rng) {
  const std::size_t warmup = 2000;
  std::vector<double> out(n);
  double b0 = 0.0, b1 = 0.0, b2 = 0.0;
  for (std::size_t i = 0; i < n + warmup; ++i) {
    const double w = gaussian(rng);
    b0 = 0.99765 * b0 + w * 0.0990460;
    b1 = 0.96300 * b1 + w * 0.2965164;
    b2 = 0.57000 * b2 + w * 1.0526913;
    if (i >= warmup) out[i - warmup] = b0 + b1 + b2 + w * 0.1848;
  }
  double mean = 0.0;
  for (double v : out) mean += v;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double& v : out) {
    v -= mean;
    var += v * v;
  }
  const double s = var > 0.0 ? std::sqrt(static_cast<double>(n) / var) : 1.0;
  for (double& v : out) v *= s;
  return out;
}

std::vector<std::uint8_t> parse_activity(const std::string& s) {
  std::vector<std::uint8_t> a(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '0' && s[i] != '1') throw Error(Errc::format_error, "activity string must be 0/1");
    a[i] = s[i] == '1';
  }
  return a;
}

nlohmann::json snr_json(double v) {
  return std::isinf(v) ? nlohmann::json("inf") : nlohmann::json(v);
}

double snr_from_json(const nlohmann::json& j) {
  if (j.is_string()) {
    if (j.get<std::string>() == "inf") return std::numeric_limits<double>::infinity();
    throw Error(Errc::format_error, "SNR must be a number or \"inf\"");
  }
  return j.get<double>();
}

}  // namespace

void CorpusSpec::validate() const {
  auto bad = [](const std::string& why) { return Error(Errc::invalid_config, "corpus: " + why); };
  if (n_sequences < 1) throw bad("n_sequences must be positive");
  if (!(duration_s >= 0.1)) throw bad("duration must be at least 0.1 s");
  if (eeg_channels < 1) throw bad("need at least one EEG channel");
  if (!(speech_duty > 0.0 && speech_duty < 1.0)) throw bad("speech_duty must lie in (0, 1)");
  if (!(mean_segment_s > 0.0)) throw bad("mean_segment_s must be positive");
  if (!finite_or_inf(acoustic_snr_db) || !finite_or_inf(eeg_snr_db)) throw bad("SNR is NaN");
  for (double r : {eeg_rate_hz, audio_rate_hz}) {
    const double per = r / kLabelRateHz;
    if (!(r > 0.0) || std::abs(per - std::round(per)) > 1e-9)
      throw bad("sample rates must be integer multiples of 100 Hz");
  }
}

nlohmann::json CorpusSpec::to_json() const {
  return {{"n_sequences", n_sequences},       {"duration_s", duration_s},
          {"eeg_channels", eeg_channels},     {"eeg_rate_hz", eeg_rate_hz},
          {"audio_rate_hz", audio_rate_hz},   {"speech_duty", speech_duty},
          {"mean_segment_s", mean_segment_s}, {"acoustic_snr_db", snr_json(acoustic_snr_db)},
          {"eeg_snr_db", snr_json(eeg_snr_db)}, {"seed", seed}};
}

CorpusSpec CorpusSpec::from_json(const nlohmann::json& j) {
  CorpusSpec s;
  s.n_sequences = j.value("n_sequences", s.n_sequences);
  s.duration_s = j.value("duration_s", s.duration_s);
  s.eeg_channels = j.value("eeg_channels", s.eeg_channels);
  s.eeg_rate_hz = j.value("eeg_rate_hz", s.eeg_rate_hz);
  s.audio_rate_hz = j.value("audio_rate_hz", s.audio_rate_hz);
  s.speech_duty = j.value("speech_duty", s.speech_duty);
  s.mean_segment_s = j.value("mean_segment_s", s.mean_segment_s);
  if (j.contains("acoustic_snr_db")) s.acoustic_snr_db = snr_from_json(j["acoustic_snr_db"]);
  if (j.contains("eeg_snr_db")) s.eeg_snr_db = snr_from_json(j["eeg_snr_db"]);
  s.seed = j.value("seed", s.seed);
  return s;
}

std::vector<std::uint8_t> generate_activity(const CorpusSpec& spec, Rng& rng) {
  const auto n = static_cast<std::size_t>(std::floor(spec.duration_s * kLabelRateHz + 1e-9));
  const double speech_len = std::max(1.0, spec.mean_segment_s * kLabelRateHz);
  const double silence_len = std::max(1.0, speech_len * (1.0 - spec.speech_duty) / spec.speech_duty);
  const double leave_speech = 1.0 / speech_len;
  const double leave_silence = 1.0 / silence_len;

  std::vector<std::uint8_t> a(n);
  for (int attempt = 0; attempt < 1000; ++attempt) {
    bool state = uniform01(rng) < spec.speech_duty;
    bool seen_speech = false, seen_silence = false;
    for (std::size_t k = 0; k < n; ++k) {
      a[k] = state;
      seen_speech |= state;
      seen_silence |= !state;
      if (uniform01(rng) < (state ? leave_speech : leave_silence)) state = !state;
    }
    if (seen_speech && seen_silence) return a;
  }
  // Extreme duty cycles: force one segment of each kind.
  const bool majority = spec.speech_duty >= 0.5;
  std::fill(a.begin(), a.end(), static_cast<std::uint8_t>(majority));
  const std::size_t len = std::max<std::size_t>(1, std::min(n / 2, static_cast<std::size_t>(speech_len)));
  std::fill(a.begin() + static_cast<std::ptrdiff_t>(n / 2 - len / 2),
            a.begin() + static_cast<std::ptrdiff_t>(n / 2 - len / 2 + len),
            static_cast<std::uint8_t>(!majority));
  return a;
}

TimeSeries render_audio(const std::vector<std::uint8_t>& activity, const CorpusSpec& spec,
                        std::uint64_t stream_seed) {
  if (activity.empty()) throw Error(Errc::invalid_argument, "empty activity sequence");
  const double fs = spec.audio_rate_hz;
  const std::size_t per = samples_per_label(fs);
  const std::size_t n = activity.size() * per;
  RowMatrix data = RowMatrix::Zero(1, static_cast<Eigen::Index>(n));
  double* x = data.data();

  Rng speech_rng = derive_rng(stream_seed, {1});
  const std::size_t ramp = static_cast<std::size_t>(0.005 * fs);
  double power = 0.0;
  std::size_t speech_samples = 0;
  for (auto [a, b] : runs(activity)) {
    const double f0 = uniform(speech_rng, 100.0, 250.0);
    const double vibrato_rate = uniform(speech_rng, 0.5, 1.5);
    const double vibrato_phase = uniform(speech_rng, 0.0, kTwoPi);
    const double am_rate = uniform(speech_rng, 3.0, 6.0);
    const double am_phase = uniform(speech_rng, 0.0, kTwoPi);
    // Talkers vary in level from one segment to the next.
    const double level = std::pow(10.0, uniform(speech_rng, kSegmentLevelDb[0], kSegmentLevelDb[1]) / 20.0);
    double harmonic_phase[5];
    for (double& p : harmonic_phase) p = uniform(speech_rng, 0.0, kTwoPi);

    const std::size_t s0 = a * per, s1 = b * per, len = s1 - s0;
    double phase = 0.0;
    for (std::size_t i = 0; i < len; ++i) {
      const double t = static_cast<double>(i) / fs;
      const double f = f0 * (1.0 + 0.05 * std::sin(kTwoPi * vibrato_rate * t + vibrato_phase));
      phase += kTwoPi * f / fs;
      const double am = 0.55 - 0.45 * std::cos(kTwoPi * am_rate * t + am_phase);
      double edge = 1.0;
      const std::size_t from_end = len - 1 - i;
      if (i < ramp) edge = 0.5 - 0.5 * std::cos(std::numbers::pi * static_cast<double>(i) / ramp);
      if (from_end < ramp)
        edge = std::min(edge, 0.5 - 0.5 * std::cos(std::numbers::pi * static_cast<double>(from_end) / ramp));
      double v = 0.0;
      for (int k = 1; k <= 5; ++k) v += std::sin(k * phase + harmonic_phase[k - 1]) / k;
      x[s0 + i] = level * edge * am * v;
      power += x[s0 + i] * x[s0 + i];
    }
    speech_samples += len;
  }
  if (speech_samples > 0 && power > 0.0) {
    const double scale = std::sqrt(kSpeechPower * static_cast<double>(speech_samples) / power);
    for (std::size_t i = 0; i < n; ++i) x[i] *= scale;
  }

  if (std::isfinite(spec.acoustic_snr_db)) {
    Rng noise_rng = derive_rng(stream_seed, {2});
      const double sigma = std::sqrt(kSpeechPower / std::pow(10.0, spec.acoustic_snr_db / 10.0));
    for (std::size_t i = 0; i < n; ++i) x[i] += sigma * gaussian(noise_rng);
  }
  TimeSeries ts = make_series(std::move(data), fs);
  ts.channel_names = {"mic"};
  return ts;
}

std::vector<double> activity_envelope(const std::vector<std::uint8_t>& activity, double rate_hz,
                                      double smoothing_s) {
  const std::size_t per = samples_per_label(rate_hz);
  const std::size_t n = activity.size() * per;
  std::vector<double> prefix(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + (activity[i / per] ? 1.0 : 0.0);
  const auto half = static_cast<std::ptrdiff_t>(std::lround(smoothing_s * rate_hz / 2.0));
  std::vector<double> env(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto lo = std::max<std::ptrdiff_t>(0, static_cast<std::ptrdiff_t>(i) - half);
    const auto hi = std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(n), static_cast<std::ptrdiff_t>(i) + half + 1);
    env[i] = hi > lo ? (prefix[static_cast<std::size_t>(hi)] - prefix[static_cast<std::size_t>(lo)]) /
                           static_cast<double>(hi - lo)
                     : 0.0;
  }
  return env;
}

namespace {

struct EegRender {
  TimeSeries eeg;
  double background_sigma = 0.0;
};

EegRender render_eeg_impl(const std::vector<std::uint8_t>& activity, const CorpusSpec& spec,
                          std::uint64_t stream_seed) {
  if (activity.empty()) throw Error(Errc::invalid_argument, "empty activity sequence");
  const double fs = spec.eeg_rate_hz;
  const std::size_t n = activity.size() * samples_per_label(fs);
  const auto channels = static_cast<Eigen::Index>(spec.eeg_channels);
  const std::vector<double> env = activity_envelope(activity, fs);

  Rng layout_rng = derive_rng(stream_seed, {0});
  std::vector<double> gain(static_cast<std::size_t>(channels)), freq(gain.size()), phase(gain.size()),
      hum_phase(gain.size());
  double mean_power = 0.0;
  for (std::size_t c = 0; c < gain.size(); ++c) {
    gain[c] = uniform(layout_rng, 0.5, 1.5);
    freq[c] = uniform(layout_rng, 4.0, 30.0);
    phase[c] = uniform(layout_rng, 0.0, kTwoPi);
    hum_phase[c] = uniform(layout_rng, 0.0, kTwoPi);
    mean_power += gain[c] * gain[c];
  }
  mean_power /= static_cast<double>(gain.size());
  const double sigma = std::isfinite(spec.eeg_snr_db)
                           ? std::sqrt(mean_power / std::pow(10.0, spec.eeg_snr_db / 10.0))
                           : 0.0;

  RowMatrix data(channels, static_cast<Eigen::Index>(n));
  for (Eigen::Index c = 0; c < channels; ++c) {
    const auto ci = static_cast<std::size_t>(c);
    Rng noise_rng = derive_rng(stream_seed, {1, ci});
    const std::vector<double> background = pinkish_noise(n, noise_rng);
    for (std::size_t i = 0; i < n; ++i) {
      const double t = static_cast<double>(i) / fs;
      const double evoked = gain[ci] * env[i] * std::numbers::sqrt2 * std::sin(kTwoPi * freq[ci] * t + phase[ci]);
      const double hum = 0.5 * sigma * std::sin(kTwoPi * 60.0 * t + hum_phase[ci]);
      data(c, static_cast<Eigen::Index>(i)) = kEegScale * (sigma * background[i] + evoked + hum);
    }
  }
  EegRender out{make_series(std::move(data), fs), sigma};
  return out;
}

}  // namespace

TimeSeries render_eeg(const std::vector<std::uint8_t>& activity, const CorpusSpec& spec,
                      std::uint64_t stream_seed) {
  return render_eeg_impl(activity, spec, stream_seed).eeg;
}

namespace {

std::uint64_t stream_seed(std::uint64_t seed, int index, StreamTag tag) {
  return derive_rng(seed, {static_cast<std::uint64_t>(index), tag})();
}

std::string sequence_id(const char* prefix, int index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s%04d", prefix, index);
  return buf;
}

}  // namespace

PairedSequence generate_sequence(const CorpusSpec& spec, int index) {
  spec.validate();
  PairedSequence s;
  s.id = sequence_id("seq", index);
  Rng activity_rng = derive_rng(spec.seed, {static_cast<std::uint64_t>(index), kActivity});
  s.activity = generate_activity(spec, activity_rng);
  s.audio = render_audio(s.activity, spec, stream_seed(spec.seed, index, kAudio));
  s.eeg = render_eeg(s.activity, spec, stream_seed(spec.seed, index, kEeg));
  return s;
}

std::vector<PairedSequence> generate_corpus(const CorpusSpec& spec, Exec exec) {
  spec.validate();
  std::vector<PairedSequence> out(static_cast<std::size_t>(spec.n_sequences));
  for_each_index(spec.n_sequences, exec, [&](std::ptrdiff_t i) {
    out[static_cast<std::size_t>(i)] = generate_sequence(spec, static_cast<int>(i));
  });
  return out;
}

// ---------------------------------------------------------------------------

nlohmann::json ContinuationSpec::to_json() const {
  return {{"kind", "continuation"},
          {"per_class", per_class},
          {"eeg_channels", eeg_channels},
          {"eeg_rate_hz", eeg_rate_hz},
          {"audio_rate_hz", audio_rate_hz},
          {"acoustic_snr_db", snr_json(acoustic_snr_db)},
          {"eeg_snr_db", snr_json(eeg_snr_db)},
          {"pause_s", pause_s},
          {"seed", seed}};
}

ContinuationSpec ContinuationSpec::from_json(const nlohmann::json& j) {
  ContinuationSpec s;
  s.per_class = j.value("per_class", s.per_class);
  s.eeg_channels = j.value("eeg_channels", s.eeg_channels);
  s.eeg_rate_hz = j.value("eeg_rate_hz", s.eeg_rate_hz);
  s.audio_rate_hz = j.value("audio_rate_hz", s.audio_rate_hz);
  if (j.contains("acoustic_snr_db")) s.acoustic_snr_db = snr_from_json(j["acoustic_snr_db"]);
  if (j.contains("eeg_snr_db")) s.eeg_snr_db = snr_from_json(j["eeg_snr_db"]);
  s.pause_s = j.value("pause_s", s.pause_s);
  s.seed = j.value("seed", s.seed);
  return s;
}

namespace {

constexpr double kClassRhythmHz[4] = {7.0, 11.0, 17.0, 25.0};

void append(std::vector<std::uint8_t>& a, double seconds, bool speech) {
  const auto n = static_cast<std::size_t>(std::lround(seconds * kLabelRateHz));
  a.insert(a.end(), n, static_cast<std::uint8_t>(speech));
}

PairedSequence continuation_sequence(const ContinuationSpec& spec, int index, int cls) {
  Rng rng = derive_rng(spec.seed, {static_cast<std::uint64_t>(index), 10});
  std::vector<std::uint8_t> a;
  append(a, uniform(rng, 0.2, 0.4), false);
  // Prefix: three words separated by short gaps.
  for (int w = 0; w < 3; ++w) {
    if (w > 0) append(a, uniform(rng, 0.05, 0.12), false);
    append(a, uniform(rng, 0.3, 0.45), true);
  }
  const std::size_t prefix_end = a.size();
  const auto u = static_cast<Utterance>(cls);
  if (u == Utterance::tomorrow || u == Utterance::today) {
    append(a, spec.pause_s, false);
    append(a, uniform(rng, 0.4, 0.7), true);
  } else if (u == Utterance::macroni) {
    append(a, uniform(rng, 0.05, 0.12), false);
    append(a, uniform(rng, 0.4, 0.7), true);
  }
  append(a, uniform(rng, 0.2, 0.4), false);

  CorpusSpec base;
  base.eeg_channels = spec.eeg_channels;
  base.eeg_rate_hz = spec.eeg_rate_hz;
  base.audio_rate_hz = spec.audio_rate_hz;
  base.acoustic_snr_db = spec.acoustic_snr_db;
  base.eeg_snr_db = spec.eeg_snr_db;

  PairedSequence s;
  s.id = sequence_id("utt", index);
  s.sequence_label = cls;
  s.activity = a;
  s.audio = render_audio(a, base, stream_seed(spec.seed, index, kAudio));
  EegRender r = render_eeg_impl(a, base, stream_seed(spec.seed, index, kEeg));

  // Class rhythm from the end of the shared prefix to the end, with a
  // class-specific spatial pattern shared by all utterances of the class.
  std::vector<std::uint8_t> closing(a.size(), 0);
  std::fill(closing.begin() + static_cast<std::ptrdiff_t>(prefix_end), closing.end(), 1);
  const std::vector<double> env = activity_envelope(closing, spec.eeg_rate_hz);
  Rng pattern_rng = derive_rng(spec.seed, {static_cast<std::uint64_t>(cls), kLayout});
  Rng phase_rng = derive_rng(spec.seed, {static_cast<std::uint64_t>(index), 11});
  for (Eigen::Index c = 0; c < r.eeg.channels(); ++c) {
    const double g = uniform(pattern_rng, 0.2, 1.5);
    const double ph = uniform(phase_rng, 0.0, kTwoPi);
    for (Eigen::Index i = 0; i < r.eeg.samples(); ++i) {
      const double t = static_cast<double>(i) / spec.eeg_rate_hz;
      r.eeg.data(c, i) += kEegScale * g * env[static_cast<std::size_t>(i)] * std::numbers::sqrt2 *
                          std::sin(kTwoPi * kClassRhythmHz[cls] * t + ph);
    }
  }
  s.eeg = std::move(r.eeg);
  return s;
}

}  // namespace

std::vector<PairedSequence> generate_continuation_corpus(const ContinuationSpec& spec, Exec exec) {
  if (spec.per_class < 1) throw Error(Errc::invalid_config, "per_class must be positive");
  const int total = spec.per_class * kUtteranceClasses;
  std::vector<PairedSequence> out(static_cast<std::size_t>(total));
  for_each_index(total, exec, [&](std::ptrdiff_t k) {
    const int i = static_cast<int>(k);
    out[static_cast<std::size_t>(i)] = continuation_sequence(spec, i, i / spec.per_class);
  });
  return out;
}

// ---------------------------------------------------------------------------

void write_corpus(const std::filesystem::path& dir, const std::vector<PairedSequence>& corpus,
                  const nlohmann::json& spec_json) {
  io::make_dirs(dir);
  nlohmann::json seqs = nlohmann::json::array();
  for (const auto& s : corpus) {
    io::write_signal(dir / (s.id + "_audio.f32"), s.audio);
    io::write_signal(dir / (s.id + "_eeg.f32"), s.eeg);
    std::string act(s.activity.size(), '0');
    for (std::size_t i = 0; i < act.size(); ++i) act[i] = s.activity[i] ? '1' : '0';
    nlohmann::json e = {{"id", s.id},
                        {"audio", s.id + "_audio.f32"},
                        {"eeg", s.id + "_eeg.f32"},
                        {"label_rate_hz", kLabelRateHz},
                        {"activity", act}};
    if (s.sequence_label >= 0) e["sequence_label"] = s.sequence_label;
    seqs.push_back(std::move(e));
  }
  io::write_json(dir / "manifest.json", {{"format", "eegvad-corpus-1"}, {"spec", spec_json}, {"sequences", seqs}});
}

std::vector<PairedSequence> read_corpus(const std::filesystem::path& dir, nlohmann::json* spec_json) {
  const auto manifest = io::read_json(dir / "manifest.json");
  std::vector<PairedSequence> out;
  try {
    if (spec_json) *spec_json = manifest.value("spec", nlohmann::json::object());
    for (const auto& e : manifest.at("sequences")) {
      PairedSequence s;
      s.id = e.at("id").get<std::string>();
      s.audio = io::read_signal(dir / e.at("audio").get<std::string>());
      s.eeg = io::read_signal(dir / e.at("eeg").get<std::string>());
      s.activity = parse_activity(e.at("activity").get<std::string>());
      s.sequence_label = e.value("sequence_label", -1);
      out.push_back(std::move(s));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::format_error, (dir / "manifest.json").string() + ": " + e.what());
  }
  return out;
}

}  // namespace eegvad
