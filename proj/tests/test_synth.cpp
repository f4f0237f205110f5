#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "eegvad/error.hpp"
#include "eegvad/synth.hpp"
#include "helpers.hpp"

using namespace eegvad;

namespace {

int segments_of(const std::vector<std::uint8_t>& a, std::uint8_t state) {
  int n = 0;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i] == state && (i == 0 || a[i - 1] != state)) ++n;
  return n;
}

double mean_square(const RowMatrix& x) { return x.squaredNorm() / static_cast<double>(x.size()); }

}  // namespace

TEST_SUITE("synth-data") {

TEST_CASE("activity chain") {
  CorpusSpec spec;
  spec.duration_s = 2000.0;
  Rng rng = derive_rng(1, {});
  const auto a = generate_activity(spec, rng);
  CHECK(a.size() == 200000u);
  const double duty = static_cast<double>(std::count(a.begin(), a.end(), 1)) / static_cast<double>(a.size());
  CHECK(std::abs(duty - 0.5) <= 0.05);
  const double mean_len = static_cast<double>(std::count(a.begin(), a.end(), 1)) / segments_of(a, 1) / 100.0;
  CHECK(mean_len == doctest::Approx(1.0).epsilon(0.15));

  spec.duration_s = 10.0;
  spec.speech_duty = 1e-6;
  Rng r2 = derive_rng(2, {});
  const auto rare = generate_activity(spec, r2);
  CHECK(segments_of(rare, 1) >= 1);
  CHECK(segments_of(rare, 0) >= 1);

  spec.speech_duty = 0.5;
  Rng r3 = derive_rng(3, {}), r4 = derive_rng(3, {});
  CHECK(generate_activity(spec, r3) == generate_activity(spec, r4));
}

TEST_CASE("shapes and label alignment") {
  CorpusSpec spec;
  spec.duration_s = 3.0;
  spec.acoustic_snr_db = std::numeric_limits<double>::infinity();
  const PairedSequence s = generate_sequence(spec, 0);
  CHECK(s.activity.size() == 300u);
  CHECK(s.audio.samples() == 300 * 160);
  CHECK(s.eeg.samples() == 300 * 10);
  CHECK(s.eeg.channels() == 31);
  CHECK(s.audio.channels() == 1);
  CHECK(s.audio.duration_s() == s.eeg.duration_s());
  // Without noise, silence frames are exactly zero and speech frames are not.
  for (std::size_t k = 0; k < s.activity.size(); ++k) {
    const auto frame = s.audio.data.row(0).segment(static_cast<Eigen::Index>(k * 160), 160);
    if (!s.activity[k])
      CHECK(frame.cwiseAbs().maxCoeff() == 0.0);
    else
      CHECK(frame.squaredNorm() > 0.0);
  }
}

TEST_CASE("acoustic SNR") {
  CorpusSpec spec;
  spec.duration_s = 10.0;
  Rng rng = derive_rng(4, {});
  const auto activity = generate_activity(spec, rng);
  spec.acoustic_snr_db = std::numeric_limits<double>::infinity();
  const TimeSeries clean = render_audio(activity, spec, 77);
  double speech = 0.0;
  std::size_t speech_n = 0;
  for (std::size_t k = 0; k < activity.size(); ++k)
    if (activity[k]) {
      speech += clean.data.row(0).segment(static_cast<Eigen::Index>(k * 160), 160).squaredNorm();
      speech_n += 160;
    }
  speech /= static_cast<double>(speech_n);
  double previous_silence_rms = 0.0;
  for (double snr : {20.0, 0.0, -10.0}) {
    spec.acoustic_snr_db = snr;
    const TimeSeries noisy = render_audio(activity, spec, 77);
    const RowMatrix noise = noisy.data - clean.data;
    const double measured = 10.0 * std::log10(speech / mean_square(noise));
    CHECK(std::abs(measured - snr) <= 1.0);
    double silence = 0.0;
    std::size_t silence_n = 0;
    for (std::size_t k = 0; k < activity.size(); ++k)
      if (!activity[k]) {
        silence += noisy.data.row(0).segment(static_cast<Eigen::Index>(k * 160), 160).squaredNorm();
        silence_n += 160;
      }
    const double silence_rms = std::sqrt(silence / static_cast<double>(silence_n));
    CHECK(silence_rms > previous_silence_rms);
    previous_silence_rms = silence_rms;
  }
}

TEST_CASE("EEG activity is recoverable by thresholding band power") {
  CorpusSpec spec;
  spec.duration_s = 30.0;
  spec.eeg_snr_db = 60.0;
  const PairedSequence s = generate_sequence(spec, 3);
  // Power across channels of each frame's own 10 samples.
  std::vector<double> power(s.activity.size());
  for (std::size_t k = 0; k < power.size(); ++k)
    power[k] = s.eeg.data.middleCols(static_cast<Eigen::Index>(k * 10), 10).squaredNorm();
  std::vector<double> sorted = power;
  std::sort(sorted.begin(), sorted.end());
  const double full = sorted[sorted.size() * 9 / 10];
  std::size_t agree = 0;
  for (std::size_t k = 0; k < power.size(); ++k) agree += (power[k] > 0.25 * full) == (s.activity[k] != 0);
  CHECK(static_cast<double>(agree) / static_cast<double>(power.size()) >= 0.99);
}

TEST_CASE("EEG does not depend on the acoustic SNR") {
  CorpusSpec a;
  a.duration_s = 2.0;
  CorpusSpec b = a;
  b.acoustic_snr_db = -10.0;
  const PairedSequence x = generate_sequence(a, 5), y = generate_sequence(b, 5);
  CHECK(x.eeg.data == y.eeg.data);
  CHECK(x.activity == y.activity);
  CHECK(x.audio.data != y.audio.data);
}

TEST_CASE("envelope") {
  const std::vector<std::uint8_t> a{0, 0, 1, 1, 1, 1, 0, 0};
  const auto env = activity_envelope(a, 100.0, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(env[i] == a[i]);
  const auto smooth = activity_envelope(std::vector<std::uint8_t>(20, 1), 1000.0);
  CHECK(smooth.size() == 200u);
  for (double v : smooth) CHECK(v == doctest::Approx(1.0));
}

TEST_CASE("corpus generation is thread-count independent") {
  CorpusSpec spec;
  spec.n_sequences = 4;
  spec.duration_s = 2.0;
  spec.seed = 12;
  const auto p = generate_corpus(spec, Exec::parallel);
  const auto q = generate_corpus(spec, Exec::serial);
  REQUIRE(p.size() == 4u);
  for (std::size_t i = 0; i < p.size(); ++i) {
    CHECK(p[i].audio.data == q[i].audio.data);
    CHECK(p[i].eeg.data == q[i].eeg.data);
    CHECK(p[i].activity == q[i].activity);
  }
  CHECK(p[0].activity != p[1].activity);
  spec.seed = 13;
  CHECK(generate_corpus(spec)[0].eeg.data != p[0].eeg.data);
}

TEST_CASE("continuation corpus") {
  ContinuationSpec spec;
  spec.per_class = 3;
  spec.eeg_channels = 4;
  spec.seed = 2;
  const auto c = generate_continuation_corpus(spec);
  REQUIRE(c.size() == 12u);
  for (std::size_t i = 0; i < c.size(); ++i) {
    CHECK(c[i].sequence_label == static_cast<int>(i / 3));
    CHECK(c[i].eeg.channels() == 4);
    CHECK(c[i].eeg.samples() == static_cast<Eigen::Index>(c[i].activity.size() * 10));
    CHECK(c[i].audio.samples() == static_cast<Eigen::Index>(c[i].activity.size() * 160));
  }
  // The pause makes tomorrow and today longer than weather.
  CHECK(c[0].activity.size() > c[3].activity.size() + 150);
  CHECK(c[6].activity.size() > c[3].activity.size() + 150);
  const auto again = generate_continuation_corpus(spec, Exec::serial);
  CHECK(again[7].eeg.data == c[7].eeg.data);
}

TEST_CASE("corpus directory round trip") {
  CorpusSpec spec;
  spec.n_sequences = 2;
  spec.duration_s = 1.0;
  spec.acoustic_snr_db = std::numeric_limits<double>::infinity();
  const auto corpus = generate_corpus(spec);
  const auto dir = testutil::scratch("corpus_io");
  write_corpus(dir, corpus, spec.to_json());
  nlohmann::json spec_json;
  const auto back = read_corpus(dir, &spec_json);
  REQUIRE(back.size() == 2u);
  CHECK(std::isinf(CorpusSpec::from_json(spec_json).acoustic_snr_db));
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(back[i].id == corpus[i].id);
    CHECK(back[i].activity == corpus[i].activity);
    CHECK(back[i].audio.data == corpus[i].audio.data.cast<float>().cast<double>());
    CHECK(back[i].eeg.data == corpus[i].eeg.data.cast<float>().cast<double>());
    CHECK(back[i].eeg.sample_rate_hz == 1000.0);
  }
  CHECK_THROWS_AS(read_corpus(dir / "missing"), Error);
}

TEST_CASE("spec validation") {
  CorpusSpec s;
  s.speech_duty = 1.0;
  CHECK_THROWS_AS(s.validate(), Error);
  s = {};
  s.eeg_rate_hz = 1050.0;
  CHECK_THROWS_AS(s.validate(), Error);
  s = {};
  s.n_sequences = 0;
  CHECK_THROWS_AS(s.validate(), Error);
}

}  // TEST_SUITE
