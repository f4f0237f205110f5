#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "eegvad/exec.hpp"
#include "eegvad/rng.hpp"
#include "eegvad/time_series.hpp"

namespace eegvad {

inline constexpr double kLabelRateHz = 100.0;

struct CorpusSpec {
  int n_sequences = 20;
  double duration_s = 10.0;
  int eeg_channels = 31;
  double eeg_rate_hz = 1000.0;
  double audio_rate_hz = 16000.0;
  double speech_duty = 0.5;
  double mean_segment_s = 1.0;
  // +inf disables acoustic noise.
  double acoustic_snr_db = 20.0;
  double eeg_snr_db = 10.0;
  std::uint64_t seed = 0;

  void validate() const;
  nlohmann::json to_json() const;
  static CorpusSpec from_json(const nlohmann::json& j);
};

struct PairedSequence {
  std::string id;
  TimeSeries audio;
  TimeSeries eeg;
  std::vector<std::uint8_t> activity;  // one flag per 10 ms label frame
  int sequence_label = -1;             // continuation corpora only
};

// Two-state Markov chain at the label rate with stationary speech
// probability speech_duty and mean speech-segment length mean_segment_s.
// Redrawn until both states occur.
std::vector<std::uint8_t> generate_activity(const CorpusSpec& spec, Rng& rng);

// Harmonic tone complexes during speech, zeros elsewhere, plus white noise
// at acoustic_snr_db relative to speech-segment power. The clean signal and
// the noise draw from separate streams derived from `stream_seed`.
TimeSeries render_audio(const std::vector<std::uint8_t>& activity, const CorpusSpec& spec,
                        std::uint64_t stream_seed);

// 1/f-like background per channel plus an activity-locked 4-30 Hz
// component with per-channel gain; eeg_snr_db sets the ratio of the two.
TimeSeries render_eeg(const std::vector<std::uint8_t>& activity, const CorpusSpec& spec,
                      std::uint64_t stream_seed);

// Smoothed activity envelope at `rate_hz` (centered moving average).
std::vector<double> activity_envelope(const std::vector<std::uint8_t>& activity, double rate_hz,
                                      double smoothing_s = 0.05);

PairedSequence generate_sequence(const CorpusSpec& spec, int index);
std::vector<PairedSequence> generate_corpus(const CorpusSpec& spec, Exec exec = Exec::parallel);

// Four-class sentence-continuation corpus: shared prefix, then
//   tomorrow / today: 2 s pause and a suffix word,
//   weather: nothing,
//   macroni: a suffix word without pause.
// The EEG carries a class-specific rhythm over the closing part of each
// utterance; audio suffixes for today and tomorrow are drawn from the same
// distribution.
struct ContinuationSpec {
  int per_class = 50;
  int eeg_channels = 31;
  double eeg_rate_hz = 1000.0;
  double audio_rate_hz = 16000.0;
  double acoustic_snr_db = 30.0;
  double eeg_snr_db = 10.0;
  double pause_s = 2.0;
  std::uint64_t seed = 0;

  nlohmann::json to_json() const;
  static ContinuationSpec from_json(const nlohmann::json& j);
};

std::vector<PairedSequence> generate_continuation_corpus(const ContinuationSpec& spec,
                                                         Exec exec = Exec::parallel);

// Directory layout: manifest.json plus <id>_audio.f32/.json and
// <id>_eeg.f32/.json per sequence. Activity labels live in the manifest.
void write_corpus(const std::filesystem::path& dir, const std::vector<PairedSequence>& corpus,
                  const nlohmann::json& spec_json);
std::vector<PairedSequence> read_corpus(const std::filesystem::path& dir,
                                        nlohmann::json* spec_json = nullptr);

}  // namespace eegvad
