#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "eegvad/eeg_features.hpp"
#include "eegvad/error.hpp"
#include "eegvad/filter.hpp"
#include "eegvad/kpca.hpp"
#include "eegvad/mfcc.hpp"
#include "eegvad/models.hpp"
#include "eegvad/synth.hpp"

namespace eegvad {

enum class FeatureMode { mfcc, eeg, mfcc_eeg };

// "mfcc", "eeg", "mfcc+eeg"
const char* to_string(FeatureMode m);
FeatureMode feature_mode_from_string(const std::string& name);

// Failure inside a named pipeline stage; keeps the underlying code.
class StageError : public std::runtime_error {
 public:
  StageError(std::string stage, Errc code, const std::string& detail)
      : std::runtime_error("stage " + stage + ": " + detail), stage_(std::move(stage)), code_(code) {}
  const std::string& stage() const noexcept { return stage_; }
  Errc code() const noexcept { return code_; }

 private:
  std::string stage_;
  Errc code_;
};

struct FeatureConfig {
  MfccConfig mfcc{};
  EegPreprocessConfig preprocess{};
  EegFeatureConfig eeg{};
  int kpca_dim = 30;
  std::size_t kpca_max_fit = 2000;
  bool standardize_eeg = true;  // z-score raw EEG features before KPCA
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  std::optional<std::filesystem::path> corpus_dir;  // else generated from `corpus`
  CorpusSpec corpus{};
  FeatureMode feature_mode = FeatureMode::mfcc_eeg;
  VadVariant variant = VadVariant::dataset1;
  TrainConfig train{};
  FeatureConfig features{};
  SplitConfig split{};
  std::filesystem::path out_dir;  // empty: no artifacts written

  // Sweep axes; empty means "use the single value above".
  std::vector<double> sweep_snr_db;
  std::vector<std::uint64_t> sweep_seeds;
  std::vector<FeatureMode> sweep_modes;

  ContinuationSpec continuation{};
  int continuation_epochs = 200;
  int continuation_batch_size = 100;
  EarlyStopping continuation_early_stopping{true, 20};

  void validate() const;
  nlohmann::json to_json() const;
  // Missing keys keep their defaults. Throws Error(invalid_config).
  static ExperimentConfig from_json(const nlohmann::json& j);
};

// Per-sequence features before any split-dependent fitting.
struct SequenceFeatures {
  std::string id;
  FrameSequence mfcc;
  FrameSequence eeg;          // raw 5-per-channel statistics
  std::vector<int> labels;    // per 10 ms frame
  int sequence_label = -1;
};

SequenceFeatures extract_sequence_features(const PairedSequence& seq, const FeatureConfig& config,
                                           Exec exec = Exec::parallel);
std::vector<SequenceFeatures> extract_corpus_features(const std::vector<PairedSequence>& corpus,
                                                      const FeatureConfig& config,
                                                      Exec exec = Exec::parallel);

void write_features(const std::filesystem::path& dir, const std::vector<SequenceFeatures>& features);
std::vector<SequenceFeatures> read_features(const std::filesystem::path& dir);

// Everything fitted on the training split, plus the model-ready sequences.
struct PreparedData {
  std::vector<LabeledSequence> train, validation, test;
  std::optional<Standardizer> eeg_standardizer;
  std::optional<KpcaModel> kpca;
  Standardizer input_standardizer;
  int input_dim = 0;
};

struct FittedTransforms {
  std::optional<Standardizer> eeg_standardizer;
  std::optional<KpcaModel> kpca;
  Standardizer input_standardizer;
};

// Fits the EEG standardizer and KPCA (EEG modes) and the input
// standardizer on `split.train` only, then maps every split.
PreparedData prepare_data(const std::vector<SequenceFeatures>& features, const SplitIndices& split,
                          FeatureMode mode, const FeatureConfig& config, std::uint64_t seed,
                          Exec exec = Exec::parallel);

// Applies already fitted transforms to one sequence.
LabeledSequence apply_transforms(const SequenceFeatures& f, FeatureMode mode, const FittedTransforms& t,
                                 Exec exec = Exec::parallel);

struct ResultRow {
  std::string corpus;
  FeatureMode mode = FeatureMode::mfcc;
  double accuracy_pct = 0.0;
  std::uint64_t seed = 0;
  double snr_db = 0.0;
  int epochs = 0;
  int best_epoch = 0;
  std::size_t test_frames = 0;
};

// Rows keyed by (corpus, feature mode); insertion order is irrelevant.
class ResultsTable {
 public:
  void add(const ResultRow& row);
  void merge(const ResultsTable& other);
  const ResultRow* find(const std::string& corpus, FeatureMode mode) const;
  std::vector<ResultRow> rows() const;
  std::vector<std::string> corpora() const;
  bool empty() const { return rows_.empty(); }

  std::string to_csv() const;
  // Pivot: one line per corpus, columns MFCC | EEG | MFCC+EEG.
  std::string to_text() const;
  void write(const std::filesystem::path& dir, const std::string& stem = "results") const;
  static ResultsTable read_csv(const std::filesystem::path& path);

 private:
  std::map<std::pair<std::string, int>, ResultRow> rows_;
};

struct VadRun {
  ResultRow row;
  TrainResult training;
  PreparedData data;
  Evaluation test;
};

// Corpus name used in result rows, e.g. "dataset1 snr+20dB".
std::string corpus_key(VadVariant variant, double snr_db);

// Full pipeline for one cell on precomputed features. Writes checkpoint,
// KPCA model, normalization statistics, training log and a one-row table
// under `out_dir` when it is non-empty.
VadRun run_vad_on_features(const ExperimentConfig& config, const std::vector<SequenceFeatures>& features,
                           const std::filesystem::path& out_dir, Exec exec = Exec::parallel);

// Loads the corpus named by `config` (or generates it from the master
// seed) and extracts features. A loaded corpus replaces config.corpus with
// its recorded spec.
std::vector<SequenceFeatures> load_experiment_features(ExperimentConfig& config, Exec exec = Exec::parallel);

// Sequence split derived from the master seed.
SplitIndices experiment_split(const ExperimentConfig& config, std::size_t n_sequences);

// Re-evaluates the test split of a run directory written by
// run_vad_on_features, using its saved model and transforms.
Evaluation evaluate_saved_run(const std::filesystem::path& run_dir,
                              const std::optional<std::filesystem::path>& corpus_dir = std::nullopt,
                              Exec exec = Exec::parallel);

// Loads or generates the corpus, extracts features, then runs one cell.
VadRun run_vad_experiment(const ExperimentConfig& config, Exec exec = Exec::parallel);

// All feature modes of one configuration: a Table-1-shaped row.
ResultsTable run_table(const ExperimentConfig& config, Exec exec = Exec::parallel);

// Grid over sweep_snr_db x sweep_seeds x sweep_modes. Each cell is
// deterministic on its own; the table is a keyed merge.
ResultsTable run_sweep(const ExperimentConfig& config, Exec exec = Exec::parallel);

// Median accuracy across seeds per (snr, mode), as a table whose corpus
// key is corpus_key(variant, snr).
ResultsTable median_over_seeds(const ResultsTable& sweep);

struct ContinuationReport {
  double eeg_accuracy_pct = 0.0;
  double eeg_binary_pct = 0.0;
  double mfcc_accuracy_pct = 0.0;
  double mfcc_binary_pct = 0.0;
  std::size_t test_sequences = 0;
  std::vector<int> truth;
  std::vector<int> eeg_predictions;
  std::vector<int> mfcc_predictions;

  std::string to_text() const;
  std::string to_csv() const;
};

ContinuationReport run_continuation_experiment(const ExperimentConfig& config, Exec exec = Exec::parallel);

// CSV "component_index,cumulative_ratio", one row per positive eigenvalue.
void emit_variance_curve(const KpcaModel& model, const std::filesystem::path& path);
std::vector<std::pair<int, double>> read_variance_curve(const std::filesystem::path& path);

// Deterministic fixed-point text for a double.
std::string format_fixed(double v, int decimals);

}  // namespace eegvad
