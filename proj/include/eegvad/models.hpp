#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "eegvad/frame_sequence.hpp"
#include "eegvad/nn.hpp"

namespace eegvad {

enum class VadVariant { dataset1, dataset2 };

const char* to_string(VadVariant v);
VadVariant vad_variant_from_string(const std::string& name);

struct VadArchitecture {
  std::vector<int> gru_sizes;
  int td_dense_units = 4;
  nn::Activation td_activation = nn::Activation::sigmoid;
  int classes = 2;
  double dropout = 0.2;

  static VadArchitecture for_variant(VadVariant v);
};

struct ContinuationArchitecture {
  std::vector<int> gru_sizes{64, 32};
  int classes = 4;
  double dropout = 0.2;
};

// GRU -> dropout -> GRU -> dropout -> GRU -> dropout -> TD-dense(4) ->
// dense(2), softmax per frame. Parameters are zero until initialized.
nn::Network build_vad(VadVariant variant, int input_dim);

// GRU(64) -> dropout -> GRU(32) -> dropout -> last step -> dense(4).
nn::Network build_continuation(int input_dim);

// Closed-form parameter count of a GRU stack followed by dense layers.
std::size_t gru_stack_parameter_count(int input_dim, std::span<const int> gru_sizes,
                                      std::span<const int> dense_sizes);

// Continuation classes; {tomorrow, today} continue the sentence.
enum class Utterance { tomorrow = 0, weather = 1, today = 2, macroni = 3 };
inline constexpr int kUtteranceClasses = 4;
bool continues(int utterance_class);
const char* utterance_name(int utterance_class);

struct LabeledSequence {
  FrameSequence features;
  std::vector<int> frame_labels;  // VAD: 0 silence, 1 speech
  int sequence_label = -1;        // continuation: 0..3
  std::string id;
};

struct SplitConfig {
  double train = 0.8;
  double validation = 0.1;
  double test = 0.1;
};

struct SplitIndices {
  std::vector<std::size_t> train, validation, test;
};

// Seeded shuffle of sequence indices, then contiguous 80/10/10 cut.
SplitIndices split_corpus(std::size_t n_sequences, const SplitConfig& config, std::uint64_t seed);

struct EarlyStopping {
  bool enabled = false;
  int patience = 20;
};

struct TrainConfig {
  int epochs = 200;
  int batch_size = 1;
  nn::AdamConfig adam{};
  std::uint64_t seed = 0;
  EarlyStopping early_stopping{};
  double clip_norm = 0.0;  // <= 0 disables clipping
};

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_accuracy = 0.0;
};

struct TrainResult {
  nn::Network network;  // best-validation parameters, float32-representable
  std::vector<EpochLog> log;
  int best_epoch = 0;   // 0 means the initial parameters
};

// Runs Adam over `epochs` passes. Per-frame stacks train on frame_labels,
// sequence stacks on sequence_label. Mini-batches average per-sequence
// losses, which equals padding to the batch maximum and masking the padded
// steps. Throws divergence on a non-finite loss.
TrainResult train(nn::Network network, std::span<const LabeledSequence> train_set,
                  std::span<const LabeledSequence> validation_set, const TrainConfig& config);

struct Evaluation {
  double loss = 0.0;
  double accuracy = 0.0;
  std::size_t correct = 0;
  std::size_t total = 0;
};

Evaluation evaluate(const nn::Network& network, std::span<const LabeledSequence> sequences);

struct FramePredictions {
  std::vector<int> classes;
  RowMatrix probabilities;  // T x C
};

// Argmax per frame, ties resolved toward class 0 (silence).
FramePredictions predict_frames(const nn::Network& network, const FrameSequence& features);

// Argmax over the sequence-level softmax.
int predict_sequence(const nn::Network& network, const FrameSequence& features,
                     nn::RowVector* probabilities = nullptr);

double accuracy(std::span<const int> predictions, std::span<const int> truth);

void write_training_log(const std::filesystem::path& path, std::span<const EpochLog> log);

// Per-dimension standardization with statistics from a training split.
struct Standardizer {
  Eigen::RowVectorXd mean;
  Eigen::RowVectorXd scale;

  static Standardizer fit(std::span<const FrameSequence> sequences);
  FrameSequence apply(const FrameSequence& frames) const;
  nlohmann::json to_json() const;
  static Standardizer from_json(const nlohmann::json& j);
};

}  // namespace eegvad
