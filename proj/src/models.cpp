#include "eegvad/models.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <iomanip>
#include <sstream>

#include "eegvad/error.hpp"
#include "eegvad/exec.hpp"

namespace eegvad {

using nn::Matrix;

const char* to_string(VadVariant v) { return v == VadVariant::dataset1 ? "dataset1" : "dataset2"; }

VadVariant vad_variant_from_string(const std::string& name) {
  if (name == "dataset1") return VadVariant::dataset1;
  if (name == "dataset2") return VadVariant::dataset2;
  throw Error(Errc::unknown_variant, "unknown VAD variant '" + name + "'");
}

VadArchitecture VadArchitecture::for_variant(VadVariant v) {
  VadArchitecture a;
  if (v == VadVariant::dataset1) {
    a.gru_sizes = {128, 32, 8};
    a.td_activation = nn::Activation::sigmoid;
  } else {
    a.gru_sizes = {128, 64, 32};
    a.td_activation = nn::Activation::relu;
  }
  return a;
}

nn::Network build_vad(VadVariant variant, int input_dim) {
  if (variant != VadVariant::dataset1 && variant != VadVariant::dataset2)
    throw Error(Errc::unknown_variant, "unknown VAD variant");
  if (input_dim < 1) throw Error(Errc::invalid_input_dim, "input_dim must be positive");
  const VadArchitecture arch = VadArchitecture::for_variant(variant);
  std::vector<nn::Layer> layers;
  int width = input_dim;
  for (int h : arch.gru_sizes) {
    layers.emplace_back(nn::GruLayer{nn::GruLayerParams::zeros(width, h)});
    layers.emplace_back(nn::DropoutLayer{arch.dropout});
    width = h;
  }
  layers.emplace_back(nn::DenseLayer{nn::DenseParams::zeros(width, arch.td_dense_units, arch.td_activation)});
  layers.emplace_back(nn::DenseLayer{
      nn::DenseParams::zeros(arch.td_dense_units, arch.classes, nn::Activation::identity)});
  return nn::Network(input_dim, std::move(layers));
}

nn::Network build_continuation(int input_dim) {
  if (input_dim < 1) throw Error(Errc::invalid_input_dim, "input_dim must be positive");
  const ContinuationArchitecture arch;
  std::vector<nn::Layer> layers;
  int width = input_dim;
  for (int h : arch.gru_sizes) {
    layers.emplace_back(nn::GruLayer{nn::GruLayerParams::zeros(width, h)});
    layers.emplace_back(nn::DropoutLayer{arch.dropout});
    width = h;
  }
  layers.emplace_back(nn::LastStepLayer{});
  layers.emplace_back(
      nn::DenseLayer{nn::DenseParams::zeros(width, arch.classes, nn::Activation::identity)});
  return nn::Network(input_dim, std::move(layers));
}

std::size_t gru_stack_parameter_count(int input_dim, std::span<const int> gru_sizes,
                                      std::span<const int> dense_sizes) {
  std::size_t total = 0;
  std::size_t in = static_cast<std::size_t>(input_dim);
  for (int hs : gru_sizes) {
    const auto h = static_cast<std::size_t>(hs);
    total += 3 * (in * h + h * h + h);
    in = h;
  }
  for (int ds : dense_sizes) {
    const auto out = static_cast<std::size_t>(ds);
    total += in * out + out;
    in = out;
  }
  return total;
}

bool continues(int utterance_class) {
  return utterance_class == static_cast<int>(Utterance::tomorrow) ||
         utterance_class == static_cast<int>(Utterance::today);
}

const char* utterance_name(int utterance_class) {
  switch (utterance_class) {
    case 0: return "tomorrow";
    case 1: return "weather";
    case 2: return "today";
    case 3: return "macroni";
  }
  return "unknown";
}

SplitIndices split_corpus(std::size_t n_sequences, const SplitConfig& config, std::uint64_t seed) {
  if (n_sequences < 10)
    throw Error(Errc::too_few_sequences, "need at least 10 sequences to split, got " +
                                             std::to_string(n_sequences));
  if (std::abs(config.train + config.validation + config.test - 1.0) > 1e-9 ||
      config.train <= 0.0 || config.validation < 0.0 || config.test < 0.0)
    throw Error(Errc::invalid_config, "split fractions must be nonnegative and sum to 1");
  std::vector<std::size_t> order(n_sequences);
  for (std::size_t i = 0; i < n_sequences; ++i) order[i] = i;
  Rng rng = derive_rng(seed, {0x73706c6974});
  shuffle(order, rng);

  const double n = static_cast<double>(n_sequences);
  const auto n_train = static_cast<std::size_t>(std::lround(n * config.train));
  const auto n_val = static_cast<std::size_t>(std::lround(n * config.validation));
  SplitIndices s;
  s.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.validation.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train),
                      order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
  s.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), order.end());
  return s;
}

namespace {

struct Prepared {
  Matrix X;
  Matrix targets;
};

Prepared prepare(const LabeledSequence& s, bool sequence_task, int classes) {
  Prepared p;
  p.X = s.features.values;
  if (sequence_task) {
    if (s.sequence_label < 0 || s.sequence_label >= classes)
      throw Error(Errc::non_one_hot, "sequence '" + s.id + "' has no valid sequence label");
    p.targets = Matrix::Zero(1, classes);
    p.targets(0, s.sequence_label) = 1.0;
  } else {
    if (static_cast<Eigen::Index>(s.frame_labels.size()) != s.features.count())
      throw Error(Errc::length_mismatch, "sequence '" + s.id + "' has " +
                                             std::to_string(s.frame_labels.size()) +
                                             " labels for " + std::to_string(s.features.count()) +
                                             " frames");
    p.targets = Matrix::Zero(s.features.count(), classes);
    for (std::size_t t = 0; t < s.frame_labels.size(); ++t) {
      const int c = s.frame_labels[t];
      if (c < 0 || c >= classes) throw Error(Errc::non_one_hot, "frame label out of range");
      p.targets(static_cast<Eigen::Index>(t), c) = 1.0;
    }
  }
  return p;
}

int argmax_low_tie(const Eigen::Ref<const nn::RowVector>& p) {
  int best = 0;
  for (Eigen::Index c = 1; c < p.size(); ++c)
    if (p(c) > p(best)) best = static_cast<int>(c);
  return best;
}

}  // namespace

Evaluation evaluate(const nn::Network& network, std::span<const LabeledSequence> sequences) {
  if (sequences.empty()) throw Error(Errc::empty, "nothing to evaluate");
  const bool seq_task = network.sequence_output();
  const int classes = network.output_dim();
  const auto n = static_cast<std::ptrdiff_t>(sequences.size());
  std::vector<double> losses(sequences.size());
  std::vector<std::size_t> correct(sequences.size()), total(sequences.size());
  for_each_index(n, Exec::parallel, [&](std::ptrdiff_t i) {
    const auto& s = sequences[static_cast<std::size_t>(i)];
    const Prepared p = prepare(s, seq_task, classes);
    const Matrix probs = network.predict_proba(p.X);
    losses[static_cast<std::size_t>(i)] = nn::cross_entropy(probs, p.targets);
    std::size_t ok = 0;
    for (Eigen::Index t = 0; t < probs.rows(); ++t) {
      Eigen::Index truth;
      p.targets.row(t).maxCoeff(&truth);
      ok += argmax_low_tie(probs.row(t)) == truth ? 1 : 0;
    }
    correct[static_cast<std::size_t>(i)] = ok;
    total[static_cast<std::size_t>(i)] = static_cast<std::size_t>(probs.rows());
  });
  Evaluation e;
  for (std::size_t i = 0; i < sequences.size(); ++i) {
    e.loss += losses[i];
    e.correct += correct[i];
    e.total += total[i];
  }
  e.loss /= static_cast<double>(sequences.size());
  e.accuracy = static_cast<double>(e.correct) / static_cast<double>(e.total);
  return e;
}

TrainResult train(nn::Network network, std::span<const LabeledSequence> train_set,
                  std::span<const LabeledSequence> validation_set, const TrainConfig& config) {
  if (train_set.empty()) throw Error(Errc::empty, "empty training set");
  if (validation_set.empty()) throw Error(Errc::empty, "empty validation set");
  if (config.batch_size < 1) throw Error(Errc::invalid_config, "batch size must be positive");

  const bool seq_task = network.sequence_output();
  const int classes = network.output_dim();
  std::vector<Prepared> data;
  data.reserve(train_set.size());
  for (const auto& s : train_set) data.push_back(prepare(s, seq_task, classes));

  network.round_to_float();
  TrainResult result;
  result.network = network;
  double best_val = evaluate(network, validation_set).loss;
  int since_best = 0;

  nn::AdamState adam = nn::AdamState::for_network(network, config.adam);
  std::vector<std::size_t> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  const auto batch = static_cast<std::size_t>(config.batch_size);

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    Rng shuffle_rng = derive_rng(config.seed, {static_cast<std::uint64_t>(epoch), 1});
    shuffle(order, shuffle_rng);
    double epoch_loss = 0.0;

    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t members = std::min(batch, order.size() - start);
      std::vector<nn::ParamSet> member_grads(members);
      std::vector<double> member_loss(members);
      const double scale = 1.0 / static_cast<double>(members);
      for_each_index(static_cast<std::ptrdiff_t>(members), Exec::parallel, [&](std::ptrdiff_t m) {
        const std::size_t idx = order[start + static_cast<std::size_t>(m)];
        Rng drop_rng = derive_rng(config.seed, {static_cast<std::uint64_t>(epoch), 2, idx});
        auto& g = member_grads[static_cast<std::size_t>(m)];
        g = network.zeros_like();
        try {
          member_loss[static_cast<std::size_t>(m)] = network.loss_and_gradient(
              data[idx].X, data[idx].targets, nn::Mode::train, drop_rng, g, scale);
        } catch (const Error& e) {
          // Non-finite parameters surface as non-finite logits.
          if (e.code() != Errc::non_finite_input) throw;
          member_loss[static_cast<std::size_t>(m)] = std::numeric_limits<double>::quiet_NaN();
        }
      });
      nn::ParamSet grads = std::move(member_grads[0]);
      for (std::size_t m = 1; m < members; ++m)
        for (std::size_t b = 0; b < grads.size(); ++b) grads[b] += member_grads[m][b];
      for (std::size_t m = 0; m < members; ++m) {
        if (!std::isfinite(member_loss[m]))
          throw Error(Errc::divergence, "non-finite loss at epoch " + std::to_string(epoch) +
                                            " on sequence '" + train_set[order[start + m]].id + "'");
        epoch_loss += member_loss[m];
      }
      if (config.clip_norm > 0.0) nn::clip_grad_norm(grads, config.clip_norm);
      nn::adam_update(adam, network, grads);
    }

    Evaluation val;
    try {
      val = evaluate(network, validation_set);
    } catch (const Error& e) {
      if (e.code() != Errc::non_finite_input) throw;
      val.loss = std::numeric_limits<double>::quiet_NaN();
    }
    if (!std::isfinite(val.loss))
      throw Error(Errc::divergence, "non-finite validation loss at epoch " + std::to_string(epoch));
    result.log.push_back({epoch, epoch_loss / static_cast<double>(data.size()), val.loss, val.accuracy});
    if (val.loss < best_val) {
      best_val = val.loss;
      result.network = network;
      result.best_epoch = epoch;
      since_best = 0;
    } else if (config.early_stopping.enabled && ++since_best >= config.early_stopping.patience) {
      break;
    }
  }
  result.network.round_to_float();
  return result;
}

FramePredictions predict_frames(const nn::Network& network, const FrameSequence& features) {
  if (features.dim() != network.input_dim())
    throw Error(Errc::dim_mismatch, "network expects " + std::to_string(network.input_dim()) +
                                        " features, got " + std::to_string(features.dim()));
  const Matrix probs = network.predict_proba(features.values);
  FramePredictions out;
  out.probabilities = probs;
  out.classes.resize(static_cast<std::size_t>(probs.rows()));
  for (Eigen::Index t = 0; t < probs.rows(); ++t)
    out.classes[static_cast<std::size_t>(t)] = argmax_low_tie(probs.row(t));
  return out;
}

int predict_sequence(const nn::Network& network, const FrameSequence& features,
                     nn::RowVector* probabilities) {
  if (features.dim() != network.input_dim())
    throw Error(Errc::dim_mismatch, "network expects " + std::to_string(network.input_dim()) +
                                        " features, got " + std::to_string(features.dim()));
  const Matrix probs = network.predict_proba(features.values);
  const nn::RowVector last = probs.bottomRows(1);
  if (probabilities) *probabilities = last;
  return argmax_low_tie(last);
}

double accuracy(std::span<const int> predictions, std::span<const int> truth) {
  if (predictions.size() != truth.size())
    throw Error(Errc::length_mismatch, "prediction and truth lengths differ");
  if (predictions.empty()) throw Error(Errc::empty, "accuracy of an empty list");
  std::size_t ok = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) ok += predictions[i] == truth[i] ? 1 : 0;
  return static_cast<double>(ok) / static_cast<double>(truth.size());
}

void write_training_log(const std::filesystem::path& path, std::span<const EpochLog> log) {
  std::ofstream out(path);
  if (!out) throw Error(Errc::io_failure, "cannot write " + path.string());
  out << "epoch,train_loss,val_loss,val_accuracy\n";
  out << std::setprecision(9);
  for (const auto& e : log)
    out << e.epoch << ',' << e.train_loss << ',' << e.val_loss << ',' << e.val_accuracy << '\n';
}

Standardizer Standardizer::fit(std::span<const FrameSequence> sequences) {
  if (sequences.empty()) throw Error(Errc::empty, "no sequences to standardize");
  const Eigen::Index dim = sequences.front().dim();
  Eigen::RowVectorXd sum = Eigen::RowVectorXd::Zero(dim);
  double n = 0.0;
  for (const auto& s : sequences) {
    if (s.dim() != dim) throw Error(Errc::dim_mismatch, "sequences differ in dimension");
    sum += s.values.colwise().sum();
    n += static_cast<double>(s.count());
  }
  if (n == 0.0) throw Error(Errc::empty, "no frames to standardize");
  Standardizer st;
  st.mean = sum / n;
  Eigen::RowVectorXd sq = Eigen::RowVectorXd::Zero(dim);
  for (const auto& s : sequences) sq += (s.values.rowwise() - st.mean).array().square().matrix().colwise().sum();
  st.scale = (sq / n).array().sqrt().matrix();
  for (Eigen::Index j = 0; j < dim; ++j)
    if (!(st.scale(j) > 1e-12)) st.scale(j) = 1.0;
  return st;
}

FrameSequence Standardizer::apply(const FrameSequence& frames) const {
  if (frames.dim() != mean.size())
    throw Error(Errc::dim_mismatch, "standardizer fitted on dimension " +
                                        std::to_string(mean.size()) + ", got " +
                                        std::to_string(frames.dim()));
  FrameSequence out = frames;
  out.values = ((frames.values.rowwise() - mean).array().rowwise() / scale.array()).matrix();
  return out;
}

nlohmann::json Standardizer::to_json() const {
  return {{"mean", std::vector<double>(mean.data(), mean.data() + mean.size())},
          {"scale", std::vector<double>(scale.data(), scale.data() + scale.size())}};
}

Standardizer Standardizer::from_json(const nlohmann::json& j) {
  const auto m = j.at("mean").get<std::vector<double>>();
  const auto s = j.at("scale").get<std::vector<double>>();
  if (m.size() != s.size()) throw Error(Errc::format_error, "standardizer mean/scale sizes differ");
  Standardizer st;
  st.mean = Eigen::Map<const Eigen::RowVectorXd>(m.data(), static_cast<Eigen::Index>(m.size()));
  st.scale = Eigen::Map<const Eigen::RowVectorXd>(s.data(), static_cast<Eigen::Index>(s.size()));
  return st;
}

}  // namespace eegvad
