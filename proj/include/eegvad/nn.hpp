#pragma once

#include <Eigen/Core>
#include <filesystem>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "eegvad/rng.hpp"

namespace eegvad::nn {

using Matrix = Eigen::MatrixXd;
using RowVector = Eigen::RowVectorXd;

enum class Activation { identity, sigmoid, relu };
enum class Mode { train, infer };

const char* to_string(Activation a);
Activation activation_from_string(const std::string& name);

// Update gate z interpolates toward the previous state:
//   z  = sigma(x W_z + h U_z + b_z)
//   r  = sigma(x W_r + h U_r + b_r)
//   h~ = tanh(x W_h + (r . h) U_h + b_h)
//   h' = z . h + (1 - z) . h~
// Row-vector convention: W_* is in x hidden, U_* is hidden x hidden,
// b_* is 1 x hidden.
struct GruLayerParams {
  Matrix W_z, W_r, W_h;
  Matrix U_z, U_r, U_h;
  Matrix b_z, b_r, b_h;

  static GruLayerParams zeros(int input_size, int hidden_size);
  int input_size() const { return static_cast<int>(W_z.rows()); }
  int hidden_size() const { return static_cast<int>(W_z.cols()); }
};

// y = act(x W + b), W is in x out, b is 1 x out.
struct DenseParams {
  Matrix W;
  Matrix b;
  Activation activation = Activation::identity;

  static DenseParams zeros(int input_size, int output_size, Activation act);
  int input_size() const { return static_cast<int>(W.rows()); }
  int output_size() const { return static_cast<int>(W.cols()); }
};

RowVector gru_step(const GruLayerParams& p, const RowVector& x, const RowVector& h_prev);

// All hidden states (T x hidden) for inputs X (T x in). h0 defaults to zero.
Matrix gru_forward(const GruLayerParams& p, const Matrix& X, const RowVector* h0 = nullptr);

// Inverted dropout; identity in infer mode or for rate 0.
Matrix dropout(const Matrix& x, double rate, Mode mode, Rng& rng);

RowVector dense_apply(const DenseParams& p, const RowVector& x);
Matrix dense_apply(const DenseParams& p, const Matrix& X);

// Max-subtracted softmax over one logit vector / each row.
RowVector softmax(const RowVector& logits);
Matrix softmax_rows(const Matrix& logits);

inline constexpr double kLogFloor = 1e-12;

// Mean over rows of -ln(probs[t, class_t]); targets rows are one-hot.
double cross_entropy(const Matrix& probs, const Matrix& targets);

// ---------------------------------------------------------------------------
// Layer stack with reverse-mode differentiation.

struct GruLayer {
  GruLayerParams p;
};
struct DenseLayer {
  DenseParams p;
};
struct DropoutLayer {
  double rate = 0.0;
};
// Selects the final time step: T x d -> 1 x d.
struct LastStepLayer {};

using Layer = std::variant<GruLayer, DenseLayer, DropoutLayer, LastStepLayer>;

// Gradients / optimizer moments: one matrix per parameter block, in the
// order given by Network::parameters().
using ParamSet = std::vector<Matrix>;

struct Tape;

class Network {
 public:
  Network() = default;
  Network(int input_dim, std::vector<Layer> layers);

  int input_dim() const { return input_dim_; }
  int output_dim() const;
  // True when the stack ends per-sequence (contains a LastStepLayer).
  bool sequence_output() const;

  const std::vector<Layer>& layers() const { return layers_; }
  std::vector<Layer>& layers() { return layers_; }

  std::vector<Matrix*> parameters();
  std::vector<const Matrix*> parameters() const;
  std::size_t parameter_count() const;
  ParamSet zeros_like() const;

  // Logits: T x C for per-frame stacks, 1 x C for sequence stacks. The
  // tape, when given, records what backward() needs.
  Matrix forward(const Matrix& X, Mode mode, Rng& rng, Tape* tape = nullptr) const;

  // Softmax of forward() in infer mode.
  Matrix predict_proba(const Matrix& X) const;

  // Accumulates d(loss)/d(theta) * scale into grads, given d(loss)/d(logits).
  // Throws no_forward_state when the tape holds no recorded pass.
  void backward(const Tape& tape, const Matrix& dlogits, ParamSet& grads,
                double scale = 1.0) const;

  // Mean cross-entropy of softmax(forward(X)) against one-hot targets, with
  // its gradient accumulated (times scale) into grads.
  double loss_and_gradient(const Matrix& X, const Matrix& targets, Mode mode, Rng& rng,
                           ParamSet& grads, double scale = 1.0) const;
  double loss(const Matrix& X, const Matrix& targets, Mode mode, Rng& rng) const;

  // Rounds every parameter to the nearest float32 value.
  void round_to_float();

 private:
  int input_dim_ = 0;
  std::vector<Layer> layers_;
};

struct GruCache {
  Matrix X, H, Z, R, Hc;  // H has T+1 rows, row 0 is h0
};
struct DenseCache {
  Matrix X, Y;
};
struct DropoutCache {
  Matrix mask;
  bool active = false;
};
struct LastStepCache {
  Eigen::Index steps = 0;
  Eigen::Index dim = 0;
};
using LayerCache = std::variant<GruCache, DenseCache, DropoutCache, LastStepCache>;

struct Tape {
  std::vector<LayerCache> caches;
  bool empty() const { return caches.empty(); }
};

// Glorot-uniform input matrices, orthogonal recurrent matrices, zero biases.
void initialize(Network& net, Rng& rng);

void zero_parameters(Network& net);

// ---------------------------------------------------------------------------

struct AdamConfig {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  long step = 0;
  ParamSet m, v;
  AdamConfig config;

  static AdamState for_network(const Network& net, AdamConfig config = {});
};

void adam_update(AdamState& state, std::span<Matrix* const> params, const ParamSet& grads);
void adam_update(AdamState& state, Network& net, const ParamSet& grads);

// Scales grads so their global L2 norm is at most max_norm. Returns the
// norm before clipping.
double clip_grad_norm(ParamSet& grads, double max_norm);

// ---------------------------------------------------------------------------
// Checkpoint: "<stem>.json" manifest (layer list, shapes, activations, plus
// caller metadata) and "<stem>.f32" with parameter blocks in manifest order.

void save_network(const std::filesystem::path& stem, const Network& net,
                  const nlohmann::json& metadata = {});
Network load_network(const std::filesystem::path& stem, nlohmann::json* metadata = nullptr);

}  // namespace eegvad::nn
