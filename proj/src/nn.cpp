#include "eegvad/nn.hpp"

#include <Eigen/QR>
#include <cmath>
#include <fstream>

#include "eegvad/error.hpp"
#include "eegvad/io.hpp"

namespace eegvad::nn {

namespace {

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

template <class M>
void sigmoid_inplace(M&& m) {
  for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = sigmoid(m(i));
}

void activate_inplace(Matrix& m, Activation a) {
  switch (a) {
    case Activation::identity: break;
    case Activation::sigmoid:
      for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = sigmoid(m.data()[i]);
      break;
    case Activation::relu: m = m.cwiseMax(0.0); break;
  }
}

// Derivative expressed through the activation output.
Matrix activation_grad(const Matrix& y, Activation a) {
  switch (a) {
    case Activation::identity: return Matrix::Ones(y.rows(), y.cols());
    case Activation::sigmoid: return y.array() * (1.0 - y.array());
    case Activation::relu: return (y.array() > 0.0).cast<double>();
  }
  return {};
}

void require(bool ok, const std::string& what) {
  if (!ok) throw Error(Errc::shape_mismatch, what);
}

void check_gru_shapes(const GruLayerParams& p) {
  const auto in = p.W_z.rows(), h = p.W_z.cols();
  for (const Matrix* w : {&p.W_z, &p.W_r, &p.W_h})
    require(w->rows() == in && w->cols() == h, "GRU input matrices disagree in shape");
  for (const Matrix* u : {&p.U_z, &p.U_r, &p.U_h})
    require(u->rows() == h && u->cols() == h, "GRU recurrent matrices must be hidden x hidden");
  for (const Matrix* b : {&p.b_z, &p.b_r, &p.b_h})
    require(b->rows() == 1 && b->cols() == h, "GRU biases must be 1 x hidden");
}

Matrix gru_sequence(const GruLayerParams& p, const Matrix& X, const RowVector& h0,
                    GruCache* cache) {
  check_gru_shapes(p);
  require(X.cols() == p.W_z.rows(), "GRU input width " + std::to_string(X.cols()) +
                                        " != " + std::to_string(p.W_z.rows()));
  require(X.rows() >= 1, "GRU needs at least one time step");
  const Eigen::Index T = X.rows(), h = p.hidden_size();
  require(h0.size() == h, "initial state has wrong size");

  Matrix XZ = X * p.W_z;
  Matrix XR = X * p.W_r;
  Matrix XH = X * p.W_h;
  XZ.rowwise() += p.b_z.row(0);
  XR.rowwise() += p.b_r.row(0);
  XH.rowwise() += p.b_h.row(0);

  Matrix H(T + 1, h), Z(T, h), R(T, h), Hc(T, h);
  H.row(0) = h0;
  RowVector a(h), rh(h);
  for (Eigen::Index t = 0; t < T; ++t) {
    const auto hp = H.row(t);
    a = XZ.row(t);
    a.noalias() += hp * p.U_z;
    sigmoid_inplace(a);
    Z.row(t) = a;

    a = XR.row(t);
    a.noalias() += hp * p.U_r;
    sigmoid_inplace(a);
    R.row(t) = a;

    rh = R.row(t).cwiseProduct(hp);
    a = XH.row(t);
    a.noalias() += rh * p.U_h;
    Hc.row(t) = a.array().tanh().matrix();

    H.row(t + 1) = Z.row(t).cwiseProduct(hp) +
                   (1.0 - Z.row(t).array()).matrix().cwiseProduct(Hc.row(t));
  }
  Matrix out = H.bottomRows(T);
  if (cache) *cache = GruCache{X, std::move(H), std::move(Z), std::move(R), std::move(Hc)};
  return out;
}

// Gradient blocks follow GruLayerParams order: W_z W_r W_h U_z U_r U_h b_z b_r b_h.
Matrix gru_backward(const GruLayerParams& p, const GruCache& c, const Matrix& dY,
                    Matrix* const* g, bool need_input_grad) {
  const Eigen::Index T = dY.rows(), h = p.hidden_size();
  Matrix dAZ(T, h), dAR(T, h), dAH(T, h);
  RowVector dh_next = RowVector::Zero(h), dh(h), dhp(h), drh(h), tmp(h);
  for (Eigen::Index t = T - 1; t >= 0; --t) {
    const auto hp = c.H.row(t);
    const auto z = c.Z.row(t);
    const auto r = c.R.row(t);
    const auto hc = c.Hc.row(t);
    dh = dY.row(t) + dh_next;

    // h = z.hp + (1-z).hc
    dAH.row(t) = dh.array() * (1.0 - z.array()) * (1.0 - hc.array().square());
    dAZ.row(t) = dh.array() * (hp.array() - hc.array()) * z.array() * (1.0 - z.array());
    dhp = dh.cwiseProduct(z);

    drh.noalias() = dAH.row(t) * p.U_h.transpose();
    dAR.row(t) = drh.array() * hp.array() * r.array() * (1.0 - r.array());
    dhp += drh.cwiseProduct(r);

    tmp.noalias() = dAZ.row(t) * p.U_z.transpose();
    dhp += tmp;
    tmp.noalias() = dAR.row(t) * p.U_r.transpose();
    dhp += tmp;
    dh_next = dhp;
  }
  const auto Hprev = c.H.topRows(T);
  const Matrix RH = c.R.cwiseProduct(Hprev);
  g[0]->noalias() += c.X.transpose() * dAZ;
  g[1]->noalias() += c.X.transpose() * dAR;
  g[2]->noalias() += c.X.transpose() * dAH;
  g[3]->noalias() += Hprev.transpose() * dAZ;
  g[4]->noalias() += Hprev.transpose() * dAR;
  g[5]->noalias() += RH.transpose() * dAH;
  *g[6] += dAZ.colwise().sum();
  *g[7] += dAR.colwise().sum();
  *g[8] += dAH.colwise().sum();
  if (!need_input_grad) return {};
  Matrix dX = dAZ * p.W_z.transpose();
  dX.noalias() += dAR * p.W_r.transpose();
  dX.noalias() += dAH * p.W_h.transpose();
  return dX;
}

void check_dense_shapes(const DenseParams& p, Eigen::Index in) {
  require(p.b.rows() == 1 && p.b.cols() == p.W.cols(), "dense bias must be 1 x out");
  require(in == p.W.rows(), "dense input width " + std::to_string(in) + " != " +
                                std::to_string(p.W.rows()));
}

std::size_t block_count(const Layer& layer) {
  if (std::holds_alternative<GruLayer>(layer)) return 9;
  if (std::holds_alternative<DenseLayer>(layer)) return 2;
  return 0;
}

}  // namespace

const char* to_string(Activation a) {
  switch (a) {
    case Activation::identity: return "identity";
    case Activation::sigmoid: return "sigmoid";
    case Activation::relu: return "relu";
  }
  return "identity";
}

Activation activation_from_string(const std::string& name) {
  if (name == "identity") return Activation::identity;
  if (name == "sigmoid") return Activation::sigmoid;
  if (name == "relu") return Activation::relu;
  throw Error(Errc::format_error, "unknown activation '" + name + "'");
}

GruLayerParams GruLayerParams::zeros(int input_size, int hidden_size) {
  GruLayerParams p;
  for (Matrix* w : {&p.W_z, &p.W_r, &p.W_h}) *w = Matrix::Zero(input_size, hidden_size);
  for (Matrix* u : {&p.U_z, &p.U_r, &p.U_h}) *u = Matrix::Zero(hidden_size, hidden_size);
  for (Matrix* b : {&p.b_z, &p.b_r, &p.b_h}) *b = Matrix::Zero(1, hidden_size);
  return p;
}

DenseParams DenseParams::zeros(int input_size, int output_size, Activation act) {
  return {Matrix::Zero(input_size, output_size), Matrix::Zero(1, output_size), act};
}

RowVector gru_step(const GruLayerParams& p, const RowVector& x, const RowVector& h_prev) {
  return gru_sequence(p, x, h_prev, nullptr).row(0);
}

Matrix gru_forward(const GruLayerParams& p, const Matrix& X, const RowVector* h0) {
  const RowVector zero = RowVector::Zero(p.hidden_size());
  return gru_sequence(p, X, h0 ? *h0 : zero, nullptr);
}

Matrix dropout(const Matrix& x, double rate, Mode mode, Rng& rng) {
  if (!(rate >= 0.0 && rate < 1.0))
    throw Error(Errc::invalid_rate, "dropout rate must lie in [0, 1), got " + std::to_string(rate));
  if (mode == Mode::infer || rate == 0.0) return x;
  const double keep_scale = 1.0 / (1.0 - rate);
  Matrix y(x.rows(), x.cols());
  for (Eigen::Index t = 0; t < x.rows(); ++t)
    for (Eigen::Index j = 0; j < x.cols(); ++j)
      y(t, j) = uniform01(rng) < rate ? 0.0 : x(t, j) * keep_scale;
  return y;
}

RowVector dense_apply(const DenseParams& p, const RowVector& x) {
  return dense_apply(p, Matrix(x)).row(0);
}

Matrix dense_apply(const DenseParams& p, const Matrix& X) {
  check_dense_shapes(p, X.cols());
  Matrix y = X * p.W;
  y.rowwise() += p.b.row(0);
  activate_inplace(y, p.activation);
  return y;
}

RowVector softmax(const RowVector& logits) {
  if (!logits.allFinite()) throw Error(Errc::non_finite_input, "softmax of non-finite logits");
  RowVector e = (logits.array() - logits.maxCoeff()).exp();
  return e / e.sum();
}

Matrix softmax_rows(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) out.row(r) = softmax(logits.row(r));
  return out;
}

double cross_entropy(const Matrix& probs, const Matrix& targets) {
  if (probs.rows() != targets.rows() || probs.cols() != targets.cols() || probs.rows() == 0)
    throw Error(Errc::shape_mismatch, "probabilities and targets differ in shape");
  double total = 0.0;
  for (Eigen::Index t = 0; t < probs.rows(); ++t) {
    Eigen::Index hot = -1;
    for (Eigen::Index c = 0; c < targets.cols(); ++c) {
      const double v = targets(t, c);
      if (v == 1.0 && hot < 0)
        hot = c;
      else if (v != 0.0)
        hot = -2;
    }
    if (hot < 0) throw Error(Errc::non_one_hot, "target row " + std::to_string(t) + " is not one-hot");
    total -= std::log(std::max(probs(t, hot), kLogFloor));
  }
  return total / static_cast<double>(probs.rows());
}

// ---------------------------------------------------------------------------

Network::Network(int input_dim, std::vector<Layer> layers)
    : input_dim_(input_dim), layers_(std::move(layers)) {}

int Network::output_dim() const {
  int dim = input_dim_;
  for (const auto& layer : layers_) {
    if (auto* g = std::get_if<GruLayer>(&layer)) dim = g->p.hidden_size();
    if (auto* d = std::get_if<DenseLayer>(&layer)) dim = d->p.output_size();
  }
  return dim;
}

bool Network::sequence_output() const {
  for (const auto& layer : layers_)
    if (std::holds_alternative<LastStepLayer>(layer)) return true;
  return false;
}

std::vector<Matrix*> Network::parameters() {
  std::vector<Matrix*> out;
  for (auto& layer : layers_) {
    if (auto* g = std::get_if<GruLayer>(&layer)) {
      auto& p = g->p;
      out.insert(out.end(), {&p.W_z, &p.W_r, &p.W_h, &p.U_z, &p.U_r, &p.U_h, &p.b_z, &p.b_r, &p.b_h});
    } else if (auto* d = std::get_if<DenseLayer>(&layer)) {
      out.insert(out.end(), {&d->p.W, &d->p.b});
    }
  }
  return out;
}

std::vector<const Matrix*> Network::parameters() const {
  auto mut = const_cast<Network*>(this)->parameters();
  return {mut.begin(), mut.end()};
}

std::size_t Network::parameter_count() const {
  std::size_t n = 0;
  for (const Matrix* m : parameters()) n += static_cast<std::size_t>(m->size());
  return n;
}

ParamSet Network::zeros_like() const {
  ParamSet out;
  for (const Matrix* m : parameters()) out.push_back(Matrix::Zero(m->rows(), m->cols()));
  return out;
}

Matrix Network::forward(const Matrix& X, Mode mode, Rng& rng, Tape* tape) const {
  if (X.cols() != input_dim_)
    throw Error(Errc::shape_mismatch, "network expects " + std::to_string(input_dim_) +
                                          " input features, got " + std::to_string(X.cols()));
  if (X.rows() < 1) throw Error(Errc::shape_mismatch, "empty input sequence");
  if (tape) {
    tape->caches.clear();
    tape->caches.reserve(layers_.size());
  }
  Matrix cur = X;
  for (const auto& layer : layers_) {
    if (auto* g = std::get_if<GruLayer>(&layer)) {
      GruCache cache;
      cur = gru_sequence(g->p, cur, RowVector::Zero(g->p.hidden_size()), tape ? &cache : nullptr);
      if (tape) tape->caches.emplace_back(std::move(cache));
    } else if (auto* d = std::get_if<DenseLayer>(&layer)) {
      Matrix y = dense_apply(d->p, cur);
      if (tape) tape->caches.emplace_back(DenseCache{std::move(cur), y});
      cur = std::move(y);
    } else if (auto* drop = std::get_if<DropoutLayer>(&layer)) {
      DropoutCache cache;
      if (mode == Mode::train && drop->rate > 0.0) {
        if (!(drop->rate < 1.0)) throw Error(Errc::invalid_rate, "dropout rate must be < 1");
        const double keep_scale = 1.0 / (1.0 - drop->rate);
        cache.mask.resize(cur.rows(), cur.cols());
        for (Eigen::Index t = 0; t < cur.rows(); ++t)
          for (Eigen::Index j = 0; j < cur.cols(); ++j)
            cache.mask(t, j) = uniform01(rng) < drop->rate ? 0.0 : keep_scale;
        cache.active = true;
        cur = cur.cwiseProduct(cache.mask);
      }
      if (tape) tape->caches.emplace_back(std::move(cache));
    } else {
      if (tape) tape->caches.emplace_back(LastStepCache{cur.rows(), cur.cols()});
      cur = Matrix(cur.bottomRows(1));
    }
  }
  return cur;
}

Matrix Network::predict_proba(const Matrix& X) const {
  Rng unused(0);
  return softmax_rows(forward(X, Mode::infer, unused));
}

void Network::backward(const Tape& tape, const Matrix& dlogits, ParamSet& grads,
                       double scale) const {
  if (tape.empty() || tape.caches.size() != layers_.size())
    throw Error(Errc::no_forward_state, "backward() called without a recorded forward pass");
  std::vector<std::size_t> offsets(layers_.size());
  std::size_t total = 0;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    offsets[i] = total;
    total += block_count(layers_[i]);
  }
  if (grads.size() != total) throw Error(Errc::shape_mismatch, "gradient set does not match network");

  // The first parametric layer does not need its input gradient.
  std::size_t first_param = layers_.size();
  for (std::size_t i = 0; i < layers_.size(); ++i)
    if (block_count(layers_[i]) > 0) {
      first_param = i;
      break;
    }

  Matrix d = dlogits * scale;
  for (std::size_t i = layers_.size(); i-- > 0;) {
    if (i < first_param) break;
    const auto& layer = layers_[i];
    const auto& cache = tape.caches[i];
    if (auto* g = std::get_if<GruLayer>(&layer)) {
      Matrix* blocks[9];
      for (int b = 0; b < 9; ++b) blocks[b] = &grads[offsets[i] + static_cast<std::size_t>(b)];
      d = gru_backward(g->p, std::get<GruCache>(cache), d, blocks, i > first_param);
    } else if (auto* dense = std::get_if<DenseLayer>(&layer)) {
      const auto& c = std::get<DenseCache>(cache);
      const Matrix dz = d.cwiseProduct(activation_grad(c.Y, dense->p.activation));
      grads[offsets[i]].noalias() += c.X.transpose() * dz;
      grads[offsets[i] + 1] += dz.colwise().sum();
      if (i > first_param) d = dz * dense->p.W.transpose();
    } else if (std::holds_alternative<DropoutLayer>(layer)) {
      const auto& c = std::get<DropoutCache>(cache);
      if (c.active) d = d.cwiseProduct(c.mask);
    } else {
      const auto& c = std::get<LastStepCache>(cache);
      Matrix full = Matrix::Zero(c.steps, c.dim);
      full.bottomRows(1) = d;
      d = std::move(full);
    }
  }
}

double Network::loss_and_gradient(const Matrix& X, const Matrix& targets, Mode mode, Rng& rng,
                                  ParamSet& grads, double scale) const {
  Tape tape;
  const Matrix logits = forward(X, mode, rng, &tape);
  const Matrix probs = softmax_rows(logits);
  const double loss = cross_entropy(probs, targets);
  const Matrix dlogits = (probs - targets) / static_cast<double>(probs.rows());
  backward(tape, dlogits, grads, scale);
  return loss;
}

double Network::loss(const Matrix& X, const Matrix& targets, Mode mode, Rng& rng) const {
  return cross_entropy(softmax_rows(forward(X, mode, rng)), targets);
}

void Network::round_to_float() {
  for (Matrix* m : parameters())
    for (Eigen::Index i = 0; i < m->size(); ++i) m->data()[i] = static_cast<float>(m->data()[i]);
}

void initialize(Network& net, Rng& rng) {
  auto glorot = [&](Matrix& w) {
    const double limit = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = uniform(rng, -limit, limit);
  };
  auto orthogonal = [&](Matrix& u) {
    Matrix a(u.rows(), u.cols());
    for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = gaussian(rng);
    Eigen::HouseholderQR<Matrix> qr(a);
    Matrix q = qr.householderQ() * Matrix::Identity(u.rows(), u.cols());
    const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
    for (Eigen::Index j = 0; j < q.cols(); ++j)
      if (r(j, j) < 0.0) q.col(j) = -q.col(j);
    u = q;
  };
  for (auto& layer : net.layers()) {
    if (auto* g = std::get_if<GruLayer>(&layer)) {
      for (Matrix* w : {&g->p.W_z, &g->p.W_r, &g->p.W_h}) glorot(*w);
      for (Matrix* u : {&g->p.U_z, &g->p.U_r, &g->p.U_h}) orthogonal(*u);
      for (Matrix* b : {&g->p.b_z, &g->p.b_r, &g->p.b_h}) b->setZero();
    } else if (auto* d = std::get_if<DenseLayer>(&layer)) {
      glorot(d->p.W);
      d->p.b.setZero();
    }
  }
  net.round_to_float();
}

void zero_parameters(Network& net) {
  for (Matrix* m : net.parameters()) m->setZero();
}

// ---------------------------------------------------------------------------

AdamState AdamState::for_network(const Network& net, AdamConfig config) {
  AdamState s;
  s.m = net.zeros_like();
  s.v = net.zeros_like();
  s.config = config;
  return s;
}

void adam_update(AdamState& state, std::span<Matrix* const> params, const ParamSet& grads) {
  if (params.size() != grads.size() || state.m.size() != grads.size() ||
      state.v.size() != grads.size())
    throw Error(Errc::shape_mismatch, "Adam state, parameters and gradients differ in block count");
  for (std::size_t i = 0; i < grads.size(); ++i)
    if (params[i]->rows() != grads[i].rows() || params[i]->cols() != grads[i].cols() ||
        state.m[i].rows() != grads[i].rows() || state.m[i].cols() != grads[i].cols())
      throw Error(Errc::shape_mismatch, "Adam block " + std::to_string(i) + " shape mismatch");

  const auto& c = state.config;
  ++state.step;
  const double correction1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
  const double correction2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < grads.size(); ++i) {
    auto m = state.m[i].array();
    auto v = state.v[i].array();
    const auto g = grads[i].array();
    m = c.beta1 * m + (1.0 - c.beta1) * g;
    v = c.beta2 * v + (1.0 - c.beta2) * g.square();
    params[i]->array() -= c.lr * (m / correction1) / ((v / correction2).sqrt() + c.epsilon);
  }
}

void adam_update(AdamState& state, Network& net, const ParamSet& grads) {
  const auto params = net.parameters();
  adam_update(state, params, grads);
}

double clip_grad_norm(ParamSet& grads, double max_norm) {
  double sq = 0.0;
  for (const auto& g : grads) sq += g.squaredNorm();
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm)
    for (auto& g : grads) g *= max_norm / norm;
  return norm;
}

// ---------------------------------------------------------------------------

namespace {

std::filesystem::path with_suffix(const std::filesystem::path& stem, const char* suffix) {
  return std::filesystem::path(stem.string() + suffix);
}

nlohmann::json block_json(const char* name, const Matrix& m) {
  return {{"name", name}, {"rows", m.rows()}, {"cols", m.cols()}};
}

}  // namespace

void save_network(const std::filesystem::path& stem, const Network& net,
                  const nlohmann::json& metadata) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& layer : net.layers()) {
    if (auto* g = std::get_if<GruLayer>(&layer)) {
      const auto& p = g->p;
      layers.push_back({{"type", "gru"},
                        {"input", p.input_size()},
                        {"hidden", p.hidden_size()},
                        {"blocks", {block_json("W_z", p.W_z), block_json("W_r", p.W_r),
                                    block_json("W_h", p.W_h), block_json("U_z", p.U_z),
                                    block_json("U_r", p.U_r), block_json("U_h", p.U_h),
                                    block_json("b_z", p.b_z), block_json("b_r", p.b_r),
                                    block_json("b_h", p.b_h)}}});
    } else if (auto* d = std::get_if<DenseLayer>(&layer)) {
      layers.push_back({{"type", "dense"},
                        {"input", d->p.input_size()},
                        {"output", d->p.output_size()},
                        {"activation", to_string(d->p.activation)},
                        {"blocks", {block_json("W", d->p.W), block_json("b", d->p.b)}}});
    } else if (auto* drop = std::get_if<DropoutLayer>(&layer)) {
      layers.push_back({{"type", "dropout"}, {"rate", drop->rate}});
    } else {
      layers.push_back({{"type", "last_step"}});
    }
  }
  const nlohmann::json manifest = {{"format", "eegvad-net-1"},
                                   {"input_dim", net.input_dim()},
                                   {"layers", layers},
                                   {"metadata", metadata}};
  io::write_json(with_suffix(stem, ".json"), manifest);

  std::ofstream out(with_suffix(stem, ".f32"), std::ios::binary);
  if (!out) throw Error(Errc::io_failure, "cannot write " + stem.string() + ".f32");
  for (const Matrix* m : net.parameters()) {
    const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = *m;
    io::write_f32(out, {rm.data(), static_cast<std::size_t>(rm.size())});
  }
}

Network load_network(const std::filesystem::path& stem, nlohmann::json* metadata) {
  const auto manifest = io::read_json(with_suffix(stem, ".json"));
  std::vector<Layer> layers;
  int input_dim = 0;
  try {
    if (manifest.at("format") != "eegvad-net-1") throw Error(Errc::format_error, "unknown network format");
    input_dim = manifest.at("input_dim").get<int>();
    for (const auto& l : manifest.at("layers")) {
      const std::string type = l.at("type").get<std::string>();
      if (type == "gru") {
        layers.emplace_back(GruLayer{GruLayerParams::zeros(l.at("input").get<int>(), l.at("hidden").get<int>())});
      } else if (type == "dense") {
        layers.emplace_back(DenseLayer{DenseParams::zeros(
            l.at("input").get<int>(), l.at("output").get<int>(),
            activation_from_string(l.at("activation").get<std::string>()))});
      } else if (type == "dropout") {
        layers.emplace_back(DropoutLayer{l.at("rate").get<double>()});
      } else if (type == "last_step") {
        layers.emplace_back(LastStepLayer{});
      } else {
        throw Error(Errc::format_error, "unknown layer type '" + type + "'");
      }
    }
    if (metadata) *metadata = manifest.value("metadata", nlohmann::json::object());
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::format_error, stem.string() + ".json: " + e.what());
  }
  Network net(input_dim, std::move(layers));
  std::ifstream in(with_suffix(stem, ".f32"), std::ios::binary);
  if (!in) throw Error(Errc::io_failure, "cannot open " + stem.string() + ".f32");
  for (Matrix* m : net.parameters()) {
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm(m->rows(), m->cols());
    io::read_f32(in, {rm.data(), static_cast<std::size_t>(rm.size())});
    *m = rm;
  }
  return net;
}

}  // namespace eegvad::nn
