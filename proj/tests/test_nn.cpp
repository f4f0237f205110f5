#include <doctest.h>

#include <cmath>

#include "eegvad/error.hpp"
#include "eegvad/nn.hpp"
#include "helpers.hpp"

using namespace eegvad;
using namespace eegvad::nn;

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

Matrix as_matrix(const RowMatrix& m) { return Matrix(m); }

GruLayerParams scalar_gru(double wz, double wr, double wh, double uz, double ur, double uh, double bz,
                          double br, double bh) {
  GruLayerParams p = GruLayerParams::zeros(1, 1);
  p.W_z(0, 0) = wz, p.W_r(0, 0) = wr, p.W_h(0, 0) = wh;
  p.U_z(0, 0) = uz, p.U_r(0, 0) = ur, p.U_h(0, 0) = uh;
  p.b_z(0, 0) = bz, p.b_r(0, 0) = br, p.b_h(0, 0) = bh;
  return p;
}

}  // namespace

TEST_SUITE("nn-core") {

TEST_CASE("GRU step examples") {
  const GruLayerParams zero = GruLayerParams::zeros(3, 4);
  CHECK(gru_step(zero, RowVector::Constant(3, 0.7), RowVector::Zero(4)).isZero(0.0));

  GruLayerParams copy = GruLayerParams::zeros(3, 4);
  copy.b_z.setConstant(100.0);
  const RowVector h_prev = RowVector::LinSpaced(4, -0.5, 0.9);
  CHECK((gru_step(copy, RowVector::Constant(3, 2.0), h_prev) - h_prev).cwiseAbs().maxCoeff() < 1e-12);

  const double x = 0.3, hp = -0.4;
  const GruLayerParams p = scalar_gru(0.1, -0.2, 0.3, 0.25, -0.15, 0.05, 0.02, -0.03, 0.04);
  const double z = sigmoid(0.1 * x + 0.25 * hp + 0.02);
  const double r = sigmoid(-0.2 * x - 0.15 * hp - 0.03);
  const double hc = std::tanh(0.3 * x + 0.05 * (r * hp) + 0.04);
  const double expected = z * hp + (1.0 - z) * hc;
  RowVector xv(1), hv(1);
  xv << x;
  hv << hp;
  CHECK(std::abs(gru_step(p, xv, hv)(0) - expected) < 1e-12);
}

TEST_CASE("GRU forward composes steps and is order sensitive") {
  GruLayerParams p = GruLayerParams::zeros(3, 5);
  Rng rng = derive_rng(5, {});
  for (Matrix* m : {&p.W_z, &p.W_r, &p.W_h, &p.U_z, &p.U_r, &p.U_h, &p.b_z, &p.b_r, &p.b_h})
    for (Eigen::Index i = 0; i < m->size(); ++i) m->data()[i] = 0.5 * gaussian(rng);
  const Matrix X = as_matrix(testutil::random_matrix(6, 3, 6));
  const Matrix H = gru_forward(p, X);
  RowVector h = RowVector::Zero(5);
  for (Eigen::Index t = 0; t < X.rows(); ++t) {
    h = gru_step(p, X.row(t), h);
    CHECK(H.row(t) == h);
    CHECK(h.cwiseAbs().maxCoeff() <= 1.0);
  }
  const Matrix Hr = gru_forward(p, X.colwise().reverse());
  CHECK((Hr.bottomRows(1) - H.bottomRows(1)).cwiseAbs().maxCoeff() > 1e-6);
  CHECK_THROWS_AS(gru_step(p, RowVector::Zero(2), RowVector::Zero(5)), Error);
}

TEST_CASE("dropout") {
  Rng rng = derive_rng(1, {});
  const Matrix x = Matrix::Constant(1000, 1000, 1.0);
  CHECK(dropout(x, 0.0, Mode::train, rng) == x);
  CHECK(dropout(x, 0.2, Mode::infer, rng) == x);
  const Matrix y = dropout(x, 0.2, Mode::train, rng);
  CHECK(y.mean() == doctest::Approx(1.0).epsilon(0.01));
  const double zeros = static_cast<double>((y.array() == 0.0).count()) / static_cast<double>(y.size());
  CHECK(zeros == doctest::Approx(0.2).epsilon(0.01 / 0.2));
  CHECK(((y.array() == 0.0) || (y.array() == 1.25)).all());
  try {
    dropout(x, 1.0, Mode::train, rng);
    FAIL("expected invalid-rate");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::invalid_rate);
  }
  Rng a = derive_rng(2, {}), b = derive_rng(2, {});
  CHECK(dropout(x.topRows(10), 0.2, Mode::train, a) == dropout(x.topRows(10), 0.2, Mode::train, b));
}

TEST_CASE("dense layer") {
  DenseParams id = DenseParams::zeros(3, 3, Activation::identity);
  id.W.setIdentity();
  const RowVector x = RowVector::LinSpaced(3, -1.0, 2.0);
  CHECK(dense_apply(id, x) == x);
  DenseParams relu = DenseParams::zeros(1, 1, Activation::relu);
  relu.b(0, 0) = -1.0;
  CHECK(dense_apply(relu, RowVector(RowVector::Zero(1)))(0) == 0.0);
  CHECK(dense_apply(DenseParams::zeros(2, 1, Activation::sigmoid), RowVector(RowVector::Zero(2)))(0) == 0.5);
  CHECK_THROWS_AS(dense_apply(id, RowVector(RowVector::Zero(2))), Error);
}

TEST_CASE("softmax") {
  RowVector a(2), b(2), c(2);
  a << 0, 0;
  b << 1000, 1000;
  c << std::log(2.0), 0;
  CHECK(softmax(a)(0) == 0.5);
  CHECK(softmax(b)(1) == 0.5);
  CHECK(softmax(c)(0) == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
  CHECK(softmax(c)(1) == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
  const Matrix p = softmax_rows(as_matrix(testutil::random_matrix(50, 7, 3, 20.0)));
  for (Eigen::Index t = 0; t < p.rows(); ++t) CHECK(std::abs(p.row(t).sum() - 1.0) <= 1e-12);
  CHECK((p.array() > 0.0).all());
  RowVector bad(2);
  bad << 1.0, std::nan("");
  CHECK_THROWS_AS(softmax(bad), Error);
}

TEST_CASE("cross-entropy") {
  CHECK(cross_entropy(testutil::one_hot({0, 1}, 2), testutil::one_hot({0, 1}, 2)) == doctest::Approx(0.0));
  CHECK(cross_entropy(Matrix::Constant(3, 2, 0.5), testutil::one_hot({0, 1, 1}, 2)) == doctest::Approx(std::log(2.0)));
  Matrix p(1, 2);
  p << 0.25, 0.75;
  CHECK(cross_entropy(p, testutil::one_hot({1}, 2)) == doctest::Approx(0.2877).epsilon(1e-4));
  CHECK(std::isfinite(cross_entropy(testutil::one_hot({0}, 2), testutil::one_hot({1}, 2))));
  try {
    cross_entropy(p, Matrix::Constant(1, 2, 0.5));
    FAIL("expected non-one-hot");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::non_one_hot);
  }
  try {
    cross_entropy(p, testutil::one_hot({0, 1}, 2));
    FAIL("expected shape-mismatch");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::shape_mismatch);
  }
}

TEST_CASE("output-layer gradient by hand") {
  Network net(3, {DenseLayer{DenseParams::zeros(3, 2, Activation::identity)}});
  const Matrix X = Matrix::Zero(4, 3);
  const Matrix targets = testutil::one_hot({0, 1, 1, 1}, 2);
  ParamSet g = net.zeros_like();
  Rng rng(0);
  net.loss_and_gradient(X, targets, Mode::train, rng, g);
  CHECK(g[1](0, 0) == doctest::Approx(0.5 - 0.25));
  CHECK(g[1](0, 1) == doctest::Approx(0.5 - 0.75));
  CHECK(g[0].isZero(0.0));
}

TEST_CASE("logit shift direction has zero gradient") {
  Network net(4, {GruLayer{GruLayerParams::zeros(4, 6)}, DenseLayer{DenseParams::zeros(6, 3, Activation::identity)}});
  Rng init = derive_rng(7, {});
  initialize(net, init);
  ParamSet g = net.zeros_like();
  Rng rng(0);
  net.loss_and_gradient(as_matrix(testutil::random_matrix(9, 4, 8)), testutil::one_hot({0, 1, 2, 2, 1, 0, 0, 1, 2}, 3),
                        Mode::infer, rng, g);
  CHECK(std::abs(g.back().sum()) < 1e-12);
}

TEST_CASE("gradient checks per layer type") {
  const Matrix X = as_matrix(testutil::random_matrix(7, 4, 11));
  const Matrix frame_targets = testutil::one_hot({0, 1, 1, 0, 1, 0, 0}, 2);

  SUBCASE("GRU stack with dropout and time-distributed dense") {
    Network net(4, {GruLayer{GruLayerParams::zeros(4, 5)}, DropoutLayer{0.2}, GruLayer{GruLayerParams::zeros(5, 3)},
                    DropoutLayer{0.2}, DenseLayer{DenseParams::zeros(3, 4, Activation::sigmoid)},
                    DenseLayer{DenseParams::zeros(4, 2, Activation::identity)}});
    Rng init = derive_rng(12, {});
    initialize(net, init);
    for (Matrix* m : net.parameters()) *m += 0.1 * as_matrix(testutil::random_matrix(m->rows(), m->cols(), 13));
    CHECK(testutil::gradient_check(net, X, frame_targets, 0, 14).worst_rel < 1e-4);
    CHECK(testutil::gradient_check(net, X, frame_targets, 2, 15).worst_rel < 1e-4);
    CHECK(testutil::gradient_check(net, X, frame_targets, 4, 16).worst_rel < 1e-4);
    CHECK(testutil::gradient_check(net, X, frame_targets, 5, 17).worst_rel < 1e-4);
  }
  SUBCASE("dense relu and sigmoid") {
    Network net(4, {DenseLayer{DenseParams::zeros(4, 6, Activation::relu)},
                    DenseLayer{DenseParams::zeros(6, 5, Activation::sigmoid)},
                    DenseLayer{DenseParams::zeros(5, 2, Activation::identity)}});
    Rng init = derive_rng(18, {});
    initialize(net, init);
    for (Matrix* m : net.parameters()) *m += 0.2 * as_matrix(testutil::random_matrix(m->rows(), m->cols(), 19));
    CHECK(testutil::gradient_check(net, X, frame_targets, 0, 20).worst_rel < 1e-4);
    CHECK(testutil::gradient_check(net, X, frame_targets, 1, 21).worst_rel < 1e-4);
    CHECK(testutil::gradient_check(net, X, frame_targets, 2, 22).worst_rel < 1e-4);
  }
  SUBCASE("sequence classifier through the last step") {
    Network net(4, {GruLayer{GruLayerParams::zeros(4, 6)}, DropoutLayer{0.2}, GruLayer{GruLayerParams::zeros(6, 3)},
                    LastStepLayer{}, DenseLayer{DenseParams::zeros(3, 4, Activation::identity)}});
    Rng init = derive_rng(23, {});
    initialize(net, init);
    for (Matrix* m : net.parameters()) *m += 0.1 * as_matrix(testutil::random_matrix(m->rows(), m->cols(), 24));
    CHECK(net.sequence_output());
    CHECK(testutil::gradient_check(net, X, testutil::one_hot({2}, 4), 0, 25).worst_rel < 1e-4);
    CHECK(testutil::gradient_check(net, X, testutil::one_hot({2}, 4), 2, 26).worst_rel < 1e-4);
    CHECK(testutil::gradient_check(net, X, testutil::one_hot({2}, 4), 4, 27).worst_rel < 1e-4);
  }
}

TEST_CASE("backward needs a recorded forward pass") {
  Network net(2, {DenseLayer{DenseParams::zeros(2, 2, Activation::identity)}});
  ParamSet g = net.zeros_like();
  Tape empty;
  try {
    net.backward(empty, Matrix::Zero(1, 2), g);
    FAIL("expected no-forward-state");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::no_forward_state);
  }
}

TEST_CASE("Adam") {
  Matrix theta = Matrix::Constant(2, 2, 0.3);
  std::vector<Matrix*> params{&theta};
  AdamState s;
  s.m = {Matrix::Zero(2, 2)};
  s.v = {Matrix::Zero(2, 2)};
  adam_update(s, params, {Matrix::Zero(2, 2)});
  CHECK(theta == Matrix::Constant(2, 2, 0.3));
  CHECK(s.step == 1);

  Matrix w = Matrix::Constant(1, 1, 0.0);
  std::vector<Matrix*> wp{&w};
  AdamState t;
  t.m = {Matrix::Zero(1, 1)};
  t.v = {Matrix::Zero(1, 1)};
  adam_update(t, wp, {Matrix::Constant(1, 1, 1.0)});
  CHECK(w(0, 0) == doctest::Approx(-0.001 / (1.0 + 1e-8)).epsilon(1e-12));
  const double before = w(0, 0);
  adam_update(t, wp, {Matrix::Constant(1, 1, 1.0)});
  CHECK(before - w(0, 0) == doctest::Approx(0.001).epsilon(1e-6));
  CHECK(t.step == 2);
  CHECK((t.v[0].array() >= 0.0).all());
  CHECK_THROWS_AS(adam_update(t, wp, {Matrix::Zero(2, 1)}), Error);
}

TEST_CASE("gradient clipping") {
  ParamSet g{Matrix::Constant(1, 1, 3.0), Matrix::Constant(1, 1, 4.0)};
  CHECK(clip_grad_norm(g, 1.0) == doctest::Approx(5.0));
  CHECK(g[0](0, 0) == doctest::Approx(0.6));
  CHECK(g[1](0, 0) == doctest::Approx(0.8));
}

TEST_CASE("initialization") {
  Network net(5, {GruLayer{GruLayerParams::zeros(5, 8)}, DenseLayer{DenseParams::zeros(8, 2, Activation::identity)}});
  Rng a = derive_rng(30, {});
  initialize(net, a);
  const auto& g = std::get<GruLayer>(net.layers()[0]).p;
  CHECK((g.U_z.transpose() * g.U_z - Matrix::Identity(8, 8)).cwiseAbs().maxCoeff() < 1e-6);
  CHECK(g.b_h.isZero(0.0));
  const double limit = std::sqrt(6.0 / (5 + 8));
  CHECK(g.W_r.cwiseAbs().maxCoeff() <= limit);
  Network again(5, {GruLayer{GruLayerParams::zeros(5, 8)}, DenseLayer{DenseParams::zeros(8, 2, Activation::identity)}});
  Rng b = derive_rng(30, {});
  initialize(again, b);
  for (std::size_t i = 0; i < net.parameters().size(); ++i) CHECK(*net.parameters()[i] == *again.parameters()[i]);
}

TEST_CASE("checkpoint round trip") {
  Network net(3, {GruLayer{GruLayerParams::zeros(3, 4)}, DropoutLayer{0.2}, LastStepLayer{},
                  DenseLayer{DenseParams::zeros(4, 4, Activation::relu)}});
  Rng rng = derive_rng(40, {});
  initialize(net, rng);
  const auto dir = testutil::scratch("nn_io");
  save_network(dir / "net", net, {{"epoch", 7}});
  nlohmann::json meta;
  const Network back = load_network(dir / "net", &meta);
  CHECK(meta.at("epoch") == 7);
  REQUIRE(back.layers().size() == 4);
  CHECK(std::get<DropoutLayer>(back.layers()[1]).rate == 0.2);
  CHECK(std::get<DenseLayer>(back.layers()[3]).p.activation == Activation::relu);
  for (std::size_t i = 0; i < net.parameters().size(); ++i) CHECK(*back.parameters()[i] == *net.parameters()[i]);
  const Matrix X = as_matrix(testutil::random_matrix(5, 3, 41));
  CHECK(back.predict_proba(X) == net.predict_proba(X));
}

}  // TEST_SUITE
