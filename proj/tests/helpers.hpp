#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <string>

#include "eegvad/nn.hpp"
#include "eegvad/rng.hpp"
#include "eegvad/time_series.hpp"

namespace testutil {

inline eegvad::RowMatrix random_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed,
                                       double scale = 1.0) {
  eegvad::Rng rng = eegvad::derive_rng(seed, {});
  eegvad::RowMatrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = scale * eegvad::gaussian(rng);
  return m;
}

inline double rel_err(double a, double b) {
  const double denom = std::max({std::abs(a), std::abs(b), 1e-300});
  return std::abs(a - b) / denom;
}

// Fresh per-test scratch directory under the build tree.
inline std::filesystem::path scratch(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("eegvad_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

inline double sine_amplitude_after(const std::vector<double>& y, std::size_t skip) {
  double peak = 0.0;
  for (std::size_t i = skip; i < y.size(); ++i) peak = std::max(peak, std::abs(y[i]));
  return peak;
}

// Cyclic Jacobi rotations on a dense symmetric matrix; eigenvalues returned
// in descending order. Independent of LAPACK.
inline std::vector<double> jacobi_eigenvalues(Eigen::MatrixXd a) {
  const Eigen::Index n = a.rows();
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (Eigen::Index p = 0; p < n; ++p)
      for (Eigen::Index q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    if (off < 1e-30 * std::max(1.0, a.squaredNorm())) break;
    for (Eigen::Index p = 0; p < n; ++p)
      for (Eigen::Index q = p + 1; q < n; ++q) {
        if (a(p, q) == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (Eigen::Index k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
      }
  }
  std::vector<double> ev(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) ev[static_cast<std::size_t>(i)] = a(i, i);
  std::sort(ev.rbegin(), ev.rend());
  return ev;
}


inline int parameter_blocks(const eegvad::nn::Layer& l) {
  if (std::holds_alternative<eegvad::nn::GruLayer>(l)) return 9;
  if (std::holds_alternative<eegvad::nn::DenseLayer>(l)) return 2;
  return 0;
}

struct GradientCheck {
  double worst_rel = 0.0;
  int coordinates = 0;
};

// Central differences (step 1e-5) on `coords` random coordinates of layer
// `layer_index`. Dropout masks are replayed by restarting the same stream
// for every pass. Coordinates whose gradient is below 1e-8 on both sides
// are compared absolutely and reported as relative error 0 when they agree
// to 1e-10.
inline GradientCheck gradient_check(eegvad::nn::Network net, const eegvad::nn::Matrix& X,
                                    const eegvad::nn::Matrix& targets, std::size_t layer_index,
                                    std::uint64_t seed, int coords = 20) {
  using namespace eegvad;
  const Rng dropout_rng = derive_rng(seed, {1});
  nn::ParamSet grads = net.zeros_like();
  Rng r0 = dropout_rng;
  net.loss_and_gradient(X, targets, nn::Mode::train, r0, grads);

  std::size_t first = 0;
  for (std::size_t i = 0; i < layer_index; ++i) first += static_cast<std::size_t>(parameter_blocks(net.layers()[i]));
  const auto count = static_cast<std::size_t>(parameter_blocks(net.layers()[layer_index]));
  GradientCheck out;
  if (count == 0) return out;

  Rng pick = derive_rng(seed, {2});
  const double h = 1e-5;
  for (int trial = 0; trial < coords; ++trial) {
    const std::size_t b = first + uniform_index(pick, count);
    nn::Matrix* p = net.parameters()[b];
    const auto idx = static_cast<Eigen::Index>(uniform_index(pick, static_cast<std::uint64_t>(p->size())));
    const double saved = p->data()[idx];
    p->data()[idx] = saved + h;
    Rng r1 = dropout_rng;
    const double up = net.loss(X, targets, nn::Mode::train, r1);
    p->data()[idx] = saved - h;
    Rng r2 = dropout_rng;
    const double down = net.loss(X, targets, nn::Mode::train, r2);
    p->data()[idx] = saved;
    const double numeric = (up - down) / (2.0 * h);
    const double analytic = grads[b].data()[idx];
    const double scale = std::max(std::abs(numeric), std::abs(analytic));
    double rel;
    if (scale < 1e-8)
      rel = std::abs(numeric - analytic) < 1e-10 ? 0.0 : 1.0;
    else
      rel = std::abs(numeric - analytic) / scale;
    out.worst_rel = std::max(out.worst_rel, rel);
    ++out.coordinates;
  }
  return out;
}

// Small random networks covering every layer type, as used by the
// gradient checks.
inline eegvad::nn::Network perturbed(eegvad::nn::Network net, std::uint64_t seed, double scale) {
  eegvad::Rng init = eegvad::derive_rng(seed, {});
  eegvad::nn::initialize(net, init);
  for (eegvad::nn::Matrix* m : net.parameters())
    *m += eegvad::nn::Matrix(random_matrix(m->rows(), m->cols(), seed + 1, scale));
  return net;
}

inline eegvad::nn::Matrix one_hot(const std::vector<int>& classes, int c) {
  eegvad::nn::Matrix t = eegvad::nn::Matrix::Zero(static_cast<Eigen::Index>(classes.size()), c);
  for (std::size_t i = 0; i < classes.size(); ++i) t(static_cast<Eigen::Index>(i), classes[i]) = 1.0;
  return t;
}

}  // namespace testutil
