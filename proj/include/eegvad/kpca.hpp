#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "eegvad/exec.hpp"
#include "eegvad/frame_sequence.hpp"

namespace eegvad {

struct PolyKernel {
  int degree = 3;
  double gamma = 0.0;  // <= 0 means 1 / input dimension, resolved at fit time
  double coef0 = 1.0;

  double operator()(std::span<const double> x, std::span<const double> y) const;
};

// (gamma <x, y> + coef0)^degree. Throws length_mismatch.
double kernel(std::span<const double> x, std::span<const double> y, const PolyKernel& params);

struct KpcaConfig {
  int out_dim = 30;
  PolyKernel kernel{};
  // Fit on a seeded uniform subsample of at most this many vectors.
  std::size_t max_fit_samples = 2000;
  std::uint64_t seed = 0;
};

struct KpcaModel {
  RowMatrix training_vectors;       // N x d
  PolyKernel kernel{};              // gamma resolved
  Eigen::VectorXd gram_row_means;   // length N
  double gram_grand_mean = 0.0;
  Eigen::VectorXd eigenvalues;      // all N, descending, clamped at 0
  Eigen::MatrixXd scaled_vectors;   // N x out_dim, columns u_k / sqrt(lambda_k)
  int out_dim = 0;

  Eigen::Index input_dim() const { return training_vectors.cols(); }
  Eigen::Index fit_size() const { return training_vectors.rows(); }
};

// N x N Gram matrix of the rows of `x`; gamma <= 0 resolves to 1 / cols.
Eigen::MatrixXd gram_matrix(const RowMatrix& x, const PolyKernel& k, Exec exec = Exec::parallel);

// K - 1K - K1 + 1K1 with 1 the all-1/N matrix.
Eigen::MatrixXd center_gram(const Eigen::MatrixXd& gram);

// Fits on every row of `vectors` (no subsampling).
KpcaModel kpca_fit(const RowMatrix& vectors, int out_dim, PolyKernel k = {},
                   Exec exec = Exec::parallel);

// Pools the frames of all sequences, subsamples per config, fits.
KpcaModel kpca_fit(std::span<const FrameSequence> sequences, const KpcaConfig& config,
                   Exec exec = Exec::parallel);

RowMatrix kpca_transform(const KpcaModel& model, const RowMatrix& vectors,
                         Exec exec = Exec::parallel);
FrameSequence kpca_transform(const KpcaModel& model, const FrameSequence& frames,
                             Exec exec = Exec::parallel);

// Cumulative eigenvalue mass over the strictly positive spectrum; last
// element is 1. Throws all_zero_spectrum.
std::vector<double> explained_variance_curve(const KpcaModel& model);

// Rounds all stored state to float32 so the model survives a checkpoint
// round trip unchanged.
void round_to_float(KpcaModel& model);

// JSON header + float32 blocks (training vectors, row means, eigenvalues,
// scaled eigenvectors).
void save_kpca(const std::filesystem::path& path, const KpcaModel& model);
KpcaModel load_kpca(const std::filesystem::path& path);

}  // namespace eegvad
