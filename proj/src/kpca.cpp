#include "eegvad/kpca.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <mutex>
#include <numeric>

#include "eegvad/error.hpp"
#include "eegvad/io.hpp"
#include "eegvad/rng.hpp"

namespace eegvad {

namespace {

double dot(std::span<const double> x, std::span<const double> y) {
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) acc += x[i] * y[i];
  return acc;
}

std::span<const double> row_span(const RowMatrix& m, Eigen::Index r) {
  return {m.row(r).data(), static_cast<std::size_t>(m.cols())};
}

template <class M>
void apply_kernel_inplace(M& dots, const PolyKernel& k) {
  dots.array() = dots.array() * k.gamma + k.coef0;
  const Eigen::ArrayXXd base = dots.array();
  for (int i = 1; i < k.degree; ++i) dots.array() *= base;
  if (k.degree == 0) dots.setOnes();
}

constexpr Eigen::Index kBlockRows = 256;

}  // namespace

extern "C" void dsyevr_(const char* jobz, const char* range, const char* uplo, const int* n, double* a,
                        const int* lda, const double* vl, const double* vu, const int* il, const int* iu,
                        const double* abstol, int* m, double* w, double* z, const int* ldz, int* isuppz,
                        double* work, const int* lwork, int* iwork, const int* liwork, int* info);

// OpenBLAS threads its LAPACK internally; pin it to one thread when present
// so fits are reproducible across machines.
extern "C" void openblas_set_num_threads(int) __attribute__((weak));

namespace {

// All eigenpairs of a symmetric matrix, ascending.
void symmetric_eigen(const Eigen::MatrixXd& sym, Eigen::VectorXd& values, Eigen::MatrixXd& vectors) {
  static std::once_flag pinned;
  std::call_once(pinned, [] {
    if (openblas_set_num_threads) openblas_set_num_threads(1);
  });
  const int n = static_cast<int>(sym.rows());
  Eigen::MatrixXd a = sym;
  values.resize(n);
  vectors.resize(n, n);
  std::vector<int> isuppz(2 * static_cast<std::size_t>(std::max(1, n)));
  const double vl = 0.0, vu = 0.0, abstol = 0.0;
  const int il = 1, iu = n;
  int m = 0, info = 0, lwork = -1, liwork = -1, iwork_query = 0;
  double work_query = 0.0;
  dsyevr_("V", "A", "L", &n, a.data(), &n, &vl, &vu, &il, &iu, &abstol, &m, values.data(), vectors.data(), &n,
          isuppz.data(), &work_query, &lwork, &iwork_query, &liwork, &info);
  if (info != 0) throw Error(Errc::non_finite_input, "eigensolver workspace query failed");
  lwork = static_cast<int>(work_query);
  liwork = iwork_query;
  std::vector<double> work(static_cast<std::size_t>(lwork));
  std::vector<int> iwork(static_cast<std::size_t>(liwork));
  dsyevr_("V", "A", "L", &n, a.data(), &n, &vl, &vu, &il, &iu, &abstol, &m, values.data(), vectors.data(), &n,
          isuppz.data(), work.data(), &lwork, iwork.data(), &liwork, &info);
  if (info != 0 || m != n) throw Error(Errc::non_finite_input, "eigensolver failed to converge");
}

}  // namespace

double PolyKernel::operator()(std::span<const double> x, std::span<const double> y) const {
  const double base = gamma * dot(x, y) + coef0;
  double out = 1.0;
  for (int i = 0; i < degree; ++i) out *= base;
  return out;
}

double kernel(std::span<const double> x, std::span<const double> y, const PolyKernel& params) {
  if (x.size() != y.size())
    throw Error(Errc::length_mismatch, "kernel arguments of length " + std::to_string(x.size()) +
                                           " and " + std::to_string(y.size()));
  return params(x, y);
}

Eigen::MatrixXd gram_matrix(const RowMatrix& x, const PolyKernel& kernel_params, Exec exec) {
  PolyKernel k = kernel_params;
  if (!(k.gamma > 0.0) && x.cols() > 0) k.gamma = 1.0 / static_cast<double>(x.cols());
  const Eigen::Index n = x.rows();
  Eigen::MatrixXd g(n, n);
  auto fill_row = [&](Eigen::Index i) {
    for (Eigen::Index j = i; j < n; ++j) {
      const double v = k(row_span(x, i), row_span(x, j));
      g(i, j) = v;
      g(j, i) = v;
    }
  };
  // Per-entry accumulation order is the same in both modes.
  if (exec == Exec::parallel) {
#pragma omp parallel for schedule(dynamic, 16)
    for (Eigen::Index i = 0; i < n; ++i) fill_row(i);
  } else {
    for (Eigen::Index i = 0; i < n; ++i) fill_row(i);
  }
  return g;
}

Eigen::MatrixXd center_gram(const Eigen::MatrixXd& gram) {
  const Eigen::VectorXd col_means = gram.colwise().mean().transpose();
  const Eigen::VectorXd row_means = gram.rowwise().mean();
  const double grand = gram.mean();
  Eigen::MatrixXd c = gram;
  c.colwise() -= row_means;
  c.rowwise() -= col_means.transpose();
  c.array() += grand;
  return c;
}

KpcaModel kpca_fit(const RowMatrix& vectors, int out_dim, PolyKernel k, Exec exec) {
  const Eigen::Index n = vectors.rows();
  if (out_dim < 1) throw Error(Errc::invalid_argument, "out_dim must be positive");
  if (n < out_dim + 1)
    throw Error(Errc::insufficient_samples, "need at least out_dim + 1 = " +
                                                std::to_string(out_dim + 1) + " vectors, got " +
                                                std::to_string(n));
  if (!vectors.allFinite()) throw Error(Errc::non_finite_input, "KPCA input contains non-finite values");
  if (!(k.gamma > 0.0)) k.gamma = 1.0 / static_cast<double>(vectors.cols());

  const Eigen::MatrixXd gram = gram_matrix(vectors, k, exec);
  const Eigen::MatrixXd centered = center_gram(gram);

  Eigen::VectorXd evals;
  Eigen::MatrixXd evecs;
  symmetric_eigen(centered, evals, evecs);

  // The solver returns ascending values; order descending, stable on ties.
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::reverse(order.begin(), order.end());
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return evals(a) > evals(b); });

  KpcaModel model;
  model.kernel = k;
  model.out_dim = out_dim;
  model.training_vectors = vectors;
  model.gram_row_means = gram.rowwise().mean();
  model.gram_grand_mean = gram.mean();
  model.eigenvalues.resize(n);
  for (Eigen::Index i = 0; i < n; ++i)
    model.eigenvalues(i) = std::max(0.0, evals(order[static_cast<std::size_t>(i)]));

  const double tol = 1e-12 * static_cast<double>(n) * gram.cwiseAbs().maxCoeff();
  Eigen::Index rank = 0;
  while (rank < n && model.eigenvalues(rank) > tol) ++rank;
  if (rank < out_dim)
    throw Error(Errc::insufficient_rank, "centered Gram rank " + std::to_string(rank) +
                                             " is below out_dim " + std::to_string(out_dim));

  model.scaled_vectors.resize(n, out_dim);
  for (int c = 0; c < out_dim; ++c) {
    Eigen::VectorXd u = evecs.col(order[static_cast<std::size_t>(c)]);
    Eigen::Index peak;
    u.cwiseAbs().maxCoeff(&peak);
    if (u(peak) < 0.0) u = -u;
    model.scaled_vectors.col(c) = u / std::sqrt(model.eigenvalues(c));
  }
  return model;
}

KpcaModel kpca_fit(std::span<const FrameSequence> sequences, const KpcaConfig& config, Exec exec) {
  if (sequences.empty()) throw Error(Errc::insufficient_samples, "no sequences to fit KPCA on");
  const Eigen::Index dim = sequences.front().dim();
  std::size_t total = 0;
  for (const auto& s : sequences) {
    if (s.dim() != dim) throw Error(Errc::dim_mismatch, "KPCA input sequences differ in dimension");
    total += static_cast<std::size_t>(s.count());
  }

  std::vector<std::size_t> picks(total);
  std::iota(picks.begin(), picks.end(), std::size_t{0});
  if (total > config.max_fit_samples) {
    Rng rng = derive_rng(config.seed, {0x6b706361});
    // Partial Fisher-Yates: the first max_fit_samples slots are a uniform
    // sample without replacement.
    for (std::size_t i = 0; i < config.max_fit_samples; ++i) {
      const std::size_t j = i + uniform_index(rng, total - i);
      std::swap(picks[i], picks[j]);
    }
    picks.resize(config.max_fit_samples);
    std::sort(picks.begin(), picks.end());
  }

  RowMatrix pooled(static_cast<Eigen::Index>(picks.size()), dim);
  std::size_t seq = 0, offset = 0;
  for (std::size_t r = 0; r < picks.size(); ++r) {
    while (picks[r] >= offset + static_cast<std::size_t>(sequences[seq].count())) {
      offset += static_cast<std::size_t>(sequences[seq].count());
      ++seq;
    }
    pooled.row(static_cast<Eigen::Index>(r)) =
        sequences[seq].values.row(static_cast<Eigen::Index>(picks[r] - offset));
  }
  return kpca_fit(pooled, config.out_dim, config.kernel, exec);
}

RowMatrix kpca_transform(const KpcaModel& model, const RowMatrix& vectors, Exec exec) {
  if (vectors.cols() != model.input_dim())
    throw Error(Errc::dim_mismatch, "KPCA model expects dimension " +
                                        std::to_string(model.input_dim()) + ", got " +
                                        std::to_string(vectors.cols()));
  RowMatrix out(vectors.rows(), model.out_dim);
  // Blocks of frames against all training vectors through GEMM. Each
  // block is computed the same way whichever thread runs it.
  const Eigen::Index rows = vectors.rows();
  const Eigen::Index blocks = (rows + kBlockRows - 1) / kBlockRows;
  auto block = [&](Eigen::Index b) {
    const Eigen::Index r0 = b * kBlockRows, len = std::min(kBlockRows, rows - r0);
    Eigen::MatrixXd kv = vectors.middleRows(r0, len) * model.training_vectors.transpose();
    apply_kernel_inplace(kv, model.kernel);
    const Eigen::VectorXd means = kv.rowwise().mean();
    kv.colwise() -= means;
    kv.rowwise() -= model.gram_row_means.transpose();
    kv.array() += model.gram_grand_mean;
    out.middleRows(r0, len) = kv * model.scaled_vectors;
  };
  if (exec == Exec::parallel) {
#pragma omp parallel for schedule(dynamic)
    for (Eigen::Index b = 0; b < blocks; ++b) block(b);
  } else {
    for (Eigen::Index b = 0; b < blocks; ++b) block(b);
  }
  return out;
}

FrameSequence kpca_transform(const KpcaModel& model, const FrameSequence& frames, Exec exec) {
  FrameSequence out;
  out.values = kpca_transform(model, frames.values, exec);
  out.frame_rate_hz = frames.frame_rate_hz;
  out.layout = "kpca:" + std::to_string(model.out_dim);
  out.labels = frames.labels;
  return out;
}

std::vector<double> explained_variance_curve(const KpcaModel& model) {
  std::vector<double> positive;
  for (Eigen::Index i = 0; i < model.eigenvalues.size(); ++i)
    if (model.eigenvalues(i) > 0.0) positive.push_back(model.eigenvalues(i));
  const double total = std::accumulate(positive.begin(), positive.end(), 0.0);
  if (!(total > 0.0)) throw Error(Errc::all_zero_spectrum, "no positive eigenvalues");
  std::vector<double> curve(positive.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < positive.size(); ++i) {
    acc += positive[i];
    curve[i] = acc / total;
  }
  curve.back() = 1.0;
  return curve;
}

void round_to_float(KpcaModel& model) {
  auto round_all = [](auto& m) {
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<float>(m.data()[i]);
  };
  round_all(model.training_vectors);
  round_all(model.gram_row_means);
  round_all(model.eigenvalues);
  round_all(model.scaled_vectors);
  model.gram_grand_mean = static_cast<float>(model.gram_grand_mean);
  model.kernel.gamma = static_cast<float>(model.kernel.gamma);
  model.kernel.coef0 = static_cast<float>(model.kernel.coef0);
}

void save_kpca(const std::filesystem::path& path, const KpcaModel& model) {
  const nlohmann::json header = {
      {"format", "eegvad-kpca-1"},
      {"kernel", {{"type", "polynomial"}, {"degree", model.kernel.degree},
                  {"gamma", model.kernel.gamma}, {"coef0", model.kernel.coef0}}},
      {"n", model.fit_size()},
      {"d", model.input_dim()},
      {"out_dim", model.out_dim},
      {"blocks", {"training_vectors[n*d]", "gram_row_means[n]", "gram_grand_mean[1]",
                  "eigenvalues[n]", "scaled_vectors[n*out_dim,row-major]"}}};
  io::write_json(io::sidecar_path(path), header);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::io_failure, "cannot write " + path.string());
  auto block = [&](const auto& m) {
    io::write_f32(out, {m.data(), static_cast<std::size_t>(m.size())});
  };
  block(model.training_vectors);
  block(model.gram_row_means);
  const double grand = model.gram_grand_mean;
  io::write_f32(out, {&grand, 1});
  block(model.eigenvalues);
  const RowMatrix vectors = model.scaled_vectors;
  block(vectors);
}

KpcaModel load_kpca(const std::filesystem::path& path) {
  const auto header = io::read_json(io::sidecar_path(path));
  KpcaModel model;
  Eigen::Index n = 0, d = 0;
  try {
    if (header.at("format") != "eegvad-kpca-1") throw Error(Errc::format_error, "unknown KPCA format");
    const auto& k = header.at("kernel");
    model.kernel.degree = k.at("degree").get<int>();
    model.kernel.gamma = k.at("gamma").get<double>();
    model.kernel.coef0 = k.at("coef0").get<double>();
    n = header.at("n").get<Eigen::Index>();
    d = header.at("d").get<Eigen::Index>();
    model.out_dim = header.at("out_dim").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::format_error, path.string() + ": " + e.what());
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io_failure, "cannot open " + path.string());
  model.training_vectors.resize(n, d);
  model.gram_row_means.resize(n);
  model.eigenvalues.resize(n);
  RowMatrix vectors(n, model.out_dim);
  auto block = [&](auto& m) { io::read_f32(in, {m.data(), static_cast<std::size_t>(m.size())}); };
  block(model.training_vectors);
  block(model.gram_row_means);
  double grand = 0.0;
  io::read_f32(in, {&grand, 1});
  model.gram_grand_mean = grand;
  block(model.eigenvalues);
  block(vectors);
  model.scaled_vectors = vectors;
  return model;
}

}  // namespace eegvad
