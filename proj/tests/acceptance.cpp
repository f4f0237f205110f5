// Acceptance run: one PASS/FAIL line per criterion. Pass criterion numbers
// as arguments to run a subset; with no arguments all nine run.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <set>
#include <sstream>
#include <string>

#include "eegvad/eeg_features.hpp"
#include "eegvad/experiment.hpp"
#include "eegvad/filter.hpp"
#include "eegvad/kpca.hpp"
#include "eegvad/mfcc.hpp"
#include "eegvad/models.hpp"
#include "helpers.hpp"

using namespace eegvad;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::vector<std::string> notes;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      notes.push_back("failed: " + what);
    }
  }
  void note(const std::string& s) { notes.push_back(s); }
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Steady-state amplitude of a unit sine after filtering, in dB.
double probe_gain_db(const BiquadCascade& f, double freq_hz, double fs) {
  const int n = static_cast<int>(fs * 20.0);
  RowMatrix x(1, n);
  for (int i = 0; i < n; ++i) x(0, i) = freq_hz == 0.0 ? 1.0 : std::sin(2.0 * std::numbers::pi * freq_hz * i / fs);
  const TimeSeries y = filter_series(f, make_series(x, fs));
  double peak = 0.0;
  for (int i = n / 2; i < n; ++i) peak = std::max(peak, std::abs(y.data(0, i)));
  return 20.0 * std::log10(peak);
}

Outcome criterion1() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  const BiquadCascade bp = design_bandpass(0.1, 70.0, 1000.0);
  const BiquadCascade notch = design_notch(60.0, 1000.0, 30.0);
  const double g200 = probe_gain_db(bp, 200.0, 1000.0);
  const double g30 = probe_gain_db(bp, 30.0, 1000.0);
  const double g60 = probe_gain_db(notch, 60.0, 1000.0);
  const double gdc = probe_gain_db(notch, 0.0, 1000.0);
  const double elapsed = seconds_since(t0);
  o.note("band-pass 200 Hz " + fmt("%.2f dB", g200) + ", 30 Hz " + fmt("%.3f dB", g30) + "; notch 60 Hz " +
         fmt("%.2f dB", g60) + ", DC " + fmt("%.4f dB", gdc) + "; " + fmt("%.2f s", elapsed));
  o.require(g200 <= -20.0, "200 Hz attenuated by >= 20 dB");
  o.require(std::abs(g30) <= 1.0, "30 Hz within 1 dB");
  o.require(g60 <= -30.0, "60 Hz notched by >= 30 dB");
  o.require(std::abs(gdc) <= 1.0, "DC within 1 dB");
  o.require(elapsed < 5.0, "runtime < 5 s");
  return o;
}

Outcome criterion2() {
  Outcome o;
  auto near = [](double a, double b, double tol) { return std::abs(a - b) <= tol; };
  using V = std::vector<double>;
  o.require(rms(V{3, -3, 3, -3}) == 3.0 && rms(V{0, 0, 0, 0}) == 0.0 && near(rms(V{1, 2, 3, 4}), 2.7386, 1e-4), "rms");
  o.require(zero_crossing_rate(V{1, -1, 1, -1}) == 1.0 && zero_crossing_rate(V{5, 6, 7}) == 0.0 &&
                near(zero_crossing_rate(V{1, 0, -1, 2}), 2.0 / 3.0, 1e-12),
            "zcr");
  o.require(moving_window_average(V{2, 2, 2}) == 2.0 && moving_window_average(V{-1, 1}) == 0.0 &&
                moving_window_average(V{1, 2, 3, 4}) == 2.5,
            "moving window average");
  Rng rng = derive_rng(1, {});
  V g(100000);
  for (double& v : g) v = gaussian(rng);
  const double kg = kurtosis(g).value;
  const KurtosisResult kc = kurtosis(V{4, 4, 4, 4});
  o.require(near(kurtosis(V{1, -1, 1, -1}).value, 1.0, 1e-12) && kc.value == 0.0 && kc.zero_variance &&
                near(kg, 3.0, 0.1),
            "kurtosis");
  V sine(64);
  for (int i = 0; i < 64; ++i) sine[static_cast<std::size_t>(i)] = std::sin(2.0 * std::numbers::pi * 5.0 * i / 64.0);
  double mean_h = 0.0;
  for (int d = 0; d < 200; ++d) {
    V w(64);
    for (double& v : w) v = gaussian(rng);
    mean_h += power_spectral_entropy(w) / 200.0;
  }
  o.require(power_spectral_entropy(V(64, 0.0)) == 0.0 && power_spectral_entropy(sine) < 1e-10 &&
                std::abs(mean_h - std::log(32.0)) < 0.25 * std::log(32.0),
            "power spectral entropy");
  o.require(near(hz_to_mel(700.0), 781.17, 0.01) && hz_to_mel(0.0) == 0.0, "mel scale");
  const FrameSequence silence = extract_mfcc(make_series(RowMatrix::Zero(1, 16000), 16000.0));
  o.require(silence.count() == 98, "MFCC frame count for 1 s");
  bool aligned = true;
  for (double s : {1.0, 2.5, 10.0}) {
    const FrameSequence m = extract_mfcc(make_series(testutil::random_matrix(1, static_cast<Eigen::Index>(s * 16000), 2), 16000.0));
    const FrameSequence e = extract_eeg_features(make_series(testutil::random_matrix(31, static_cast<Eigen::Index>(s * 1000), 3), 1000.0));
    const FrameSequence both = concat_features(m, e);
    aligned = aligned && m.frame_rate_hz == 100.0 && e.frame_rate_hz == 100.0 && e.dim() == 155 &&
              both.values.leftCols(13) == m.values.topRows(both.count()) &&
              both.values.rightCols(155) == e.values.topRows(both.count()) &&
              std::abs(m.count() - e.count()) <= 8;
  }
  o.require(aligned, "MFCC and EEG frames at 100 Hz, aligned by index");
  o.note("gaussian kurtosis " + fmt("%.4f", kg) + ", white-noise entropy " + fmt("%.3f", mean_h) + " vs ln 32 " +
         fmt("%.3f", std::log(32.0)));
  return o;
}

Outcome criterion3() {
  Outcome o;
  double worst_eig = 0.0, worst_consistency = 0.0;
  bool curves_ok = true;
  for (int n = 5; n <= 20; ++n) {
    for (std::uint64_t trial = 0; trial < 3; ++trial) {
      const RowMatrix x = testutil::random_matrix(n, 3 + static_cast<int>(trial) * 4, 1000 * n + trial);
      const KpcaModel m = kpca_fit(x, std::min(4, n - 1), {});
      const Eigen::MatrixXd kc = center_gram(gram_matrix(x, m.kernel));
      const auto oracle = testutil::jacobi_eigenvalues(kc);
      const double top = oracle.front();
      for (int i = 0; i < n; ++i) {
        const double e = oracle[static_cast<std::size_t>(i)];
        if (e > 1e-8 * top)
          worst_eig = std::max(worst_eig, testutil::rel_err(m.eigenvalues(i), e));
        else if (std::abs(m.eigenvalues(i) - std::max(e, 0.0)) > 1e-8 * top)
          worst_eig = std::max(worst_eig, 1.0);
      }
      const Eigen::MatrixXd projection = kc * m.scaled_vectors;
      const RowMatrix t = kpca_transform(m, x);
      worst_consistency = std::max(worst_consistency, (t - projection).cwiseAbs().maxCoeff() /
                                                          std::max(1.0, projection.cwiseAbs().maxCoeff()));
      const auto c = explained_variance_curve(m);
      for (std::size_t i = 1; i < c.size(); ++i) curves_ok = curves_ok && c[i] >= c[i - 1];
      curves_ok = curves_ok && c.back() == 1.0;
    }
  }
  o.note("worst eigenvalue rel. error " + fmt("%.2e", worst_eig) + ", worst fit/transform deviation " +
         fmt("%.2e", worst_consistency));
  o.require(worst_eig <= 1e-8, "eigenvalues within 1e-8 of the Jacobi oracle");
  o.require(worst_consistency <= 1e-8, "fit/transform consistency within 1e-8");
  o.require(curves_ok, "explained-variance curves nondecreasing, ending at 1");
  return o;
}

Outcome criterion4() {
  using namespace eegvad::nn;
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  const Matrix X(testutil::random_matrix(8, 5, 71));
  const Matrix frames = testutil::one_hot({0, 1, 1, 0, 1, 0, 0, 1}, 2);
  struct Case {
    const char* name;
    Network net;
    std::size_t layer;
    Matrix targets;
  };
  const Network gru_stack = testutil::perturbed(
      Network(5, {GruLayer{GruLayerParams::zeros(5, 6)}, DropoutLayer{0.2}, GruLayer{GruLayerParams::zeros(6, 4)},
                  DropoutLayer{0.2}, DenseLayer{DenseParams::zeros(4, 4, Activation::sigmoid)},
                  DenseLayer{DenseParams::zeros(4, 2, Activation::identity)}}),
      72, 0.1);
  const Network relu_stack = testutil::perturbed(
      Network(5, {GruLayer{GruLayerParams::zeros(5, 4)}, DenseLayer{DenseParams::zeros(4, 4, Activation::relu)},
                  DenseLayer{DenseParams::zeros(4, 2, Activation::identity)}}),
      73, 0.2);
  const Network seq_stack = testutil::perturbed(
      Network(5, {GruLayer{GruLayerParams::zeros(5, 6)}, DropoutLayer{0.2}, GruLayer{GruLayerParams::zeros(6, 3)},
                  DropoutLayer{0.2}, LastStepLayer{}, DenseLayer{DenseParams::zeros(3, 4, Activation::identity)}}),
      74, 0.1);
  const Matrix seq_target = testutil::one_hot({3}, 4);
  const std::vector<Case> cases{{"GRU (first layer)", gru_stack, 0, frames},
                                {"GRU (second layer)", gru_stack, 2, frames},
                                {"dense sigmoid", gru_stack, 4, frames},
                                {"softmax+CE head", gru_stack, 5, frames},
                                {"dense relu", relu_stack, 1, frames},
                                {"softmax+CE head after relu", relu_stack, 2, frames},
                                {"GRU via last step", seq_stack, 0, seq_target},
                                {"sequence softmax+CE head", seq_stack, 5, seq_target}};
  std::uint64_t seed = 80;
  for (const auto& c : cases) {
    const auto r = testutil::gradient_check(c.net, X, c.targets, c.layer, seed++, 20);
    o.note(std::string(c.name) + ": worst rel. error " + fmt("%.2e", r.worst_rel) + " over " +
           std::to_string(r.coordinates) + " coordinates");
    o.require(r.coordinates == 20 && r.worst_rel < 1e-4, std::string(c.name) + " gradient check");
  }
  const double elapsed = seconds_since(t0);
  o.note(fmt("runtime %.2f s", elapsed));
  o.require(elapsed < 60.0, "runtime < 60 s");
  return o;
}

ExperimentConfig vad_config() {
  ExperimentConfig c;
  c.seed = 1;
  c.corpus.n_sequences = 20;
  c.corpus.duration_s = 10.0;
  c.variant = VadVariant::dataset1;
  return c;
}

Outcome criterion5() {
  Outcome o;
  ExperimentConfig c = vad_config();
  c.corpus.eeg_snr_db = 30.0;
  c.corpus.acoustic_snr_db = 20.0;
  c.feature_mode = FeatureMode::mfcc_eeg;
  c.train.epochs = 30;
  const auto t0 = std::chrono::steady_clock::now();
  const VadRun run = run_vad_experiment(c);
  const double elapsed = seconds_since(t0);
  o.note("mfcc+eeg test accuracy " + fmt("%.2f%%", run.row.accuracy_pct) + " after " +
         std::to_string(c.train.epochs) + " epochs (best epoch " + std::to_string(run.training.best_epoch) + "), " +
         fmt("%.1f s", elapsed));
  o.require(run.row.accuracy_pct >= 95.0, "test frame accuracy >= 95%");
  o.require(c.train.epochs <= 50, "<= 50 epochs");
  o.require(elapsed <= 600.0, "wall-clock <= 10 min");
  return o;
}

Outcome criterion6() {
  Outcome o;
  ExperimentConfig c = vad_config();
  c.corpus.eeg_snr_db = 10.0;
  c.train.epochs = 20;
  c.sweep_snr_db = {20.0, 0.0, -10.0};
  c.sweep_seeds = {1, 2, 3};
  c.sweep_modes = {FeatureMode::mfcc, FeatureMode::eeg, FeatureMode::mfcc_eeg};
  const ResultsTable med = median_over_seeds(run_sweep(c));
  std::istringstream text(med.to_text());
  for (std::string line; std::getline(text, line);) o.note(line);
  auto acc = [&](double snr, FeatureMode m) {
    const ResultRow* r = med.find(corpus_key(c.variant, snr), m);
    if (!r) throw std::runtime_error("missing sweep cell");
    return r->accuracy_pct;
  };
  const double m20 = acc(20, FeatureMode::mfcc), m0 = acc(0, FeatureMode::mfcc), m10 = acc(-10, FeatureMode::mfcc);
  const double e20 = acc(20, FeatureMode::eeg), e0 = acc(0, FeatureMode::eeg), e10 = acc(-10, FeatureMode::eeg);
  const double b10 = acc(-10, FeatureMode::mfcc_eeg);
  const double eeg_spread = std::max({e20, e0, e10}) - std::min({e20, e0, e10});
  o.require(m20 > m0 && m0 > m10, "(a) MFCC accuracy strictly decreases with SNR");
  o.require(eeg_spread < 3.0, "(b) EEG accuracy varies by < 3 points (spread " + fmt("%.2f", eeg_spread) + ")");
  o.require(e10 >= m10 + 10.0, "(c) EEG >= MFCC + 10 at -10 dB");
  o.require(b10 >= m10, "(c) MFCC+EEG >= MFCC at -10 dB");
  return o;
}

Outcome criterion7() {
  Outcome o;
  ExperimentConfig c;
  c.seed = 1;
  c.continuation.per_class = 50;
  const ContinuationReport r = run_continuation_experiment(c);
  std::istringstream text(r.to_text());
  for (std::string line; std::getline(text, line);) o.note(line);
  o.require(r.eeg_accuracy_pct >= 90.0, "EEG 4-class test accuracy >= 90%");
  o.require(r.to_text().find("4-class") != std::string::npos && r.to_text().find("continue/stop") != std::string::npos &&
                r.test_sequences > 0,
            "report carries 4-class and binary accuracies");
  return o;
}

std::map<std::string, std::string> tree_bytes(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    std::ifstream in(e.path(), std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    out[fs::relative(e.path(), root).string()] = s.str();
  }
  return out;
}

Outcome criterion8() {
  Outcome o;
  ExperimentConfig c;
  c.seed = 11;
  c.corpus.n_sequences = 10;
  c.corpus.duration_s = 4.0;
  c.train.epochs = 3;
  c.features.kpca_max_fit = 400;
  c.sweep_snr_db = {20.0, 0.0};
  c.sweep_seeds = {11, 12};
  c.continuation.per_class = 5;
  c.continuation.eeg_channels = 8;
  c.continuation_epochs = 3;
  c.continuation_batch_size = 4;
  // Same config means same output directory: snapshot, re-run in place,
  // compare.
  const fs::path root = testutil::scratch("acceptance_determinism");
  auto run_all = [&] {
    ExperimentConfig r = c;
    r.out_dir = root / "table";
    run_table(r);
    r.out_dir = root / "sweep";
    run_sweep(r);
    r.out_dir = root / "continuation";
    run_continuation_experiment(r);
    return tree_bytes(root);
  };
  const auto a = run_all();
  const auto b = run_all();
  std::size_t checkpoints = 0, tables = 0;
  for (const auto& [name, bytes] : a) {
    if (name.ends_with(".f32")) ++checkpoints;
    if (name.ends_with("results.csv") || name.ends_with("results.txt") || name.find("sweep") != std::string::npos) ++tables;
  }
  o.note(std::to_string(a.size()) + " files compared, " + std::to_string(checkpoints) + " checkpoint blocks, " +
         std::to_string(tables) + " table files");
  o.require(!a.empty() && checkpoints > 0 && tables > 0, "artifacts were written");
  o.require(a == b, "second run is byte-identical");
  return o;
}

Outcome criterion9() {
  Outcome o;
  ExperimentConfig c;
  c.seed = 5;
  c.corpus.n_sequences = 10;
  c.corpus.duration_s = 3.0;
  c.features.kpca_max_fit = 300;
  CorpusSpec spec = c.corpus;
  spec.seed = c.seed;
  const auto corpus = generate_corpus(spec);
  const SplitIndices split = experiment_split(c, corpus.size());
  auto fitted = [&](const std::vector<PairedSequence>& cs) {
    return prepare_data(extract_corpus_features(cs, c.features), split, FeatureMode::mfcc_eeg, c.features, c.seed);
  };
  const PreparedData base = fitted(corpus);
  auto mutated = corpus;
  for (std::size_t i : split.test) {
    mutated[i].eeg.data = 4.0 * mutated[i].eeg.data.array() + 2.0;
    mutated[i].audio.data *= 0.1;
  }
  const PreparedData m = fitted(mutated);
  o.require(m.kpca->training_vectors == base.kpca->training_vectors && m.kpca->eigenvalues == base.kpca->eigenvalues &&
                m.kpca->scaled_vectors == base.kpca->scaled_vectors &&
                m.kpca->gram_row_means == base.kpca->gram_row_means,
            "KPCA model unchanged");
  o.require(m.eeg_standardizer->mean == base.eeg_standardizer->mean &&
                m.eeg_standardizer->scale == base.eeg_standardizer->scale &&
                m.input_standardizer.mean == base.input_standardizer.mean &&
                m.input_standardizer.scale == base.input_standardizer.scale,
            "normalization statistics unchanged");
  o.require(m.test[0].features.values != base.test[0].features.values, "mutation reached the test inputs");
  o.note(std::to_string(split.test.size()) + " test sequences mutated");
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"signal suite", criterion1},
      {"feature oracles", criterion2},
      {"KPCA oracle equivalence", criterion3},
      {"gradient checks", criterion4},
      {"learning sanity", criterion5},
      {"noise-robustness ordering", criterion6},
      {"continuation sanity", criterion7},
      {"determinism", criterion8},
      {"leakage guard", criterion9},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

  int failures = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const int id = static_cast<int>(k) + 1;
    if (!selected.empty() && !selected.count(id)) continue;
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      o = criteria[k].second();
    } catch (const std::exception& e) {
      o.pass = false;
      o.note(std::string("exception: ") + e.what());
    }
    for (const auto& n : o.notes) std::printf("    %s\n", n.c_str());
    std::printf("criterion %d %s: %s (%.1f s)\n", id, criteria[k].first, o.pass ? "PASS" : "FAIL", seconds_since(t0));
    std::fflush(stdout);
    failures += o.pass ? 0 : 1;
  }
  return failures == 0 ? 0 : 1;
}
