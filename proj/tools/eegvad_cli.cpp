// eegvad: synthetic corpora, feature extraction, KPCA, VAD and continuation
// experiments from the command line.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "eegvad/experiment.hpp"
#include "eegvad/io.hpp"

namespace fs = std::filesystem;
using namespace eegvad;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitPipeline = 3;

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CommonOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> feature_mode;
  std::optional<std::string> variant;
  std::optional<double> snr_db;
  std::string out;
  std::optional<int> epochs;
};

void add_common(CLI::App* app, CommonOptions& o) {
  app->add_option("--config", o.config_path, "JSON configuration file")->check(CLI::ExistingFile);
  app->add_option("--seed", o.seed, "master seed");
  app->add_option("--feature-mode", o.feature_mode, "mfcc | eeg | mfcc+eeg");
  app->add_option("--variant", o.variant, "dataset1 | dataset2");
  app->add_option("--snr-db", o.snr_db, "acoustic SNR of generated corpora (dB)");
  app->add_option("--epochs", o.epochs, "training epochs");
  app->add_option("--out", o.out, "output directory or file");
}

ExperimentConfig load_config(const CommonOptions& o) {
  ExperimentConfig c;
  try {
    if (!o.config_path.empty()) c = ExperimentConfig::from_json(io::read_json(o.config_path));
    if (o.seed) c.seed = *o.seed;
    if (o.feature_mode) c.feature_mode = feature_mode_from_string(*o.feature_mode);
    if (o.variant) c.variant = vad_variant_from_string(*o.variant);
    if (o.snr_db) c.corpus.acoustic_snr_db = *o.snr_db;
    if (o.epochs) c.train.epochs = *o.epochs;
    if (!o.out.empty()) c.out_dir = o.out;
    c.validate();
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  return c;
}

fs::path require_out(const CommonOptions& o, const char* what) {
  if (o.out.empty()) throw ConfigError(std::string("--out is required for ") + what);
  return o.out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"EEG-assisted voice activity detection experiments"};
  app.require_subcommand(1);

  CommonOptions opt;
  std::string corpus_dir, features_dir, kpca_path, run_dir;
  bool continuation = false;

  auto* synth = app.add_subcommand("synth", "generate a synthetic paired corpus");
  add_common(synth, opt);
  synth->add_flag("--continuation", continuation, "four-class continuation corpus instead of VAD");

  auto* features = app.add_subcommand("features", "extract MFCC and EEG features of a corpus");
  add_common(features, opt);
  features->add_option("--corpus", corpus_dir, "corpus directory (default: generate)");

  auto* kpca_fit_cmd = app.add_subcommand("kpca-fit", "fit KPCA on the training split of a feature set");
  add_common(kpca_fit_cmd, opt);
  kpca_fit_cmd->add_option("--features", features_dir, "feature directory")->required();

  auto* train_cmd = app.add_subcommand("train", "run one VAD experiment cell");
  add_common(train_cmd, opt);
  train_cmd->add_option("--corpus", corpus_dir, "corpus directory (default: generate)");
  train_cmd->add_option("--features", features_dir, "precomputed feature directory");

  auto* eval_cmd = app.add_subcommand("eval", "re-evaluate a trained run on its test split");
  add_common(eval_cmd, opt);
  eval_cmd->add_option("--run", run_dir, "run directory written by train")->required()->check(CLI::ExistingDirectory);
  eval_cmd->add_option("--corpus", corpus_dir, "corpus directory (default: as recorded)");

  auto* table_cmd = app.add_subcommand("table", "MFCC / EEG / MFCC+EEG accuracies for one corpus");
  add_common(table_cmd, opt);
  table_cmd->add_option("--corpus", corpus_dir, "corpus directory (default: generate)");

  auto* curve_cmd = app.add_subcommand("variance-curve", "cumulative explained variance of a KPCA model");
  add_common(curve_cmd, opt);
  curve_cmd->add_option("--kpca", kpca_path, "KPCA model file")->required()->check(CLI::ExistingFile);

  auto* sweep_cmd = app.add_subcommand("sweep", "acoustic SNR x seed x feature-mode grid");
  add_common(sweep_cmd, opt);

  auto* cont_cmd = app.add_subcommand("continuation", "four-class continuation experiment");
  add_common(cont_cmd, opt);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    ExperimentConfig config = load_config(opt);
    if (!corpus_dir.empty()) config.corpus_dir = corpus_dir;

    if (synth->parsed()) {
      const fs::path out = require_out(opt, "synth");
      if (continuation) {
        ContinuationSpec spec = config.continuation;
        spec.seed = config.seed;
        write_corpus(out, generate_continuation_corpus(spec), spec.to_json());
      } else {
        CorpusSpec spec = config.corpus;
        spec.seed = config.seed;
        write_corpus(out, generate_corpus(spec), spec.to_json());
      }
      std::printf("wrote corpus to %s\n", out.string().c_str());
    } else if (features->parsed()) {
      const fs::path out = require_out(opt, "features");
      write_features(out, load_experiment_features(config));
      std::printf("wrote features to %s\n", out.string().c_str());
    } else if (kpca_fit_cmd->parsed()) {
      const fs::path out = require_out(opt, "kpca-fit");
      const auto f = read_features(features_dir);
      const PreparedData d =
          prepare_data(f, experiment_split(config, f.size()), FeatureMode::eeg, config.features, config.seed);
      io::make_dirs(out);
      save_kpca(out / "kpca.f32", *d.kpca);
      nlohmann::json norm = nlohmann::json::object();
      if (d.eeg_standardizer) norm["eeg"] = d.eeg_standardizer->to_json();
      io::write_json(out / "normalization.json", norm);
      emit_variance_curve(*d.kpca, out / "variance_curve.csv");
      std::printf("fitted KPCA on %lld training frames -> %s\n", static_cast<long long>(d.kpca->fit_size()),
                  (out / "kpca.f32").string().c_str());
    } else if (train_cmd->parsed()) {
      const VadRun run = features_dir.empty() ? run_vad_experiment(config)
                                              : run_vad_on_features(config, read_features(features_dir), config.out_dir);
      ResultsTable t;
      t.add(run.row);
      std::cout << t.to_text();
      std::printf("best epoch %d, test frames %zu\n", run.training.best_epoch, run.test.total);
    } else if (eval_cmd->parsed()) {
      const Evaluation e = evaluate_saved_run(run_dir, corpus_dir.empty() ? std::nullopt
                                                                          : std::optional<fs::path>(corpus_dir));
      std::printf("test accuracy %s%% (%zu/%zu frames), loss %s\n", format_fixed(100.0 * e.accuracy, 2).c_str(),
                  e.correct, e.total, format_fixed(e.loss, 6).c_str());
    } else if (table_cmd->parsed()) {
      std::cout << run_table(config).to_text();
    } else if (curve_cmd->parsed()) {
      const fs::path out = require_out(opt, "variance-curve");
      emit_variance_curve(load_kpca(kpca_path), out);
      std::printf("wrote %s\n", out.string().c_str());
    } else if (sweep_cmd->parsed()) {
      const ResultsTable t = run_sweep(config);
      std::cout << t.to_text() << "\nmedian over seeds\n" << median_over_seeds(t).to_text();
    } else if (cont_cmd->parsed()) {
      std::cout << run_continuation_experiment(config).to_text();
    }
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const StageError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return e.code() == Errc::invalid_config ? kExitConfig : kExitPipeline;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return e.code() == Errc::invalid_config || e.code() == Errc::unknown_variant ? kExitConfig : kExitPipeline;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitPipeline;
  }
  return 0;
}
