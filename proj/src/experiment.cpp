#include "eegvad/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <tuple>

#include "eegvad/io.hpp"

namespace eegvad {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Sub-streams of the master seed.
enum SeedTag : std::uint64_t { kSplitSeed = 101, kKpcaSeed = 102, kInitSeed = 103, kTrainSeed = 104 };

std::uint64_t sub_seed(std::uint64_t master, SeedTag tag) { return derive_rng(master, {tag})(); }

template <class F>
auto stage(const char* name, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const StageError&) {
    throw;
  } catch (const Error& e) {
    throw StageError(name, e.code(), e.what());
  } catch (const json::exception& e) {
    throw StageError(name, Errc::format_error, e.what());
  } catch (const std::bad_alloc&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, Errc::invalid_argument, e.what());
  }
}

const FeatureMode kAllModes[] = {FeatureMode::mfcc, FeatureMode::eeg, FeatureMode::mfcc_eeg};

bool uses_eeg(FeatureMode m) { return m != FeatureMode::mfcc; }

json snr_to_json(double v) { return std::isinf(v) ? json("inf") : json(v); }

double snr_from(const json& j) {
  if (j.is_string() && j.get<std::string>() == "inf") return std::numeric_limits<double>::infinity();
  return j.get<double>();
}

std::string format_snr(double snr) {
  if (std::isinf(snr)) return snr > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%+g", snr);
  return buf;
}

}  // namespace

const char* to_string(FeatureMode m) {
  switch (m) {
    case FeatureMode::mfcc: return "mfcc";
    case FeatureMode::eeg: return "eeg";
    case FeatureMode::mfcc_eeg: return "mfcc+eeg";
  }
  return "?";
}

FeatureMode feature_mode_from_string(const std::string& name) {
  if (name == "mfcc") return FeatureMode::mfcc;
  if (name == "eeg") return FeatureMode::eeg;
  if (name == "mfcc+eeg" || name == "mfcc_eeg") return FeatureMode::mfcc_eeg;
  throw Error(Errc::invalid_config, "unknown feature mode '" + name + "'");
}

std::string format_fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  std::string s = buf;
  // Avoid "-0.00".
  if (s.front() == '-' && s.find_first_not_of("-0.") == std::string::npos) s.erase(0, 1);
  return s;
}

// ---------------------------------------------------------------------------
// Configuration

void ExperimentConfig::validate() const {
  auto bad = [](const std::string& why) { return Error(Errc::invalid_config, why); };
  if (!corpus_dir) corpus.validate();
  if (corpus_dir && !fs::exists(*corpus_dir)) throw bad("corpus directory " + corpus_dir->string() + " does not exist");
  if (train.epochs < 0) throw bad("epochs must be non-negative");
  if (train.batch_size < 1) throw bad("batch_size must be positive");
  if (!(train.adam.lr > 0.0)) throw bad("learning_rate must be positive");
  if (features.kpca_dim < 1) throw bad("kpca_dim must be positive");
  if (features.kpca_max_fit < 2) throw bad("kpca_max_fit must be at least 2");
  const double total = split.train + split.validation + split.test;
  if (split.train <= 0.0 || split.validation <= 0.0 || split.test <= 0.0 || std::abs(total - 1.0) > 1e-9)
    throw bad("split fractions must be positive and sum to 1");
  if (continuation.per_class < 1) throw bad("continuation per_class must be positive");
  if (continuation_epochs < 0) throw bad("continuation epochs must be non-negative");
  if (continuation_batch_size < 1) throw bad("continuation batch_size must be positive");
}

json ExperimentConfig::to_json() const {
  json j;
  j["seed"] = seed;
  if (corpus_dir)
    j["corpus_dir"] = corpus_dir->string();
  else
    j["corpus"] = corpus.to_json();
  j["feature_mode"] = to_string(feature_mode);
  j["variant"] = eegvad::to_string(variant);
  j["train"] = {{"epochs", train.epochs},
                {"batch_size", train.batch_size},
                {"learning_rate", train.adam.lr},
                {"beta1", train.adam.beta1},
                {"beta2", train.adam.beta2},
                {"epsilon", train.adam.epsilon},
                {"clip_norm", train.clip_norm},
                {"early_stopping",
                 {{"enabled", train.early_stopping.enabled}, {"patience", train.early_stopping.patience}}}};
  j["features"] = {{"kpca_dim", features.kpca_dim},
                   {"kpca_max_fit", features.kpca_max_fit},
                   {"standardize_eeg", features.standardize_eeg},
                   {"eeg_window_s", features.eeg.window_s},
                   {"bandpass_low_hz", features.preprocess.bandpass_low_hz},
                   {"bandpass_high_hz", features.preprocess.bandpass_high_hz},
                   {"notch_hz", features.preprocess.notch_hz},
                   {"notch_quality", features.preprocess.notch_quality},
                   {"mfcc",
                    {{"n_coeffs", features.mfcc.n_coeffs},
                     {"n_mel_filters", features.mfcc.n_mel_filters},
                     {"fft_size", features.mfcc.fft_size},
                     {"preemphasis", features.mfcc.preemphasis}}}};
  j["split"] = {{"train", split.train}, {"validation", split.validation}, {"test", split.test}};
  json sweep = json::object();
  if (!sweep_snr_db.empty()) {
    json a = json::array();
    for (double s : sweep_snr_db) a.push_back(snr_to_json(s));
    sweep["snr_db"] = a;
  }
  if (!sweep_seeds.empty()) sweep["seeds"] = sweep_seeds;
  if (!sweep_modes.empty()) {
    json a = json::array();
    for (auto m : sweep_modes) a.push_back(to_string(m));
    sweep["feature_modes"] = a;
  }
  j["sweep"] = sweep;
  json cont = continuation.to_json();
  cont.erase("seed");
  cont["epochs"] = continuation_epochs;
  cont["batch_size"] = continuation_batch_size;
  cont["early_stopping"] = {{"enabled", continuation_early_stopping.enabled},
                            {"patience", continuation_early_stopping.patience}};
  j["continuation"] = cont;
  if (!out_dir.empty()) j["out"] = out_dir.string();
  return j;
}

ExperimentConfig ExperimentConfig::from_json(const json& j) {
  if (!j.is_object()) throw Error(Errc::invalid_config, "configuration must be a JSON object");
  static const char* known[] = {"seed",  "corpus", "corpus_dir", "feature_mode", "variant",      "train",
                                "features", "split", "sweep",   "continuation", "out"};
  for (const auto& [key, value] : j.items()) {
    if (std::find_if(std::begin(known), std::end(known), [&](const char* k) { return key == k; }) ==
        std::end(known))
      throw Error(Errc::invalid_config, "unknown configuration key '" + key + "'");
  }
  ExperimentConfig c;
  try {
    c.seed = j.value("seed", c.seed);
    if (j.contains("corpus")) c.corpus = CorpusSpec::from_json(j["corpus"]);
    if (j.contains("corpus_dir")) c.corpus_dir = j["corpus_dir"].get<std::string>();
    if (j.contains("feature_mode")) c.feature_mode = feature_mode_from_string(j["feature_mode"].get<std::string>());
    if (j.contains("variant")) {
      try {
        c.variant = vad_variant_from_string(j["variant"].get<std::string>());
      } catch (const Error& e) {
        throw Error(Errc::invalid_config, e.what());
      }
    }
    if (j.contains("train")) {
      const json& t = j["train"];
      c.train.epochs = t.value("epochs", c.train.epochs);
      c.train.batch_size = t.value("batch_size", c.train.batch_size);
      c.train.adam.lr = t.value("learning_rate", c.train.adam.lr);
      c.train.adam.beta1 = t.value("beta1", c.train.adam.beta1);
      c.train.adam.beta2 = t.value("beta2", c.train.adam.beta2);
      c.train.adam.epsilon = t.value("epsilon", c.train.adam.epsilon);
      c.train.clip_norm = t.value("clip_norm", c.train.clip_norm);
      if (t.contains("early_stopping")) {
        c.train.early_stopping.enabled = t["early_stopping"].value("enabled", false);
        c.train.early_stopping.patience = t["early_stopping"].value("patience", c.train.early_stopping.patience);
      }
    }
    if (j.contains("features")) {
      const json& f = j["features"];
      c.features.kpca_dim = f.value("kpca_dim", c.features.kpca_dim);
      c.features.kpca_max_fit = f.value("kpca_max_fit", c.features.kpca_max_fit);
      c.features.standardize_eeg = f.value("standardize_eeg", c.features.standardize_eeg);
      c.features.eeg.window_s = f.value("eeg_window_s", c.features.eeg.window_s);
      c.features.preprocess.bandpass_low_hz = f.value("bandpass_low_hz", c.features.preprocess.bandpass_low_hz);
      c.features.preprocess.bandpass_high_hz = f.value("bandpass_high_hz", c.features.preprocess.bandpass_high_hz);
      c.features.preprocess.notch_hz = f.value("notch_hz", c.features.preprocess.notch_hz);
      c.features.preprocess.notch_quality = f.value("notch_quality", c.features.preprocess.notch_quality);
      if (f.contains("mfcc")) {
        const json& m = f["mfcc"];
        c.features.mfcc.n_coeffs = m.value("n_coeffs", c.features.mfcc.n_coeffs);
        c.features.mfcc.n_mel_filters = m.value("n_mel_filters", c.features.mfcc.n_mel_filters);
        c.features.mfcc.fft_size = m.value("fft_size", c.features.mfcc.fft_size);
        c.features.mfcc.preemphasis = m.value("preemphasis", c.features.mfcc.preemphasis);
      }
    }
    if (j.contains("split")) {
      c.split.train = j["split"].value("train", c.split.train);
      c.split.validation = j["split"].value("validation", c.split.validation);
      c.split.test = j["split"].value("test", c.split.test);
    }
    if (j.contains("sweep")) {
      const json& s = j["sweep"];
      if (s.contains("snr_db"))
        for (const auto& v : s["snr_db"]) c.sweep_snr_db.push_back(snr_from(v));
      if (s.contains("seeds")) c.sweep_seeds = s["seeds"].get<std::vector<std::uint64_t>>();
      if (s.contains("feature_modes"))
        for (const auto& v : s["feature_modes"]) c.sweep_modes.push_back(feature_mode_from_string(v.get<std::string>()));
    }
    if (j.contains("continuation")) {
      c.continuation = ContinuationSpec::from_json(j["continuation"]);
      const json& cj = j["continuation"];
      c.continuation_epochs = cj.value("epochs", c.continuation_epochs);
      c.continuation_batch_size = cj.value("batch_size", c.continuation_batch_size);
      if (cj.contains("early_stopping")) {
        c.continuation_early_stopping.enabled = cj["early_stopping"].value("enabled", true);
        c.continuation_early_stopping.patience =
            cj["early_stopping"].value("patience", c.continuation_early_stopping.patience);
      }
    }
    if (j.contains("out")) c.out_dir = j["out"].get<std::string>();
  } catch (const json::exception& e) {
    throw Error(Errc::invalid_config, e.what());
  }
  return c;
}

// ---------------------------------------------------------------------------
// Features

SequenceFeatures extract_sequence_features(const PairedSequence& seq, const FeatureConfig& config, Exec exec) {
  SequenceFeatures f;
  f.id = seq.id;
  f.sequence_label = seq.sequence_label;
  f.mfcc = stage("mfcc", [&] { return extract_mfcc(seq.audio, config.mfcc, exec); });
  f.eeg = stage("eeg-features", [&] {
    const TimeSeries clean = preprocess_eeg(seq.eeg, config.preprocess, exec);
    return extract_eeg_features(clean, config.eeg, exec);
  });
  const Eigen::Index n =
      std::min({f.mfcc.count(), f.eeg.count(), static_cast<Eigen::Index>(seq.activity.size())});
  f.mfcc = f.mfcc.head(n);
  f.eeg = f.eeg.head(n);
  f.labels.assign(seq.activity.begin(), seq.activity.begin() + n);
  return f;
}

std::vector<SequenceFeatures> extract_corpus_features(const std::vector<PairedSequence>& corpus,
                                                      const FeatureConfig& config, Exec exec) {
  std::vector<SequenceFeatures> out(corpus.size());
  const auto n = static_cast<std::ptrdiff_t>(corpus.size());
  // Sequence-level parallelism; kernels below run serially per thread.
  for_each_index(n, exec, [&](std::ptrdiff_t i) {
    out[static_cast<std::size_t>(i)] = extract_sequence_features(corpus[static_cast<std::size_t>(i)], config, Exec::serial);
  });
  return out;
}

void write_features(const fs::path& dir, const std::vector<SequenceFeatures>& features) {
  io::make_dirs(dir);
  json seqs = json::array();
  for (const auto& f : features) {
    FrameSequence m = f.mfcc, e = f.eeg;
    m.labels = f.labels;
    e.labels = f.labels;
    io::write_frames(dir / (f.id + "_mfcc.f32"), m);
    io::write_frames(dir / (f.id + "_eeg.f32"), e);
    json entry = {{"id", f.id}, {"mfcc", f.id + "_mfcc.f32"}, {"eeg", f.id + "_eeg.f32"}};
    if (f.sequence_label >= 0) entry["sequence_label"] = f.sequence_label;
    seqs.push_back(entry);
  }
  io::write_json(dir / "features.json", {{"format", "eegvad-features-1"}, {"sequences", seqs}});
}

std::vector<SequenceFeatures> read_features(const fs::path& dir) {
  const json manifest = io::read_json(dir / "features.json");
  std::vector<SequenceFeatures> out;
  try {
    for (const auto& e : manifest.at("sequences")) {
      SequenceFeatures f;
      f.id = e.at("id").get<std::string>();
      f.mfcc = io::read_frames(dir / e.at("mfcc").get<std::string>());
      f.eeg = io::read_frames(dir / e.at("eeg").get<std::string>());
      f.labels = f.mfcc.labels;
      f.mfcc.labels.clear();
      f.eeg.labels.clear();
      f.sequence_label = e.value("sequence_label", -1);
      out.push_back(std::move(f));
    }
  } catch (const json::exception& e) {
    throw Error(Errc::format_error, (dir / "features.json").string() + ": " + e.what());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Split-dependent fitting

namespace {

struct EegStage {
  std::optional<Standardizer> standardizer;
  KpcaModel kpca;
  std::vector<FrameSequence> projected;  // per sequence, all splits
};

EegStage fit_eeg_stage(const std::vector<SequenceFeatures>& features, const SplitIndices& split,
                       const FeatureConfig& config, std::uint64_t master_seed, Exec exec) {
  EegStage st;
  std::vector<FrameSequence> train_eeg;
  for (std::size_t i : split.train) train_eeg.push_back(features[i].eeg);
  if (config.standardize_eeg) {
    st.standardizer = stage("eeg-normalization", [&] { return Standardizer::fit(train_eeg); });
    for (auto& s : train_eeg) s = st.standardizer->apply(s);
  }
  st.kpca = stage("kpca-fit", [&] {
    KpcaConfig kc;
    kc.out_dim = config.kpca_dim;
    kc.max_fit_samples = config.kpca_max_fit;
    kc.seed = sub_seed(master_seed, kKpcaSeed);
    KpcaModel m = kpca_fit(train_eeg, kc, exec);
    round_to_float(m);
    return m;
  });
  st.projected.resize(features.size());
  stage("kpca-transform", [&] {
    for (std::size_t i = 0; i < features.size(); ++i) {
      const FrameSequence in = st.standardizer ? st.standardizer->apply(features[i].eeg) : features[i].eeg;
      st.projected[i] = kpca_transform(st.kpca, in, exec);
    }
    return 0;
  });
  return st;
}

FrameSequence model_input(const SequenceFeatures& f, FeatureMode mode, const FrameSequence* projected) {
  switch (mode) {
    case FeatureMode::mfcc: return f.mfcc;
    case FeatureMode::eeg: return *projected;
    case FeatureMode::mfcc_eeg: return concat_features(f.mfcc, *projected);
  }
  return f.mfcc;
}

LabeledSequence labeled(const SequenceFeatures& f, FrameSequence x) {
  LabeledSequence s;
  s.id = f.id;
  s.sequence_label = f.sequence_label;
  s.frame_labels.assign(f.labels.begin(), f.labels.begin() + x.count());
  s.features = std::move(x);
  return s;
}

PreparedData assemble(const std::vector<SequenceFeatures>& features, const SplitIndices& split, FeatureMode mode,
                      const EegStage* eeg) {
  return stage("normalization", [&] {
    PreparedData d;
    auto input = [&](std::size_t i) { return model_input(features[i], mode, eeg ? &eeg->projected[i] : nullptr); };
    std::vector<FrameSequence> train_inputs;
    for (std::size_t i : split.train) train_inputs.push_back(input(i));
    d.input_standardizer = Standardizer::fit(train_inputs);
    d.input_dim = static_cast<int>(d.input_standardizer.mean.size());
    auto fill = [&](const std::vector<std::size_t>& idx, std::vector<LabeledSequence>& out) {
      for (std::size_t i : idx) out.push_back(labeled(features[i], d.input_standardizer.apply(input(i))));
    };
    fill(split.train, d.train);
    fill(split.validation, d.validation);
    fill(split.test, d.test);
    if (eeg) {
      d.eeg_standardizer = eeg->standardizer;
      d.kpca = eeg->kpca;
    }
    return d;
  });
}

}  // namespace

PreparedData prepare_data(const std::vector<SequenceFeatures>& features, const SplitIndices& split,
                          FeatureMode mode, const FeatureConfig& config, std::uint64_t seed, Exec exec) {
  if (!uses_eeg(mode)) return assemble(features, split, mode, nullptr);
  const EegStage eeg = fit_eeg_stage(features, split, config, seed, exec);
  return assemble(features, split, mode, &eeg);
}

LabeledSequence apply_transforms(const SequenceFeatures& f, FeatureMode mode, const FittedTransforms& t, Exec exec) {
  std::optional<FrameSequence> projected;
  if (uses_eeg(mode)) {
    if (!t.kpca) throw Error(Errc::invalid_config, "feature mode " + std::string(to_string(mode)) + " needs a KPCA model");
    const FrameSequence in = t.eeg_standardizer ? t.eeg_standardizer->apply(f.eeg) : f.eeg;
    projected = kpca_transform(*t.kpca, in, exec);
  }
  return labeled(f, t.input_standardizer.apply(model_input(f, mode, projected ? &*projected : nullptr)));
}

// ---------------------------------------------------------------------------
// Results table

void ResultsTable::add(const ResultRow& row) {
  if (!(row.accuracy_pct >= 0.0 && row.accuracy_pct <= 100.0))
    throw Error(Errc::invalid_argument, "accuracy outside [0, 100]");
  rows_[{row.corpus, static_cast<int>(row.mode)}] = row;
}

void ResultsTable::merge(const ResultsTable& other) {
  for (const auto& [k, r] : other.rows_) rows_[k] = r;
}

const ResultRow* ResultsTable::find(const std::string& corpus, FeatureMode mode) const {
  auto it = rows_.find({corpus, static_cast<int>(mode)});
  return it == rows_.end() ? nullptr : &it->second;
}

std::vector<ResultRow> ResultsTable::rows() const {
  std::vector<ResultRow> out;
  for (const auto& [k, r] : rows_) out.push_back(r);
  return out;
}

// Grouped by corpus name without its SNR token, then SNR from high to low.
std::vector<std::string> ResultsTable::corpora() const {
  std::vector<std::tuple<std::string, double, std::string>> keys;
  for (const auto& [k, r] : rows_) {
    if (!keys.empty() && std::get<2>(keys.back()) == k.first) continue;
    std::string group = k.first;
    const auto at = group.find(" snr");
    if (at != std::string::npos) {
      const auto end = group.find("dB", at);
      group.erase(at, end == std::string::npos ? std::string::npos : end + 2 - at);
    }
    keys.emplace_back(group, -r.snr_db, k.first);
  }
  std::sort(keys.begin(), keys.end());
  std::vector<std::string> out;
  for (const auto& k : keys) out.push_back(std::get<2>(k));
  return out;
}

std::string ResultsTable::to_csv() const {
  std::string s = "corpus,feature_mode,accuracy_pct,seed,snr_db,epochs,best_epoch,test_frames\n";
  for (const auto& [k, r] : rows_) {
    s += r.corpus + "," + to_string(r.mode) + "," + format_fixed(r.accuracy_pct, 4) + "," + std::to_string(r.seed) +
         "," + (std::isinf(r.snr_db) ? format_snr(r.snr_db) : format_fixed(r.snr_db, 2)) + "," +
         std::to_string(r.epochs) + "," + std::to_string(r.best_epoch) + "," + std::to_string(r.test_frames) + "\n";
  }
  return s;
}

std::string ResultsTable::to_text() const {
  std::size_t width = 6;
  for (const auto& c : corpora()) width = std::max(width, c.size());
  auto pad = [](std::string s, std::size_t w, bool left) {
    if (s.size() < w) s = left ? s + std::string(w - s.size(), ' ') : std::string(w - s.size(), ' ') + s;
    return s;
  };
  const char* headers[] = {"MFCC (%)", "EEG (%)", "MFCC+EEG (%)"};
  std::string out = pad("corpus", width, true);
  for (const char* h : headers) out += " | " + std::string(h);
  out += "\n" + std::string(width, '-');
  for (const char* h : headers) out += "-+-" + std::string(std::string(h).size(), '-');
  out += "\n";
  for (const auto& c : corpora()) {
    out += pad(c, width, true);
    for (int m = 0; m < 3; ++m) {
      const ResultRow* r = find(c, kAllModes[m]);
      out += " | " + pad(r ? format_fixed(r->accuracy_pct, 2) : "-", std::string(headers[m]).size(), false);
    }
    out += "\n";
  }
  return out;
}

void ResultsTable::write(const fs::path& dir, const std::string& stem) const {
  io::make_dirs(dir);
  io::write_text(dir / (stem + ".csv"), to_csv());
  io::write_text(dir / (stem + ".txt"), to_text());
}

ResultsTable ResultsTable::read_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io_failure, "cannot read " + path.string());
  ResultsTable t;
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 8) throw Error(Errc::format_error, path.string() + ": malformed row '" + line + "'");
    ResultRow r;
    try {
      r.corpus = cells[0];
      r.mode = feature_mode_from_string(cells[1]);
      r.accuracy_pct = std::stod(cells[2]);
      r.seed = std::stoull(cells[3]);
      r.snr_db = cells[4] == "inf" ? std::numeric_limits<double>::infinity() : std::stod(cells[4]);
      r.epochs = std::stoi(cells[5]);
      r.best_epoch = std::stoi(cells[6]);
      r.test_frames = std::stoull(cells[7]);
    } catch (const std::logic_error&) {
      throw Error(Errc::format_error, path.string() + ": malformed row '" + line + "'");
    }
    t.add(r);
  }
  return t;
}

std::string corpus_key(VadVariant variant, double snr_db) {
  return std::string(to_string(variant)) + " snr" + format_snr(snr_db) + "dB";
}

// ---------------------------------------------------------------------------
// VAD experiments

namespace {

void write_run_artifacts(const fs::path& dir, const ExperimentConfig& config, const VadRun& run) {
  io::make_dirs(dir);
  json cfg = config.to_json();
  cfg["feature_mode"] = to_string(run.row.mode);
  io::write_json(dir / "config.json", cfg);
  nn::save_network(dir / "model", run.training.network,
               {{"seed", config.seed},
                {"variant", to_string(config.variant)},
                {"feature_mode", to_string(run.row.mode)},
                {"input_dim", run.data.input_dim},
                {"best_epoch", run.training.best_epoch}});
  json norm = {{"input", run.data.input_standardizer.to_json()}};
  if (run.data.eeg_standardizer) norm["eeg"] = run.data.eeg_standardizer->to_json();
  io::write_json(dir / "normalization.json", norm);
  if (run.data.kpca) {
    save_kpca(dir / "kpca.f32", *run.data.kpca);
    emit_variance_curve(*run.data.kpca, dir / "variance_curve.csv");
  }
  write_training_log(dir / "training_log.csv", run.training.log);
  ResultsTable t;
  t.add(run.row);
  t.write(dir);
}

VadRun run_cell(const ExperimentConfig& config, FeatureMode mode, const std::vector<SequenceFeatures>& features,
                const SplitIndices& split, const EegStage* eeg, const fs::path& out_dir) {
  VadRun run;
  run.data = assemble(features, split, mode, eeg);
  nn::Network net = stage("model", [&] {
    nn::Network n = build_vad(config.variant, run.data.input_dim);
    Rng init = derive_rng(config.seed, {kInitSeed});
    nn::initialize(n, init);
    return n;
  });
  run.training = stage("train", [&] {
    TrainConfig tc = config.train;
    tc.seed = sub_seed(config.seed, kTrainSeed);
    return train(std::move(net), run.data.train, run.data.validation, tc);
  });
  run.test = stage("evaluate", [&] { return evaluate(run.training.network, run.data.test); });
  run.row.corpus = corpus_key(config.variant, config.corpus.acoustic_snr_db);
  run.row.mode = mode;
  run.row.accuracy_pct = 100.0 * run.test.accuracy;
  run.row.seed = config.seed;
  run.row.snr_db = config.corpus.acoustic_snr_db;
  run.row.epochs = config.train.epochs;
  run.row.best_epoch = run.training.best_epoch;
  run.row.test_frames = run.test.total;
  if (!out_dir.empty()) stage("artifacts", [&] {
      write_run_artifacts(out_dir, config, run);
      return 0;
    });
  return run;
}

}  // namespace

std::vector<SequenceFeatures> load_experiment_features(ExperimentConfig& config, Exec exec) {
  std::vector<PairedSequence> corpus = stage("corpus", [&] {
    if (config.corpus_dir) {
      json spec;
      auto c = read_corpus(*config.corpus_dir, &spec);
      if (spec.is_object() && !spec.empty() && !spec.contains("kind")) config.corpus = CorpusSpec::from_json(spec);
      return c;
    }
    CorpusSpec spec = config.corpus;
    spec.seed = config.seed;
    return generate_corpus(spec, exec);
  });
  return extract_corpus_features(corpus, config.features, exec);
}

SplitIndices experiment_split(const ExperimentConfig& config, std::size_t n) {
  return stage("split", [&] { return split_corpus(n, config.split, sub_seed(config.seed, kSplitSeed)); });
}

namespace {

bool same_eeg(const std::vector<SequenceFeatures>& a, const std::vector<SequenceFeatures>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i].eeg.values.rows() != b[i].eeg.values.rows() || a[i].eeg.values != b[i].eeg.values) return false;
  return true;
}

}  // namespace

VadRun run_vad_on_features(const ExperimentConfig& config, const std::vector<SequenceFeatures>& features,
                           const fs::path& out_dir, Exec exec) {
  config.validate();
  const SplitIndices split = experiment_split(config, features.size());
  std::optional<EegStage> eeg;
  if (uses_eeg(config.feature_mode)) eeg = fit_eeg_stage(features, split, config.features, config.seed, exec);
  return run_cell(config, config.feature_mode, features, split, eeg ? &*eeg : nullptr, out_dir);
}

VadRun run_vad_experiment(const ExperimentConfig& config, Exec exec) {
  ExperimentConfig c = config;
  c.validate();
  const auto features = load_experiment_features(c, exec);
  return run_vad_on_features(c, features, c.out_dir, exec);
}

Evaluation evaluate_saved_run(const fs::path& run_dir, const std::optional<fs::path>& corpus_dir, Exec exec) {
  ExperimentConfig config = stage("config", [&] { return ExperimentConfig::from_json(io::read_json(run_dir / "config.json")); });
  if (corpus_dir) config.corpus_dir = *corpus_dir;
  FittedTransforms t;
  nn::Network net = stage("load", [&] {
    const json norm = io::read_json(run_dir / "normalization.json");
    t.input_standardizer = Standardizer::from_json(norm.at("input"));
    if (norm.contains("eeg")) t.eeg_standardizer = Standardizer::from_json(norm.at("eeg"));
    if (uses_eeg(config.feature_mode)) t.kpca = load_kpca(run_dir / "kpca.f32");
    return nn::load_network(run_dir / "model");
  });
  const auto features = load_experiment_features(config, exec);
  const SplitIndices split = experiment_split(config, features.size());
  std::vector<LabeledSequence> test;
  stage("features", [&] {
    for (std::size_t i : split.test) test.push_back(apply_transforms(features[i], config.feature_mode, t, exec));
    return 0;
  });
  return stage("evaluate", [&] { return evaluate(net, test); });
}

ResultsTable run_table(const ExperimentConfig& config, Exec exec) {
  ExperimentConfig c = config;
  c.validate();
  const auto features = load_experiment_features(c, exec);
  const SplitIndices split = experiment_split(c, features.size());
  const EegStage eeg = fit_eeg_stage(features, split, c.features, c.seed, exec);
  ResultsTable table;
  for (FeatureMode m : kAllModes) {
    const fs::path dir = c.out_dir.empty() ? fs::path() : c.out_dir / to_string(m);
    table.add(run_cell(c, m, features, split, uses_eeg(m) ? &eeg : nullptr, dir).row);
  }
  if (!c.out_dir.empty()) table.write(c.out_dir);
  return table;
}

ResultsTable run_sweep(const ExperimentConfig& config, Exec exec) {
  config.validate();
  if (config.corpus_dir) throw Error(Errc::invalid_config, "sweep generates its corpora; drop corpus_dir");
  const std::vector<double> snrs =
      config.sweep_snr_db.empty() ? std::vector<double>{config.corpus.acoustic_snr_db} : config.sweep_snr_db;
  const std::vector<std::uint64_t> seeds =
      config.sweep_seeds.empty() ? std::vector<std::uint64_t>{config.seed} : config.sweep_seeds;
  const std::vector<FeatureMode> modes =
      config.sweep_modes.empty() ? std::vector<FeatureMode>{config.feature_mode} : config.sweep_modes;
  const bool any_eeg = std::any_of(modes.begin(), modes.end(), uses_eeg);

  struct Cell {
    ExperimentConfig config;
    FeatureMode mode;
    const std::vector<SequenceFeatures>* features;
    const SplitIndices* split;
    const EegStage* eeg;
    fs::path dir;
  };
  // Features and EEG transforms per (seed, snr); the EEG stage is shared
  // across SNRs when the EEG features are identical, which the generator
  // guarantees.
  std::vector<std::vector<SequenceFeatures>> features(seeds.size() * snrs.size());
  std::vector<SplitIndices> splits(seeds.size());
  std::vector<std::vector<EegStage>> eeg_stages(seeds.size());
  std::vector<std::vector<std::size_t>> eeg_index(seeds.size(), std::vector<std::size_t>(snrs.size()));
  std::vector<Cell> cells;
  for (std::size_t si = 0; si < seeds.size(); ++si) {
    ExperimentConfig base = config;
    base.seed = seeds[si];
    for (std::size_t ni = 0; ni < snrs.size(); ++ni) {
      ExperimentConfig c = base;
      c.corpus.acoustic_snr_db = snrs[ni];
      auto& f = features[si * snrs.size() + ni];
      f = load_experiment_features(c, exec);
      if (ni == 0) splits[si] = experiment_split(c, f.size());
      if (any_eeg) {
        std::size_t match = eeg_stages[si].size();
        for (std::size_t prev = 0; prev < ni; ++prev)
          if (same_eeg(features[si * snrs.size() + prev], f)) match = eeg_index[si][prev];
        if (match == eeg_stages[si].size())
          eeg_stages[si].push_back(fit_eeg_stage(f, splits[si], c.features, c.seed, exec));
        eeg_index[si][ni] = match;
      }
    }
  }
  for (std::size_t si = 0; si < seeds.size(); ++si)
    for (std::size_t ni = 0; ni < snrs.size(); ++ni)
      for (FeatureMode m : modes) {
        Cell cell;
        cell.config = config;
        cell.config.seed = seeds[si];
        cell.config.corpus.acoustic_snr_db = snrs[ni];
        cell.mode = m;
        cell.features = &features[si * snrs.size() + ni];
        cell.split = &splits[si];
        cell.eeg = uses_eeg(m) ? &eeg_stages[si][eeg_index[si][ni]] : nullptr;
        if (!config.out_dir.empty())
          cell.dir = config.out_dir / ("seed" + std::to_string(seeds[si])) / ("snr" + format_snr(snrs[ni])) /
                     to_string(m);
        cells.push_back(std::move(cell));
      }

  std::vector<ResultRow> rows(cells.size());
  const auto n = static_cast<std::ptrdiff_t>(cells.size());
  auto one = [&](std::ptrdiff_t i) {
    const Cell& c = cells[static_cast<std::size_t>(i)];
    ResultRow r = run_cell(c.config, c.mode, *c.features, *c.split, c.eeg, c.dir).row;
    r.corpus += " seed" + std::to_string(c.config.seed);
    rows[static_cast<std::size_t>(i)] = r;
  };
  for_each_index(n, exec, one);
  ResultsTable table;
  for (const auto& r : rows) table.add(r);
  if (!config.out_dir.empty()) {
    table.write(config.out_dir, "sweep");
    median_over_seeds(table).write(config.out_dir, "sweep_median");
  }
  return table;
}

ResultsTable median_over_seeds(const ResultsTable& sweep) {
  std::map<std::pair<std::string, int>, std::vector<ResultRow>> groups;
  for (const auto& r : sweep.rows()) {
    std::string key = r.corpus;
    const auto pos = key.rfind(" seed");
    if (pos != std::string::npos) key.erase(pos);
    groups[{key, static_cast<int>(r.mode)}].push_back(r);
  }
  ResultsTable out;
  for (auto& [key, rows] : groups) {
    std::vector<double> acc;
    for (const auto& r : rows) acc.push_back(r.accuracy_pct);
    std::sort(acc.begin(), acc.end());
    const std::size_t m = acc.size() / 2;
    ResultRow row = rows.front();
    row.corpus = key.first;
    row.seed = 0;
    row.best_epoch = 0;
    row.accuracy_pct = acc.size() % 2 ? acc[m] : 0.5 * (acc[m - 1] + acc[m]);
    out.add(row);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Continuation

std::string ContinuationReport::to_text() const {
  char buf[160];
  std::string s = "features | 4-class (%) | continue/stop (%)\n";
  s += "---------+-------------+------------------\n";
  std::snprintf(buf, sizeof buf, "EEG      | %11s | %17s\n", format_fixed(eeg_accuracy_pct, 2).c_str(),
                format_fixed(eeg_binary_pct, 2).c_str());
  s += buf;
  std::snprintf(buf, sizeof buf, "MFCC     | %11s | %17s\n", format_fixed(mfcc_accuracy_pct, 2).c_str(),
                format_fixed(mfcc_binary_pct, 2).c_str());
  s += buf;
  s += "test sequences: " + std::to_string(test_sequences) + "\n";
  return s;
}

std::string ContinuationReport::to_csv() const {
  std::string s = "features,four_class_pct,binary_pct,test_sequences\n";
  s += "eeg," + format_fixed(eeg_accuracy_pct, 4) + "," + format_fixed(eeg_binary_pct, 4) + "," +
       std::to_string(test_sequences) + "\n";
  s += "mfcc," + format_fixed(mfcc_accuracy_pct, 4) + "," + format_fixed(mfcc_binary_pct, 4) + "," +
       std::to_string(test_sequences) + "\n";
  return s;
}

ContinuationReport run_continuation_experiment(const ExperimentConfig& config, Exec exec) {
  config.validate();
  ContinuationSpec spec = config.continuation;
  spec.seed = config.seed;
  const auto corpus = stage("corpus", [&] { return generate_continuation_corpus(spec, exec); });
  const auto features = extract_corpus_features(corpus, config.features, exec);
  const SplitIndices split = experiment_split(config, features.size());

  ContinuationReport report;
  report.test_sequences = split.test.size();
  for (std::size_t i : split.test) report.truth.push_back(features[i].sequence_label);

  for (FeatureMode mode : {FeatureMode::eeg, FeatureMode::mfcc}) {
    const PreparedData data = prepare_data(features, split, mode, config.features, config.seed, exec);
    nn::Network net = build_continuation(data.input_dim);
    Rng init = derive_rng(config.seed, {kInitSeed});
    nn::initialize(net, init);
    TrainConfig tc = config.train;
    tc.epochs = config.continuation_epochs;
    tc.batch_size = config.continuation_batch_size;
    tc.early_stopping = config.continuation_early_stopping;
    tc.seed = sub_seed(config.seed, kTrainSeed);
    const TrainResult result = stage("train", [&] { return train(std::move(net), data.train, data.validation, tc); });

    std::vector<int> pred;
    for (const auto& s : data.test) pred.push_back(predict_sequence(result.network, s.features));
    std::vector<int> pred_bin, truth_bin;
    for (std::size_t i = 0; i < pred.size(); ++i) {
      pred_bin.push_back(continues(pred[i]));
      truth_bin.push_back(continues(report.truth[i]));
    }
    const double four = 100.0 * accuracy(pred, report.truth);
    const double binary = 100.0 * accuracy(pred_bin, truth_bin);
    if (mode == FeatureMode::eeg) {
      report.eeg_accuracy_pct = four;
      report.eeg_binary_pct = binary;
      report.eeg_predictions = pred;
    } else {
      report.mfcc_accuracy_pct = four;
      report.mfcc_binary_pct = binary;
      report.mfcc_predictions = pred;
    }
    if (!config.out_dir.empty()) {
      const fs::path dir = config.out_dir / to_string(mode);
      io::make_dirs(dir);
      nn::save_network(dir / "model", result.network,
                   {{"seed", config.seed}, {"feature_mode", to_string(mode)}, {"best_epoch", result.best_epoch}});
      write_training_log(dir / "training_log.csv", result.log);
      if (data.kpca) save_kpca(dir / "kpca.f32", *data.kpca);
    }
  }
  if (!config.out_dir.empty()) {
    io::write_text(config.out_dir / "continuation.csv", report.to_csv());
    io::write_text(config.out_dir / "continuation.txt", report.to_text());
  }
  return report;
}

// ---------------------------------------------------------------------------

void emit_variance_curve(const KpcaModel& model, const fs::path& path) {
  const std::vector<double> curve = explained_variance_curve(model);
  std::string s = "component_index,cumulative_ratio\n";
  char buf[64];
  for (std::size_t k = 0; k < curve.size(); ++k) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g\n", k + 1, curve[k]);
    s += buf;
  }
  io::write_text(path, s);
}

std::vector<std::pair<int, double>> read_variance_curve(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io_failure, "cannot read " + path.string());
  std::string line;
  std::getline(in, line);
  if (line != "component_index,cumulative_ratio") throw Error(Errc::format_error, path.string() + ": bad header");
  std::vector<std::pair<int, double>> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw Error(Errc::format_error, path.string() + ": bad row");
    try {
      out.emplace_back(std::stoi(line.substr(0, comma)), std::stod(line.substr(comma + 1)));
    } catch (const std::logic_error&) {
      throw Error(Errc::format_error, path.string() + ": bad row");
    }
  }
  return out;
}

}  // namespace eegvad
