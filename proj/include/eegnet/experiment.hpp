#pragma once

// Experiment orchestration behind the CLI: the config schema, dataset
// loading (manifest of .eege files or an in-config synthetic spec), fold
// execution, and the output artifacts.
//
// Seed discipline: the master seed fans out through labeled streams so no
// purpose's draw count can perturb another:
//
//   RngStream(seed).derive("data")                      synthetic generation
//                  .derive("folds")                     fold shuffles
//                  .derive("fold").derive(f)            per-fold parent
//                      -> "balance-train"/"balance-val"/"balance-test"
//                      -> "init"   parameter init
//                      -> "train"  shuffle + dropout seed
//                  .derive("curve")...                  learning-curve cells
//
// Every artifact embeds the config fingerprint, a hash of the canonical
// config JSON without the output path or runtime knobs, so a bundle can be
// traced back to the exact configuration that produced it.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "json.hpp"

#include "eegnet/csv.hpp"
#include "eegnet/epochs.hpp"
#include "eegnet/error.hpp"
#include "eegnet/folds.hpp"
#include "eegnet/model.hpp"
#include "eegnet/rng.hpp"
#include "eegnet/stats.hpp"
#include "eegnet/synth.hpp"
#include "eegnet/train.hpp"
#include "eegnet/version.hpp"

namespace eegnet {

constexpr int kConfigSchemaVersion = 1;
constexpr int kManifestSchemaVersion = 1;
constexpr int kBundleSchemaVersion = 1;

// ---- config schema ----------------------------------------------------------

struct FoldSchemeConfig {
  std::string scheme = "random";  // "random" | "smr9"
  std::int64_t n_train = 0;
  std::int64_t n_val = 0;
  std::int64_t n_test = 0;
  std::int64_t n_folds = 0;
  std::vector<std::uint32_t> fixed_test;
};

struct DatasetConfig {
  std::string manifest;  // exactly one of manifest / synthetic
  std::optional<synth::SyntheticSpec> synthetic;
  std::int64_t synth_trials = 0;
  bool balance = true;
};

struct CurveConfig {
  std::vector<std::int64_t> ks;  // empty: 500-step grid up to the train size
  std::int64_t reps = 10;
};

struct CompareConfig {
  double q = 0.05;
  bool dependent_fdr = false;
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  std::string out;
  std::string precision = "f32";  // "f32" | "f64"
  Metric metric = Metric::auc;
  DatasetConfig dataset;
  FoldSchemeConfig folds;
  ModelSpec model;  // channels/samples/classes stay 0 until data is loaded
  TrainConfig train;
  CurveConfig curve;
  CompareConfig compare;

  // runtime knobs, excluded from the fingerprint
  int threads = 1;
  bool deterministic = false;

  nlohmann::json to_json(bool include_runtime) const;
  std::string fingerprint() const {
    std::ostringstream os;
    os << std::hex << fnv1a64(to_json(false).dump());
    return os.str();
  }
};

namespace cfg {

// Collects every problem before failing so a bad config reports all its
// mistakes at once, each with the JSON path of the offending field.
struct ErrorList {
  std::vector<std::string> items;

  void add(const std::string& path, const std::string& msg) {
    items.push_back(path + ": " + msg);
  }

  void raise_if_any() const {
    if (items.empty()) return;
    std::string msg = "invalid config";
    for (const auto& item : items) msg += "\n  " + item;
    throw ConfigError(msg);
  }
};

class Section {
 public:
  Section(const nlohmann::json* j, ErrorList* errs, std::string path)
      : j_(j), errs_(errs), path_(std::move(path)) {}

  bool present() const { return j_ != nullptr; }
  bool has(const char* key) const { return j_ && j_->contains(key); }

  std::string at(const char* key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  const std::string& path() const { return path_; }

  void check_keys(std::initializer_list<const char*> allowed) const {
    if (!j_) return;
    for (auto it = j_->begin(); it != j_->end(); ++it) {
      if (std::find_if(allowed.begin(), allowed.end(), [&](const char* k) {
            return it.key() == k;
          }) == allowed.end()) {
        errs_->add(at(it.key().c_str()), "unknown field");
      }
    }
  }

  Section section(const char* key) const {
    if (!has(key)) return Section(nullptr, errs_, at(key));
    if (!(*j_)[key].is_object()) {
      errs_->add(at(key), "expected an object");
      return Section(nullptr, errs_, at(key));
    }
    return Section(&(*j_)[key], errs_, at(key));
  }

  std::int64_t i64(const char* key, std::int64_t def) const {
    if (!has(key)) return def;
    const auto& v = (*j_)[key];
    if (!v.is_number_integer()) {
      errs_->add(at(key), "expected an integer");
      return def;
    }
    return v.get<std::int64_t>();
  }

  std::uint64_t u64(const char* key, std::uint64_t def) const {
    if (!has(key)) return def;
    const auto& v = (*j_)[key];
    if (!v.is_number_integer() || v.get<double>() < 0) {
      errs_->add(at(key), "expected a non-negative integer");
      return def;
    }
    return v.get<std::uint64_t>();
  }

  double f64(const char* key, double def) const {
    if (!has(key)) return def;
    const auto& v = (*j_)[key];
    if (!v.is_number()) {
      errs_->add(at(key), "expected a number");
      return def;
    }
    return v.get<double>();
  }

  bool boolean(const char* key, bool def) const {
    if (!has(key)) return def;
    const auto& v = (*j_)[key];
    if (!v.is_boolean()) {
      errs_->add(at(key), "expected a boolean");
      return def;
    }
    return v.get<bool>();
  }

  std::string str(const char* key, const std::string& def) const {
    if (!has(key)) return def;
    const auto& v = (*j_)[key];
    if (!v.is_string()) {
      errs_->add(at(key), "expected a string");
      return def;
    }
    return v.get<std::string>();
  }

  std::vector<std::int64_t> i64_list(const char* key) const {
    std::vector<std::int64_t> out;
    if (!has(key)) return out;
    const auto& v = (*j_)[key];
    if (!v.is_array()) {
      errs_->add(at(key), "expected an array of integers");
      return out;
    }
    for (const auto& e : v) {
      if (!e.is_number_integer()) {
        errs_->add(at(key), "expected an array of integers");
        return {};
      }
      out.push_back(e.get<std::int64_t>());
    }
    return out;
  }

  const nlohmann::json* raw(const char* key) const {
    return has(key) ? &(*j_)[key] : nullptr;
  }

  // [h, w] pair
  bool kernel(const char* key, std::int64_t* h, std::int64_t* w) const {
    if (!has(key)) return false;
    const auto& v = (*j_)[key];
    if (!v.is_array() || v.size() != 2 || !v[0].is_number_integer() ||
        !v[1].is_number_integer()) {
      errs_->add(at(key), "expected [height, width]");
      return false;
    }
    *h = v[0].get<std::int64_t>();
    *w = v[1].get<std::int64_t>();
    return true;
  }

  // [lo, hi] pair, any numeric type
  bool interval(const char* key, double* lo, double* hi) const {
    if (!has(key)) return false;
    const auto& v = (*j_)[key];
    if (!v.is_array() || v.size() != 2 || !v[0].is_number() ||
        !v[1].is_number()) {
      errs_->add(at(key), "expected [low, high]");
      return false;
    }
    *lo = v[0].get<double>();
    *hi = v[1].get<double>();
    return true;
  }

  ErrorList& errors() const { return *errs_; }

 private:
  const nlohmann::json* j_;
  ErrorList* errs_;
  std::string path_;
};

inline void parse_synthetic(const Section& s, DatasetConfig* out) {
  s.check_keys({"paradigm", "channels", "samples", "rate", "classes",
                "subjects", "snr", "noise_amplitude", "erp_latency",
                "erp_width", "erp_channels", "band", "class_channels",
                "gain_jitter", "latency_jitter"});
  synth::SyntheticSpec spec;
  const std::string paradigm = s.str("paradigm", "erp");
  try {
    spec.paradigm = synth::paradigm_from_name(paradigm);
  } catch (const ValueError&) {
    s.errors().add(s.at("paradigm"), "must be \"erp\" or \"oscillatory\"");
  }
  spec.channels = s.i64("channels", spec.channels);
  spec.samples = s.i64("samples", spec.samples);
  spec.rate = s.f64("rate", spec.rate);
  spec.n_classes = s.i64("classes", spec.n_classes);
  spec.n_subjects = s.i64("subjects", spec.n_subjects);
  spec.snr = s.f64("snr", spec.snr);
  spec.noise_amplitude = s.f64("noise_amplitude", spec.noise_amplitude);
  spec.erp_latency = s.f64("erp_latency", spec.erp_latency);
  spec.erp_width = s.f64("erp_width", spec.erp_width);
  spec.erp_channels = s.i64_list("erp_channels");
  s.interval("band", &spec.band_lo, &spec.band_hi);
  spec.subject_gain_jitter = s.f64("gain_jitter", spec.subject_gain_jitter);
  spec.subject_latency_jitter = s.f64("latency_jitter", spec.subject_latency_jitter);
  if (const nlohmann::json* v = s.raw("class_channels")) {
    spec.class_channels.clear();
    bool ok = v->is_array();
    if (ok) {
      for (const auto& grp : *v) {
        ok = ok && grp.is_array();
        std::vector<std::int64_t> channels;
        for (const auto& c : grp) {
          ok = ok && c.is_number_integer();
          if (ok) channels.push_back(c.get<std::int64_t>());
        }
        if (ok) spec.class_channels.push_back(std::move(channels));
      }
    }
    if (!ok) {
      s.errors().add(s.at("class_channels"),
                     "expected one integer array per class");
      spec.class_channels.clear();
    }
  }
  try {
    spec.validate();
  } catch (const ValueError& e) {
    s.errors().add(s.path(), e.what());
  }
  out->synthetic = spec;
}

}  // namespace cfg

inline ExperimentConfig parse_config(const nlohmann::json& root) {
  cfg::ErrorList errs;
  if (!root.is_object()) {
    errs.add("$", "config must be a JSON object");
    errs.raise_if_any();
  }
  cfg::Section top(&root, &errs, "");
  top.check_keys({"schema_version", "seed", "out", "precision", "metric",
                  "dataset", "folds", "model", "train", "curve", "compare",
                  "threads", "deterministic"});
  ExperimentConfig out;
  const std::int64_t version = top.i64("schema_version", -1);
  if (version != kConfigSchemaVersion) {
    errs.add("schema_version",
             "must be " + std::to_string(kConfigSchemaVersion));
  }
  out.seed = top.u64("seed", 0);
  out.out = top.str("out", "");
  out.precision = top.str("precision", "f32");
  if (out.precision != "f32" && out.precision != "f64") {
    errs.add("precision", "must be \"f32\" or \"f64\"");
  }
  const std::string metric = top.str("metric", "auc");
  if (metric == "auc" || metric == "accuracy") {
    out.metric = metric_from_name(metric);
  } else {
    errs.add("metric", "must be \"auc\" or \"accuracy\"");
  }
  out.threads = static_cast<int>(top.i64("threads", 1));
  if (out.threads < 1) errs.add("threads", "must be at least 1");
  out.deterministic = top.boolean("deterministic", false);

  // dataset
  cfg::Section ds = top.section("dataset");
  if (!ds.present()) {
    errs.add("dataset", "required section is missing");
  } else {
    ds.check_keys({"manifest", "synthetic", "trials", "balance"});
    out.dataset.manifest = ds.str("manifest", "");
    out.dataset.balance = ds.boolean("balance", true);
    out.dataset.synth_trials = ds.i64("trials", 0);
    const bool has_manifest = !out.dataset.manifest.empty();
    const bool has_synth = ds.has("synthetic");
    if (has_manifest == has_synth) {
      errs.add("dataset", "exactly one of \"manifest\" or \"synthetic\" required");
    }
    if (has_synth) {
      cfg::Section sy = ds.section("synthetic");
      if (sy.present()) cfg::parse_synthetic(sy, &out.dataset);
      if (out.dataset.synth_trials < 1) {
        errs.add("dataset.trials", "must be a positive trial count");
      }
    } else if (ds.has("trials")) {
      errs.add("dataset.trials", "only valid with a synthetic dataset");
    }
  }

  // folds
  cfg::Section fl = top.section("folds");
  if (!fl.present()) {
    errs.add("folds", "required section is missing");
  } else {
    fl.check_keys({"scheme", "train", "validation", "test", "count", "fixed_test"});
    out.folds.scheme = fl.str("scheme", "random");
    if (out.folds.scheme == "random") {
      out.folds.n_train = fl.i64("train", 0);
      out.folds.n_val = fl.i64("validation", 0);
      out.folds.n_test = fl.i64("test", 0);
      out.folds.n_folds = fl.i64("count", 0);
      if (out.folds.n_train < 1) errs.add("folds.train", "must be positive");
      if (out.folds.n_val < 1) errs.add("folds.validation", "must be positive");
      if (out.folds.n_test < 1) errs.add("folds.test", "must be positive");
      if (out.folds.n_folds < 1) errs.add("folds.count", "must be positive");
      for (std::int64_t id : fl.i64_list("fixed_test")) {
        if (id < 0) {
          errs.add("folds.fixed_test", "subject ids must be non-negative");
        } else {
          out.folds.fixed_test.push_back(static_cast<std::uint32_t>(id));
        }
      }
    } else if (out.folds.scheme == "smr9") {
      for (const char* k : {"train", "validation", "test", "count", "fixed_test"}) {
        if (fl.has(k)) {
          errs.add(fl.at(k), "not used by the smr9 scheme");
        }
      }
    } else {
      errs.add("folds.scheme", "must be \"random\" or \"smr9\"");
    }
  }

  // model
  cfg::Section md = top.section("model");
  md.check_keys({"variant", "layer2_kernel", "layer3_kernel", "layer1_filters",
                 "layer2_filters", "layer3_filters", "dense_units", "dropout_p",
                 "elu_alpha", "bn_eps", "bn_momentum"});
  if (md.present()) {
    const std::string variant = md.str("variant", "model5");
    try {
      out.model.variant = variant_from_name(variant);
    } catch (const ValueError&) {
      errs.add("model.variant", "must be one of model1..model5");
    }
    md.kernel("layer2_kernel", &out.model.kernels.layer2_h,
              &out.model.kernels.layer2_w);
    md.kernel("layer3_kernel", &out.model.kernels.layer3_h,
              &out.model.kernels.layer3_w);
    out.model.layer1_filters = md.i64("layer1_filters", out.model.layer1_filters);
    out.model.layer2_filters = md.i64("layer2_filters", out.model.layer2_filters);
    out.model.layer3_filters = md.i64("layer3_filters", out.model.layer3_filters);
    out.model.dense_units = md.i64("dense_units", out.model.dense_units);
    out.model.dropout_p = md.f64("dropout_p", out.model.dropout_p);
    out.model.elu_alpha = md.f64("elu_alpha", out.model.elu_alpha);
    out.model.bn_eps = md.f64("bn_eps", out.model.bn_eps);
    out.model.bn_momentum = md.f64("bn_momentum", out.model.bn_momentum);
  }

  // train
  cfg::Section tr = top.section("train");
  tr.check_keys({"epochs", "batch_size", "lr", "beta1", "beta2", "adam_eps",
                 "l1", "l2"});
  if (tr.present()) {
    out.train.epochs = tr.i64("epochs", out.train.epochs);
    out.train.batch_size = tr.i64("batch_size", out.train.batch_size);
    out.train.adam.lr = tr.f64("lr", out.train.adam.lr);
    out.train.adam.beta1 = tr.f64("beta1", out.train.adam.beta1);
    out.train.adam.beta2 = tr.f64("beta2", out.train.adam.beta2);
    out.train.adam.eps = tr.f64("adam_eps", out.train.adam.eps);
    out.train.l1 = tr.f64("l1", out.train.l1);
    out.train.l2 = tr.f64("l2", out.train.l2);
    if (out.train.epochs < 1) errs.add("train.epochs", "must be positive");
    if (out.train.batch_size < 1) errs.add("train.batch_size", "must be positive");
    if (out.train.l1 < 0) errs.add("train.l1", "must be non-negative");
    if (out.train.l2 < 0) errs.add("train.l2", "must be non-negative");
    try {
      out.train.adam.validate();
    } catch (const ValueError& e) {
      errs.add("train", e.what());
    }
  }
  out.train.metric = out.metric;

  // curve
  cfg::Section cv = top.section("curve");
  cv.check_keys({"ks", "reps"});
  if (cv.present()) {
    out.curve.ks = cv.i64_list("ks");
    for (std::size_t i = 0; i < out.curve.ks.size(); ++i) {
      if (out.curve.ks[i] < 1 ||
          (i > 0 && out.curve.ks[i] <= out.curve.ks[i - 1])) {
        errs.add("curve.ks", "sizes must be positive and strictly increasing");
        break;
      }
    }
    out.curve.reps = cv.i64("reps", out.curve.reps);
    if (out.curve.reps < 1) errs.add("curve.reps", "must be positive");
  }

  // compare
  cfg::Section cp = top.section("compare");
  cp.check_keys({"q", "dependent_fdr"});
  if (cp.present()) {
    out.compare.q = cp.f64("q", out.compare.q);
    out.compare.dependent_fdr = cp.boolean("dependent_fdr", false);
    if (!(out.compare.q > 0 && out.compare.q < 1)) {
      errs.add("compare.q", "must be in (0, 1)");
    }
  }

  // cross-field constraints checkable without the data
  if (out.dataset.synthetic) {
    if (out.metric == Metric::auc && out.dataset.synthetic->n_classes != 2) {
      errs.add("metric", "auc requires exactly 2 classes");
    }
    const std::int64_t n_subjects = out.dataset.synthetic->n_subjects;
    if (out.folds.scheme == "random" && out.folds.n_train > 0 &&
        out.folds.n_train + out.folds.n_val + out.folds.n_test != n_subjects) {
      errs.add("folds", "train+validation+test must equal dataset.synthetic.subjects");
    }
  }

  errs.raise_if_any();
  return out;
}

inline nlohmann::json ExperimentConfig::to_json(bool include_runtime) const {
  nlohmann::json j;
  j["schema_version"] = kConfigSchemaVersion;
  j["seed"] = seed;
  j["precision"] = precision;
  j["metric"] = metric_name(metric);
  nlohmann::json ds;
  ds["balance"] = dataset.balance;
  if (!dataset.manifest.empty()) ds["manifest"] = dataset.manifest;
  if (dataset.synthetic) {
    const synth::SyntheticSpec& s = *dataset.synthetic;
    nlohmann::json sy;
    sy["paradigm"] = synth::paradigm_name(s.paradigm);
    sy["channels"] = s.channels;
    sy["samples"] = s.samples;
    sy["rate"] = s.rate;
    sy["classes"] = s.n_classes;
    sy["subjects"] = s.n_subjects;
    sy["snr"] = s.snr;
    sy["noise_amplitude"] = s.noise_amplitude;
    sy["gain_jitter"] = s.subject_gain_jitter;
    sy["latency_jitter"] = s.subject_latency_jitter;
    if (s.paradigm == synth::Paradigm::erp) {
      sy["erp_latency"] = s.erp_latency;
      sy["erp_width"] = s.erp_width;
      if (!s.erp_channels.empty()) sy["erp_channels"] = s.erp_channels;
    } else {
      sy["band"] = {s.band_lo, s.band_hi};
    }
    ds["synthetic"] = sy;
    ds["trials"] = dataset.synth_trials;
  }
  j["dataset"] = ds;
  nlohmann::json fl;
  fl["scheme"] = folds.scheme;
  if (folds.scheme == "random") {
    fl["train"] = folds.n_train;
    fl["validation"] = folds.n_val;
    fl["test"] = folds.n_test;
    fl["count"] = folds.n_folds;
    if (!folds.fixed_test.empty()) fl["fixed_test"] = folds.fixed_test;
  }
  j["folds"] = fl;
  nlohmann::json md = model.to_json();
  md.erase("channels");  // filled from the dataset, not part of the config
  md.erase("samples");
  md.erase("classes");
  j["model"] = md;
  j["train"] = {{"epochs", train.epochs},
                {"batch_size", train.batch_size},
                {"lr", train.adam.lr},
                {"beta1", train.adam.beta1},
                {"beta2", train.adam.beta2},
                {"adam_eps", train.adam.eps},
                {"l1", train.l1},
                {"l2", train.l2}};
  if (!curve.ks.empty() || curve.reps != 10) {
    j["curve"] = {{"ks", curve.ks}, {"reps", curve.reps}};
  }
  j["compare"] = {{"q", compare.q}, {"dependent_fdr", compare.dependent_fdr}};
  if (include_runtime) {
    j["out"] = out;
    j["threads"] = threads;
    j["deterministic"] = deterministic;
  }
  return j;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file: " + path);
  nlohmann::json root;
  try {
    is >> root;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config is not valid JSON: " + std::string(e.what()));
  }
  return parse_config(root);
}

// ---- dataset loading --------------------------------------------------------

struct SubjectData {
  std::uint32_t id = 0;
  EpochSet all;         // whole-subject trials (single-file subjects)
  EpochSet train_half;  // split subjects only
  EpochSet test_half;
  bool split = false;
};

struct LoadedData {
  std::string name;  // short tag embedded in reports
  std::string paradigm;
  double rate = 0;
  std::int64_t channels = 0;
  std::int64_t samples = 0;
  std::int64_t n_classes = 0;
  double window_start = 0;
  double window_end = 0;
  std::vector<SubjectData> subjects;

  std::vector<std::uint32_t> subject_ids() const {
    std::vector<std::uint32_t> out;
    out.reserve(subjects.size());
    for (const auto& s : subjects) out.push_back(s.id);
    return out;
  }

  const SubjectData& subject(std::uint32_t id) const {
    for (const auto& s : subjects) {
      if (s.id == id) return s;
    }
    throw DataError("dataset holds no subject " + std::to_string(id));
  }

  EpochSet materialize(const std::vector<SubjectRef>& refs) const {
    if (refs.empty()) throw DataError("materialize: empty subject list");
    std::vector<EpochSet> parts;
    for (const SubjectRef& ref : refs) {
      const SubjectData& s = subject(ref.subject);
      switch (ref.portion) {
        case Portion::all:
          if (s.split) {
            parts.push_back(concat_epochs({&s.train_half, &s.test_half}));
          } else {
            parts.push_back(s.all);
          }
          break;
        case Portion::train_half:
          if (!s.split) {
            throw DataError("subject " + std::to_string(s.id) +
                            " has no separate train portion");
          }
          parts.push_back(s.train_half);
          break;
        case Portion::test_half:
          if (!s.split) {
            throw DataError("subject " + std::to_string(s.id) +
                            " has no separate test portion");
          }
          parts.push_back(s.test_half);
          break;
      }
    }
    std::vector<const EpochSet*> ptrs;
    ptrs.reserve(parts.size());
    for (const EpochSet& p : parts) ptrs.push_back(&p);
    return concat_epochs(ptrs);
  }
};

namespace detail {

inline std::vector<std::int64_t> subject_trial_indices(const EpochSet& set,
                                                       std::uint32_t id) {
  std::vector<std::int64_t> idx;
  for (std::int64_t i = 0; i < set.n_trials(); ++i) {
    if (set.subjects[static_cast<std::size_t>(i)] == id) idx.push_back(i);
  }
  return idx;
}

}  // namespace detail

// Synthetic data is generated once and split per subject: the first half of
// each subject's trials acts as its train portion, the rest as its test
// portion, so both fold schemes work on the same generated set.
inline LoadedData load_synthetic(const DatasetConfig& dc, std::uint64_t seed) {
  const synth::SyntheticSpec& spec = *dc.synthetic;
  const EpochSet all =
      synth::gen_dataset(spec, dc.synth_trials, RngStream(seed).derive("data"));
  LoadedData data;
  data.name = std::string("synthetic-") + synth::paradigm_name(spec.paradigm);
  data.paradigm = synth::paradigm_name(spec.paradigm);
  data.rate = all.rate;
  data.channels = all.channels;
  data.samples = all.samples;
  data.n_classes = all.n_classes;
  data.window_start = all.window_start;
  data.window_end = all.window_end;
  for (std::int64_t s = 0; s < spec.n_subjects; ++s) {
    const auto id = static_cast<std::uint32_t>(s);
    const std::vector<std::int64_t> idx = detail::subject_trial_indices(all, id);
    if (idx.empty()) {
      throw DataError("synthetic split left subject " + std::to_string(s) +
                      " without trials; raise dataset.trials");
    }
    SubjectData sub;
    sub.id = id;
    sub.split = true;
    const auto half = static_cast<std::size_t>((idx.size() + 1) / 2);
    sub.train_half = all.subset(
        std::vector<std::int64_t>(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(half)));
    if (half == idx.size()) {
      throw DataError("subject " + std::to_string(s) +
                      " has too few trials to split; raise dataset.trials");
    }
    sub.test_half = all.subset(
        std::vector<std::int64_t>(idx.begin() + static_cast<std::ptrdiff_t>(half), idx.end()));
    data.subjects.push_back(std::move(sub));
  }
  return data;
}

inline LoadedData load_manifest(const std::string& manifest_path) {
  std::ifstream is(manifest_path);
  if (!is) throw DataError("cannot open manifest: " + manifest_path);
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("manifest is not valid JSON: " + std::string(e.what()));
  }
  const std::filesystem::path base =
      std::filesystem::path(manifest_path).parent_path();
  LoadedData data;
  try {
    if (j.value("schema_version", -1) != kManifestSchemaVersion) {
      throw FormatError("manifest: unsupported schema_version");
    }
    data.name = j.value("name",
                        std::filesystem::path(manifest_path).stem().string());
    data.paradigm = j.value("paradigm", std::string("unknown"));
    data.rate = j.at("rate").get<double>();
    data.n_classes = j.at("classes").get<std::int64_t>();
    if (j.contains("window")) {
      data.window_start = j["window"].at(0).get<double>();
      data.window_end = j["window"].at(1).get<double>();
    }
    if (!j.contains("subjects") || !j["subjects"].is_array() ||
        j["subjects"].empty()) {
      throw FormatError("manifest: needs a non-empty subjects array");
    }
    for (const auto& sj : j["subjects"]) {
      SubjectData sub;
      sub.id = sj.at("id").get<std::uint32_t>();
      auto read_part = [&](const char* key) {
        const std::string rel = sj.at(key).get<std::string>();
        EpochSet set = read_epochs((base / rel).string());
        for (auto& sid : set.subjects) sid = sub.id;
        return set;
      };
      if (sj.contains("epochs")) {
        sub.all = read_part("epochs");
      } else if (sj.contains("train") && sj.contains("test")) {
        sub.split = true;
        sub.train_half = read_part("train");
        sub.test_half = read_part("test");
      } else {
        throw FormatError("manifest: subject " + std::to_string(sub.id) +
                          " needs \"epochs\" or \"train\"+\"test\"");
      }
      data.subjects.push_back(std::move(sub));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("manifest: " + std::string(e.what()));
  }

  // cross-file consistency
  const EpochSet* first = nullptr;
  for (const auto& sub : data.subjects) {
    for (const EpochSet* set :
         sub.split ? std::vector<const EpochSet*>{&sub.train_half, &sub.test_half}
                   : std::vector<const EpochSet*>{&sub.all}) {
      if (!first) {
        first = set;
        data.channels = set->channels;
        data.samples = set->samples;
      } else if (set->channels != data.channels || set->samples != data.samples ||
                 set->rate != first->rate || set->n_classes != first->n_classes) {
        throw DataError("manifest: subject files disagree on shape, rate, or classes");
      }
    }
  }
  if (first->rate != data.rate || first->n_classes != data.n_classes) {
    throw DataError("manifest: declared rate/classes do not match the files");
  }
  if (data.window_end > data.window_start) {
    const auto expect = std::llround((data.window_end - data.window_start) * data.rate);
    if (expect != data.samples) {
      throw DataError("manifest: window length does not match the sample count");
    }
  } else {
    data.window_start = 0;
    data.window_end = static_cast<double>(data.samples) / data.rate;
  }
  std::vector<std::uint32_t> ids = data.subject_ids();
  std::sort(ids.begin(), ids.end());
  if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) {
    throw DataError("manifest: duplicate subject id");
  }
  return data;
}

inline LoadedData load_dataset(const ExperimentConfig& cfg) {
  LoadedData data = cfg.dataset.synthetic
                        ? load_synthetic(cfg.dataset, cfg.seed)
                        : load_manifest(cfg.dataset.manifest);
  if (cfg.metric == Metric::auc && data.n_classes != 2) {
    throw ConfigError("metric: auc requires exactly 2 classes, dataset has " +
                      std::to_string(data.n_classes));
  }
  return data;
}

inline FoldPlan build_fold_plan(const ExperimentConfig& cfg,
                                const LoadedData& data) {
  const std::vector<std::uint32_t> ids = data.subject_ids();
  if (cfg.folds.scheme == "smr9") {
    return make_smr_folds(ids);
  }
  if (cfg.folds.n_train + cfg.folds.n_val + cfg.folds.n_test !=
      static_cast<std::int64_t>(ids.size())) {
    throw ConfigError("folds: train+validation+test must equal the subject count (" +
                      std::to_string(ids.size()) + ")");
  }
  return make_random_folds(ids, cfg.folds.n_train, cfg.folds.n_val,
                           cfg.folds.n_test, cfg.folds.n_folds,
                           RngStream(cfg.seed).derive("folds"),
                           cfg.folds.fixed_test);
}

// ---- fold execution ---------------------------------------------------------

struct FoldOutcome {
  std::int64_t fold = 0;
  std::int64_t n_train = 0;
  std::int64_t n_val = 0;
  std::int64_t n_test = 0;
  TrainReport report;
  double test_loss = 0;
  double test_metric = 0;
};

struct RunBundle {
  std::string label;
  std::string dataset_name;
  std::string fingerprint;
  Metric metric = Metric::auc;
  std::string fold_scheme;
  ModelSpec spec;
  std::int64_t param_total = 0;
  std::vector<FoldOutcome> folds;
  stats::MetricSummary val_summary;   // best-epoch validation metric per fold
  stats::MetricSummary test_summary;  // test metric per fold

  std::vector<double> test_metrics() const {
    std::vector<double> out;
    out.reserve(folds.size());
    for (const auto& f : folds) out.push_back(f.test_metric);
    return out;
  }
};

inline ModelSpec resolve_model_spec(const ExperimentConfig& cfg,
                                    const LoadedData& data) {
  ModelSpec spec = cfg.model;
  spec.channels = data.channels;
  spec.samples = data.samples;
  spec.classes = data.n_classes;
  try {
    spec.validate();
  } catch (const ValueError& e) {
    throw ConfigError(std::string("model: ") + e.what());
  }
  return spec;
}

namespace detail {

template <class Real>
FoldOutcome run_one_fold(const ExperimentConfig& cfg, const LoadedData& data,
                         const Fold& fold, std::int64_t f,
                         const ModelSpec& spec) {
  const RngStream fs = RngStream(cfg.seed).derive("fold")
                           .derive(static_cast<std::uint64_t>(f));
  EpochSet train_set = data.materialize(fold.train);
  EpochSet val_set = data.materialize(fold.validation);
  EpochSet test_set = data.materialize(fold.test);
  if (cfg.dataset.balance) {
    train_set = balance_classes(train_set, fs.derive("balance-train"));
    val_set = balance_classes(val_set, fs.derive("balance-val"));
    test_set = balance_classes(test_set, fs.derive("balance-test"));
  }
  Model<Real> model(spec);
  model.init_parameters(fs.derive("init"));
  TrainConfig tc = cfg.train;
  tc.metric = cfg.metric;
  tc.seed = fs.derive("train").seed();
  FoldOutcome out;
  out.fold = f;
  out.n_train = train_set.n_trials();
  out.n_val = val_set.n_trials();
  out.n_test = test_set.n_trials();
  out.report = train(model, train_set, val_set, tc);
  model.restore(out.report.best_state);
  const auto [test_loss, test_metric] = evaluate(model, test_set, cfg.metric);
  out.test_loss = test_loss;
  out.test_metric = test_metric;
  return out;
}

[[noreturn]] inline void rethrow_for_fold(std::exception_ptr ep, std::int64_t f) {
  const std::string tag = "fold " + std::to_string(f) + ": ";
  try {
    std::rethrow_exception(ep);
  } catch (const ConfigError& e) {
    throw ConfigError(tag + e.what());
  } catch (const FormatError& e) {
    throw FormatError(tag + e.what());
  } catch (const DataError& e) {
    throw DataError(tag + e.what());
  } catch (const MetricError& e) {
    throw MetricError(tag + e.what());
  } catch (const InvariantError& e) {
    throw InvariantError(tag + e.what());
  } catch (const NumericError& e) {
    throw NumericError(tag + e.what());
  } catch (const Error& e) {
    throw DataError(tag + e.what());
  } catch (const std::exception& e) {
    throw DataError(tag + e.what());
  }
}

template <class Real>
std::vector<FoldOutcome> run_all_folds(const ExperimentConfig& cfg,
                                       const LoadedData& data,
                                       const FoldPlan& plan,
                                       const ModelSpec& spec) {
  const std::int64_t n = static_cast<std::int64_t>(plan.folds.size());
  std::vector<FoldOutcome> out(static_cast<std::size_t>(n));
  const int threads =
      cfg.deterministic ? 1 : std::max(1, std::min<int>(cfg.threads, static_cast<int>(n)));
  if (threads == 1) {
    for (std::int64_t f = 0; f < n; ++f) {
      try {
        out[static_cast<std::size_t>(f)] =
            run_one_fold<Real>(cfg, data, plan.folds[static_cast<std::size_t>(f)], f, spec);
      } catch (...) {
        rethrow_for_fold(std::current_exception(), f);
      }
    }
    return out;
  }
  std::atomic<std::int64_t> next{0};
  std::vector<std::pair<std::int64_t, std::exception_ptr>> failures(
      static_cast<std::size_t>(threads), {-1, nullptr});
  std::vector<std::thread> pool;
  for (int w = 0; w < threads; ++w) {
    pool.emplace_back([&, w] {
      for (;;) {
        const std::int64_t f = next.fetch_add(1);
        if (f >= n) return;
        try {
          out[static_cast<std::size_t>(f)] = run_one_fold<Real>(
              cfg, data, plan.folds[static_cast<std::size_t>(f)], f, spec);
        } catch (...) {
          failures[static_cast<std::size_t>(w)] = {f, std::current_exception()};
          return;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  std::int64_t bad = -1;
  std::exception_ptr ep;
  for (const auto& [f, e] : failures) {
    if (e && (bad < 0 || f < bad)) {
      bad = f;
      ep = e;
    }
  }
  if (ep) rethrow_for_fold(ep, bad);
  return out;
}

}  // namespace detail

template <class F>
auto with_precision(const std::string& precision, F&& f) {
  if (precision == "f64") return f(double{});
  return f(float{});
}

inline RunBundle run_bundle(const ExperimentConfig& cfg, const LoadedData& data,
                            const FoldPlan& plan, const ModelSpec& spec,
                            const std::string& label) {
  RunBundle b;
  b.label = label;
  b.dataset_name = data.name;
  b.fingerprint = cfg.fingerprint();
  b.metric = cfg.metric;
  b.fold_scheme = cfg.folds.scheme;
  b.spec = spec;
  b.param_total = count_parameters(spec).total;
  b.folds = with_precision(cfg.precision, [&](auto tag) {
    using Real = decltype(tag);
    return detail::run_all_folds<Real>(cfg, data, plan, spec);
  });
  std::vector<double> val, test;
  for (const auto& f : b.folds) {
    val.push_back(f.report.best_val_metric);
    test.push_back(f.test_metric);
  }
  b.val_summary = stats::summarize(val);
  b.test_summary = stats::summarize(test);
  return b;
}

// ---- artifacts ----------------------------------------------------------------

namespace artifact {

inline void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw DataError("cannot create output directory " + dir.string());
}

inline std::vector<std::string> summary_header() {
  return {"label", "dataset", "metric", "params", "n_folds",
          "val_mean", "val_stderr", "test_mean", "test_stderr"};
}

inline std::vector<std::string> summary_row(const RunBundle& b) {
  return {b.label,
          b.dataset_name,
          metric_name(b.metric),
          csv::num(b.param_total),
          csv::num(static_cast<std::int64_t>(b.folds.size())),
          csv::num(b.val_summary.mean),
          csv::num(b.val_summary.stderr_value),
          csv::num(b.test_summary.mean),
          csv::num(b.test_summary.stderr_value)};
}

inline void write_folds_csv(const std::filesystem::path& path,
                            const RunBundle& b) {
  csv::Table t;
  t.comment("config_fingerprint: " + b.fingerprint);
  t.row({"fold", "label", "n_train", "n_val", "n_test", "best_epoch",
         "best_val_loss", "best_val_metric", "test_loss", "test_metric"});
  for (const auto& f : b.folds) {
    t.row({csv::num(f.fold), b.label, csv::num(f.n_train), csv::num(f.n_val),
           csv::num(f.n_test), csv::num(f.report.best_epoch),
           csv::num(f.report.best_val_loss), csv::num(f.report.best_val_metric),
           csv::num(f.test_loss), csv::num(f.test_metric)});
  }
  t.write(path.string());
}

inline void write_histories_csv(const std::filesystem::path& path,
                                const RunBundle& b) {
  csv::Table t;
  t.comment("config_fingerprint: " + b.fingerprint);
  t.row({"fold", "epoch", "train_loss", "val_loss", "val_metric"});
  for (const auto& f : b.folds) {
    for (const auto& rec : f.report.history) {
      t.row({csv::num(f.fold), csv::num(rec.epoch), csv::num(rec.train_loss),
             csv::num(rec.val_loss), csv::num(rec.val_metric)});
    }
  }
  t.write(path.string());
}

inline nlohmann::json series_json(const RunBundle& b) {
  nlohmann::json s;
  s["label"] = b.label;
  s["params"] = b.param_total;
  s["model_fingerprint"] = b.spec.fingerprint();
  s["test_metric"] = b.test_metrics();
  std::vector<double> losses, val;
  for (const auto& f : b.folds) {
    losses.push_back(f.test_loss);
    val.push_back(f.report.best_val_metric);
  }
  s["test_loss"] = losses;
  s["best_val_metric"] = val;
  s["test_mean"] = b.test_summary.mean;
  s["test_stderr"] = b.test_summary.stderr_value;
  return s;
}

inline void write_json(const std::filesystem::path& path,
                       const nlohmann::json& j) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot write " + path.string());
  os << j.dump(2) << "\n";
}

inline nlohmann::json bundle_skeleton(const ExperimentConfig& cfg,
                                      const std::string& kind,
                                      const std::string& dataset,
                                      std::int64_t n_folds) {
  nlohmann::json j;
  j["schema_version"] = kBundleSchemaVersion;
  j["kind"] = kind;
  j["tool"] = {{"name", kToolName}, {"version", kToolVersion}};
  j["config_fingerprint"] = cfg.fingerprint();
  j["dataset"] = dataset;
  j["metric"] = metric_name(cfg.metric);
  j["fold_scheme"] = cfg.folds.scheme;
  j["n_folds"] = n_folds;
  return j;
}

// config.json, folds.csv, histories.csv, summary.csv, bundle.json
inline void write_run_bundle(const std::filesystem::path& dir,
                             const ExperimentConfig& cfg, const RunBundle& b,
                             const std::string& kind = "run") {
  ensure_dir(dir);
  write_json(dir / "config.json", cfg.to_json(true));
  write_folds_csv(dir / "folds.csv", b);
  write_histories_csv(dir / "histories.csv", b);
  csv::Table summary;
  summary.comment("config_fingerprint: " + b.fingerprint);
  summary.row(summary_header());
  summary.row(summary_row(b));
  summary.write((dir / "summary.csv").string());
  nlohmann::json j = bundle_skeleton(cfg, kind, b.dataset_name,
                                     static_cast<std::int64_t>(b.folds.size()));
  j["series"] = nlohmann::json::array({series_json(b)});
  j["files"] = {"config.json", "folds.csv", "histories.csv", "summary.csv"};
  write_json(dir / "bundle.json", j);
}

}  // namespace artifact

// ---- commands -----------------------------------------------------------------

inline void require_out(const ExperimentConfig& cfg) {
  if (cfg.out.empty()) {
    throw ConfigError("out: no output directory (set \"out\" or pass --out)");
  }
}

inline RunBundle cmd_run(const ExperimentConfig& cfg) {
  require_out(cfg);
  const LoadedData data = load_dataset(cfg);
  const FoldPlan plan = build_fold_plan(cfg, data);
  const ModelSpec spec = resolve_model_spec(cfg, data);
  const std::string label =
      std::string(variant_name(spec.variant)) + " " + spec.kernels.label();
  RunBundle b = run_bundle(cfg, data, plan, spec, label);
  artifact::write_run_bundle(cfg.out, cfg, b);
  return b;
}

namespace detail {

inline std::string kernel_slug(const KernelConfig& k) {
  std::ostringstream os;
  os << k.layer2_h << "x" << k.layer2_w << "_" << k.layer3_h << "x" << k.layer3_w;
  return os.str();
}

}  // namespace detail

// Runs every kernel configuration with shared folds and per-config rng
// streams, asserts the parameter-count identity that makes the sweep a fair
// comparison, and ranks the configurations by mean test metric.
inline std::vector<RunBundle> cmd_sweep(const ExperimentConfig& cfg) {
  require_out(cfg);
  const LoadedData data = load_dataset(cfg);
  const FoldPlan plan = build_fold_plan(cfg, data);
  const std::filesystem::path out(cfg.out);
  artifact::ensure_dir(out);

  std::vector<RunBundle> bundles;
  const std::vector<KernelConfig> configs = enumerate_configs();
  for (const KernelConfig& k : configs) {
    ExperimentConfig sub = cfg;
    sub.model.kernels = k;
    sub.out = (out / ("cfg_" + detail::kernel_slug(k))).string();
    const ModelSpec spec = resolve_model_spec(sub, data);
    RunBundle b = run_bundle(sub, data, plan, spec, k.label());
    artifact::write_run_bundle(sub.out, sub, b);
    bundles.push_back(std::move(b));
  }

  const std::int64_t params0 = bundles.front().param_total;
  for (const RunBundle& b : bundles) {
    if (b.param_total != params0) {
      throw InvariantError("sweep: parameter counts diverge (" + b.label +
                           " has " + std::to_string(b.param_total) +
                           ", expected " + std::to_string(params0) + ")");
    }
  }

  // one dataset -> one rank column
  std::vector<std::vector<double>> scores;
  for (const RunBundle& b : bundles) scores.push_back({b.test_summary.mean});
  const std::vector<std::vector<double>> ranks = stats::rank_models(scores);

  const std::string fp = cfg.fingerprint();
  csv::Table summary;
  summary.comment("config_fingerprint: " + fp);
  auto header = artifact::summary_header();
  header.push_back("rank");
  summary.row(header);
  for (std::size_t i = 0; i < bundles.size(); ++i) {
    auto row = artifact::summary_row(bundles[i]);
    row.push_back(csv::num(ranks[i][0]));
    summary.row(row);
  }
  summary.write((out / "summary.csv").string());

  nlohmann::json j = artifact::bundle_skeleton(
      cfg, "sweep", data.name, static_cast<std::int64_t>(plan.folds.size()));
  nlohmann::json series = nlohmann::json::array();
  for (std::size_t i = 0; i < bundles.size(); ++i) {
    nlohmann::json s = artifact::series_json(bundles[i]);
    s["rank"] = ranks[i][0];
    s["dir"] = "cfg_" + detail::kernel_slug(configs[i]);
    series.push_back(std::move(s));
  }
  j["series"] = series;
  j["files"] = {"config.json", "summary.csv"};
  artifact::write_json(out / "bundle.json", j);
  artifact::write_json(out / "config.json", cfg.to_json(true));
  return bundles;
}

// Runs the five architecture variants with shared folds and seeds and emits
// the per-epoch loss curves that expose which variants overfit.
inline std::vector<RunBundle> cmd_ablation(const ExperimentConfig& cfg) {
  require_out(cfg);
  const LoadedData data = load_dataset(cfg);
  const FoldPlan plan = build_fold_plan(cfg, data);
  const std::filesystem::path out(cfg.out);
  artifact::ensure_dir(out);

  const Variant variants[] = {Variant::model1, Variant::model2, Variant::model3,
                              Variant::model4, Variant::model5};
  std::vector<RunBundle> bundles;
  for (Variant v : variants) {
    ExperimentConfig sub = cfg;
    sub.model.variant = v;
    sub.out = (out / variant_name(v)).string();
    const ModelSpec spec = resolve_model_spec(sub, data);
    RunBundle b = run_bundle(sub, data, plan, spec, variant_name(v));
    artifact::write_run_bundle(sub.out, sub, b);
    bundles.push_back(std::move(b));
  }

  {
    ExperimentConfig canonical = cfg;
    canonical.model.variant = Variant::model5;
    const ModelSpec spec5 = resolve_model_spec(canonical, data);
    if (bundles.back().spec.fingerprint() != spec5.fingerprint()) {
      throw InvariantError("ablation: model5 does not match the canonical architecture");
    }
  }

  const std::string fp = cfg.fingerprint();
  csv::Table curves;
  curves.comment("config_fingerprint: " + fp);
  curves.row({"label", "epoch", "train_loss", "val_loss"});
  for (const RunBundle& b : bundles) {
    const std::size_t epochs = b.folds.front().report.history.size();
    for (std::size_t e = 0; e < epochs; ++e) {
      double train_sum = 0, val_sum = 0;
      for (const FoldOutcome& f : b.folds) {
        train_sum += f.report.history[e].train_loss;
        val_sum += f.report.history[e].val_loss;
      }
      const double n = static_cast<double>(b.folds.size());
      curves.row({b.label, csv::num(static_cast<std::int64_t>(e)),
                  csv::num(train_sum / n), csv::num(val_sum / n)});
    }
  }
  curves.write((out / "curves.csv").string());

  csv::Table summary;
  summary.comment("config_fingerprint: " + fp);
  summary.row(artifact::summary_header());
  for (const RunBundle& b : bundles) summary.row(artifact::summary_row(b));
  summary.write((out / "summary.csv").string());

  nlohmann::json j = artifact::bundle_skeleton(
      cfg, "ablation", data.name, static_cast<std::int64_t>(plan.folds.size()));
  nlohmann::json series = nlohmann::json::array();
  for (const RunBundle& b : bundles) {
    nlohmann::json s = artifact::series_json(b);
    s["dir"] = b.label;
    series.push_back(std::move(s));
  }
  j["series"] = series;
  j["files"] = {"config.json", "summary.csv", "curves.csv"};
  artifact::write_json(out / "bundle.json", j);
  artifact::write_json(out / "config.json", cfg.to_json(true));
  return bundles;
}

// Trains on growing subsamples of the first fold's training set and scores
// the fold's test set, `reps` fresh draws per size.
inline std::vector<stats::LearningCurvePoint> cmd_learning_curve(
    const ExperimentConfig& cfg) {
  require_out(cfg);
  const LoadedData data = load_dataset(cfg);
  const FoldPlan plan = build_fold_plan(cfg, data);
  const ModelSpec spec = resolve_model_spec(cfg, data);
  const Fold& fold = plan.folds.front();
  const RngStream fs = RngStream(cfg.seed).derive("fold").derive(std::uint64_t{0});
  EpochSet train_set = data.materialize(fold.train);
  EpochSet val_set = data.materialize(fold.validation);
  EpochSet test_set = data.materialize(fold.test);
  if (cfg.dataset.balance) {
    train_set = balance_classes(train_set, fs.derive("balance-train"));
    val_set = balance_classes(val_set, fs.derive("balance-val"));
    test_set = balance_classes(test_set, fs.derive("balance-test"));
  }

  std::vector<std::int64_t> ks = cfg.curve.ks;
  if (ks.empty()) {
    for (std::int64_t k = 500; k <= train_set.n_trials(); k += 500) {
      ks.push_back(k);
    }
    if (ks.empty() || ks.back() != train_set.n_trials()) {
      ks.push_back(train_set.n_trials());
    }
  } else if (ks.back() > train_set.n_trials()) {
    throw ConfigError("curve.ks: largest size " + std::to_string(ks.back()) +
                      " exceeds the training set (" +
                      std::to_string(train_set.n_trials()) + " trials)");
  }

  const stats::CurveRunner runner = [&](const EpochSet& subset,
                                        const EpochSet& val,
                                        const EpochSet& test,
                                        std::uint64_t seed) {
    return with_precision(cfg.precision, [&](auto tag) {
      using Real = decltype(tag);
      Model<Real> model(spec);
      model.init_parameters(RngStream(seed).derive("init"));
      TrainConfig tc = cfg.train;
      tc.metric = cfg.metric;
      tc.seed = RngStream(seed).derive("train").seed();
      const TrainReport rep = train(model, subset, val, tc);
      model.restore(rep.best_state);
      return evaluate(model, test, cfg.metric).second;
    });
  };

  const auto points = stats::learning_curve(runner, train_set, val_set, test_set,
                                            ks, cfg.curve.reps, RngStream(cfg.seed));

  const std::filesystem::path out(cfg.out);
  artifact::ensure_dir(out);
  const std::string fp = cfg.fingerprint();
  csv::Table curves;
  curves.comment("config_fingerprint: " + fp);
  curves.row({"k", "n_reps", "mean", "stderr"});
  for (const auto& p : points) {
    curves.row({csv::num(p.k), csv::num(p.summary.n), csv::num(p.summary.mean),
                csv::num(p.summary.stderr_value)});
  }
  curves.write((out / "curves.csv").string());

  nlohmann::json j = artifact::bundle_skeleton(cfg, "learning-curve", data.name, 1);
  nlohmann::json series = nlohmann::json::array();
  for (const auto& p : points) {
    series.push_back({{"label", "k=" + std::to_string(p.k)},
                      {"k", p.k},
                      {"test_metric", p.scores},
                      {"mean", p.summary.mean},
                      {"stderr", p.summary.stderr_value}});
  }
  j["series"] = series;
  j["files"] = {"config.json", "curves.csv"};
  artifact::write_json(out / "bundle.json", j);
  artifact::write_json(out / "config.json", cfg.to_json(true));
  return points;
}

// ---- compare ------------------------------------------------------------------

struct BundleSeries {
  std::string label;
  std::vector<double> test_metric;
};

struct LoadedBundle {
  std::string dir;
  std::string kind;
  std::string dataset;
  std::string metric;
  std::string fold_scheme;
  std::string fingerprint;
  std::int64_t n_folds = 0;
  std::vector<BundleSeries> series;
};

inline LoadedBundle load_bundle(const std::string& dir_or_file) {
  std::filesystem::path path(dir_or_file);
  if (std::filesystem::is_directory(path)) path /= "bundle.json";
  std::ifstream is(path);
  if (!is) throw DataError("cannot open bundle: " + path.string());
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("bundle is not valid JSON: " + std::string(e.what()));
  }
  LoadedBundle b;
  b.dir = path.parent_path().string();
  try {
    if (j.value("schema_version", -1) != kBundleSchemaVersion) {
      throw FormatError("bundle: unsupported schema_version");
    }
    b.kind = j.at("kind").get<std::string>();
    b.dataset = j.at("dataset").get<std::string>();
    b.metric = j.at("metric").get<std::string>();
    b.fold_scheme = j.at("fold_scheme").get<std::string>();
    b.fingerprint = j.at("config_fingerprint").get<std::string>();
    b.n_folds = j.at("n_folds").get<std::int64_t>();
    for (const auto& s : j.at("series")) {
      BundleSeries bs;
      bs.label = s.at("label").get<std::string>();
      bs.test_metric = s.at("test_metric").get<std::vector<double>>();
      b.series.push_back(std::move(bs));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("bundle: " + std::string(e.what()));
  }
  if (b.series.empty()) throw FormatError("bundle: no series");
  return b;
}

struct CompareRow {
  std::string label;
  std::int64_t n = 0;
  double mean_diff = 0;
  double stderr_diff = 0;
  double p = 1;
  double p_adjusted = 1;
  bool rejected = false;
};

struct CompareReport {
  std::string dataset;
  std::string metric;
  double q = 0.05;
  bool dependent = false;
  std::vector<CompareRow> rows;
};

// Pairs per-fold metrics of matching series (by label when either side has
// several), runs the paired sign-rank test per pair, and controls the false
// discovery rate across the pairs.
inline CompareReport compare_bundles(const LoadedBundle& a,
                                     const LoadedBundle& b, double q,
                                     bool dependent_fdr) {
  if (a.n_folds != b.n_folds || a.fold_scheme != b.fold_scheme) {
    throw MetricError("compare: bundles have different fold structure (" +
                      a.fold_scheme + " x " + std::to_string(a.n_folds) +
                      " vs " + b.fold_scheme + " x " + std::to_string(b.n_folds) + ")");
  }
  if (a.dataset != b.dataset) {
    throw MetricError("compare: bundles come from different datasets (" +
                      a.dataset + " vs " + b.dataset + ")");
  }
  if (a.metric != b.metric) {
    throw MetricError("compare: bundles use different metrics");
  }
  std::vector<std::pair<const BundleSeries*, const BundleSeries*>> pairs;
  if (a.series.size() == 1 && b.series.size() == 1) {
    pairs.emplace_back(&a.series[0], &b.series[0]);
  } else {
    for (const BundleSeries& sa : a.series) {
      const BundleSeries* match = nullptr;
      for (const BundleSeries& sb : b.series) {
        if (sb.label == sa.label) match = &sb;
      }
      if (!match) {
        throw MetricError("compare: no series labeled \"" + sa.label +
                          "\" in the second bundle");
      }
      pairs.emplace_back(&sa, match);
    }
    if (a.series.size() != b.series.size()) {
      throw MetricError("compare: bundles have different series counts");
    }
  }

  CompareReport report;
  report.dataset = a.dataset;
  report.metric = a.metric;
  report.q = q;
  report.dependent = dependent_fdr;
  std::vector<double> ps;
  for (const auto& [sa, sb] : pairs) {
    if (sa->test_metric.size() != sb->test_metric.size()) {
      throw MetricError("compare: series \"" + sa->label +
                        "\" has mismatched fold counts");
    }
    CompareRow row;
    row.label = sa->label;
    row.n = static_cast<std::int64_t>(sa->test_metric.size());
    std::vector<double> diff(sa->test_metric.size());
    for (std::size_t i = 0; i < diff.size(); ++i) {
      diff[i] = sa->test_metric[i] - sb->test_metric[i];
    }
    const stats::MetricSummary ds = stats::summarize(diff);
    row.mean_diff = ds.mean;
    row.stderr_diff = ds.stderr_value;
    row.p = stats::signrank_test(sa->test_metric, sb->test_metric).p;
    ps.push_back(row.p);
    report.rows.push_back(std::move(row));
  }
  const stats::FdrResult fdr = stats::fdr_correct(ps, q, dependent_fdr);
  for (std::size_t i = 0; i < report.rows.size(); ++i) {
    report.rows[i].p_adjusted = fdr.adjusted[i];
    report.rows[i].rejected = fdr.rejected[i];
  }
  return report;
}

inline CompareReport cmd_compare(const std::string& bundle_a,
                                 const std::string& bundle_b, double q,
                                 bool dependent_fdr, const std::string& out_dir) {
  const LoadedBundle a = load_bundle(bundle_a);
  const LoadedBundle b = load_bundle(bundle_b);
  const CompareReport report = compare_bundles(a, b, q, dependent_fdr);
  if (!out_dir.empty()) {
    const std::filesystem::path out(out_dir);
    artifact::ensure_dir(out);
    csv::Table t;
    t.comment("config_fingerprint: " + a.fingerprint + "+" + b.fingerprint);
    t.comment("q: " + csv::num(q) +
              (dependent_fdr ? " (dependence-adjusted fdr)" : ""));
    t.row({"model", "dataset", "metric", "mean", "stderr", "p", "p_adjusted",
           "rejected"});
    for (const CompareRow& row : report.rows) {
      t.row({row.label, report.dataset, report.metric, csv::num(row.mean_diff),
             csv::num(row.stderr_diff), csv::num(row.p),
             csv::num(row.p_adjusted), row.rejected ? "1" : "0"});
    }
    t.write((out / "stats.csv").string());
  }
  return report;
}

// ---- gen-synth ----------------------------------------------------------------

// Writes each subject's train/test halves as .eege files plus the manifest
// that ties them together, so file-based runs can reproduce in-config
// synthetic runs exactly (same master seed, same "data" stream).
inline std::string cmd_gen_synth(const ExperimentConfig& cfg) {
  require_out(cfg);
  if (!cfg.dataset.synthetic) {
    throw ConfigError("dataset.synthetic: gen-synth needs a synthetic dataset");
  }
  const LoadedData data = load_synthetic(cfg.dataset, cfg.seed);
  const std::filesystem::path out(cfg.out);
  artifact::ensure_dir(out);
  nlohmann::json subjects = nlohmann::json::array();
  for (const SubjectData& sub : data.subjects) {
    std::ostringstream stem;
    stem << "s" << std::setw(2) << std::setfill('0') << sub.id;
    const std::string train_name = stem.str() + "_train.eege";
    const std::string test_name = stem.str() + "_test.eege";
    write_epochs((out / train_name).string(), sub.train_half);
    write_epochs((out / test_name).string(), sub.test_half);
    subjects.push_back({{"id", sub.id}, {"train", train_name}, {"test", test_name}});
  }
  nlohmann::json manifest;
  manifest["schema_version"] = kManifestSchemaVersion;
  manifest["name"] = data.name;
  manifest["paradigm"] = data.paradigm;
  manifest["rate"] = data.rate;
  manifest["classes"] = data.n_classes;
  manifest["window"] = {data.window_start, data.window_end};
  if (cfg.dataset.synthetic->paradigm == synth::Paradigm::oscillatory) {
    manifest["band"] = {cfg.dataset.synthetic->band_lo,
                        cfg.dataset.synthetic->band_hi};
  }
  manifest["config_fingerprint"] = cfg.fingerprint();
  manifest["subjects"] = subjects;
  const std::string path = (out / "manifest.json").string();
  artifact::write_json(path, manifest);
  return path;
}

// ---- inspect ------------------------------------------------------------------

inline std::string inspect_path(const std::string& target) {
  std::ostringstream os;
  std::filesystem::path path(target);
  if (std::filesystem::is_directory(path) &&
      std::filesystem::exists(path / "bundle.json")) {
    path /= "bundle.json";
  }
  if (!std::filesystem::exists(path)) {
    throw DataError("inspect: no such file: " + path.string());
  }
  const std::string ext = path.extension().string();
  if (ext == ".eege") {
    const EpochSet set = read_epochs(path.string());
    os << "epoch set " << path.string() << "\n";
    os << "  rate " << set.rate << " Hz, " << set.channels << " channels x "
       << set.samples << " samples\n";
    os << "  " << set.n_trials() << " trials, " << set.n_classes << " classes\n";
    std::vector<std::int64_t> per_class(static_cast<std::size_t>(set.n_classes), 0);
    for (std::uint16_t lab : set.labels) ++per_class[lab];
    for (std::int64_t c = 0; c < set.n_classes; ++c) {
      os << "  class " << c << ": " << per_class[static_cast<std::size_t>(c)]
         << " trials\n";
    }
    std::vector<std::uint32_t> ids = set.subjects;
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    os << "  subjects:";
    for (std::uint32_t id : ids) os << " " << id;
    os << "\n";
    return os.str();
  }
  if (ext == ".eegm") {
    const Model<double> model = Model<double>::load(path.string());
    const ParameterLedger led = count_parameters(model.spec());
    os << "model " << path.string() << "\n";
    os << "  " << variant_name(model.spec().variant) << " "
       << model.spec().kernels.label() << ", input " << model.spec().channels
       << " x " << model.spec().samples << ", " << model.spec().classes
       << " classes\n";
    os << "  architecture fingerprint " << model.spec().fingerprint() << "\n";
    for (const auto& [name, count] : led.items) {
      os << "  " << name << ": " << count << " parameters\n";
    }
    os << "  total: " << led.total << " parameters\n";
    return os.str();
  }
  if (ext == ".json") {
    std::ifstream is(path);
    nlohmann::json j;
    try {
      is >> j;
    } catch (const nlohmann::json::exception& e) {
      throw FormatError("inspect: not valid JSON: " + std::string(e.what()));
    }
    if (j.contains("subjects") && j.contains("rate")) {
      os << "manifest " << path.string() << "\n";
      os << "  paradigm " << j.value("paradigm", std::string("?")) << ", rate "
         << j.value("rate", 0.0) << " Hz, " << j.value("classes", std::int64_t{0})
         << " classes\n";
      os << "  " << j["subjects"].size() << " subjects\n";
      for (const auto& s : j["subjects"]) {
        os << "  subject " << s.value("id", -1) << ":";
        if (s.contains("epochs")) os << " " << s["epochs"].get<std::string>();
        if (s.contains("train")) os << " train=" << s["train"].get<std::string>();
        if (s.contains("test")) os << " test=" << s["test"].get<std::string>();
        os << "\n";
      }
      return os.str();
    }
    if (j.contains("kind") && j.contains("series")) {
      os << "bundle " << path.string() << "\n";
      os << "  kind " << j["kind"].get<std::string>() << ", dataset "
         << j.value("dataset", std::string("?")) << ", metric "
         << j.value("metric", std::string("?")) << "\n";
      os << "  fingerprint " << j.value("config_fingerprint", std::string("?"))
         << ", " << j.value("n_folds", std::int64_t{0}) << " folds\n";
      for (const auto& s : j["series"]) {
        os << "  " << s.value("label", std::string("?"));
        if (s.contains("test_mean")) {
          os << ": mean " << s["test_mean"].get<double>() << " (stderr "
             << s.value("test_stderr", 0.0) << ")";
        } else if (s.contains("k")) {
          os << ": k=" << s["k"].get<std::int64_t>() << " mean "
             << s.value("mean", 0.0);
        }
        os << "\n";
      }
      return os.str();
    }
    throw FormatError("inspect: unrecognized JSON document: " + path.string());
  }
  throw FormatError("inspect: unsupported file type: " + path.string());
}

}  // namespace eegnet
