#pragma once

// Mini-batch training loop: shuffled batches, cross entropy plus the elastic
// net penalty on the spatial filter weights, Adam updates, and per-epoch
// validation. The best epoch is the one with the lowest validation loss; its
// parameter snapshot rides along in the report so callers can score the test
// set on exactly that model.

#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "eegnet/adam.hpp"
#include "eegnet/epochs.hpp"
#include "eegnet/error.hpp"
#include "eegnet/model.hpp"
#include "eegnet/rng.hpp"
#include "eegnet/stats.hpp"

namespace eegnet {

enum class Metric { auc, accuracy };

inline const char* metric_name(Metric m) {
  return m == Metric::auc ? "auc" : "accuracy";
}

inline Metric metric_from_name(const std::string& s) {
  if (s == "auc") return Metric::auc;
  if (s == "accuracy") return Metric::accuracy;
  throw ValueError("unknown metric: " + s);
}

struct TrainConfig {
  std::int64_t epochs = 500;
  std::int64_t batch_size = 64;
  AdamConfig adam;
  double l1 = 1e-4;  // on the spatial filter weights only
  double l2 = 1e-4;
  Metric metric = Metric::auc;
  std::uint64_t seed = 0;

  void validate(bool has_batchnorm) const {
    if (epochs < 1) throw ValueError("train: epochs must be positive");
    if (batch_size < 1) throw ValueError("train: batch_size must be positive");
    if (has_batchnorm && batch_size < 2) {
      throw ValueError("train: batch_size must be at least 2 with batch norm");
    }
    if (l1 < 0 || l2 < 0) throw ValueError("train: negative penalty strength");
    adam.validate();
  }
};

struct EpochRecord {
  std::int64_t epoch = 0;
  double train_loss = 0;
  double val_loss = 0;
  double val_metric = 0;
};

struct TrainReport {
  std::vector<EpochRecord> history;
  std::int64_t best_epoch = -1;
  double best_val_loss = 0;
  double best_val_metric = 0;
  double final_val_loss = 0;
  double final_val_metric = 0;
  ModelState best_state;
  ModelState final_state;
};

namespace detail {

template <class Real>
Tensor<Real> gather_batch(const EpochSet& set,
                          const std::vector<std::int64_t>& order,
                          std::int64_t start, std::int64_t count,
                          std::vector<int>& labels) {
  Tensor<Real> x({count, set.channels, set.samples});
  labels.resize(static_cast<std::size_t>(count));
  const std::int64_t len = set.trial_len();
  for (std::int64_t i = 0; i < count; ++i) {
    const std::int64_t trial = order[static_cast<std::size_t>(start + i)];
    const float* src = set.trial(trial);
    Real* dst = x.data() + i * len;
    for (std::int64_t k = 0; k < len; ++k) dst[k] = static_cast<Real>(src[k]);
    labels[static_cast<std::size_t>(i)] =
        static_cast<int>(set.labels[static_cast<std::size_t>(trial)]);
  }
  return x;
}

inline void check_compatible(const EpochSet& set, const ModelSpec& spec,
                             const char* role) {
  set.validate();
  if (set.n_trials() == 0) {
    throw DataError(std::string("train: empty ") + role + " set");
  }
  if (set.channels != spec.channels || set.samples != spec.samples) {
    throw DataError(std::string("train: ") + role +
                    " set shape does not match the model");
  }
  if (set.n_classes != spec.classes) {
    throw DataError(std::string("train: ") + role +
                    " set class count does not match the model");
  }
}

}  // namespace detail

// Mean cross-entropy loss and the configured metric over a set, in inference
// mode, in fixed chunks so memory stays flat.
template <class Real>
std::pair<double, double> evaluate(Model<Real>& model, const EpochSet& set,
                                   Metric metric) {
  detail::check_compatible(set, model.spec(), "evaluation");
  if (metric == Metric::auc && model.spec().classes != 2) {
    throw MetricError("evaluate: auc needs exactly 2 classes");
  }
  const std::int64_t n = set.n_trials();
  std::vector<std::int64_t> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), std::int64_t{0});
  constexpr std::int64_t kChunk = 256;
  double loss_sum = 0;
  std::vector<double> scores;
  std::vector<int> predictions, all_labels;
  std::vector<int> labels;
  for (std::int64_t start = 0; start < n; start += kChunk) {
    const std::int64_t count = std::min(kChunk, n - start);
    Tensor<Real> x = detail::gather_batch<Real>(set, order, start, count, labels);
    const double loss = model.forward_loss(x, labels, Mode::infer);
    loss_sum += loss * static_cast<double>(count);
    const Tensor<Real>& probs = model.last_probs();
    for (std::int64_t i = 0; i < count; ++i) {
      if (metric == Metric::auc) {
        scores.push_back(static_cast<double>(probs(i, 1)));
      } else {
        int best = 0;
        for (std::int64_t c = 1; c < probs.extent(1); ++c) {
          if (probs(i, c) > probs(i, best)) best = static_cast<int>(c);
        }
        predictions.push_back(best);
      }
      all_labels.push_back(labels[static_cast<std::size_t>(i)]);
    }
  }
  const double mean_loss = loss_sum / static_cast<double>(n);
  const double metric_value = metric == Metric::auc
                                  ? stats::auc(scores, all_labels)
                                  : stats::multiclass_accuracy(predictions, all_labels);
  return {mean_loss, metric_value};
}

template <class Real>
TrainReport train(Model<Real>& model, const EpochSet& train_set,
                  const EpochSet& val_set, const TrainConfig& cfg) {
  cfg.validate(model.spec().has_batchnorm());
  detail::check_compatible(train_set, model.spec(), "training");
  detail::check_compatible(val_set, model.spec(), "validation");
  if (cfg.metric == Metric::auc && model.spec().classes != 2) {
    throw MetricError("train: auc needs exactly 2 classes");
  }

  model.set_dropout_seed(cfg.seed);
  const RngStream shuffle_base = RngStream(cfg.seed).derive("shuffle");
  auto params = model.parameters();
  AdamState<Real> opt;
  adam_init(opt, params);
  ParamRef<Real>* spatial = nullptr;
  for (auto& p : params) {
    if (p.name == Model<Real>::kSpatialWeightName) spatial = &p;
  }
  if (!spatial) throw StateError("train: model has no spatial filter weights");

  const std::int64_t n = train_set.n_trials();
  std::vector<std::int64_t> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), std::int64_t{0});

  TrainReport report;
  report.best_val_loss = std::numeric_limits<double>::infinity();
  std::int64_t gstep = 0;
  std::vector<int> labels;
  for (std::int64_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    RngStream sh = shuffle_base.derive(static_cast<std::uint64_t>(epoch));
    sh.shuffle(order);
    double loss_sum = 0;
    std::int64_t counted = 0;
    for (std::int64_t start = 0; start < n; start += cfg.batch_size) {
      const std::int64_t count = std::min(cfg.batch_size, n - start);
      // a trailing single sample cannot be batch-normalized; skip it rather
      // than fold it into a differently-sized batch
      if (count < 2 && model.spec().has_batchnorm()) continue;
      Tensor<Real> x =
          detail::gather_batch<Real>(train_set, order, start, count, labels);
      const double data_loss =
          model.forward_loss(x, labels, Mode::train, gstep);
      const double penalty =
          elastic_net_penalty(*spatial->value, cfg.l1, cfg.l2);
      model.backward();
      elastic_net_add_grad(*spatial->value, *spatial->grad, cfg.l1, cfg.l2);
      adam_step(opt, params, cfg.adam);
      loss_sum += (data_loss + penalty) * static_cast<double>(count);
      counted += count;
      ++gstep;
    }
    if (counted == 0) {
      throw DataError("train: no usable batches (training set too small)");
    }
    const auto [val_loss, val_metric] = evaluate(model, val_set, cfg.metric);
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(counted);
    rec.val_loss = val_loss;
    rec.val_metric = val_metric;
    report.history.push_back(rec);
    if (val_loss < report.best_val_loss) {
      report.best_val_loss = val_loss;
      report.best_val_metric = val_metric;
      report.best_epoch = epoch;
      report.best_state = model.snapshot();
    }
  }
  report.final_val_loss = report.history.back().val_loss;
  report.final_val_metric = report.history.back().val_metric;
  report.final_state = model.snapshot();
  return report;
}

}  // namespace eegnet
