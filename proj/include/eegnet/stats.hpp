#pragma once

// Evaluation metrics and the comparison machinery: rank-based AUC, paired
// sign-rank tests (exact for small n, normal approximation with tie and
// continuity corrections otherwise), step-up false-discovery-rate control,
// per-dataset model ranking, and the learning-curve driver.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <vector>

#include "eegnet/epochs.hpp"
#include "eegnet/error.hpp"
#include "eegnet/rng.hpp"

namespace eegnet::stats {

// Average ranks (1-based) of v in ascending order; ties share the mean of
// the ranks they span.
inline std::vector<double> average_ranks(const std::vector<double>& v) {
  const std::size_t n = v.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&v](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(n, 0.0);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
    const double shared = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = shared;
    i = j + 1;
  }
  return ranks;
}

// Probability that a random positive outscores a random negative, with ties
// counted half. Rank-based, O(n log n).
inline double auc(const std::vector<double>& scores,
                  const std::vector<int>& labels) {
  if (scores.size() != labels.size()) {
    throw MetricError("auc: score/label count mismatch");
  }
  if (scores.empty()) throw MetricError("auc: empty input");
  std::int64_t n_pos = 0, n_neg = 0;
  for (int lab : labels) {
    if (lab == 1) ++n_pos;
    else if (lab == 0) ++n_neg;
    else throw MetricError("auc: labels must be 0 or 1");
  }
  if (n_pos == 0 || n_neg == 0) {
    throw MetricError("auc: needs both classes present");
  }
  const std::vector<double> ranks = average_ranks(scores);
  double rank_sum = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == 1) rank_sum += ranks[i];
  }
  const double np = static_cast<double>(n_pos);
  return (rank_sum - np * (np + 1.0) / 2.0) /
         (np * static_cast<double>(n_neg));
}

inline double multiclass_accuracy(const std::vector<int>& predictions,
                                  const std::vector<int>& labels) {
  if (predictions.size() != labels.size()) {
    throw MetricError("accuracy: prediction/label count mismatch");
  }
  if (predictions.empty()) throw MetricError("accuracy: empty input");
  std::int64_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (predictions[i] == labels[i]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

struct MetricSummary {
  std::int64_t n = 0;
  double mean = 0;
  double stderr_value = 0;  // sample std over sqrt(n); 0 when n == 1
};

inline MetricSummary summarize(const std::vector<double>& v) {
  if (v.empty()) throw MetricError("summarize: empty input");
  MetricSummary s;
  s.n = static_cast<std::int64_t>(v.size());
  double sum = 0;
  for (double x : v) sum += x;
  s.mean = sum / static_cast<double>(s.n);
  if (s.n > 1) {
    double sq = 0;
    for (double x : v) sq += (x - s.mean) * (x - s.mean);
    s.stderr_value = std::sqrt(sq / static_cast<double>(s.n - 1)) /
                     std::sqrt(static_cast<double>(s.n));
  }
  return s;
}

struct SignRankResult {
  double w_plus = 0;       // sum of ranks of positive differences
  double p = 1;            // two-tailed
  std::int64_t n = 0;      // pairs remaining after dropping zero differences
  bool exact = false;
};

// Wilcoxon signed-rank on paired samples. Zero differences are dropped; |d|
// ties share average ranks. n <= 12 enumerates all sign assignments for an
// exact two-tailed p; larger n uses the normal approximation with the tie
// correction sum(t^3 - t)/48 and a 0.5 continuity correction.
inline SignRankResult signrank_test(const std::vector<double>& a,
                                    const std::vector<double>& b) {
  if (a.size() != b.size()) throw MetricError("signrank: length mismatch");
  if (a.empty()) throw MetricError("signrank: empty input");
  std::vector<double> d;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double diff = a[i] - b[i];
    if (diff != 0.0) d.push_back(diff);
  }
  if (d.empty()) {
    throw MetricError("signrank: all differences are zero, test is degenerate");
  }
  const std::size_t n = d.size();
  std::vector<double> mags(n);
  for (std::size_t i = 0; i < n; ++i) mags[i] = std::abs(d[i]);
  const std::vector<double> ranks = average_ranks(mags);
  double w_plus = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (d[i] > 0) w_plus += ranks[i];
  }
  SignRankResult res;
  res.w_plus = w_plus;
  res.n = static_cast<std::int64_t>(n);
  if (n <= 12) {
    res.exact = true;
    const std::uint64_t total = 1ull << n;
    std::uint64_t count_le = 0, count_ge = 0;
    for (std::uint64_t mask = 0; mask < total; ++mask) {
      double w = 0;
      for (std::size_t i = 0; i < n; ++i) {
        if (mask & (1ull << i)) w += ranks[i];
      }
      if (w <= w_plus + 1e-9) ++count_le;
      if (w >= w_plus - 1e-9) ++count_ge;
    }
    const double p_le = static_cast<double>(count_le) / static_cast<double>(total);
    const double p_ge = static_cast<double>(count_ge) / static_cast<double>(total);
    res.p = std::min(1.0, 2.0 * std::min(p_le, p_ge));
  } else {
    res.exact = false;
    const double nn = static_cast<double>(n);
    const double mu = nn * (nn + 1.0) / 4.0;
    double tie_sum = 0;
    {
      std::vector<double> sorted = mags;
      std::sort(sorted.begin(), sorted.end());
      std::size_t i = 0;
      while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && sorted[j + 1] == sorted[i]) ++j;
        const double t = static_cast<double>(j - i + 1);
        tie_sum += t * t * t - t;
        i = j + 1;
      }
    }
    const double var = nn * (nn + 1.0) * (2.0 * nn + 1.0) / 24.0 - tie_sum / 48.0;
    if (var <= 0) throw MetricError("signrank: zero variance");
    double delta = w_plus - mu;
    if (delta > 0.5) delta -= 0.5;      // continuity correction toward the mean
    else if (delta < -0.5) delta += 0.5;
    else delta = 0.0;
    const double z = delta / std::sqrt(var);
    res.p = std::erfc(std::abs(z) / std::sqrt(2.0));
  }
  return res;
}

struct FdrResult {
  std::vector<bool> rejected;
  std::vector<double> adjusted;
  std::int64_t n_rejected = 0;
};

// Step-up false-discovery-rate control. Sorted p-values are compared against
// i * q / m (scaled down by the harmonic number H_m when `dependent` asks for
// the variant that is valid under arbitrary dependence); the largest i that
// passes fixes the rejection set. Adjusted values are the running minima of
// p_(i) * m / i from the largest p downward.
inline FdrResult fdr_correct(const std::vector<double>& p, double q,
                             bool dependent = false) {
  if (p.empty()) throw ValueError("fdr: empty p-value list");
  if (!(q > 0.0 && q < 1.0)) throw ValueError("fdr: q must be in (0, 1)");
  for (double v : p) {
    if (!(v >= 0.0 && v <= 1.0)) throw ValueError("fdr: p-values must be in [0, 1]");
  }
  const std::size_t m = p.size();
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&p](std::size_t a, std::size_t b) {
    return p[a] != p[b] ? p[a] < p[b] : a < b;
  });
  double scale = 1.0;
  if (dependent) {
    scale = 0;
    for (std::size_t i = 1; i <= m; ++i) scale += 1.0 / static_cast<double>(i);
  }
  std::int64_t last_pass = -1;
  for (std::size_t i = 0; i < m; ++i) {
    const double threshold = static_cast<double>(i + 1) * q /
                             (static_cast<double>(m) * scale);
    if (p[order[i]] <= threshold) last_pass = static_cast<std::int64_t>(i);
  }
  FdrResult res;
  res.rejected.assign(m, false);
  res.adjusted.assign(m, 1.0);
  for (std::int64_t i = 0; i <= last_pass; ++i) {
    res.rejected[order[static_cast<std::size_t>(i)]] = true;
  }
  res.n_rejected = last_pass + 1;
  double running = 1.0;
  for (std::size_t ri = m; ri-- > 0;) {
    const double raw = p[order[ri]] * static_cast<double>(m) * scale /
                       static_cast<double>(ri + 1);
    running = std::min(running, std::min(raw, 1.0));
    res.adjusted[order[ri]] = running;
  }
  return res;
}

// scores[model][dataset] -> ranks of the same shape, computed per dataset
// with rank 1 for the highest score and average ranks on ties.
inline std::vector<std::vector<double>> rank_models(
    const std::vector<std::vector<double>>& scores) {
  if (scores.empty() || scores[0].empty()) {
    throw MetricError("rank_models: empty score table");
  }
  const std::size_t n_models = scores.size();
  const std::size_t n_datasets = scores[0].size();
  for (const auto& row : scores) {
    if (row.size() != n_datasets) {
      throw ValueError("rank_models: ragged score table");
    }
  }
  std::vector<std::vector<double>> ranks(n_models,
                                         std::vector<double>(n_datasets, 0.0));
  for (std::size_t d = 0; d < n_datasets; ++d) {
    std::vector<double> negated(n_models);
    for (std::size_t mdl = 0; mdl < n_models; ++mdl) {
      negated[mdl] = -scores[mdl][d];
    }
    const std::vector<double> r = average_ranks(negated);
    for (std::size_t mdl = 0; mdl < n_models; ++mdl) ranks[mdl][d] = r[mdl];
  }
  return ranks;
}

// ---- learning curve --------------------------------------------------------

struct LearningCurvePoint {
  std::int64_t k = 0;
  MetricSummary summary;
  std::vector<double> scores;
};

// Trains on a fresh uniform subsample of full_train and returns the score on
// the held-out test set. The runner owns the model and training details.
using CurveRunner = std::function<double(const EpochSet& train_subset,
                                         const EpochSet& val,
                                         const EpochSet& test,
                                         std::uint64_t seed)>;

inline std::vector<LearningCurvePoint> learning_curve(
    const CurveRunner& runner, const EpochSet& full_train, const EpochSet& val,
    const EpochSet& test, const std::vector<std::int64_t>& ks,
    std::int64_t reps, const RngStream& rng) {
  if (!runner) throw ValueError("learning_curve: no runner");
  if (ks.empty()) throw ValueError("learning_curve: no training sizes");
  if (reps < 1) throw ValueError("learning_curve: reps must be positive");
  for (std::size_t i = 0; i < ks.size(); ++i) {
    if (ks[i] < 1 || ks[i] > full_train.n_trials()) {
      throw ValueError("learning_curve: size " + std::to_string(ks[i]) +
                       " outside [1, n_trials]");
    }
    if (i > 0 && ks[i] <= ks[i - 1]) {
      throw ValueError("learning_curve: sizes must be strictly increasing");
    }
  }
  std::vector<LearningCurvePoint> out;
  for (std::int64_t k : ks) {
    LearningCurvePoint point;
    point.k = k;
    for (std::int64_t rep = 0; rep < reps; ++rep) {
      RngStream cell = rng.derive("curve")
                           .derive(static_cast<std::uint64_t>(k))
                           .derive(static_cast<std::uint64_t>(rep));
      const EpochSet subset =
          subsample_training(full_train, k, cell.derive("subsample"));
      point.scores.push_back(
          runner(subset, val, test, cell.derive("train").seed()));
    }
    point.summary = summarize(point.scores);
    out.push_back(std::move(point));
  }
  return out;
}

}  // namespace eegnet::stats
