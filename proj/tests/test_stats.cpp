#include <gtest/gtest.h>

#include <cmath>
#include <cstdint>
#include <vector>

#include "eegnet/epochs.hpp"
#include "eegnet/rng.hpp"
#include "eegnet/stats.hpp"

using eegnet::EpochSet;
using eegnet::RngStream;
namespace stats = eegnet::stats;

namespace {

// O(n^2) pair counting, the textbook AUC definition.
double auc_brute(const std::vector<double>& s, const std::vector<int>& y) {
  double wins = 0, pairs = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (y[i] != 1 || y[j] != 0) continue;
      pairs += 1;
      if (s[i] > s[j]) wins += 1;
      else if (s[i] == s[j]) wins += 0.5;
    }
  }
  return wins / pairs;
}

EpochSet tiny_train_set(std::int64_t n) {
  EpochSet set;
  set.channels = 1;
  set.samples = 16;
  set.n_classes = 2;
  set.rate = 128;
  set.window_end = 16.0 / 128.0;
  for (std::int64_t i = 0; i < n; ++i) {
    for (std::int64_t k = 0; k < set.trial_len(); ++k) {
      set.data.push_back(static_cast<float>(i));
    }
    set.labels.push_back(static_cast<std::uint16_t>(i % 2));
    set.subjects.push_back(0);
  }
  return set;
}

}  // namespace

TEST(Auc, MatchesFrozenExample) {
  EXPECT_DOUBLE_EQ(stats::auc({0.1, 0.4, 0.35, 0.8}, {0, 0, 1, 1}), 0.75);
  EXPECT_DOUBLE_EQ(stats::auc({0.1, 0.2, 0.8, 0.9}, {0, 0, 1, 1}), 1.0);
  EXPECT_DOUBLE_EQ(stats::auc({0.9, 0.8, 0.2, 0.1}, {0, 0, 1, 1}), 0.0);
  EXPECT_DOUBLE_EQ(stats::auc({0.5, 0.5, 0.5, 0.5}, {0, 1, 0, 1}), 0.5);
}

TEST(Auc, AgreesWithPairCountingOnRandomInputs) {
  RngStream rng(12);
  for (int trial = 0; trial < 50; ++trial) {
    const std::int64_t n = 2 + rng.uniform_int(40);
    std::vector<double> s;
    std::vector<int> y;
    for (std::int64_t i = 0; i < n; ++i) {
      // quantized scores so ties actually happen
      s.push_back(rng.uniform_int(8) / 4.0);
      y.push_back(static_cast<int>(rng.uniform_int(2)));
    }
    y[0] = 0;  // guarantee both classes
    y[static_cast<std::size_t>(n - 1)] = 1;
    EXPECT_NEAR(stats::auc(s, y), auc_brute(s, y), 1e-12);
  }
}

TEST(Auc, RejectsDegenerateInputs) {
  EXPECT_THROW(stats::auc({0.1, 0.2}, {1, 1}), eegnet::MetricError);
  EXPECT_THROW(stats::auc({0.1, 0.2}, {0, 2}), eegnet::MetricError);
  EXPECT_THROW(stats::auc({0.1}, {0, 1}), eegnet::MetricError);
  EXPECT_THROW(stats::auc({}, {}), eegnet::MetricError);
}

TEST(Accuracy, CountsExactMatches) {
  EXPECT_DOUBLE_EQ(stats::multiclass_accuracy({0, 1, 2, 1}, {0, 1, 1, 1}),
                   0.75);
  EXPECT_DOUBLE_EQ(stats::multiclass_accuracy({3, 3}, {3, 3}), 1.0);
  EXPECT_THROW(stats::multiclass_accuracy({0}, {0, 1}), eegnet::MetricError);
}

TEST(Summarize, MatchesHandComputedMeanAndStderr) {
  const auto s = stats::summarize({1.0, 2.0, 3.0});
  EXPECT_EQ(s.n, 3);
  EXPECT_DOUBLE_EQ(s.mean, 2.0);
  EXPECT_NEAR(s.stderr_value, 0.57735026918962584, 1e-15);
  const auto single = stats::summarize({4.2});
  EXPECT_EQ(single.n, 1);
  EXPECT_EQ(single.stderr_value, 0.0);
  EXPECT_THROW(stats::summarize({}), eegnet::MetricError);
}

TEST(SignRank, ExactSmallSampleMatchesEnumeration) {
  const auto r = stats::signrank_test({1.0, 2.0, 3.0}, {0.0, 0.0, 0.0});
  EXPECT_TRUE(r.exact);
  EXPECT_EQ(r.n, 3);
  EXPECT_DOUBLE_EQ(r.w_plus, 6.0);
  EXPECT_DOUBLE_EQ(r.p, 0.25);  // 2 * P(W >= 6) = 2/8
}

TEST(SignRank, TenConsistentDifferencesGiveTwoOverTwoToTheTen) {
  std::vector<double> a, b;
  for (int i = 1; i <= 10; ++i) {
    a.push_back(static_cast<double>(i));
    b.push_back(static_cast<double>(i) - 1.0 - 0.01 * i);  // distinct |d|
  }
  const auto r = stats::signrank_test(a, b);
  EXPECT_TRUE(r.exact);
  EXPECT_EQ(r.n, 10);
  EXPECT_DOUBLE_EQ(r.w_plus, 55.0);
  EXPECT_DOUBLE_EQ(r.p, 2.0 / 1024.0);
}

TEST(SignRank, DropsZeroDifferencesAndFlagsDegenerateInput) {
  const auto r = stats::signrank_test({1.0, 5.0, 2.0}, {1.0, 3.0, 1.0});
  EXPECT_EQ(r.n, 2);
  EXPECT_THROW(stats::signrank_test({1.0, 2.0}, {1.0, 2.0}),
               eegnet::MetricError);
  EXPECT_THROW(stats::signrank_test({1.0}, {1.0, 2.0}), eegnet::MetricError);
}

TEST(SignRank, LargeSampleUsesNormalApproximation) {
  // n = 40 with a real shift: p must be small but not exact
  std::vector<double> a, b;
  RngStream rng(3);
  for (int i = 0; i < 40; ++i) {
    const double base = rng.uniform(0, 1);
    a.push_back(base + 0.5 + 0.1 * rng.uniform01());
    b.push_back(base);
  }
  const auto r = stats::signrank_test(a, b);
  EXPECT_FALSE(r.exact);
  EXPECT_LT(r.p, 1e-5);
  // symmetric differences: p should be near 1
  std::vector<double> c, d;
  for (int i = 0; i < 40; ++i) {
    c.push_back(i % 2 == 0 ? 1.0 + 0.001 * i : -1.0 - 0.001 * i);
    d.push_back(0.0);
  }
  const auto sym = stats::signrank_test(c, d);
  EXPECT_FALSE(sym.exact);
  EXPECT_GT(sym.p, 0.5);
}

TEST(Fdr, StepUpRejectsBelowTheSortedThresholds) {
  // thresholds at q = 0.05, m = 4: .0125, .025, .0375, .05
  const auto r = stats::fdr_correct({0.01, 0.04, 0.03, 0.2}, 0.05);
  EXPECT_EQ(r.n_rejected, 1);
  EXPECT_TRUE(r.rejected[0]);
  EXPECT_FALSE(r.rejected[1]);
  EXPECT_FALSE(r.rejected[2]);
  EXPECT_FALSE(r.rejected[3]);
  // the same list clears three thresholds at q = 0.1
  const auto loose = stats::fdr_correct({0.01, 0.04, 0.03, 0.2}, 0.1);
  EXPECT_EQ(loose.n_rejected, 3);
  EXPECT_FALSE(loose.rejected[3]);
  // a list that does pass three thresholds at q = 0.05
  const auto three = stats::fdr_correct({0.01, 0.02, 0.03, 0.2}, 0.05);
  EXPECT_EQ(three.n_rejected, 3);
  EXPECT_TRUE(three.rejected[0]);
  EXPECT_TRUE(three.rejected[1]);
  EXPECT_TRUE(three.rejected[2]);
  EXPECT_FALSE(three.rejected[3]);
}

TEST(Fdr, StepUpRescuesSmallerPValuesAboveTheirOwnThreshold) {
  // p_(2) = 0.04 > 2q/m = 0.033 but p_(3) = 0.045 <= 3q/m: all three reject
  const auto r = stats::fdr_correct({0.04, 0.01, 0.045}, 0.05);
  EXPECT_EQ(r.n_rejected, 3);
}

TEST(Fdr, AdjustedValuesAreMonotoneMinima) {
  const auto r = stats::fdr_correct({0.01, 0.04, 0.03, 0.2}, 0.05);
  // adjusted = running min of p*m/i from the top: .04, .0533.., .0533.., .2
  EXPECT_NEAR(r.adjusted[0], 0.04, 1e-12);
  EXPECT_NEAR(r.adjusted[1], 0.04 * 4 / 3.0, 1e-12);
  EXPECT_NEAR(r.adjusted[2], 0.04 * 4 / 3.0, 1e-12);
  EXPECT_NEAR(r.adjusted[3], 0.2, 1e-12);
  for (std::size_t i = 0; i < r.adjusted.size(); ++i) {
    EXPECT_EQ(r.rejected[i], r.adjusted[i] <= 0.05);
  }
}

TEST(Fdr, DependentVariantScalesByTheHarmonicNumber) {
  // H_4 = 25/12; the dependent thresholds shrink by that factor
  const auto indep = stats::fdr_correct({0.012, 0.5, 0.6, 0.7}, 0.05);
  EXPECT_EQ(indep.n_rejected, 1);
  const auto dep = stats::fdr_correct({0.012, 0.5, 0.6, 0.7}, 0.05, true);
  EXPECT_EQ(dep.n_rejected, 0);  // 0.012 > 0.0125 * 12/25 = 0.006
  const auto dep2 = stats::fdr_correct({0.005, 0.5, 0.6, 0.7}, 0.05, true);
  EXPECT_EQ(dep2.n_rejected, 1);
  EXPECT_NEAR(dep2.adjusted[0], 0.005 * 4.0 * (25.0 / 12.0), 1e-12);
}

TEST(Fdr, ValidatesInputs) {
  EXPECT_THROW(stats::fdr_correct({}, 0.05), eegnet::ValueError);
  EXPECT_THROW(stats::fdr_correct({0.5}, 0.0), eegnet::ValueError);
  EXPECT_THROW(stats::fdr_correct({0.5}, 1.0), eegnet::ValueError);
  EXPECT_THROW(stats::fdr_correct({1.5}, 0.05), eegnet::ValueError);
  EXPECT_THROW(stats::fdr_correct({-0.1}, 0.05), eegnet::ValueError);
}

TEST(RankModels, RanksPerDatasetWithAverageTies) {
  // 3 models x 2 datasets
  const auto ranks = stats::rank_models({{0.9, 0.5}, {0.8, 0.5}, {0.7, 0.9}});
  EXPECT_DOUBLE_EQ(ranks[0][0], 1.0);
  EXPECT_DOUBLE_EQ(ranks[1][0], 2.0);
  EXPECT_DOUBLE_EQ(ranks[2][0], 3.0);
  EXPECT_DOUBLE_EQ(ranks[0][1], 2.5);  // tie splits ranks 2 and 3
  EXPECT_DOUBLE_EQ(ranks[1][1], 2.5);
  EXPECT_DOUBLE_EQ(ranks[2][1], 1.0);
  EXPECT_THROW(stats::rank_models({}), eegnet::MetricError);
  EXPECT_THROW(stats::rank_models({{0.1}, {0.1, 0.2}}), eegnet::ValueError);
}

TEST(RankModels, RankMeanOverModelsIsFixed) {
  RngStream rng(5);
  std::vector<std::vector<double>> scores(6, std::vector<double>(4));
  for (auto& row : scores) {
    for (auto& v : row) v = rng.uniform01();
  }
  const auto ranks = stats::rank_models(scores);
  for (std::size_t d = 0; d < 4; ++d) {
    double sum = 0;
    for (std::size_t m = 0; m < 6; ++m) sum += ranks[m][d];
    EXPECT_NEAR(sum, 21.0, 1e-12);  // 1 + ... + 6
  }
}

TEST(LearningCurve, ConstantRunnerGivesFlatCurveWithZeroSpread) {
  const EpochSet train = tiny_train_set(40);
  const EpochSet val = tiny_train_set(4);
  const EpochSet test = tiny_train_set(4);
  const auto runner = [](const EpochSet& sub, const EpochSet&, const EpochSet&,
                         std::uint64_t) {
    EXPECT_GT(sub.n_trials(), 0);
    return 0.8;
  };
  const auto curve =
      stats::learning_curve(runner, train, val, test, {10, 20, 40}, 5,
                            RngStream(11));
  ASSERT_EQ(curve.size(), 3u);
  for (const auto& pt : curve) {
    EXPECT_EQ(pt.scores.size(), 5u);
    EXPECT_DOUBLE_EQ(pt.summary.mean, 0.8);
    EXPECT_EQ(pt.summary.stderr_value, 0.0);
  }
  EXPECT_EQ(curve[0].k, 10);
  EXPECT_EQ(curve[2].k, 40);
}

TEST(LearningCurve, PassesSubsetsOfTheRequestedSizeAndDistinctSeeds) {
  const EpochSet train = tiny_train_set(30);
  const EpochSet val = tiny_train_set(4);
  const EpochSet test = tiny_train_set(4);
  std::vector<std::int64_t> sizes;
  std::vector<std::uint64_t> seeds;
  const auto runner = [&](const EpochSet& sub, const EpochSet&,
                          const EpochSet&, std::uint64_t seed) {
    sizes.push_back(sub.n_trials());
    seeds.push_back(seed);
    return static_cast<double>(sub.n_trials());
  };
  const auto curve = stats::learning_curve(runner, train, val, test, {5, 15},
                                           3, RngStream(13));
  EXPECT_EQ(sizes, (std::vector<std::int64_t>{5, 5, 5, 15, 15, 15}));
  std::sort(seeds.begin(), seeds.end());
  EXPECT_EQ(std::adjacent_find(seeds.begin(), seeds.end()), seeds.end());
  EXPECT_DOUBLE_EQ(curve[1].summary.mean, 15.0);
  // same master stream, same draws
  sizes.clear();
  const auto again = stats::learning_curve(runner, train, val, test, {5, 15},
                                           3, RngStream(13));
  EXPECT_EQ(again[0].scores, curve[0].scores);
}

TEST(LearningCurve, ValidatesSizesRepsAndRunner) {
  const EpochSet train = tiny_train_set(20);
  const auto runner = [](const EpochSet&, const EpochSet&, const EpochSet&,
                         std::uint64_t) { return 0.5; };
  EXPECT_THROW(stats::learning_curve(runner, train, train, train, {}, 3,
                                     RngStream(1)),
               eegnet::ValueError);
  EXPECT_THROW(stats::learning_curve(runner, train, train, train, {10, 10}, 3,
                                     RngStream(1)),
               eegnet::ValueError);
  EXPECT_THROW(stats::learning_curve(runner, train, train, train, {10, 21}, 3,
                                     RngStream(1)),
               eegnet::ValueError);
  EXPECT_THROW(stats::learning_curve(runner, train, train, train, {10}, 0,
                                     RngStream(1)),
               eegnet::ValueError);
  EXPECT_THROW(stats::learning_curve(stats::CurveRunner{}, train, train, train,
                                     {10}, 1, RngStream(1)),
               eegnet::ValueError);
}
