#include <gtest/gtest.h>

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include "eegnet/rng.hpp"
#include "eegnet/stats.hpp"
#include "eegnet/synth.hpp"
#include "eegnet/tensor.hpp"

using eegnet::EpochSet;
using eegnet::synth::Paradigm;
using eegnet::RngStream;
using eegnet::synth::SyntheticSpec;
using eegnet::Tensor;

namespace {

double channel_rms(const Tensor<double>& x, std::int64_t c) {
  const std::int64_t T = x.extent(1);
  double acc = 0;
  for (std::int64_t t = 0; t < T; ++t) acc += x(c, t) * x(c, t);
  return std::sqrt(acc / static_cast<double>(T));
}

// Power at DFT bin k of a float trial row.
double bin_power(const float* row, std::int64_t T, std::int64_t k) {
  double re = 0, im = 0;
  for (std::int64_t t = 0; t < T; ++t) {
    const double ang = 2.0 * std::numbers::pi * k * t / static_cast<double>(T);
    re += row[t] * std::cos(ang);
    im -= row[t] * std::sin(ang);
  }
  return re * re + im * im;
}

double band_power(const float* row, std::int64_t T, std::int64_t k_lo,
                  std::int64_t k_hi) {
  double acc = 0;
  for (std::int64_t k = k_lo; k <= k_hi; ++k) acc += bin_power(row, T, k);
  return acc;
}

}  // namespace

TEST(PinkNoise, EveryChannelHasUnitRms) {
  RngStream rng(1);
  const Tensor<double> x = eegnet::synth::pink_noise(4, 256, rng);
  for (std::int64_t c = 0; c < 4; ++c) {
    EXPECT_NEAR(channel_rms(x, c), 1.0, 1e-9);
  }
}

TEST(PinkNoise, SpectrumFallsAsOneOverFrequency) {
  const std::int64_t T = 4096;
  RngStream rng(2);
  const Tensor<double> x = eegnet::synth::pink_noise(1, T, rng);
  std::vector<float> row(static_cast<std::size_t>(T));
  for (std::int64_t t = 0; t < T; ++t) row[static_cast<std::size_t>(t)] =
      static_cast<float>(x(0, t));
  // octave-average the periodogram, then fit log power against log frequency
  std::vector<double> logf, logp;
  for (std::int64_t k = 4; k * 2 <= T / 2; k *= 2) {
    double p = 0;
    for (std::int64_t j = k; j < 2 * k; ++j) p += bin_power(row.data(), T, j);
    p /= static_cast<double>(k);
    logf.push_back(std::log(static_cast<double>(k)));
    logp.push_back(std::log(p));
  }
  const auto n = static_cast<double>(logf.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < logf.size(); ++i) {
    sx += logf[i];
    sy += logp[i];
    sxx += logf[i] * logf[i];
    sxy += logf[i] * logp[i];
  }
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  EXPECT_NEAR(slope, -1.0, 0.2);
}

TEST(PinkNoise, IsSeedStable) {
  RngStream a(7), b(7), c(8);
  const Tensor<double> xa = eegnet::synth::pink_noise(2, 64, a);
  const Tensor<double> xb = eegnet::synth::pink_noise(2, 64, b);
  const Tensor<double> xc = eegnet::synth::pink_noise(2, 64, c);
  for (std::int64_t i = 0; i < xa.size(); ++i) EXPECT_EQ(xa[i], xb[i]);
  bool any_diff = false;
  for (std::int64_t i = 0; i < xa.size(); ++i) any_diff |= xa[i] != xc[i];
  EXPECT_TRUE(any_diff);
}

TEST(ErpTemplate, PeaksAtTheLatencyAndVanishesOutside) {
  EXPECT_EQ(eegnet::synth::erp_template(0.3, 0.3, 0.3), 1.0);
  EXPECT_EQ(eegnet::synth::erp_template(0.14, 0.3, 0.3), 0.0);
  EXPECT_EQ(eegnet::synth::erp_template(0.46, 0.3, 0.3), 0.0);
  EXPECT_NEAR(eegnet::synth::erp_template(0.3 + 0.075, 0.3, 0.3), 0.5, 1e-12);
}

TEST(ErpDataset, NoiselessTrialPeaksAtTheConfiguredLatency) {
  SyntheticSpec spec;
  spec.noise_amplitude = 0.0;
  spec.subject_gain_jitter = 0.0;
  spec.subject_latency_jitter = 0.0;
  const EpochSet set = eegnet::synth::gen_erp_dataset(spec, 4, RngStream(3));
  ASSERT_EQ(set.n_trials(), 4);
  EXPECT_EQ(set.labels, (std::vector<std::uint16_t>{0, 1, 0, 1}));
  // class 0 carries no template at zero noise
  const float* quiet = set.trial(0);
  for (std::int64_t i = 0; i < set.trial_len(); ++i) EXPECT_EQ(quiet[i], 0.0f);
  // default target block for 16 channels is 4..11; latency 0.3 s at 128 Hz
  // lands between samples, nearest is 38
  const float* active = set.trial(1);
  const std::int64_t T = set.samples;
  const float* ch4 = active + 4 * T;
  std::int64_t peak = 0;
  for (std::int64_t t = 1; t < T; ++t) {
    if (ch4[t] > ch4[peak]) peak = t;
  }
  EXPECT_EQ(peak, 38);
  EXPECT_NEAR(ch4[peak], 2.0, 0.01);  // snr 2, gain 1, template just off 1.0
  const float* ch0 = active;  // channel 0 is outside the target block
  for (std::int64_t t = 0; t < T; ++t) EXPECT_EQ(ch0[t], 0.0f);
}

TEST(ErpDataset, MeanTargetAmplitudeSeparatesTheClasses) {
  SyntheticSpec spec;
  const EpochSet set = eegnet::synth::gen_erp_dataset(spec, 300, RngStream(4));
  std::vector<double> scores;
  std::vector<int> labels;
  const std::int64_t T = set.samples;
  for (std::int64_t i = 0; i < set.n_trials(); ++i) {
    double feat = 0;
    for (std::int64_t c = 4; c < 12; ++c) {
      const float* row = set.trial(i) + c * T;
      for (std::int64_t t = 30; t < 48; ++t) feat += row[t];
    }
    scores.push_back(feat);
    labels.push_back(set.labels[static_cast<std::size_t>(i)]);
  }
  EXPECT_GT(eegnet::stats::auc(scores, labels), 0.95);
}

TEST(ErpDataset, SubjectsCycleAndJitterMovesTheLatency) {
  SyntheticSpec spec;
  spec.n_subjects = 3;
  spec.noise_amplitude = 0.0;
  spec.subject_gain_jitter = 0.0;
  spec.subject_latency_jitter = 0.03;
  const EpochSet set = eegnet::synth::gen_erp_dataset(spec, 12, RngStream(5));
  EXPECT_EQ(set.subjects,
            (std::vector<std::uint32_t>{0, 0, 1, 1, 2, 2, 0, 0, 1, 1, 2, 2}));
  const std::int64_t T = set.samples;
  const auto peak_of = [&](std::int64_t trial) {
    const float* row = set.trial(trial) + 4 * T;
    std::int64_t peak = 0;
    for (std::int64_t t = 1; t < T; ++t) {
      if (row[t] > row[peak]) peak = t;
    }
    return peak;
  };
  // same subject, same draw; different subjects may differ by a few samples
  EXPECT_EQ(peak_of(1), peak_of(7));
  std::int64_t lo = T, hi = 0;
  for (std::int64_t t : {std::int64_t{1}, std::int64_t{3}, std::int64_t{5}}) {
    lo = std::min(lo, peak_of(t));
    hi = std::max(hi, peak_of(t));
  }
  EXPECT_LE(hi - lo, 8);  // 0.03 s at 128 Hz is under 4 samples either way
}

TEST(OscillatoryDataset, SuppressesTheBandOnTheLabeledChannels) {
  SyntheticSpec spec;
  spec.paradigm = Paradigm::oscillatory;
  spec.snr = 1e6;  // depth ~ 1: the class's channels lose the band entirely
  spec.subject_gain_jitter = 0.0;
  spec.noise_amplitude = 0.1;
  const EpochSet set = eegnet::synth::gen_oscillatory_dataset(spec, 40, RngStream(6));
  const std::int64_t T = set.samples;  // 128 at 128 Hz: bin k is k Hz
  double on_group = 0, off_group = 0;
  for (std::int64_t i = 0; i < set.n_trials(); ++i) {
    const std::int64_t label = set.labels[static_cast<std::size_t>(i)];
    // default groups for 16 channels: 0..7 -> class 0, 8..15 -> class 1
    const std::int64_t own = label == 0 ? 0 : 8;
    const std::int64_t other = label == 0 ? 8 : 0;
    for (std::int64_t c = 0; c < 8; ++c) {
      on_group += band_power(set.trial(i) + (own + c) * T, T, 8, 12);
      off_group += band_power(set.trial(i) + (other + c) * T, T, 8, 12);
    }
  }
  EXPECT_LT(on_group, 0.05 * off_group);
}

TEST(OscillatoryDataset, BandPowerSeparatesTheClasses) {
  SyntheticSpec spec;
  spec.paradigm = Paradigm::oscillatory;
  const EpochSet set = eegnet::synth::gen_oscillatory_dataset(spec, 200, RngStream(7));
  const std::int64_t T = set.samples;
  std::vector<double> scores;
  std::vector<int> labels;
  for (std::int64_t i = 0; i < set.n_trials(); ++i) {
    double g0 = 0, g1 = 0;
    for (std::int64_t c = 0; c < 8; ++c) {
      g0 += band_power(set.trial(i) + c * T, T, 8, 12);
      g1 += band_power(set.trial(i) + (8 + c) * T, T, 8, 12);
    }
    scores.push_back(g1 - g0);  // class 1 suppresses group 1
    labels.push_back(set.labels[static_cast<std::size_t>(i)]);
  }
  EXPECT_LT(eegnet::stats::auc(scores, labels), 0.2);  // strongly anti-ordered
}

TEST(GenDataset, DispatchesOnParadigmAndIsSeedStable) {
  SyntheticSpec spec;
  const EpochSet a = eegnet::synth::gen_dataset(spec, 10, RngStream(8));
  const EpochSet b = eegnet::synth::gen_dataset(spec, 10, RngStream(8));
  EXPECT_EQ(a.data, b.data);
  const EpochSet c = eegnet::synth::gen_dataset(spec, 10, RngStream(9));
  EXPECT_NE(a.data, c.data);
  SyntheticSpec osc;
  osc.paradigm = Paradigm::oscillatory;
  EXPECT_THROW(eegnet::synth::gen_erp_dataset(osc, 10, RngStream(1)),
               eegnet::ValueError);
  EXPECT_THROW(eegnet::synth::gen_oscillatory_dataset(spec, 10, RngStream(1)),
               eegnet::ValueError);
}

TEST(GenDataset, ValidatesTheSpec) {
  SyntheticSpec spec;
  spec.n_classes = 3;  // erp paradigm is binary
  EXPECT_THROW(spec.validate(), eegnet::ValueError);
  spec = SyntheticSpec{};
  spec.erp_latency = 2.0;  // beyond the window
  EXPECT_THROW(spec.validate(), eegnet::ValueError);
  spec = SyntheticSpec{};
  spec.paradigm = Paradigm::oscillatory;
  spec.band_lo = 70.0;
  spec.band_hi = 80.0;  // beyond Nyquist at 128 Hz
  EXPECT_THROW(spec.validate(), eegnet::ValueError);
  spec = SyntheticSpec{};
  EXPECT_THROW(eegnet::synth::gen_dataset(spec, 0, RngStream(1)), eegnet::ValueError);
}
