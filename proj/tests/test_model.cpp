#include <gtest/gtest.h>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "eegnet/model.hpp"
#include "eegnet/rng.hpp"
#include "eegnet/tensor.hpp"
#include "testutil.hpp"

using eegnet::KernelConfig;
using eegnet::Mode;
using eegnet::Model;
using eegnet::ModelSpec;
using eegnet::RngStream;
using eegnet::Tensor;
using eegnet::Variant;

namespace {

ModelSpec standard_spec(Variant v = Variant::model5) {
  ModelSpec s;
  s.channels = 64;
  s.samples = 128;
  s.classes = 2;
  s.variant = v;
  return s;
}

bool has_param(Model<float>& m, const std::string& name) {
  for (auto& p : m.parameters()) {
    if (p.name == name) return true;
  }
  return false;
}

}  // namespace

TEST(ParameterCount, MatchesPublishedTotalFor64x128x2) {
  const auto led = eegnet::count_parameters(standard_spec());
  EXPECT_EQ(led.total, 2122);
  EXPECT_EQ(led.item("layer1.conv"), 16 * 64 + 16);
  EXPECT_EQ(led.item("layer1.bn"), 32);
  EXPECT_EQ(led.item("layer2.conv"), 260);
  EXPECT_EQ(led.item("layer2.bn"), 8);
  EXPECT_EQ(led.item("layer3.conv"), 516);
  EXPECT_EQ(led.item("layer3.bn"), 8);
  EXPECT_EQ(led.item("softmax"), 2 * 128 + 2);
}

TEST(ParameterCount, SweepGridHasTwelveParameterEqualConfigs) {
  const auto configs = eegnet::enumerate_configs();
  ASSERT_EQ(configs.size(), 12u);
  // layer-2 kernel is the outer index, row-major
  EXPECT_EQ(configs[0], (KernelConfig{16, 4, 8, 4}));
  EXPECT_EQ(configs[1], (KernelConfig{16, 4, 4, 8}));
  EXPECT_EQ(configs[2], (KernelConfig{16, 4, 2, 16}));
  EXPECT_EQ(configs[3], (KernelConfig{8, 8, 8, 4}));
  EXPECT_EQ(configs[11], (KernelConfig{2, 32, 2, 16}));
  EXPECT_EQ(configs[0].label(), "(16,4)x(8,4)");
  for (const auto& k : configs) {
    ModelSpec s = standard_spec();
    s.kernels = k;
    EXPECT_EQ(eegnet::count_parameters(s).total, 2122) << k.label();
  }
}

TEST(ParameterCount, FlattenWidthEqualsSampleCount) {
  for (std::int64_t t : {128, 160, 192}) {
    ModelSpec s = standard_spec();
    s.samples = t;
    EXPECT_EQ(s.flatten_dim(), t);
  }
}

TEST(ParameterCount, VariantsKeepOrDropTheRightBlocks) {
  const auto m1 = eegnet::count_parameters(standard_spec(Variant::model1));
  EXPECT_EQ(m1.item("dense"), 100 * 128 + 100);
  EXPECT_EQ(m1.item("softmax"), 2 * 100 + 2);
  EXPECT_THROW(m1.item("layer1.bn"), eegnet::ValueError);

  const auto m2 = eegnet::count_parameters(standard_spec(Variant::model2));
  EXPECT_THROW(m2.item("layer1.bn"), eegnet::ValueError);
  EXPECT_THROW(m2.item("dense"), eegnet::ValueError);

  const auto m4 = eegnet::count_parameters(standard_spec(Variant::model4));
  EXPECT_EQ(m2.total, m4.total);  // dropout adds no parameters

  const auto m3 = eegnet::count_parameters(standard_spec(Variant::model3));
  const auto m5 = eegnet::count_parameters(standard_spec(Variant::model5));
  EXPECT_EQ(m3.total, m5.total);
  EXPECT_EQ(m5.total - m4.total, 48);  // the three BN blocks
}

TEST(Model, ShapeTraceMatchesLayerPlan) {
  Model<float> m(standard_spec());
  using Row = std::pair<std::string, std::vector<std::int64_t>>;
  const std::vector<Row> want = {
      {"input", {64, 128}},          {"layer1.conv", {16, 1, 128}},
      {"layer1.transpose", {1, 16, 128}}, {"layer2.conv", {4, 16, 128}},
      {"layer2.pool", {4, 8, 32}},   {"layer3.conv", {4, 8, 32}},
      {"layer3.pool", {4, 4, 8}},    {"flatten", {128}},
      {"probs", {2}},
  };
  ASSERT_EQ(m.shape_trace().size(), want.size());
  for (std::size_t i = 0; i < want.size(); ++i) {
    EXPECT_EQ(m.shape_trace()[i].first, want[i].first) << i;
    EXPECT_EQ(m.shape_trace()[i].second, want[i].second) << want[i].first;
  }
}

TEST(Model, VariantParameterNamesMatchTheBlocks) {
  Model<float> m5(standard_spec());
  EXPECT_TRUE(has_param(m5, "layer1.conv.weight"));
  EXPECT_TRUE(has_param(m5, "layer1.bn.gamma"));
  EXPECT_FALSE(has_param(m5, "dense.weight"));
  EXPECT_EQ(std::string(eegnet::Model<float>::kSpatialWeightName), "layer1.conv.weight");

  Model<float> m1(standard_spec(Variant::model1));
  EXPECT_TRUE(has_param(m1, "dense.weight"));
  EXPECT_FALSE(has_param(m1, "layer1.bn.gamma"));
}

TEST(Model, InitialWeightsRespectGlorotBounds) {
  Model<float> m(standard_spec());
  m.init_parameters(RngStream(5));
  for (auto& p : m.parameters()) {
    if (p.name == "layer1.conv.weight") {
      const double limit = std::sqrt(6.0 / (64.0 + 16.0 * 64.0));
      double biggest = 0;
      for (std::int64_t i = 0; i < p.value->size(); ++i) {
        biggest = std::max(biggest, std::abs(static_cast<double>((*p.value)[i])));
      }
      EXPECT_LE(biggest, limit);
      EXPECT_GT(biggest, 0.8 * limit);  // 1024 draws should brush the bound
    } else if (p.name.ends_with(".bias") || p.name.ends_with(".beta")) {
      for (std::int64_t i = 0; i < p.value->size(); ++i) {
        EXPECT_EQ((*p.value)[i], 0.0f) << p.name;
      }
    } else if (p.name.ends_with(".gamma")) {
      for (std::int64_t i = 0; i < p.value->size(); ++i) {
        EXPECT_EQ((*p.value)[i], 1.0f) << p.name;
      }
    }
  }
}

TEST(Model, ProbabilityRowsFormDistributions) {
  ModelSpec spec = standard_spec();
  spec.channels = 8;
  Model<float> m(spec);
  m.init_parameters(RngStream(11));
  RngStream rng(12);
  Tensor<float> x({5, 8, 128});
  for (std::int64_t i = 0; i < x.size(); ++i) {
    x[i] = static_cast<float>(rng.uniform(-1, 1));
  }
  const Tensor<float> p = m.forward_probs(x, Mode::infer);
  ASSERT_EQ(p.shape(), (std::vector<std::int64_t>{5, 2}));
  for (std::int64_t s = 0; s < 5; ++s) {
    double sum = 0;
    for (std::int64_t c = 0; c < 2; ++c) {
      EXPECT_GE(p(s, c), 0.0f);
      EXPECT_LE(p(s, c), 1.0f);
      sum += p(s, c);
    }
    EXPECT_NEAR(sum, 1.0, 1e-6);
  }
}

TEST(Model, ForwardIsDeterministicAndDropoutIsStepKeyed) {
  ModelSpec spec = standard_spec();
  spec.channels = 8;
  RngStream rng(21);
  Tensor<float> x({4, 8, 128});
  for (std::int64_t i = 0; i < x.size(); ++i) {
    x[i] = static_cast<float>(rng.uniform(-1, 1));
  }
  const std::vector<int> labels = {0, 1, 0, 1};

  const auto loss_at = [&](std::uint64_t seed, std::int64_t step) {
    Model<float> m(spec);
    m.init_parameters(RngStream(77));
    m.set_dropout_seed(seed);
    return m.forward_loss(x, labels, Mode::train, step);
  };
  EXPECT_EQ(loss_at(1, 0), loss_at(1, 0));
  EXPECT_NE(loss_at(1, 0), loss_at(1, 1));  // fresh mask per step
  EXPECT_NE(loss_at(1, 0), loss_at(2, 0));  // and per seed
  // inference ignores the dropout stream entirely
  Model<float> a(spec), b(spec);
  a.init_parameters(RngStream(77));
  b.init_parameters(RngStream(77));
  a.set_dropout_seed(1);
  b.set_dropout_seed(2);
  const Tensor<float> pa = a.forward_probs(x, Mode::infer);
  const Tensor<float> pb = b.forward_probs(x, Mode::infer);
  for (std::int64_t i = 0; i < pa.size(); ++i) EXPECT_EQ(pa[i], pb[i]);
}

TEST(Model, TrainModeUpdatesRunningStatsAndInferDoesNot) {
  ModelSpec spec = standard_spec();
  spec.channels = 4;
  Model<float> m(spec);
  m.init_parameters(RngStream(31));
  RngStream rng(32);
  Tensor<float> x({4, 4, 128});
  for (std::int64_t i = 0; i < x.size(); ++i) {
    x[i] = static_cast<float>(rng.uniform(-1, 1));
  }
  const auto stats_of = [&] {
    std::vector<double> out;
    for (const auto& [name, t] : m.snapshot()) {
      if (name.find("running_") != std::string::npos) {
        for (std::int64_t i = 0; i < t.size(); ++i) out.push_back(t[i]);
      }
    }
    return out;
  };
  const auto before = stats_of();
  ASSERT_FALSE(before.empty());
  m.forward_probs(x, Mode::infer);
  EXPECT_EQ(stats_of(), before);
  m.forward_loss(x, {0, 1, 0, 1}, Mode::train, 0);
  EXPECT_NE(stats_of(), before);
}

TEST(Model, SnapshotRestoreRoundTripIsExact) {
  ModelSpec spec = standard_spec();
  spec.channels = 8;
  Model<float> m(spec);
  m.init_parameters(RngStream(41));
  RngStream rng(42);
  Tensor<float> x({3, 8, 128});
  for (std::int64_t i = 0; i < x.size(); ++i) {
    x[i] = static_cast<float>(rng.uniform(-1, 1));
  }
  m.forward_loss(x, {0, 1, 1}, Mode::train, 0);  // move the running stats
  const auto state = m.snapshot();
  const Tensor<float> before = m.forward_probs(x, Mode::infer);
  for (auto& p : m.parameters()) {
    for (std::int64_t i = 0; i < p.value->size(); ++i) (*p.value)[i] += 0.25f;
  }
  m.restore(state);
  const Tensor<float> after = m.forward_probs(x, Mode::infer);
  for (std::int64_t i = 0; i < before.size(); ++i) {
    EXPECT_EQ(before[i], after[i]);
  }
}

TEST(Model, SaveLoadRoundTripPreservesSpecAndOutputs) {
  ModelSpec spec = standard_spec();
  spec.channels = 8;
  spec.kernels = KernelConfig{4, 16, 2, 16};
  Model<float> m(spec);
  m.init_parameters(RngStream(51));
  RngStream rng(52);
  Tensor<float> x({3, 8, 128});
  for (std::int64_t i = 0; i < x.size(); ++i) {
    x[i] = static_cast<float>(rng.uniform(-1, 1));
  }
  m.forward_loss(x, {0, 1, 1}, Mode::train, 0);
  const Tensor<float> before = m.forward_probs(x, Mode::infer);

  const std::string path = ::testing::TempDir() + "roundtrip.eegm";
  m.save(path);
  Model<float> loaded = Model<float>::load(path);
  EXPECT_EQ(loaded.spec().kernels, spec.kernels);
  EXPECT_EQ(loaded.spec().variant, spec.variant);
  const Tensor<float> after = loaded.forward_probs(x, Mode::infer);
  ASSERT_EQ(after.size(), before.size());
  for (std::int64_t i = 0; i < before.size(); ++i) {
    EXPECT_EQ(before[i], after[i]);
  }
  std::remove(path.c_str());
}

TEST(Model, RejectsBadInputsAndNonFiniteLoss) {
  ModelSpec spec = standard_spec();
  spec.channels = 8;
  Model<float> m(spec);
  m.init_parameters(RngStream(61));
  Tensor<float> wrong({2, 7, 128});
  EXPECT_THROW(m.forward_probs(wrong, Mode::infer), eegnet::ShapeError);

  Tensor<float> x({2, 8, 128}, 0.1f);
  EXPECT_THROW(m.forward_loss(x, {0}, Mode::infer), eegnet::ShapeError);

  for (auto& p : m.parameters()) {
    if (p.name == "softmax.weight") {
      (*p.value)[0] = std::numeric_limits<float>::quiet_NaN();
    }
  }
  EXPECT_THROW(m.forward_loss(x, {0, 1}, Mode::infer), eegnet::NumericError);
}

TEST(Model, SpecValidationCatchesBadGeometry) {
  ModelSpec s = standard_spec();
  s.samples = 100;  // not a multiple of 16
  EXPECT_THROW(s.validate(), eegnet::ValueError);
  s = standard_spec();
  s.classes = 1;
  EXPECT_THROW(s.validate(), eegnet::ValueError);
  s = standard_spec();
  s.dropout_p = 1.0;
  EXPECT_THROW(s.validate(), eegnet::ValueError);
  s = standard_spec();
  s.channels = 0;
  EXPECT_THROW(s.validate(), eegnet::ValueError);
}

TEST(Model, SpecJsonRoundTripKeepsFingerprint) {
  ModelSpec s = standard_spec();
  s.channels = 32;
  s.kernels = KernelConfig{8, 8, 4, 8};
  s.variant = Variant::model3;
  const ModelSpec back = ModelSpec::from_json(s.to_json());
  EXPECT_EQ(back.fingerprint(), s.fingerprint());
  EXPECT_EQ(back.kernels, s.kernels);
  ModelSpec other = s;
  other.kernels = KernelConfig{8, 8, 8, 4};
  EXPECT_NE(other.fingerprint(), s.fingerprint());
}
