#pragma once

// Network description and assembly. A ModelSpec pins everything that defines
// the architecture; build() turns it into a ComputeGraph with named parameter
// nodes. The canonical four-layer stack is:
//
//   spatial filter bank -> BN -> ELU -> transpose -> dropout
//   conv2d same (h2 x w2) -> BN -> ELU -> maxpool (2, 4) -> dropout
//   conv2d same (h3 x w3) -> BN -> ELU -> maxpool (2, 4) -> dropout
//   flatten -> softmax regression
//
// Variants toggle batch norm, dropout, and an extra 100-unit dense layer.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "eegnet/binio.hpp"
#include "eegnet/error.hpp"
#include "eegnet/graph.hpp"
#include "eegnet/rng.hpp"
#include "eegnet/tensor.hpp"

namespace eegnet {

struct KernelConfig {
  std::int64_t layer2_h = 2, layer2_w = 32;
  std::int64_t layer3_h = 8, layer3_w = 4;

  std::string label() const {
    std::ostringstream os;
    os << '(' << layer2_h << ',' << layer2_w << ")x(" << layer3_h << ','
       << layer3_w << ')';
    return os.str();
  }

  bool operator==(const KernelConfig&) const = default;
};

// The sweep grid: layer-2 kernels hold h*w = 64, layer-3 kernels hold
// h*w = 32. Row-major with the layer-2 kernel as the outer index.
inline std::vector<KernelConfig> enumerate_configs() {
  static const std::pair<std::int64_t, std::int64_t> l2[] = {
      {16, 4}, {8, 8}, {4, 16}, {2, 32}};
  static const std::pair<std::int64_t, std::int64_t> l3[] = {
      {8, 4}, {4, 8}, {2, 16}};
  std::vector<KernelConfig> out;
  for (const auto& a : l2) {
    for (const auto& b : l3) {
      out.push_back(KernelConfig{a.first, a.second, b.first, b.second});
    }
  }
  return out;
}

// model5 is the full architecture. The others strip it down:
//   model1: no BN, no dropout, 100-unit ELU dense layer before the softmax
//   model2: no BN, no dropout
//   model3: BN only
//   model4: dropout only
enum class Variant { model1, model2, model3, model4, model5 };

inline const char* variant_name(Variant v) {
  switch (v) {
    case Variant::model1: return "model1";
    case Variant::model2: return "model2";
    case Variant::model3: return "model3";
    case Variant::model4: return "model4";
    case Variant::model5: return "model5";
  }
  throw ValueError("unknown variant");
}

inline Variant variant_from_name(const std::string& s) {
  for (Variant v : {Variant::model1, Variant::model2, Variant::model3,
                    Variant::model4, Variant::model5}) {
    if (s == variant_name(v)) return v;
  }
  throw ValueError("unknown variant name: " + s);
}

struct ModelSpec {
  std::int64_t channels = 0;
  std::int64_t samples = 0;
  std::int64_t classes = 0;
  KernelConfig kernels;
  Variant variant = Variant::model5;
  std::int64_t layer1_filters = 16;
  std::int64_t layer2_filters = 4;
  std::int64_t layer3_filters = 4;
  std::int64_t dense_units = 100;
  double dropout_p = 0.25;
  double elu_alpha = 1.0;
  double bn_eps = 1e-5;
  double bn_momentum = 0.1;

  bool has_batchnorm() const {
    return variant == Variant::model3 || variant == Variant::model5;
  }
  bool has_dropout() const {
    return variant == Variant::model4 || variant == Variant::model5;
  }
  bool has_dense() const { return variant == Variant::model1; }

  // Both pool stages halve the filter axis and quarter the time axis.
  std::int64_t flatten_dim() const {
    return layer3_filters * (layer1_filters / 4) * (samples / 16);
  }

  void validate() const {
    if (channels < 1) throw ValueError("model: channels must be positive");
    if (classes < 2) throw ValueError("model: needs at least 2 classes");
    if (samples < 16 || samples % 16 != 0) {
      throw ValueError("model: samples must be a positive multiple of 16 "
                       "(two (2, 4) pool stages)");
    }
    if (layer1_filters < 4 || layer1_filters % 4 != 0) {
      throw ValueError("model: layer1_filters must be a multiple of 4");
    }
    if (layer2_filters < 1 || layer3_filters < 1) {
      throw ValueError("model: filter counts must be positive");
    }
    if (kernels.layer2_h < 1 || kernels.layer2_w < 1 || kernels.layer3_h < 1 ||
        kernels.layer3_w < 1) {
      throw ValueError("model: kernel extents must be positive");
    }
    if (!(dropout_p >= 0.0 && dropout_p < 1.0)) {
      throw ValueError("model: dropout_p must be in [0, 1)");
    }
    if (has_dense() && dense_units < 1) {
      throw ValueError("model: dense_units must be positive");
    }
    if (bn_eps <= 0.0) throw ValueError("model: bn_eps must be positive");
    if (!(bn_momentum > 0.0 && bn_momentum <= 1.0)) {
      throw ValueError("model: bn_momentum must be in (0, 1]");
    }
  }

  nlohmann::json to_json() const {
    return nlohmann::json{
        {"channels", channels},
        {"samples", samples},
        {"classes", classes},
        {"layer2_kernel", {kernels.layer2_h, kernels.layer2_w}},
        {"layer3_kernel", {kernels.layer3_h, kernels.layer3_w}},
        {"variant", variant_name(variant)},
        {"layer1_filters", layer1_filters},
        {"layer2_filters", layer2_filters},
        {"layer3_filters", layer3_filters},
        {"dense_units", dense_units},
        {"dropout_p", dropout_p},
        {"elu_alpha", elu_alpha},
        {"bn_eps", bn_eps},
        {"bn_momentum", bn_momentum}};
  }

  static ModelSpec from_json(const nlohmann::json& j) {
    ModelSpec s;
    s.channels = j.at("channels").get<std::int64_t>();
    s.samples = j.at("samples").get<std::int64_t>();
    s.classes = j.at("classes").get<std::int64_t>();
    s.kernels.layer2_h = j.at("layer2_kernel").at(0).get<std::int64_t>();
    s.kernels.layer2_w = j.at("layer2_kernel").at(1).get<std::int64_t>();
    s.kernels.layer3_h = j.at("layer3_kernel").at(0).get<std::int64_t>();
    s.kernels.layer3_w = j.at("layer3_kernel").at(1).get<std::int64_t>();
    s.variant = variant_from_name(j.at("variant").get<std::string>());
    s.layer1_filters = j.value("layer1_filters", std::int64_t{16});
    s.layer2_filters = j.value("layer2_filters", std::int64_t{4});
    s.layer3_filters = j.value("layer3_filters", std::int64_t{4});
    s.dense_units = j.value("dense_units", std::int64_t{100});
    s.dropout_p = j.value("dropout_p", 0.25);
    s.elu_alpha = j.value("elu_alpha", 1.0);
    s.bn_eps = j.value("bn_eps", 1e-5);
    s.bn_momentum = j.value("bn_momentum", 0.1);
    return s;
  }

  // Hash of the structural fields; used to assert two specs describe the
  // same architecture without comparing field by field.
  std::string fingerprint() const {
    const std::uint64_t h = fnv1a64(to_json().dump());
    std::ostringstream os;
    os << std::hex << h;
    return os.str();
  }
};

struct ParameterLedger {
  std::vector<std::pair<std::string, std::int64_t>> items;
  std::int64_t total = 0;

  std::int64_t item(const std::string& name) const {
    for (const auto& [n, c] : items) {
      if (n == name) return c;
    }
    throw ValueError("ledger: no item named " + name);
  }
};

inline std::int64_t kernelsize2(const ModelSpec& s) {
  return s.kernels.layer2_h * s.kernels.layer2_w;
}
inline std::int64_t kernelsize3(const ModelSpec& s) {
  return s.kernels.layer3_h * s.kernels.layer3_w;
}

// Trainable parameters only; batch-norm running statistics are state, not
// parameters, and are excluded here.
inline ParameterLedger count_parameters(const ModelSpec& spec) {
  spec.validate();
  ParameterLedger led;
  auto add = [&led](const std::string& name, std::int64_t count) {
    led.items.emplace_back(name, count);
    led.total += count;
  };
  const std::int64_t F1 = spec.layer1_filters, F2 = spec.layer2_filters,
                     F3 = spec.layer3_filters;
  add("layer1.conv", F1 * spec.channels + F1);
  if (spec.has_batchnorm()) add("layer1.bn", 2 * F1);
  add("layer2.conv", F2 * kernelsize2(spec) + F2);
  if (spec.has_batchnorm()) add("layer2.bn", 2 * F2);
  add("layer3.conv", F3 * F2 * kernelsize3(spec) + F3);
  if (spec.has_batchnorm()) add("layer3.bn", 2 * F3);
  std::int64_t d = spec.flatten_dim();
  if (spec.has_dense()) {
    add("dense", spec.dense_units * d + spec.dense_units);
    d = spec.dense_units;
  }
  add("softmax", spec.classes * d + spec.classes);
  return led;
}

// Parameter and state snapshots are kept in double so a snapshot/restore
// round trip is exact for both float and double models.
using ModelState = std::vector<std::pair<std::string, Tensor<double>>>;

// Borrowed view of one trainable tensor and its gradient buffer.
template <class Real>
struct ParamRef {
  std::string name;
  Tensor<Real>* value;
  Tensor<Real>* grad;
};

template <class Real>
class Model {
 public:
  explicit Model(const ModelSpec& spec) : spec_(spec) { build(); }

  const ModelSpec& spec() const { return spec_; }
  ComputeGraph<Real>& graph() { return graph_; }

  std::vector<ParamRef<Real>> parameters() {
    std::vector<ParamRef<Real>> out;
    for (int id : graph_.trainable_params()) {
      auto& n = graph_.node(id);
      out.push_back({n.name, &n.value, &n.grad});
    }
    return out;
  }

  Tensor<Real>& param(const std::string& name) {
    return graph_.value(graph_.find(name));
  }
  const Tensor<Real>& param_grad(const std::string& name) {
    return graph_.node(graph_.find(name)).grad;
  }

  static constexpr const char* kSpatialWeightName = "layer1.conv.weight";

  // Fan-based uniform init (variance 2 / (fan_in + fan_out)); biases, betas
  // and running means start at zero, gammas and running variances at one.
  // Each tensor draws from its own name-derived stream, so architectures that
  // share a layer initialize it identically under the same seed.
  void init_parameters(const RngStream& rng) {
    for (int id : graph_.trainable_params()) {
      auto& n = graph_.node(id);
      const double limit = init_limit(n.name);
      if (limit == 0.0) {
        n.value.fill(n.name.ends_with(".gamma") ? Real(1) : Real(0));
        continue;
      }
      RngStream s = rng.derive(n.name);
      Real* p = n.value.data();
      for (std::int64_t i = 0; i < n.value.size(); ++i) {
        p[i] = static_cast<Real>(s.uniform(-limit, limit));
      }
    }
    for (int id : graph_.state_nodes()) {
      auto& n = graph_.node(id);
      n.value.fill(n.name.ends_with(".running_var") ? Real(1) : Real(0));
    }
  }

  Tensor<Real> forward_probs(const Tensor<Real>& x, Mode mode,
                             std::int64_t step = 0) {
    graph_.set_input(input_, x);
    graph_.set_labels(std::vector<int>(static_cast<std::size_t>(x.extent(0)), 0));
    graph_.forward(mode, step);
    return graph_.value(probs_);
  }

  // Mean cross entropy over the batch. Probabilities stay in the graph for
  // inspection via last_probs().
  Real forward_loss(const Tensor<Real>& x, const std::vector<int>& labels,
                    Mode mode, std::int64_t step = 0) {
    graph_.set_input(input_, x);
    graph_.set_labels(labels);
    graph_.forward(mode, step);
    const Real loss = graph_.value(loss_)[0];
    if (!std::isfinite(static_cast<double>(loss))) {
      throw NumericError("model: non-finite training loss");
    }
    return loss;
  }

  void backward() { graph_.backward(loss_); }

  const Tensor<Real>& last_probs() const { return graph_.value(probs_); }

  void set_dropout_seed(std::uint64_t seed) { graph_.set_dropout_seed(seed); }

  // Labeled per-sample output shapes in forward order.
  const std::vector<std::pair<std::string, std::vector<std::int64_t>>>&
  shape_trace() const {
    return trace_;
  }

  ModelState snapshot() const {
    ModelState out;
    for (int id : all_stored()) {
      const auto& n = graph_.node(id);
      out.emplace_back(n.name, tensor_cast<double>(n.value));
    }
    return out;
  }

  void restore(const ModelState& state) {
    for (int id : all_stored()) {
      auto& n = graph_.node(id);
      const Tensor<double>* found = nullptr;
      for (const auto& [name, t] : state) {
        if (name == n.name) {
          found = &t;
          break;
        }
      }
      if (!found) throw ValueError("model: snapshot missing tensor " + n.name);
      if (found->shape() != n.value.shape()) {
        throw ValueError("model: snapshot shape mismatch for " + n.name);
      }
      n.value = tensor_cast<Real>(*found);
    }
  }

  void save(const std::string& path) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw FormatError("model: cannot open " + path + " for writing");
    os.write("EEGM", 4);
    binio::write_u16(os, 1);
    const std::string spec_json = spec_.to_json().dump();
    binio::write_u32(os, static_cast<std::uint32_t>(spec_json.size()));
    os.write(spec_json.data(), static_cast<std::streamsize>(spec_json.size()));
    const auto ids = all_stored();
    binio::write_u32(os, static_cast<std::uint32_t>(ids.size()));
    for (int id : ids) {
      const auto& n = graph_.node(id);
      binio::write_u16(os, static_cast<std::uint16_t>(n.name.size()));
      os.write(n.name.data(), static_cast<std::streamsize>(n.name.size()));
      binio::write_u8(os, static_cast<std::uint8_t>(n.value.rank()));
      for (std::int64_t a = 0; a < n.value.rank(); ++a) {
        binio::write_u32(os, static_cast<std::uint32_t>(n.value.extent(a)));
      }
      for (std::int64_t i = 0; i < n.value.size(); ++i) {
        binio::write_f64(os, static_cast<double>(n.value[i]));
      }
    }
    if (!os) throw FormatError("model: write failed for " + path);
  }

  static Model load(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FormatError("model: cannot open " + path);
    char magic[4];
    is.read(magic, 4);
    if (is.gcount() != 4 || std::string(magic, 4) != "EEGM") {
      throw FormatError("model: bad magic in " + path);
    }
    const std::uint16_t version = binio::read_u16(is);
    if (version != 1) {
      throw FormatError("model: unsupported version " + std::to_string(version));
    }
    const std::uint32_t jlen = binio::read_u32(is);
    std::string spec_json(jlen, '\0');
    is.read(spec_json.data(), jlen);
    if (is.gcount() != static_cast<std::streamsize>(jlen)) {
      throw FormatError("model: truncated spec block");
    }
    ModelSpec spec;
    try {
      spec = ModelSpec::from_json(nlohmann::json::parse(spec_json));
      spec.validate();
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(std::string("model: bad spec JSON: ") + e.what());
    }
    Model m(spec);
    const std::uint32_t n_entries = binio::read_u32(is);
    const auto ids = m.all_stored();
    if (n_entries != ids.size()) {
      throw FormatError("model: tensor count does not match architecture");
    }
    for (std::uint32_t e = 0; e < n_entries; ++e) {
      const std::uint16_t nlen = binio::read_u16(is);
      std::string name(nlen, '\0');
      is.read(name.data(), nlen);
      if (is.gcount() != static_cast<std::streamsize>(nlen)) {
        throw FormatError("model: truncated tensor name");
      }
      const std::uint8_t rank = binio::read_u8(is);
      std::vector<std::int64_t> shape(rank);
      for (auto& ext : shape) ext = binio::read_u32(is);
      int id = -1;
      try {
        id = m.graph_.find(name);
      } catch (const ValueError&) {
        throw FormatError("model: unexpected tensor " + name);
      }
      auto& node = m.graph_.node(id);
      if (node.value.shape() != shape) {
        throw FormatError("model: shape mismatch for " + name);
      }
      for (std::int64_t i = 0; i < node.value.size(); ++i) {
        node.value[i] = static_cast<Real>(binio::read_f64(is));
      }
    }
    is.peek();
    if (!is.eof()) throw FormatError("model: trailing bytes in " + path);
    return m;
  }

 private:
  void build() {
    spec_.validate();
    const std::int64_t C = spec_.channels, T = spec_.samples, N = spec_.classes;
    const std::int64_t F1 = spec_.layer1_filters, F2 = spec_.layer2_filters,
                       F3 = spec_.layer3_filters;

    input_ = graph_.add_input("input", {C, T});
    trace("input", {C, T});

    // layer 1: spatial filters across channels
    const int w1 = graph_.add_param("layer1.conv.weight", {F1, C});
    const int b1 = graph_.add_param("layer1.conv.bias", {F1});
    int cur = graph_.add_spatial_conv(input_, w1, b1);
    trace("layer1.conv", {F1, 1, T});
    cur = maybe_bn(cur, "layer1.bn", F1);
    cur = graph_.add_elu(cur, spec_.elu_alpha);
    cur = graph_.add_swap_axes(cur, 0, 1);
    trace("layer1.transpose", {1, F1, T});
    cur = maybe_dropout(cur, 1);

    // layer 2
    const int k2 = graph_.add_param(
        "layer2.conv.kernel", {F2, 1, spec_.kernels.layer2_h, spec_.kernels.layer2_w});
    const int b2 = graph_.add_param("layer2.conv.bias", {F2});
    cur = graph_.add_conv2d_same(cur, k2, b2);
    trace("layer2.conv", {F2, F1, T});
    cur = maybe_bn(cur, "layer2.bn", F2);
    cur = graph_.add_elu(cur, spec_.elu_alpha);
    cur = graph_.add_maxpool(cur, 2, 4);
    trace("layer2.pool", {F2, F1 / 2, T / 4});
    cur = maybe_dropout(cur, 2);

    // layer 3
    const int k3 = graph_.add_param(
        "layer3.conv.kernel", {F3, F2, spec_.kernels.layer3_h, spec_.kernels.layer3_w});
    const int b3 = graph_.add_param("layer3.conv.bias", {F3});
    cur = graph_.add_conv2d_same(cur, k3, b3);
    trace("layer3.conv", {F3, F1 / 2, T / 4});
    cur = maybe_bn(cur, "layer3.bn", F3);
    cur = graph_.add_elu(cur, spec_.elu_alpha);
    cur = graph_.add_maxpool(cur, 2, 4);
    trace("layer3.pool", {F3, F1 / 4, T / 16});
    cur = maybe_dropout(cur, 3);

    cur = graph_.add_flatten(cur);
    std::int64_t d = spec_.flatten_dim();
    trace("flatten", {d});

    if (spec_.has_dense()) {
      const int wd = graph_.add_param("dense.weight", {spec_.dense_units, d});
      const int bd = graph_.add_param("dense.bias", {spec_.dense_units});
      cur = graph_.add_affine(cur, wd, bd);
      cur = graph_.add_elu(cur, spec_.elu_alpha);
      d = spec_.dense_units;
      trace("dense", {d});
    }

    const int ws = graph_.add_param("softmax.weight", {N, d});
    const int bs = graph_.add_param("softmax.bias", {N});
    probs_ = graph_.add_affine_softmax(cur, ws, bs);
    trace("probs", {N});
    losses_ = graph_.add_cross_entropy(probs_);
    loss_ = graph_.add_mean(losses_);
  }

  int maybe_bn(int x, const std::string& prefix, std::int64_t features) {
    if (!spec_.has_batchnorm()) return x;
    const int gamma = graph_.add_param(prefix + ".gamma", {features});
    const int beta = graph_.add_param(prefix + ".beta", {features});
    const int rmean = graph_.add_state(prefix + ".running_mean", {features});
    const int rvar = graph_.add_state(prefix + ".running_var", {features}, Real(1));
    graph_.value(gamma).fill(Real(1));
    return graph_.add_batchnorm(x, gamma, beta, rmean, rvar, spec_.bn_eps,
                                spec_.bn_momentum);
  }

  int maybe_dropout(int x, int layer_index) {
    if (!spec_.has_dropout() || spec_.dropout_p == 0.0) return x;
    return graph_.add_dropout(x, spec_.dropout_p, layer_index);
  }

  double init_limit(const std::string& name) const {
    if (name.ends_with(".bias") || name.ends_with(".gamma") ||
        name.ends_with(".beta")) {
      return 0.0;
    }
    double fan_in = 0, fan_out = 0;
    if (name == "layer1.conv.weight") {
      fan_in = static_cast<double>(spec_.channels);
      fan_out = static_cast<double>(spec_.layer1_filters * spec_.channels);
    } else if (name == "layer2.conv.kernel") {
      const double rf = static_cast<double>(kernelsize2(spec_));
      fan_in = rf;
      fan_out = static_cast<double>(spec_.layer2_filters) * rf;
    } else if (name == "layer3.conv.kernel") {
      const double rf = static_cast<double>(kernelsize3(spec_));
      fan_in = static_cast<double>(spec_.layer2_filters) * rf;
      fan_out = static_cast<double>(spec_.layer3_filters) * rf;
    } else if (name == "dense.weight") {
      fan_in = static_cast<double>(spec_.flatten_dim());
      fan_out = static_cast<double>(spec_.dense_units);
    } else if (name == "softmax.weight") {
      fan_in = static_cast<double>(spec_.has_dense() ? spec_.dense_units
                                                     : spec_.flatten_dim());
      fan_out = static_cast<double>(spec_.classes);
    } else {
      throw ValueError("model: no init rule for " + name);
    }
    return std::sqrt(6.0 / (fan_in + fan_out));
  }

  std::vector<int> all_stored() const {
    std::vector<int> ids = graph_.trainable_params();
    for (int id : graph_.state_nodes()) ids.push_back(id);
    return ids;
  }

  void trace(std::string label, std::vector<std::int64_t> shape) {
    trace_.emplace_back(std::move(label), std::move(shape));
  }

  ModelSpec spec_;
  ComputeGraph<Real> graph_;
  int input_ = -1, probs_ = -1, losses_ = -1, loss_ = -1;
  std::vector<std::pair<std::string, std::vector<std::int64_t>>> trace_;
};

}  // namespace eegnet
