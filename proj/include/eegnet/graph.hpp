#pragma once

// Static reverse-mode graph. The node list is built once per model in
// topological (insertion) order, then re-executed for every batch; backward
// walks the same list in reverse and accumulates gradients. Per-sample shapes
// are inferred at build time so wiring errors surface before any data flows.

#include <cstdint>
#include <string>
#include <vector>

#include "eegnet/error.hpp"
#include "eegnet/ops.hpp"
#include "eegnet/rng.hpp"
#include "eegnet/tensor.hpp"

namespace eegnet {

enum class OpKind {
  input,
  param,
  state,  // batch-norm running statistics: persistent, not trainable
  spatial_conv,
  conv2d_same,
  batchnorm,
  elu_op,
  maxpool,
  dropout_op,
  swap_axes,
  flatten,
  affine,
  affine_softmax_op,
  cross_entropy_op,
  mean
};

template <class Real>
class ComputeGraph {
 public:
  struct Node {
    OpKind kind;
    std::string name;
    std::vector<int> inputs;
    // Output shape for one sample; leaf params/state store their full shape.
    std::vector<std::int64_t> sample_shape;
    // op attributes
    double alpha = 1.0;
    double drop_p = 0.0;
    int drop_layer = 0;
    std::int64_t ph = 0, pw = 0;
    std::int64_t axis_a = 0, axis_b = 0;
    double bn_eps = 1e-5;
    double bn_momentum = 0.1;
    // runtime
    Tensor<Real> value;
    Tensor<Real> grad;
    BatchNormCache<Real> bn_cache;
    std::vector<std::int64_t> argmax;
    Tensor<Real> mask;
  };

  int add_input(std::string name, std::vector<std::int64_t> sample_shape) {
    Node n;
    n.kind = OpKind::input;
    n.name = std::move(name);
    n.sample_shape = std::move(sample_shape);
    return push(std::move(n));
  }

  int add_param(std::string name, std::vector<std::int64_t> shape) {
    Node n;
    n.kind = OpKind::param;
    n.name = std::move(name);
    n.sample_shape = shape;
    n.value = Tensor<Real>(shape);
    return push(std::move(n));
  }

  int add_state(std::string name, std::vector<std::int64_t> shape,
                Real fill = Real(0)) {
    Node n;
    n.kind = OpKind::state;
    n.name = std::move(name);
    n.sample_shape = shape;
    n.value = Tensor<Real>(shape, fill);
    return push(std::move(n));
  }

  int add_spatial_conv(int x, int w, int b) {
    const auto& xs = shape_of(x);
    const auto& ws = shape_of(w);
    if (xs.size() != 2 || ws.size() != 2 || ws[1] != xs[0]) {
      throw ShapeError("graph: spatial_conv expects x (C, T) and w (F, C)");
    }
    Node n;
    n.kind = OpKind::spatial_conv;
    n.inputs = {x, w, b};
    n.sample_shape = {ws[0], 1, xs[1]};
    return push(std::move(n));
  }

  int add_conv2d_same(int x, int k, int b) {
    const auto& xs = shape_of(x);
    const auto& ks = shape_of(k);
    if (xs.size() != 3 || ks.size() != 4 || ks[1] != xs[0]) {
      throw ShapeError("graph: conv2d expects x (Fin, H, W), k (Fout, Fin, kh, kw)");
    }
    Node n;
    n.kind = OpKind::conv2d_same;
    n.inputs = {x, k, b};
    n.sample_shape = {ks[0], xs[1], xs[2]};
    return push(std::move(n));
  }

  int add_batchnorm(int x, int gamma, int beta, int rmean, int rvar,
                    double eps, double momentum) {
    const auto& xs = shape_of(x);
    if (xs.empty()) throw ShapeError("graph: batchnorm needs a feature axis");
    Node n;
    n.kind = OpKind::batchnorm;
    n.inputs = {x, gamma, beta, rmean, rvar};
    n.sample_shape = xs;
    n.bn_eps = eps;
    n.bn_momentum = momentum;
    return push(std::move(n));
  }

  int add_elu(int x, double alpha) {
    Node n;
    n.kind = OpKind::elu_op;
    n.inputs = {x};
    n.sample_shape = shape_of(x);
    n.alpha = alpha;
    return push(std::move(n));
  }

  int add_maxpool(int x, std::int64_t ph, std::int64_t pw) {
    const auto& xs = shape_of(x);
    if (xs.size() != 3) throw ShapeError("graph: maxpool expects (F, H, W)");
    if (ph <= 0 || pw <= 0 || xs[1] % ph != 0 || xs[2] % pw != 0) {
      throw ShapeError("graph: pool does not divide input extents");
    }
    Node n;
    n.kind = OpKind::maxpool;
    n.inputs = {x};
    n.sample_shape = {xs[0], xs[1] / ph, xs[2] / pw};
    n.ph = ph;
    n.pw = pw;
    return push(std::move(n));
  }

  // layer_index feeds the mask stream so each dropout site draws its own
  // reproducible sequence per optimizer step.
  int add_dropout(int x, double p, int layer_index) {
    if (!(p >= 0.0 && p < 1.0)) throw ValueError("graph: dropout p in [0, 1)");
    Node n;
    n.kind = OpKind::dropout_op;
    n.inputs = {x};
    n.sample_shape = shape_of(x);
    n.drop_p = p;
    n.drop_layer = layer_index;
    return push(std::move(n));
  }

  // Axes are in per-sample coordinates; the batch axis is prepended at run time.
  int add_swap_axes(int x, std::int64_t a, std::int64_t b) {
    auto xs = shape_of(x);
    const auto rank = static_cast<std::int64_t>(xs.size());
    if (a < 0 || b < 0 || a >= rank || b >= rank) {
      throw ShapeError("graph: swap axis out of range");
    }
    std::swap(xs[static_cast<std::size_t>(a)], xs[static_cast<std::size_t>(b)]);
    Node n;
    n.kind = OpKind::swap_axes;
    n.inputs = {x};
    n.sample_shape = std::move(xs);
    n.axis_a = a;
    n.axis_b = b;
    return push(std::move(n));
  }

  int add_flatten(int x) {
    Node n;
    n.kind = OpKind::flatten;
    n.inputs = {x};
    n.sample_shape = {shape_numel(shape_of(x))};
    return push(std::move(n));
  }

  int add_affine(int x, int w, int b) {
    const auto& xs = shape_of(x);
    const auto& ws = shape_of(w);
    if (xs.size() != 1 || ws.size() != 2 || ws[1] != xs[0]) {
      throw ShapeError("graph: affine expects x (D) and w (N, D)");
    }
    Node n;
    n.kind = OpKind::affine;
    n.inputs = {x, w, b};
    n.sample_shape = {ws[0]};
    return push(std::move(n));
  }

  int add_affine_softmax(int x, int w, int b) {
    const auto& xs = shape_of(x);
    const auto& ws = shape_of(w);
    if (xs.size() != 1 || ws.size() != 2 || ws[1] != xs[0]) {
      throw ShapeError("graph: affine_softmax expects x (D) and w (N, D)");
    }
    Node n;
    n.kind = OpKind::affine_softmax_op;
    n.inputs = {x, w, b};
    n.sample_shape = {ws[0]};
    return push(std::move(n));
  }

  int add_cross_entropy(int probs) {
    const auto& ps = shape_of(probs);
    if (ps.size() != 1) throw ShapeError("graph: cross_entropy expects (N) probabilities");
    Node n;
    n.kind = OpKind::cross_entropy_op;
    n.inputs = {probs};
    n.sample_shape = {};  // one loss per sample
    return push(std::move(n));
  }

  int add_mean(int x) {
    Node n;
    n.kind = OpKind::mean;
    n.inputs = {x};
    n.sample_shape = {1};
    return push(std::move(n));
  }

  // ---- access ------------------------------------------------------------

  std::int64_t node_count() const { return static_cast<std::int64_t>(nodes_.size()); }
  Node& node(int id) { return nodes_[static_cast<std::size_t>(id)]; }
  const Node& node(int id) const { return nodes_[static_cast<std::size_t>(id)]; }

  Tensor<Real>& value(int id) { return nodes_[static_cast<std::size_t>(id)].value; }
  const Tensor<Real>& value(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }
  const Tensor<Real>& grad(int id) const { return nodes_[static_cast<std::size_t>(id)].grad; }

  std::vector<int> trainable_params() const {
    std::vector<int> out;
    for (int i = 0; i < static_cast<int>(nodes_.size()); ++i) {
      if (nodes_[static_cast<std::size_t>(i)].kind == OpKind::param) out.push_back(i);
    }
    return out;
  }

  std::vector<int> state_nodes() const {
    std::vector<int> out;
    for (int i = 0; i < static_cast<int>(nodes_.size()); ++i) {
      if (nodes_[static_cast<std::size_t>(i)].kind == OpKind::state) out.push_back(i);
    }
    return out;
  }

  int find(const std::string& name) const {
    for (int i = 0; i < static_cast<int>(nodes_.size()); ++i) {
      if (nodes_[static_cast<std::size_t>(i)].name == name) return i;
    }
    throw ValueError("graph: no node named " + name);
  }

  // ---- execution -----------------------------------------------------------

  void set_input(int id, Tensor<Real> x) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.kind != OpKind::input) throw StateError("graph: set_input on non-input node");
    if (x.rank() != static_cast<std::int64_t>(n.sample_shape.size()) + 1) {
      throw ShapeError("graph: input must be batched " + shape_str(n.sample_shape));
    }
    for (std::size_t a = 0; a < n.sample_shape.size(); ++a) {
      if (x.extent(static_cast<std::int64_t>(a) + 1) != n.sample_shape[a]) {
        throw ShapeError("graph: input shape " + shape_str(x.shape()) +
                         " does not match sample shape " + shape_str(n.sample_shape));
      }
    }
    batch_ = x.extent(0);
    n.value = std::move(x);
  }

  void set_labels(std::vector<int> labels) { labels_ = std::move(labels); }

  void set_dropout_seed(std::uint64_t seed) { dropout_seed_ = seed; }

  void forward(Mode mode, std::int64_t step = 0) {
    mode_ = mode;
    for (Node& n : nodes_) {
      switch (n.kind) {
        case OpKind::input:
          if (n.value.size() == 0) throw StateError("graph: forward before set_input");
          break;
        case OpKind::param:
        case OpKind::state:
          break;
        case OpKind::spatial_conv:
          n.value = spatial_conv_forward_batch(in(n, 0), in(n, 1), in(n, 2));
          break;
        case OpKind::conv2d_same:
          n.value = conv2d_same_forward_batch(in(n, 0), in(n, 1), in(n, 2));
          break;
        case OpKind::batchnorm:
          n.value = batchnorm_forward(in(n, 0), in(n, 1), in(n, 2),
                                      mut(n, 3), mut(n, 4), n.bn_eps,
                                      n.bn_momentum, mode, &n.bn_cache);
          break;
        case OpKind::elu_op:
          n.value = eegnet::elu(in(n, 0), n.alpha);
          break;
        case OpKind::maxpool:
          n.value = maxpool2d_forward_batch(in(n, 0), n.ph, n.pw, &n.argmax);
          break;
        case OpKind::dropout_op:
          n.value = dropout_forward(in(n, 0), n.drop_p, mode,
                                    mask_stream(n.drop_layer, step), &n.mask);
          break;
        case OpKind::swap_axes:
          n.value = transpose_swap(in(n, 0), n.axis_a + 1, n.axis_b + 1);
          break;
        case OpKind::flatten:
          n.value = in(n, 0).reshaped({batch_, shape_numel(n.sample_shape)});
          break;
        case OpKind::affine:
          n.value = affine_forward_batch(in(n, 0), in(n, 1), in(n, 2));
          break;
        case OpKind::affine_softmax_op:
          n.value = affine_softmax_batch(in(n, 0), in(n, 1), in(n, 2));
          break;
        case OpKind::cross_entropy_op:
          if (labels_.empty()) {
            throw StateError("graph: labels not set for cross entropy");
          }
          if (static_cast<std::int64_t>(labels_.size()) != batch_) {
            throw ShapeError("graph: " + std::to_string(labels_.size()) +
                             " labels for a batch of " + std::to_string(batch_));
          }
          n.value = cross_entropy_losses(in(n, 0), labels_);
          break;
        case OpKind::mean: {
          const Tensor<Real>& v = in(n, 0);
          if (v.size() == 0) throw ShapeError("graph: mean of empty tensor");
          double acc = 0;
          for (std::int64_t i = 0; i < v.size(); ++i) acc += v[i];
          Tensor<Real> out({1});
          out[0] = static_cast<Real>(acc / static_cast<double>(v.size()));
          n.value = std::move(out);
          break;
        }
      }
    }
    ran_forward_ = true;
  }

  // Seeds d(loss)/d(loss) = 1 at `loss_id` and accumulates into every node's
  // grad buffer. Parameter gradients are left in node.grad.
  void backward(int loss_id) {
    if (!ran_forward_) throw StateError("graph: backward before forward");
    if (nodes_[static_cast<std::size_t>(loss_id)].value.size() != 1) {
      throw ShapeError("graph: backward target must be scalar");
    }
    for (Node& n : nodes_) {
      if (n.grad.same_shape(n.value) && n.grad.size() > 0) {
        n.grad.fill(Real(0));
      } else {
        n.grad = Tensor<Real>(n.value.shape());
      }
    }
    nodes_[static_cast<std::size_t>(loss_id)].grad[0] = Real(1);
    for (std::int64_t i = static_cast<std::int64_t>(nodes_.size()) - 1; i >= 0; --i) {
      Node& n = nodes_[static_cast<std::size_t>(i)];
      if (n.grad.size() == 0) continue;
      switch (n.kind) {
        case OpKind::input:
        case OpKind::param:
        case OpKind::state:
          break;
        case OpKind::spatial_conv:
          spatial_conv_backward_batch(in(n, 0), in(n, 1), n.grad, gin(n, 0),
                                      gin(n, 1), gin(n, 2));
          break;
        case OpKind::conv2d_same:
          conv2d_same_backward_batch(in(n, 0), in(n, 1), n.grad, gin(n, 0),
                                     gin(n, 1), gin(n, 2));
          break;
        case OpKind::batchnorm:
          batchnorm_backward(n.bn_cache, in(n, 1), n.grad, gin(n, 0),
                             gin(n, 1), gin(n, 2));
          break;
        case OpKind::elu_op:
          elu_backward(n.value, n.alpha, n.grad, gin(n, 0));
          break;
        case OpKind::maxpool:
          maxpool2d_backward_batch(n.argmax, n.grad, gin(n, 0));
          break;
        case OpKind::dropout_op:
          if (mode_ == Mode::train) {
            dropout_backward(n.mask, n.grad, gin(n, 0));
          } else {
            accumulate(gin(n, 0), n.grad);
          }
          break;
        case OpKind::swap_axes: {
          Tensor<Real> back = transpose_swap(n.grad, n.axis_a + 1, n.axis_b + 1);
          accumulate(gin(n, 0), back);
          break;
        }
        case OpKind::flatten:
          accumulate(gin(n, 0), n.grad);
          break;
        case OpKind::affine:
          affine_backward_batch(in(n, 0), in(n, 1), n.grad, gin(n, 0),
                                gin(n, 1), gin(n, 2));
          break;
        case OpKind::affine_softmax_op: {
          Tensor<Real> dz(n.value.shape());
          softmax_backward_rows(n.value, n.grad, dz);
          affine_backward_batch(in(n, 0), in(n, 1), dz, gin(n, 0), gin(n, 1),
                                gin(n, 2));
          break;
        }
        case OpKind::cross_entropy_op:
          cross_entropy_backward(in(n, 0), labels_, n.grad, gin(n, 0));
          break;
        case OpKind::mean: {
          Tensor<Real>& dx = gin(n, 0);
          const Real gv = n.grad[0] / static_cast<Real>(dx.size());
          for (std::int64_t k = 0; k < dx.size(); ++k) dx[k] += gv;
          break;
        }
      }
    }
  }

  std::int64_t batch() const { return batch_; }
  Mode mode() const { return mode_; }

 private:
  int push(Node n) {
    for (int i : n.inputs) {
      if (i < 0 || i >= static_cast<int>(nodes_.size())) {
        throw StateError("graph: node wired to a later or missing node");
      }
    }
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
  }

  const std::vector<std::int64_t>& shape_of(int id) const {
    return nodes_[static_cast<std::size_t>(id)].sample_shape;
  }

  const Tensor<Real>& in(const Node& n, int slot) const {
    return nodes_[static_cast<std::size_t>(n.inputs[static_cast<std::size_t>(slot)])].value;
  }
  Tensor<Real>& mut(Node& n, int slot) {
    return nodes_[static_cast<std::size_t>(n.inputs[static_cast<std::size_t>(slot)])].value;
  }
  Tensor<Real>& gin(Node& n, int slot) {
    return nodes_[static_cast<std::size_t>(n.inputs[static_cast<std::size_t>(slot)])].grad;
  }

  static void accumulate(Tensor<Real>& dst, const Tensor<Real>& src) {
    Real* d = dst.data();
    const Real* s = src.data();
    for (std::int64_t i = 0; i < dst.size(); ++i) d[i] += s[i];
  }

  RngStream mask_stream(int layer, std::int64_t step) const {
    return RngStream(dropout_seed_)
        .derive("dropout")
        .derive(static_cast<std::uint64_t>(layer))
        .derive(static_cast<std::uint64_t>(step));
  }

  std::vector<Node> nodes_;
  std::vector<int> labels_;
  std::int64_t batch_ = 0;
  std::uint64_t dropout_seed_ = 0;
  Mode mode_ = Mode::infer;
  bool ran_forward_ = false;
};

}  // namespace eegnet
