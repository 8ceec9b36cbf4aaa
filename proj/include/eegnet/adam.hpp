#pragma once

// Adam with bias correction, plus the elastic-net penalty applied to the
// spatial filter weights during training.

#include <cmath>
#include <cstdint>
#include <vector>

#include "eegnet/error.hpp"
#include "eegnet/model.hpp"
#include "eegnet/tensor.hpp"

namespace eegnet {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  void validate() const {
    if (lr <= 0.0) throw ValueError("adam: lr must be positive");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
      throw ValueError("adam: betas must be in [0, 1)");
    }
    if (eps <= 0.0) throw ValueError("adam: eps must be positive");
  }
};

// First/second moment buffers, one per parameter tensor, in parameter-list
// order. t counts completed steps and starts at 0.
template <class Real>
struct AdamState {
  std::vector<Tensor<Real>> m;
  std::vector<Tensor<Real>> v;
  std::int64_t t = 0;
};

template <class Real>
void adam_init(AdamState<Real>& st, const std::vector<ParamRef<Real>>& params) {
  st.m.clear();
  st.v.clear();
  st.t = 0;
  for (const auto& p : params) {
    st.m.emplace_back(p.value->shape());
    st.v.emplace_back(p.value->shape());
  }
}

template <class Real>
void adam_step(AdamState<Real>& st, const std::vector<ParamRef<Real>>& params,
               const AdamConfig& cfg) {
  if (st.m.size() != params.size()) {
    throw StateError("adam: step before init, or parameter list changed");
  }
  cfg.validate();
  st.t += 1;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(st.t));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(st.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Tensor<Real>& g = *params[i].grad;
    Tensor<Real>& p = *params[i].value;
    if (g.size() != p.size()) {
      throw StateError("adam: missing gradient for " + params[i].name);
    }
    Real* mp = st.m[i].data();
    Real* vp = st.v[i].data();
    Real* pp = p.data();
    const Real* gp = g.data();
    for (std::int64_t k = 0; k < p.size(); ++k) {
      const double gv = gp[k];
      if (!std::isfinite(gv)) {
        throw NumericError("adam: non-finite gradient in " + params[i].name);
      }
      const double m = cfg.beta1 * mp[k] + (1.0 - cfg.beta1) * gv;
      const double v = cfg.beta2 * vp[k] + (1.0 - cfg.beta2) * gv * gv;
      mp[k] = static_cast<Real>(m);
      vp[k] = static_cast<Real>(v);
      const double mhat = m / c1;
      const double vhat = v / c2;
      pp[k] = static_cast<Real>(pp[k] - cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps));
    }
  }
}

// l1 * sum|w| + l2 * sum w^2
template <class Real>
double elastic_net_penalty(const Tensor<Real>& w, double l1, double l2) {
  if (l1 < 0.0 || l2 < 0.0) throw ValueError("elastic net: negative strength");
  double abs_sum = 0, sq_sum = 0;
  const Real* p = w.data();
  for (std::int64_t i = 0; i < w.size(); ++i) {
    abs_sum += std::abs(static_cast<double>(p[i]));
    sq_sum += static_cast<double>(p[i]) * p[i];
  }
  return l1 * abs_sum + l2 * sq_sum;
}

// Subgradient of the penalty, with sign(0) = 0, accumulated into grad.
template <class Real>
void elastic_net_add_grad(const Tensor<Real>& w, Tensor<Real>& grad, double l1,
                          double l2) {
  if (!w.same_shape(grad)) throw ShapeError("elastic net: shape mismatch");
  const Real* wp = w.data();
  Real* gp = grad.data();
  for (std::int64_t i = 0; i < w.size(); ++i) {
    const double s = wp[i] > Real(0) ? 1.0 : (wp[i] < Real(0) ? -1.0 : 0.0);
    gp[i] += static_cast<Real>(l1 * s + 2.0 * l2 * wp[i]);
  }
}

}  // namespace eegnet
