#pragma once

// Forward and backward kernels for the network layers. Batched forms take the
// batch as the leading axis; per-sample convenience wrappers reshape and
// delegate. Backward kernels accumulate (+=) into caller-provided gradient
// tensors so a graph can zero once and fan in from several consumers.
//
// Inner loops run along the last (contiguous) axis so the compiler can
// vectorize them; this matters because training runs on a single core.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "eegnet/error.hpp"
#include "eegnet/rng.hpp"
#include "eegnet/tensor.hpp"

namespace eegnet {

enum class Mode { train, infer };

namespace detail {

inline void require(bool ok, const char* what) {
  if (!ok) throw ShapeError(what);
}

}  // namespace detail

// ---- ELU -------------------------------------------------------------

template <class Real>
Tensor<Real> elu(const Tensor<Real>& x, double alpha) {
  Tensor<Real> y(x.shape());
  const Real a = static_cast<Real>(alpha);
  const Real* xs = x.data();
  Real* ys = y.data();
  for (std::int64_t i = 0; i < x.size(); ++i) {
    ys[i] = xs[i] > Real(0) ? xs[i]
                            : a * (std::exp(xs[i]) - Real(1));
  }
  return y;
}

// dx from the forward output: for x > 0 the slope is 1, otherwise
// alpha*exp(x) which equals y + alpha. Accumulates into dx.
template <class Real>
void elu_backward(const Tensor<Real>& y, double alpha, const Tensor<Real>& g,
                  Tensor<Real>& dx) {
  detail::require(y.same_shape(g) && y.same_shape(dx),
                  "elu_backward: shape mismatch");
  const Real a = static_cast<Real>(alpha);
  const Real* ys = y.data();
  const Real* gs = g.data();
  Real* ds = dx.data();
  for (std::int64_t i = 0; i < y.size(); ++i) {
    ds[i] += gs[i] * (ys[i] > Real(0) ? Real(1) : ys[i] + a);
  }
}

// ---- spatial filter bank (layer 1) ------------------------------------

// x: (B, C, T), w: (F, C), bias: (F) -> y: (B, F, 1, T)
// y[b,f,0,t] = bias[f] + sum_c w[f,c] * x[b,c,t]
template <class Real>
Tensor<Real> spatial_conv_forward_batch(const Tensor<Real>& x,
                                        const Tensor<Real>& w,
                                        const Tensor<Real>& bias) {
  detail::require(x.rank() == 3, "spatial_conv: x must be (B, C, T)");
  detail::require(w.rank() == 2, "spatial_conv: w must be (F, C)");
  detail::require(bias.rank() == 1 && bias.extent(0) == w.extent(0),
                  "spatial_conv: bias must be (F)");
  detail::require(w.extent(1) == x.extent(1),
                  "spatial_conv: channel counts disagree");
  const std::int64_t B = x.extent(0), C = x.extent(1), T = x.extent(2);
  const std::int64_t F = w.extent(0);
  Tensor<Real> y({B, F, 1, T});
  for (std::int64_t b = 0; b < B; ++b) {
    const Real* xb = x.data() + b * C * T;
    Real* yb = y.data() + b * F * T;
    for (std::int64_t f = 0; f < F; ++f) {
      Real* yrow = yb + f * T;
      std::fill(yrow, yrow + T, bias[f]);
      for (std::int64_t c = 0; c < C; ++c) {
        const Real wv = w(f, c);
        const Real* xrow = xb + c * T;
        for (std::int64_t t = 0; t < T; ++t) yrow[t] += wv * xrow[t];
      }
    }
  }
  return y;
}

template <class Real>
void spatial_conv_backward_batch(const Tensor<Real>& x, const Tensor<Real>& w,
                                 const Tensor<Real>& g, Tensor<Real>& dx,
                                 Tensor<Real>& dw, Tensor<Real>& db) {
  const std::int64_t B = x.extent(0), C = x.extent(1), T = x.extent(2);
  const std::int64_t F = w.extent(0);
  detail::require(g.rank() == 4 && g.extent(0) == B && g.extent(1) == F &&
                      g.extent(2) == 1 && g.extent(3) == T,
                  "spatial_conv_backward: bad gradient shape");
  for (std::int64_t b = 0; b < B; ++b) {
    const Real* xb = x.data() + b * C * T;
    const Real* gb = g.data() + b * F * T;
    Real* dxb = dx.data() + b * C * T;
    for (std::int64_t f = 0; f < F; ++f) {
      const Real* grow = gb + f * T;
      double gsum = 0;
      for (std::int64_t t = 0; t < T; ++t) gsum += grow[t];
      db[f] += static_cast<Real>(gsum);
      for (std::int64_t c = 0; c < C; ++c) {
        const Real* xrow = xb + c * T;
        Real* dxrow = dxb + c * T;
        const Real wv = w(f, c);
        double acc = 0;
        for (std::int64_t t = 0; t < T; ++t) {
          acc += static_cast<double>(grow[t]) * xrow[t];
          dxrow[t] += wv * grow[t];
        }
        dw(f, c) += static_cast<Real>(acc);
      }
    }
  }
}

// Per-sample form: x (C, T) -> (F, 1, T).
template <class Real>
Tensor<Real> spatial_conv_forward(const Tensor<Real>& x, const Tensor<Real>& w,
                                  const Tensor<Real>& bias) {
  detail::require(x.rank() == 2, "spatial_conv: x must be (C, T)");
  Tensor<Real> xb = x.reshaped({1, x.extent(0), x.extent(1)});
  Tensor<Real> y = spatial_conv_forward_batch(xb, w, bias);
  return y.reshaped({w.extent(0), 1, x.extent(1)});
}

// ---- 2-D convolution, SAME zero padding --------------------------------

// Padding convention: pad_begin = (k - 1) / 2 on each spatial axis, the rest
// at the end, so output extents equal input extents for any kernel size.
// x: (B, Fin, H, W), k: (Fout, Fin, kh, kw), bias: (Fout) -> (B, Fout, H, W)
template <class Real>
Tensor<Real> conv2d_same_forward_batch(const Tensor<Real>& x,
                                       const Tensor<Real>& k,
                                       const Tensor<Real>& bias) {
  detail::require(x.rank() == 4, "conv2d_same: x must be (B, Fin, H, W)");
  detail::require(k.rank() == 4, "conv2d_same: k must be (Fout, Fin, kh, kw)");
  detail::require(k.extent(1) == x.extent(1),
                  "conv2d_same: input feature counts disagree");
  detail::require(bias.rank() == 1 && bias.extent(0) == k.extent(0),
                  "conv2d_same: bias must be (Fout)");
  detail::require(k.extent(2) >= 1 && k.extent(3) >= 1,
                  "conv2d_same: empty kernel");
  const std::int64_t B = x.extent(0), Fin = x.extent(1);
  const std::int64_t H = x.extent(2), W = x.extent(3);
  const std::int64_t Fout = k.extent(0), kh = k.extent(2), kw = k.extent(3);
  const std::int64_t pt = (kh - 1) / 2, pl = (kw - 1) / 2;
  Tensor<Real> y({B, Fout, H, W});
  for (std::int64_t b = 0; b < B; ++b) {
    const Real* xb = x.data() + b * Fin * H * W;
    Real* yb = y.data() + b * Fout * H * W;
    for (std::int64_t fo = 0; fo < Fout; ++fo) {
      Real* ymap = yb + fo * H * W;
      std::fill(ymap, ymap + H * W, bias[fo]);
      for (std::int64_t fi = 0; fi < Fin; ++fi) {
        const Real* xmap = xb + fi * H * W;
        const Real* kmap = k.data() + (fo * Fin + fi) * kh * kw;
        for (std::int64_t u = 0; u < kh; ++u) {
          const std::int64_t ishift = u - pt;
          const std::int64_t i0 = std::max<std::int64_t>(0, -ishift);
          const std::int64_t i1 = std::min<std::int64_t>(H, H - ishift);
          for (std::int64_t v = 0; v < kw; ++v) {
            const Real kv = kmap[u * kw + v];
            const std::int64_t jshift = v - pl;
            const std::int64_t j0 = std::max<std::int64_t>(0, -jshift);
            const std::int64_t j1 = std::min<std::int64_t>(W, W - jshift);
            for (std::int64_t i = i0; i < i1; ++i) {
              const Real* xrow = xmap + (i + ishift) * W + jshift;
              Real* yrow = ymap + i * W;
              for (std::int64_t j = j0; j < j1; ++j) yrow[j] += kv * xrow[j];
            }
          }
        }
      }
    }
  }
  return y;
}

template <class Real>
void conv2d_same_backward_batch(const Tensor<Real>& x, const Tensor<Real>& k,
                                const Tensor<Real>& g, Tensor<Real>& dx,
                                Tensor<Real>& dk, Tensor<Real>& db) {
  const std::int64_t B = x.extent(0), Fin = x.extent(1);
  const std::int64_t H = x.extent(2), W = x.extent(3);
  const std::int64_t Fout = k.extent(0), kh = k.extent(2), kw = k.extent(3);
  const std::int64_t pt = (kh - 1) / 2, pl = (kw - 1) / 2;
  detail::require(g.rank() == 4 && g.extent(0) == B && g.extent(1) == Fout &&
                      g.extent(2) == H && g.extent(3) == W,
                  "conv2d_same_backward: bad gradient shape");
  for (std::int64_t b = 0; b < B; ++b) {
    const Real* xb = x.data() + b * Fin * H * W;
    const Real* gb = g.data() + b * Fout * H * W;
    Real* dxb = dx.data() + b * Fin * H * W;
    for (std::int64_t fo = 0; fo < Fout; ++fo) {
      const Real* gmap = gb + fo * H * W;
      double bsum = 0;
      for (std::int64_t n = 0; n < H * W; ++n) bsum += gmap[n];
      db[fo] += static_cast<Real>(bsum);
      for (std::int64_t fi = 0; fi < Fin; ++fi) {
        const Real* xmap = xb + fi * H * W;
        Real* dxmap = dxb + fi * H * W;
        const Real* kmap = k.data() + (fo * Fin + fi) * kh * kw;
        Real* dkmap = dk.data() + (fo * Fin + fi) * kh * kw;
        for (std::int64_t u = 0; u < kh; ++u) {
          const std::int64_t ishift = u - pt;
          const std::int64_t i0 = std::max<std::int64_t>(0, -ishift);
          const std::int64_t i1 = std::min<std::int64_t>(H, H - ishift);
          for (std::int64_t v = 0; v < kw; ++v) {
            const Real kv = kmap[u * kw + v];
            const std::int64_t jshift = v - pl;
            const std::int64_t j0 = std::max<std::int64_t>(0, -jshift);
            const std::int64_t j1 = std::min<std::int64_t>(W, W - jshift);
            double kacc = 0;
            for (std::int64_t i = i0; i < i1; ++i) {
              const Real* grow = gmap + i * W;
              const Real* xrow = xmap + (i + ishift) * W + jshift;
              Real* dxrow = dxmap + (i + ishift) * W + jshift;
              for (std::int64_t j = j0; j < j1; ++j) {
                kacc += static_cast<double>(grow[j]) * xrow[j];
                dxrow[j] += kv * grow[j];
              }
            }
            dkmap[u * kw + v] += static_cast<Real>(kacc);
          }
        }
      }
    }
  }
}

// Per-sample form: x (Fin, H, W) -> (Fout, H, W).
template <class Real>
Tensor<Real> conv2d_same_forward(const Tensor<Real>& x, const Tensor<Real>& k,
                                 const Tensor<Real>& bias) {
  detail::require(x.rank() == 3, "conv2d_same: x must be (Fin, H, W)");
  Tensor<Real> xb = x.reshaped({1, x.extent(0), x.extent(1), x.extent(2)});
  Tensor<Real> y = conv2d_same_forward_batch(xb, k, bias);
  return y.reshaped({k.extent(0), x.extent(1), x.extent(2)});
}

// ---- max pooling -------------------------------------------------------

// x: (B, F, H, W), pool (ph, pw); H and W must divide evenly. Ties go to the
// first element in row-major scan order. argmax (flat index into the sample's
// F*H*W block) is recorded for the backward pass.
template <class Real>
Tensor<Real> maxpool2d_forward_batch(const Tensor<Real>& x, std::int64_t ph,
                                     std::int64_t pw,
                                     std::vector<std::int64_t>* argmax) {
  detail::require(x.rank() == 4, "maxpool2d: x must be (B, F, H, W)");
  if (ph <= 0 || pw <= 0) throw ValueError("maxpool2d: pool extents must be positive");
  const std::int64_t B = x.extent(0), F = x.extent(1);
  const std::int64_t H = x.extent(2), W = x.extent(3);
  if (H % ph != 0 || W % pw != 0) {
    throw ShapeError("maxpool2d: pool (" + std::to_string(ph) + ", " +
                     std::to_string(pw) + ") does not divide (" +
                     std::to_string(H) + ", " + std::to_string(W) + ")");
  }
  const std::int64_t Ho = H / ph, Wo = W / pw;
  Tensor<Real> y({B, F, Ho, Wo});
  if (argmax) argmax->assign(static_cast<std::size_t>(B * F * Ho * Wo), 0);
  for (std::int64_t b = 0; b < B; ++b) {
    const Real* xb = x.data() + b * F * H * W;
    Real* yb = y.data() + b * F * Ho * Wo;
    std::int64_t* ab = argmax ? argmax->data() + b * F * Ho * Wo : nullptr;
    for (std::int64_t f = 0; f < F; ++f) {
      for (std::int64_t oi = 0; oi < Ho; ++oi) {
        for (std::int64_t oj = 0; oj < Wo; ++oj) {
          Real best = -std::numeric_limits<Real>::infinity();
          std::int64_t best_at = -1;
          for (std::int64_t u = 0; u < ph; ++u) {
            const std::int64_t i = oi * ph + u;
            for (std::int64_t v = 0; v < pw; ++v) {
              const std::int64_t j = oj * pw + v;
              const std::int64_t at = (f * H + i) * W + j;
              if (xb[at] > best) {
                best = xb[at];
                best_at = at;
              }
            }
          }
          yb[(f * Ho + oi) * Wo + oj] = best;
          if (ab) ab[(f * Ho + oi) * Wo + oj] = best_at;
        }
      }
    }
  }
  return y;
}

template <class Real>
void maxpool2d_backward_batch(const std::vector<std::int64_t>& argmax,
                              const Tensor<Real>& g, Tensor<Real>& dx) {
  detail::require(static_cast<std::int64_t>(argmax.size()) == g.size(),
                  "maxpool2d_backward: argmax/gradient size mismatch");
  const std::int64_t B = g.extent(0);
  const std::int64_t per_out = g.size() / B;
  const std::int64_t per_in = dx.size() / B;
  for (std::int64_t b = 0; b < B; ++b) {
    const Real* gb = g.data() + b * per_out;
    Real* dxb = dx.data() + b * per_in;
    const std::int64_t* ab = argmax.data() + b * per_out;
    for (std::int64_t n = 0; n < per_out; ++n) dxb[ab[n]] += gb[n];
  }
}

// Per-sample form: x (F, H, W).
template <class Real>
Tensor<Real> maxpool2d(const Tensor<Real>& x, std::int64_t ph,
                       std::int64_t pw) {
  detail::require(x.rank() == 3, "maxpool2d: x must be (F, H, W)");
  Tensor<Real> xb = x.reshaped({1, x.extent(0), x.extent(1), x.extent(2)});
  Tensor<Real> y = maxpool2d_forward_batch(xb, ph, pw, nullptr);
  return y.reshaped({y.extent(1), y.extent(2), y.extent(3)});
}

// ---- batch normalization -----------------------------------------------

// Feature axis is axis 1; statistics pool over the batch axis and all
// trailing spatial axes. Batch variance is the biased estimate and is used
// both to normalize and to update the running average.

template <class Real>
struct BatchNormCache {
  Tensor<Real> xhat;
  std::vector<Real> inv_std;  // one per feature
  bool train = false;
};

template <class Real>
Tensor<Real> batchnorm_forward(const Tensor<Real>& x, const Tensor<Real>& gamma,
                               const Tensor<Real>& beta,
                               Tensor<Real>& running_mean,
                               Tensor<Real>& running_var, double eps,
                               double momentum, Mode mode,
                               BatchNormCache<Real>* cache = nullptr) {
  detail::require(x.rank() >= 2, "batchnorm: x must have a feature axis");
  const std::int64_t B = x.extent(0), F = x.extent(1);
  std::int64_t M = 1;
  for (std::int64_t a = 2; a < x.rank(); ++a) M *= x.extent(a);
  detail::require(gamma.size() == F && beta.size() == F &&
                      running_mean.size() == F && running_var.size() == F,
                  "batchnorm: per-feature parameter sizes disagree");
  if (mode == Mode::train && B < 2) {
    throw DataError("batchnorm: train mode needs a batch of at least 2");
  }
  Tensor<Real> y(x.shape());
  if (cache) {
    cache->xhat = Tensor<Real>(x.shape());
    cache->inv_std.assign(static_cast<std::size_t>(F), Real(0));
    cache->train = (mode == Mode::train);
  }
  const std::int64_t n = B * M;
  for (std::int64_t f = 0; f < F; ++f) {
    double mu, var;
    if (mode == Mode::train) {
      double sum = 0;
      for (std::int64_t b = 0; b < B; ++b) {
        const Real* row = x.data() + (b * F + f) * M;
        for (std::int64_t m = 0; m < M; ++m) sum += row[m];
      }
      mu = sum / static_cast<double>(n);
      double sq = 0;
      for (std::int64_t b = 0; b < B; ++b) {
        const Real* row = x.data() + (b * F + f) * M;
        for (std::int64_t m = 0; m < M; ++m) {
          const double d = static_cast<double>(row[m]) - mu;
          sq += d * d;
        }
      }
      var = sq / static_cast<double>(n);
      running_mean[f] = static_cast<Real>((1.0 - momentum) * running_mean[f] +
                                          momentum * mu);
      running_var[f] = static_cast<Real>((1.0 - momentum) * running_var[f] +
                                         momentum * var);
    } else {
      mu = running_mean[f];
      var = running_var[f];
    }
    const Real inv = static_cast<Real>(1.0 / std::sqrt(var + eps));
    const Real muf = static_cast<Real>(mu);
    const Real gf = gamma[f], bf = beta[f];
    if (cache) cache->inv_std[static_cast<std::size_t>(f)] = inv;
    for (std::int64_t b = 0; b < B; ++b) {
      const Real* row = x.data() + (b * F + f) * M;
      Real* yrow = y.data() + (b * F + f) * M;
      Real* hrow = cache ? cache->xhat.data() + (b * F + f) * M : nullptr;
      for (std::int64_t m = 0; m < M; ++m) {
        const Real h = (row[m] - muf) * inv;
        if (hrow) hrow[m] = h;
        yrow[m] = gf * h + bf;
      }
    }
  }
  return y;
}

// Train mode differentiates through the batch statistics; infer mode is a
// per-feature affine map.
template <class Real>
void batchnorm_backward(const BatchNormCache<Real>& cache,
                        const Tensor<Real>& gamma, const Tensor<Real>& g,
                        Tensor<Real>& dx, Tensor<Real>& dgamma,
                        Tensor<Real>& dbeta) {
  const std::int64_t B = g.extent(0), F = g.extent(1);
  std::int64_t M = 1;
  for (std::int64_t a = 2; a < g.rank(); ++a) M *= g.extent(a);
  const double n = static_cast<double>(B * M);
  for (std::int64_t f = 0; f < F; ++f) {
    double sum_g = 0, sum_gh = 0;
    for (std::int64_t b = 0; b < B; ++b) {
      const Real* grow = g.data() + (b * F + f) * M;
      const Real* hrow = cache.xhat.data() + (b * F + f) * M;
      for (std::int64_t m = 0; m < M; ++m) {
        sum_g += grow[m];
        sum_gh += static_cast<double>(grow[m]) * hrow[m];
      }
    }
    dbeta[f] += static_cast<Real>(sum_g);
    dgamma[f] += static_cast<Real>(sum_gh);
    const double inv = cache.inv_std[static_cast<std::size_t>(f)];
    const double gf = gamma[f];
    for (std::int64_t b = 0; b < B; ++b) {
      const Real* grow = g.data() + (b * F + f) * M;
      const Real* hrow = cache.xhat.data() + (b * F + f) * M;
      Real* dxrow = dx.data() + (b * F + f) * M;
      if (cache.train) {
        for (std::int64_t m = 0; m < M; ++m) {
          const double term = n * grow[m] - sum_g - hrow[m] * sum_gh;
          dxrow[m] += static_cast<Real>(gf * inv * term / n);
        }
      } else {
        for (std::int64_t m = 0; m < M; ++m) {
          dxrow[m] += static_cast<Real>(gf * inv * grow[m]);
        }
      }
    }
  }
}

// ---- dropout ------------------------------------------------------------

// Inverted scaling: survivors are divided by (1 - p) so inference is the
// identity. The mask holds the applied per-element scale (0 or 1/(1-p));
// in infer mode it is all ones. Mask draws consume one uniform per element
// regardless of p, so streams stay aligned across configurations.
template <class Real>
Tensor<Real> dropout_forward(const Tensor<Real>& x, double p, Mode mode,
                             RngStream rng, Tensor<Real>* mask) {
  if (!(p >= 0.0 && p < 1.0)) {
    throw ValueError("dropout: p must be in [0, 1)");
  }
  Tensor<Real> y(x.shape());
  if (mask) *mask = Tensor<Real>(x.shape(), Real(1));
  const Real* xs = x.data();
  Real* ys = y.data();
  if (mode == Mode::infer) {
    std::copy(xs, xs + x.size(), ys);
    return y;
  }
  const Real scale = static_cast<Real>(1.0 / (1.0 - p));
  Real* ms = mask ? mask->data() : nullptr;
  for (std::int64_t i = 0; i < x.size(); ++i) {
    const bool keep = rng.uniform01() >= p;
    const Real s = keep ? scale : Real(0);
    ys[i] = s * xs[i];
    if (ms) ms[i] = s;
  }
  return y;
}

template <class Real>
void dropout_backward(const Tensor<Real>& mask, const Tensor<Real>& g,
                      Tensor<Real>& dx) {
  detail::require(mask.same_shape(g) && mask.same_shape(dx),
                  "dropout_backward: shape mismatch");
  const Real* ms = mask.data();
  const Real* gs = g.data();
  Real* ds = dx.data();
  for (std::int64_t i = 0; i < g.size(); ++i) ds[i] += gs[i] * ms[i];
}

// Per-sample convenience form.
template <class Real>
Tensor<Real> dropout(const Tensor<Real>& x, double p, Mode mode,
                     RngStream rng) {
  return dropout_forward(x, p, mode, rng, static_cast<Tensor<Real>*>(nullptr));
}

// ---- axis swap -----------------------------------------------------------

template <class Real>
Tensor<Real> transpose_swap(const Tensor<Real>& x, std::int64_t a,
                            std::int64_t b) {
  if (a < 0 || b < 0 || a >= x.rank() || b >= x.rank()) {
    throw ShapeError("transpose_swap: axis out of range");
  }
  std::vector<std::int64_t> oshape = x.shape();
  std::swap(oshape[static_cast<std::size_t>(a)],
            oshape[static_cast<std::size_t>(b)]);
  Tensor<Real> y(oshape);
  if (a == b || x.size() == 0) {
    std::copy(x.data(), x.data() + x.size(), y.data());
    return y;
  }
  const std::int64_t rank = x.rank();
  std::vector<std::int64_t> xstride(static_cast<std::size_t>(rank), 1);
  for (std::int64_t i = rank - 2; i >= 0; --i) {
    xstride[static_cast<std::size_t>(i)] =
        xstride[static_cast<std::size_t>(i + 1)] * x.extent(i + 1);
  }
  // Walk the output linearly; decode its index against the swapped shape and
  // re-encode against the input strides with axes a and b exchanged.
  std::vector<std::int64_t> idx(static_cast<std::size_t>(rank), 0);
  const Real* xs = x.data();
  Real* ys = y.data();
  for (std::int64_t n = 0; n < y.size(); ++n) {
    std::int64_t off = 0;
    for (std::int64_t i = 0; i < rank; ++i) {
      std::int64_t src_axis = i;
      if (i == a) src_axis = b;
      else if (i == b) src_axis = a;
      off += idx[static_cast<std::size_t>(i)] *
             xstride[static_cast<std::size_t>(src_axis)];
    }
    ys[n] = xs[off];
    for (std::int64_t i = rank - 1; i >= 0; --i) {
      if (++idx[static_cast<std::size_t>(i)] < oshape[static_cast<std::size_t>(i)]) break;
      idx[static_cast<std::size_t>(i)] = 0;
    }
  }
  return y;
}

// ---- affine / softmax / cross entropy -------------------------------------

// z = x W^T + b. x: (B, D), w: (N, D), b: (N) -> (B, N)
template <class Real>
Tensor<Real> affine_forward_batch(const Tensor<Real>& x, const Tensor<Real>& w,
                                  const Tensor<Real>& bias) {
  detail::require(x.rank() == 2 && w.rank() == 2 && bias.rank() == 1,
                  "affine: x (B, D), w (N, D), bias (N)");
  detail::require(x.extent(1) == w.extent(1) && bias.extent(0) == w.extent(0),
                  "affine: dimensions disagree");
  const std::int64_t B = x.extent(0), D = x.extent(1), N = w.extent(0);
  Tensor<Real> z({B, N});
  for (std::int64_t b = 0; b < B; ++b) {
    const Real* xrow = x.data() + b * D;
    for (std::int64_t nn = 0; nn < N; ++nn) {
      const Real* wrow = w.data() + nn * D;
      double acc = bias[nn];
      for (std::int64_t d = 0; d < D; ++d) acc += static_cast<double>(wrow[d]) * xrow[d];
      z(b, nn) = static_cast<Real>(acc);
    }
  }
  return z;
}

template <class Real>
void affine_backward_batch(const Tensor<Real>& x, const Tensor<Real>& w,
                           const Tensor<Real>& gz, Tensor<Real>& dx,
                           Tensor<Real>& dw, Tensor<Real>& db) {
  const std::int64_t B = x.extent(0), D = x.extent(1), N = w.extent(0);
  detail::require(gz.rank() == 2 && gz.extent(0) == B && gz.extent(1) == N,
                  "affine_backward: bad gradient shape");
  for (std::int64_t b = 0; b < B; ++b) {
    const Real* xrow = x.data() + b * D;
    Real* dxrow = dx.data() + b * D;
    for (std::int64_t nn = 0; nn < N; ++nn) {
      const Real gv = gz(b, nn);
      db[nn] += gv;
      const Real* wrow = w.data() + nn * D;
      Real* dwrow = dw.data() + nn * D;
      for (std::int64_t d = 0; d < D; ++d) {
        dxrow[d] += gv * wrow[d];
        dwrow[d] += gv * xrow[d];
      }
    }
  }
}

// Row softmax with max subtraction.
template <class Real>
Tensor<Real> softmax_rows(const Tensor<Real>& z) {
  detail::require(z.rank() == 2 && z.extent(1) >= 1, "softmax: z must be (B, N)");
  const std::int64_t B = z.extent(0), N = z.extent(1);
  Tensor<Real> p(z.shape());
  for (std::int64_t b = 0; b < B; ++b) {
    const Real* zrow = z.data() + b * N;
    Real* prow = p.data() + b * N;
    Real m = zrow[0];
    for (std::int64_t n = 1; n < N; ++n) m = std::max(m, zrow[n]);
    double sum = 0;
    for (std::int64_t n = 0; n < N; ++n) {
      const double e = std::exp(static_cast<double>(zrow[n] - m));
      prow[n] = static_cast<Real>(e);
      sum += e;
    }
    const Real inv = static_cast<Real>(1.0 / sum);
    for (std::int64_t n = 0; n < N; ++n) prow[n] *= inv;
  }
  return p;
}

// dz from dL/dp for a softmax that produced p: dz_i = p_i (g_i - sum_j g_j p_j).
template <class Real>
void softmax_backward_rows(const Tensor<Real>& p, const Tensor<Real>& gp,
                           Tensor<Real>& dz) {
  const std::int64_t B = p.extent(0), N = p.extent(1);
  for (std::int64_t b = 0; b < B; ++b) {
    const Real* prow = p.data() + b * N;
    const Real* grow = gp.data() + b * N;
    Real* drow = dz.data() + b * N;
    double dot = 0;
    for (std::int64_t n = 0; n < N; ++n) dot += static_cast<double>(grow[n]) * prow[n];
    for (std::int64_t n = 0; n < N; ++n) {
      drow[n] += static_cast<Real>(prow[n] * (grow[n] - dot));
    }
  }
}

// Fused dense layer + softmax. x: (B, D) -> probabilities (B, N).
template <class Real>
Tensor<Real> affine_softmax_batch(const Tensor<Real>& x, const Tensor<Real>& w,
                                  const Tensor<Real>& bias) {
  return softmax_rows(affine_forward_batch(x, w, bias));
}

// Per-sample form: x (D) -> (N).
template <class Real>
Tensor<Real> affine_softmax(const Tensor<Real>& x, const Tensor<Real>& w,
                            const Tensor<Real>& bias) {
  detail::require(x.rank() == 1, "affine_softmax: x must be (D)");
  Tensor<Real> xb = x.reshaped({1, x.extent(0)});
  return affine_softmax_batch(xb, w, bias).reshaped({w.extent(0)});
}

// Probabilities are floored at the smallest positive normal value before the
// log so a zero probability yields a large finite loss, never inf.
template <class Real>
Real cross_entropy_floor() {
  return std::numeric_limits<Real>::min();
}

// Per-sample losses. p: (B, N), labels in [0, N).
template <class Real>
Tensor<Real> cross_entropy_losses(const Tensor<Real>& p,
                                  const std::vector<int>& labels) {
  detail::require(p.rank() == 2, "cross_entropy: p must be (B, N)");
  const std::int64_t B = p.extent(0), N = p.extent(1);
  if (static_cast<std::int64_t>(labels.size()) != B) {
    throw ShapeError("cross_entropy: label count does not match batch");
  }
  Tensor<Real> losses({B});
  for (std::int64_t b = 0; b < B; ++b) {
    const int lab = labels[static_cast<std::size_t>(b)];
    if (lab < 0 || lab >= N) {
      throw DataError("cross_entropy: label " + std::to_string(lab) +
                      " out of range for " + std::to_string(N) + " classes");
    }
    const Real pv = std::max(p(b, lab), cross_entropy_floor<Real>());
    losses[b] = -std::log(pv);
  }
  return losses;
}

// dL/dp given upstream per-sample gradients. Where the probability was below
// the floor the loss is locally constant, so the gradient is zero there.
template <class Real>
void cross_entropy_backward(const Tensor<Real>& p, const std::vector<int>& labels,
                            const Tensor<Real>& glosses, Tensor<Real>& dp) {
  const std::int64_t B = p.extent(0), N = p.extent(1);
  for (std::int64_t b = 0; b < B; ++b) {
    const int lab = labels[static_cast<std::size_t>(b)];
    const Real pv = p(b, lab);
    if (pv >= cross_entropy_floor<Real>()) {
      dp(b, lab) -= glosses[b] / pv;
    }
  }
  (void)N;
}

// Per-sample form: p (N), one label -> scalar loss.
template <class Real>
Real cross_entropy(const Tensor<Real>& p, int label) {
  detail::require(p.rank() == 1, "cross_entropy: p must be (N)");
  Tensor<Real> pb = p.reshaped({1, p.extent(0)});
  return cross_entropy_losses(pb, std::vector<int>{label})[0];
}

}  // namespace eegnet
