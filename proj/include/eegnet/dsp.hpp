#pragma once

// Butterworth bandpass design (analog prototype, lowpass-to-bandpass
// transform, bilinear mapping, second-order sections) and forward-backward
// zero-phase filtering with odd-reflection padding and steady-state initial
// conditions, so filtered recordings carry no phase distortion and no edge
// transients.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <vector>

#include "eegnet/epochs.hpp"
#include "eegnet/error.hpp"

namespace eegnet::dsp {

struct Biquad {
  double b0 = 0, b1 = 0, b2 = 0;  // numerator
  double a1 = 0, a2 = 0;          // denominator, a0 normalized to 1
};

struct SosFilter {
  std::vector<Biquad> sections;
  std::int64_t order() const {
    return 2 * static_cast<std::int64_t>(sections.size());
  }
};

// |H(f)| of the cascade at frequency f (Hz) for the given sample rate.
inline double sos_magnitude(const SosFilter& f, double freq, double rate) {
  const std::complex<double> zi =
      std::exp(std::complex<double>(0, -2.0 * std::numbers::pi * freq / rate));
  std::complex<double> h = 1.0;
  for (const Biquad& s : f.sections) {
    const std::complex<double> num = s.b0 + s.b1 * zi + s.b2 * zi * zi;
    const std::complex<double> den = 1.0 + s.a1 * zi + s.a2 * zi * zi;
    h *= num / den;
  }
  return std::abs(h);
}

// Bandpass with a prototype of `order` poles, so 2 * order poles total.
// Band edges land at the -3 dB points exactly (the bilinear prewarp maps
// them onto the analog prototype's cutoff).
inline SosFilter butter_bandpass(int order, double lo, double hi, double rate) {
  if (order < 1) throw ValueError("butter: order must be at least 1");
  if (rate <= 0) throw ValueError("butter: rate must be positive");
  if (!(0 < lo && lo < hi && hi < rate / 2)) {
    throw ValueError("butter: need 0 < lo < hi < rate / 2");
  }
  using cd = std::complex<double>;
  const double fs2 = 2.0 * rate;
  const double wlo = fs2 * std::tan(std::numbers::pi * lo / rate);
  const double whi = fs2 * std::tan(std::numbers::pi * hi / rate);
  const double w0 = std::sqrt(wlo * whi);
  const double bw = whi - wlo;

  // analog prototype poles on the unit circle, left half plane
  std::vector<cd> proto;
  for (int k = 0; k < order; ++k) {
    const double theta =
        std::numbers::pi * (2.0 * k + order + 1.0) / (2.0 * order);
    proto.emplace_back(std::cos(theta), std::sin(theta));
  }

  // lowpass -> bandpass: each prototype pole becomes two
  std::vector<cd> apoles;
  for (const cd& p : proto) {
    const cd q = p * (bw / 2.0);
    const cd r = std::sqrt(q * q - w0 * w0);
    apoles.push_back(q + r);
    apoles.push_back(q - r);
  }

  // bilinear transform; the analog gain is bw^order and the analog zeros are
  // `order` of them at s = 0
  std::vector<cd> dpoles;
  cd pole_prod = 1.0;
  for (const cd& p : apoles) {
    dpoles.push_back((fs2 + p) / (fs2 - p));
    pole_prod *= (fs2 - p);
  }
  const double gain =
      std::pow(bw, order) * (std::pow(fs2, order) / pole_prod).real();

  // pair each pole with the remaining pole closest to its conjugate
  std::vector<bool> used(dpoles.size(), false);
  std::vector<Biquad> sections;
  for (std::size_t i = 0; i < dpoles.size(); ++i) {
    if (used[i]) continue;
    used[i] = true;
    const cd want = std::conj(dpoles[i]);
    std::size_t best = dpoles.size();
    double best_d = 0;
    for (std::size_t j = i + 1; j < dpoles.size(); ++j) {
      if (used[j]) continue;
      const double d = std::abs(dpoles[j] - want);
      if (best == dpoles.size() || d < best_d) {
        best = j;
        best_d = d;
      }
    }
    if (best == dpoles.size()) throw NumericError("butter: unpaired pole");
    used[best] = true;
    const cd p1 = dpoles[i], p2 = dpoles[best];
    Biquad s;
    s.b0 = 1.0;
    s.b1 = 0.0;
    s.b2 = -1.0;  // one zero at z = 1, one at z = -1
    s.a1 = -(p1 + p2).real();
    s.a2 = (p1 * p2).real();
    sections.push_back(s);
  }
  // sections with poles furthest from the unit circle first
  std::sort(sections.begin(), sections.end(),
            [](const Biquad& x, const Biquad& y) { return x.a2 < y.a2; });
  sections.front().b0 *= gain;
  sections.front().b1 *= gain;
  sections.front().b2 *= gain;
  return SosFilter{std::move(sections)};
}

namespace detail {

// Direct form II transposed, one section, in place. z1/z2 carry state.
inline void run_biquad(const Biquad& s, double* x, std::int64_t n, double z1,
                       double z2) {
  for (std::int64_t i = 0; i < n; ++i) {
    const double in = x[i];
    const double out = s.b0 * in + z1;
    z1 = s.b1 * in - s.a1 * out + z2;
    z2 = s.b2 * in - s.a2 * out;
    x[i] = out;
  }
}

// Steady-state response of a section to a unit constant input.
inline double section_dc_gain(const Biquad& s) {
  return (s.b0 + s.b1 + s.b2) / (1.0 + s.a1 + s.a2);
}

// One cascade pass with initial conditions matching a constant input at the
// level of the first sample, so there is no startup transient on the pad.
inline void sos_filter_steady(const SosFilter& f, double* x, std::int64_t n) {
  double level = n > 0 ? x[0] : 0.0;
  for (const Biquad& s : f.sections) {
    const double h1 = section_dc_gain(s);
    const double z1 = (s.b1 + s.b2 - (s.a1 + s.a2) * h1) * level;
    const double z2 = (s.b2 - s.a2 * h1) * level;
    run_biquad(s, x, n, z1, z2);
    level *= h1;
  }
}

}  // namespace detail

// Zero-phase filtering: pad with odd reflection (3x the filter order on each
// side), run the cascade forward, then backward, and crop. The result has
// the squared magnitude response and no phase shift.
inline void filtfilt(const SosFilter& f, double* x, std::int64_t n) {
  const std::int64_t pad = 3 * f.order();
  if (n <= pad) {
    throw DataError("filtfilt: signal must be longer than 3x the filter order");
  }
  std::vector<double> ext(static_cast<std::size_t>(n + 2 * pad));
  for (std::int64_t i = 0; i < pad; ++i) {
    ext[static_cast<std::size_t>(i)] = 2.0 * x[0] - x[pad - i];
  }
  std::copy(x, x + n, ext.begin() + pad);
  for (std::int64_t i = 0; i < pad; ++i) {
    ext[static_cast<std::size_t>(n + pad + i)] = 2.0 * x[n - 1] - x[n - 2 - i];
  }
  const std::int64_t m = n + 2 * pad;
  detail::sos_filter_steady(f, ext.data(), m);
  std::reverse(ext.begin(), ext.end());
  detail::sos_filter_steady(f, ext.data(), m);
  std::reverse(ext.begin(), ext.end());
  std::copy(ext.begin() + pad, ext.begin() + pad + n, x);
}

// Zero-phase Butterworth bandpass over every channel of a recording.
inline ContinuousRecording bandpass(const ContinuousRecording& rec, double lo,
                                    double hi, int order = 4) {
  rec.validate();
  const SosFilter f = butter_bandpass(order, lo, hi, rec.rate);
  ContinuousRecording out = rec;
  for (std::int64_t c = 0; c < out.channels; ++c) {
    filtfilt(f, out.channel(c), out.samples);
  }
  return out;
}

// Integer decimation. Event sample indices divide by the factor; two events
// collapsing onto one output sample is an error because downstream epoch
// extraction needs distinct onsets.
inline ContinuousRecording downsample(const ContinuousRecording& rec,
                                      double target_rate) {
  rec.validate();
  if (target_rate <= 0) throw ValueError("downsample: target rate must be positive");
  const double ratio = rec.rate / target_rate;
  const auto factor = static_cast<std::int64_t>(std::llround(ratio));
  if (factor < 1 || std::abs(ratio - static_cast<double>(factor)) > 1e-9) {
    throw ValueError("downsample: rate must be an integer multiple of target");
  }
  if (factor == 1) return rec;
  ContinuousRecording out;
  out.channels = rec.channels;
  out.samples = (rec.samples + factor - 1) / factor;
  out.rate = target_rate;
  out.data.resize(static_cast<std::size_t>(out.channels * out.samples));
  for (std::int64_t c = 0; c < rec.channels; ++c) {
    const double* src = rec.channel(c);
    double* dst = out.channel(c);
    for (std::int64_t i = 0; i < out.samples; ++i) dst[i] = src[i * factor];
  }
  std::int64_t prev = -1;
  for (const Event& e : rec.events) {
    Event ne{e.sample / factor, e.label};
    if (ne.sample <= prev) {
      throw DataError("downsample: events collide after decimation");
    }
    prev = ne.sample;
    out.events.push_back(ne);
  }
  return out;
}

}  // namespace eegnet::dsp
