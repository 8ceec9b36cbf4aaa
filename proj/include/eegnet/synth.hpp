#pragma once

// Synthetic EEG with a known ground truth. Two paradigms:
//
//   erp:         class 1 adds a raised-cosine bump on a channel subset at a
//                fixed latency; class 0 is noise only.
//   oscillatory: every trial carries band-limited activity on all channels;
//                the class attenuates that band's amplitude on its own
//                channel group (snr 0 -> no attenuation -> classes identical).
//
// Background noise is 1/f ("pink") with exact unit RMS per channel, so the
// erp `snr` is the template's peak amplitude over the noise RMS. Per-subject
// gain and latency jitter make multi-subject sets non-exchangeable, which is
// what cross-subject fold schemes need to be tested against.
//
// Every trial draws from its own stream derived from the trial index, and
// both classes consume draws identically, so datasets are reproducible and
// class differences come only from the injected effect.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include "eegnet/epochs.hpp"
#include "eegnet/error.hpp"
#include "eegnet/rng.hpp"
#include "eegnet/tensor.hpp"

namespace eegnet::synth {

enum class Paradigm { erp, oscillatory };

inline const char* paradigm_name(Paradigm p) {
  return p == Paradigm::erp ? "erp" : "oscillatory";
}

inline Paradigm paradigm_from_name(const std::string& s) {
  if (s == "erp") return Paradigm::erp;
  if (s == "oscillatory") return Paradigm::oscillatory;
  throw ValueError("unknown paradigm: " + s);
}

struct SyntheticSpec {
  Paradigm paradigm = Paradigm::erp;
  std::int64_t channels = 16;
  std::int64_t samples = 128;
  double rate = 128.0;
  std::int64_t n_classes = 2;
  std::int64_t n_subjects = 1;
  double snr = 2.0;
  double noise_amplitude = 1.0;  // 0 turns the background off entirely

  // erp
  double erp_latency = 0.3;  // seconds after trial start
  double erp_width = 0.3;    // full width of the raised cosine
  std::vector<std::int64_t> erp_channels;  // empty: middle half of channels

  // oscillatory
  double band_lo = 8.0;
  double band_hi = 12.0;
  std::vector<std::vector<std::int64_t>> class_channels;  // empty: contiguous groups

  // per-subject variation
  double subject_gain_jitter = 0.2;      // amplitude scaled by U[1-j, 1+j]
  double subject_latency_jitter = 0.03;  // latency shifted by U[-j, j] seconds

  void validate() const {
    if (channels < 1) throw ValueError("synth: channels must be positive");
    if (samples < 16) throw ValueError("synth: needs at least 16 samples");
    if (rate <= 0) throw ValueError("synth: rate must be positive");
    if (n_subjects < 1) throw ValueError("synth: needs at least one subject");
    if (snr < 0) throw ValueError("synth: snr must be non-negative");
    if (noise_amplitude < 0) throw ValueError("synth: negative noise amplitude");
    if (subject_gain_jitter < 0 || subject_gain_jitter >= 1) {
      throw ValueError("synth: gain jitter must be in [0, 1)");
    }
    if (subject_latency_jitter < 0) throw ValueError("synth: negative latency jitter");
    if (paradigm == Paradigm::erp) {
      if (n_classes != 2) throw ValueError("synth: erp paradigm is binary");
      if (erp_width <= 0) throw ValueError("synth: erp width must be positive");
      if (erp_latency < 0 || erp_latency * rate >= static_cast<double>(samples)) {
        throw ValueError("synth: erp latency outside the trial window");
      }
      for (std::int64_t c : erp_channels) {
        if (c < 0 || c >= channels) throw ValueError("synth: erp channel out of range");
      }
    } else {
      if (n_classes < 2) throw ValueError("synth: need at least 2 classes");
      if (!(0 < band_lo && band_lo < band_hi && band_hi < rate / 2)) {
        throw ValueError("synth: need 0 < band_lo < band_hi < rate / 2");
      }
      if (!class_channels.empty()) {
        if (static_cast<std::int64_t>(class_channels.size()) != n_classes) {
          throw ValueError("synth: one channel group per class required");
        }
        for (const auto& grp : class_channels) {
          for (std::int64_t c : grp) {
            if (c < 0 || c >= channels) {
              throw ValueError("synth: class channel out of range");
            }
          }
        }
      }
    }
  }
};

// 1/f noise: spectral power proportional to 1/k over the positive DFT bins,
// zero DC, random Gaussian amplitudes, then each channel rescaled to unit
// RMS. Direct evaluation through a shared table of cos/sin values; index
// arithmetic stays in integers ((k*t) mod T advances by k each sample).
inline Tensor<double> pink_noise(std::int64_t channels, std::int64_t samples,
                                 RngStream& rng) {
  if (channels < 1 || samples < 2) {
    throw ValueError("pink_noise: needs at least one channel and two samples");
  }
  const std::int64_t T = samples;
  std::vector<double> cos_t(static_cast<std::size_t>(T)), sin_t(static_cast<std::size_t>(T));
  for (std::int64_t m = 0; m < T; ++m) {
    const double ang = 2.0 * std::numbers::pi * static_cast<double>(m) / static_cast<double>(T);
    cos_t[static_cast<std::size_t>(m)] = std::cos(ang);
    sin_t[static_cast<std::size_t>(m)] = std::sin(ang);
  }
  const std::int64_t k_max = T / 2;
  Tensor<double> out({channels, T});
  for (std::int64_t c = 0; c < channels; ++c) {
    double* x = out.data() + c * T;
    for (std::int64_t k = 1; k <= k_max; ++k) {
      const double amp = 1.0 / std::sqrt(static_cast<double>(k));
      const double a = amp * rng.normal();
      const double b = amp * rng.normal();
      const bool nyquist = (T % 2 == 0) && (k == k_max);
      std::int64_t idx = 0;
      if (nyquist) {
        for (std::int64_t t = 0; t < T; ++t) {
          x[t] += a * cos_t[static_cast<std::size_t>(idx)];
          idx += k;
          if (idx >= T) idx -= T;
        }
      } else {
        for (std::int64_t t = 0; t < T; ++t) {
          x[t] += a * cos_t[static_cast<std::size_t>(idx)] +
                  b * sin_t[static_cast<std::size_t>(idx)];
          idx += k;
          if (idx >= T) idx -= T;
        }
      }
    }
    double sq = 0;
    for (std::int64_t t = 0; t < T; ++t) sq += x[t] * x[t];
    const double rms = std::sqrt(sq / static_cast<double>(T));
    if (rms > 0) {
      const double inv = 1.0 / rms;
      for (std::int64_t t = 0; t < T; ++t) x[t] *= inv;
    }
  }
  return out;
}

namespace detail {

// Flat-spectrum noise restricted to [lo, hi] Hz, unit RMS.
inline std::vector<double> band_noise(std::int64_t T, double rate, double lo,
                                      double hi, RngStream& rng) {
  const auto k_lo = static_cast<std::int64_t>(
      std::ceil(lo * static_cast<double>(T) / rate));
  const auto k_hi = static_cast<std::int64_t>(
      std::floor(hi * static_cast<double>(T) / rate));
  if (k_lo < 1 || k_hi < k_lo) {
    throw ValueError("synth: band holds no DFT bins for this window");
  }
  std::vector<double> x(static_cast<std::size_t>(T), 0.0);
  for (std::int64_t k = k_lo; k <= k_hi && k <= T / 2; ++k) {
    const double a = rng.normal();
    const double b = rng.normal();
    for (std::int64_t t = 0; t < T; ++t) {
      const double ang = 2.0 * std::numbers::pi * static_cast<double>(k) *
                         static_cast<double>(t) / static_cast<double>(T);
      x[static_cast<std::size_t>(t)] += a * std::cos(ang) + b * std::sin(ang);
    }
  }
  double sq = 0;
  for (double v : x) sq += v * v;
  const double rms = std::sqrt(sq / static_cast<double>(T));
  if (rms > 0) {
    for (double& v : x) v /= rms;
  }
  return x;
}

struct SubjectDraw {
  double gain = 1.0;
  double latency_shift = 0.0;
};

inline SubjectDraw subject_draw(const SyntheticSpec& spec, const RngStream& rng,
                                std::int64_t subject) {
  RngStream s = rng.derive("subject").derive(static_cast<std::uint64_t>(subject));
  SubjectDraw d;
  d.gain = 1.0 + spec.subject_gain_jitter * s.uniform(-1.0, 1.0);
  d.latency_shift = spec.subject_latency_jitter * s.uniform(-1.0, 1.0);
  return d;
}

inline std::vector<std::int64_t> default_erp_channels(std::int64_t channels) {
  std::vector<std::int64_t> out;
  for (std::int64_t c = channels / 4; c < channels - channels / 4; ++c) {
    out.push_back(c);
  }
  if (out.empty()) out.push_back(0);
  return out;
}

inline std::vector<std::vector<std::int64_t>> default_class_channels(
    std::int64_t channels, std::int64_t n_classes) {
  std::vector<std::vector<std::int64_t>> out(static_cast<std::size_t>(n_classes));
  for (std::int64_t c = 0; c < channels; ++c) {
    out[static_cast<std::size_t>(c * n_classes / channels)].push_back(c);
  }
  return out;
}

inline void start_set(const SyntheticSpec& spec, EpochSet& set) {
  set.channels = spec.channels;
  set.samples = spec.samples;
  set.n_classes = spec.n_classes;
  set.rate = spec.rate;
  set.window_start = 0;
  set.window_end = static_cast<double>(spec.samples) / spec.rate;
}

}  // namespace detail

// Raised-cosine bump of full width `width` centered at `latency` seconds.
inline double erp_template(double t, double latency, double width) {
  const double d = t - latency;
  if (std::abs(d) >= width / 2) return 0.0;
  return 0.5 * (1.0 + std::cos(2.0 * std::numbers::pi * d / width));
}

// Labels alternate (trial i gets i mod n_classes) and subjects cycle every
// n_classes trials, so classes are balanced overall and within subjects
// whenever the counts divide evenly.
inline EpochSet gen_erp_dataset(const SyntheticSpec& spec, std::int64_t n_trials,
                                const RngStream& rng) {
  spec.validate();
  if (spec.paradigm != Paradigm::erp) {
    throw ValueError("gen_erp_dataset: spec paradigm is not erp");
  }
  if (n_trials < 1) throw ValueError("synth: n_trials must be positive");
  const std::vector<std::int64_t> targets =
      spec.erp_channels.empty() ? detail::default_erp_channels(spec.channels)
                                : spec.erp_channels;
  std::vector<detail::SubjectDraw> subs;
  for (std::int64_t s = 0; s < spec.n_subjects; ++s) {
    subs.push_back(detail::subject_draw(spec, rng, s));
  }
  EpochSet set;
  detail::start_set(spec, set);
  set.data.reserve(static_cast<std::size_t>(n_trials * spec.channels * spec.samples));
  const std::int64_t T = spec.samples;
  for (std::int64_t i = 0; i < n_trials; ++i) {
    const auto label = static_cast<std::uint16_t>(i % spec.n_classes);
    const std::int64_t subject = (i / spec.n_classes) % spec.n_subjects;
    const detail::SubjectDraw& sd = subs[static_cast<std::size_t>(subject)];
    RngStream ts = rng.derive("trial").derive(static_cast<std::uint64_t>(i));
    Tensor<double> x = pink_noise(spec.channels, T, ts);
    if (spec.noise_amplitude != 1.0) {
      for (std::int64_t n = 0; n < x.size(); ++n) x[n] *= spec.noise_amplitude;
    }
    // class 0 adds the template scaled by zero so both classes share the
    // same code path and draw count
    const double amp = (label == 1 ? spec.snr * sd.gain : 0.0);
    const double lat = spec.erp_latency + sd.latency_shift;
    for (std::int64_t ch : targets) {
      double* row = x.data() + ch * T;
      for (std::int64_t t = 0; t < T; ++t) {
        row[t] += amp * erp_template(static_cast<double>(t) / spec.rate, lat,
                                     spec.erp_width);
      }
    }
    for (std::int64_t n = 0; n < x.size(); ++n) {
      set.data.push_back(static_cast<float>(x[n]));
    }
    set.labels.push_back(label);
    set.subjects.push_back(static_cast<std::uint32_t>(subject));
  }
  set.validate();
  return set;
}

// The attenuation depth snr / (1 + snr) maps snr 0 to identical classes and
// large snr to near-complete suppression of the band on the class's channels.
inline EpochSet gen_oscillatory_dataset(const SyntheticSpec& spec,
                                        std::int64_t n_trials,
                                        const RngStream& rng) {
  spec.validate();
  if (spec.paradigm != Paradigm::oscillatory) {
    throw ValueError("gen_oscillatory_dataset: spec paradigm is not oscillatory");
  }
  if (n_trials < 1) throw ValueError("synth: n_trials must be positive");
  const auto groups = spec.class_channels.empty()
                          ? detail::default_class_channels(spec.channels, spec.n_classes)
                          : spec.class_channels;
  std::vector<bool> in_group;  // reused per trial
  std::vector<detail::SubjectDraw> subs;
  for (std::int64_t s = 0; s < spec.n_subjects; ++s) {
    subs.push_back(detail::subject_draw(spec, rng, s));
  }
  const double depth = spec.snr / (1.0 + spec.snr);
  EpochSet set;
  detail::start_set(spec, set);
  set.data.reserve(static_cast<std::size_t>(n_trials * spec.channels * spec.samples));
  const std::int64_t T = spec.samples;
  for (std::int64_t i = 0; i < n_trials; ++i) {
    const auto label = static_cast<std::uint16_t>(i % spec.n_classes);
    const std::int64_t subject = (i / spec.n_classes) % spec.n_subjects;
    const detail::SubjectDraw& sd = subs[static_cast<std::size_t>(subject)];
    RngStream ts = rng.derive("trial").derive(static_cast<std::uint64_t>(i));
    Tensor<double> x = pink_noise(spec.channels, T, ts);
    if (spec.noise_amplitude != 1.0) {
      for (std::int64_t n = 0; n < x.size(); ++n) x[n] *= spec.noise_amplitude;
    }
    in_group.assign(static_cast<std::size_t>(spec.channels), false);
    for (std::int64_t ch : groups[label]) {
      in_group[static_cast<std::size_t>(ch)] = true;
    }
    for (std::int64_t ch = 0; ch < spec.channels; ++ch) {
      const std::vector<double> osc =
          detail::band_noise(T, spec.rate, spec.band_lo, spec.band_hi, ts);
      const double scale =
          sd.gain * (in_group[static_cast<std::size_t>(ch)] ? 1.0 - depth : 1.0);
      double* row = x.data() + ch * T;
      for (std::int64_t t = 0; t < T; ++t) {
        row[t] += scale * osc[static_cast<std::size_t>(t)];
      }
    }
    for (std::int64_t n = 0; n < x.size(); ++n) {
      set.data.push_back(static_cast<float>(x[n]));
    }
    set.labels.push_back(label);
    set.subjects.push_back(static_cast<std::uint32_t>(subject));
  }
  set.validate();
  return set;
}

inline EpochSet gen_dataset(const SyntheticSpec& spec, std::int64_t n_trials,
                            const RngStream& rng) {
  return spec.paradigm == Paradigm::erp
             ? gen_erp_dataset(spec, n_trials, rng)
             : gen_oscillatory_dataset(spec, n_trials, rng);
}

}  // namespace eegnet::synth
