#pragma once

// Continuous recordings, epoched trial sets, and the .eege container.
//
// .eege layout, all little endian:
//   magic "EEGE" | u16 version | f64 rate | f64 window_start | f64 window_end
//   u32 channels | u32 samples | u32 n_trials | u32 n_classes
//   u32 n_subjects | n_subjects * u32 subject ids
//   n_trials * u16 subject index (into the id table)
//   n_trials * u16 label
//   n_trials * channels * samples * f32 payload, trial-major
//   u32 CRC-32 of every preceding byte

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "eegnet/binio.hpp"
#include "eegnet/error.hpp"
#include "eegnet/rng.hpp"
#include "eegnet/tensor.hpp"

namespace eegnet {

struct Event {
  std::int64_t sample = 0;
  std::uint16_t label = 0;
};

// Multichannel signal, channel-major storage (channels x samples).
struct ContinuousRecording {
  std::int64_t channels = 0;
  std::int64_t samples = 0;
  double rate = 0;
  std::vector<double> data;
  std::vector<Event> events;

  double* channel(std::int64_t c) { return data.data() + c * samples; }
  const double* channel(std::int64_t c) const { return data.data() + c * samples; }

  void validate() const {
    if (channels < 1 || samples < 1) throw DataError("recording: empty signal");
    if (rate <= 0) throw DataError("recording: rate must be positive");
    if (static_cast<std::int64_t>(data.size()) != channels * samples) {
      throw DataError("recording: data length does not match extents");
    }
    std::int64_t prev = -1;
    for (const Event& e : events) {
      if (e.sample <= prev) throw DataError("recording: events must be strictly increasing");
      if (e.sample < 0 || e.sample >= samples) {
        throw DataError("recording: event sample out of range");
      }
      prev = e.sample;
    }
  }
};

// Fixed-length labeled trials, trial-major float payload.
struct EpochSet {
  std::int64_t channels = 0;
  std::int64_t samples = 0;
  std::int64_t n_classes = 0;
  double rate = 0;
  double window_start = 0;
  double window_end = 0;
  std::vector<float> data;             // n_trials x channels x samples
  std::vector<std::uint16_t> labels;   // per trial
  std::vector<std::uint32_t> subjects; // per trial

  std::int64_t n_trials() const { return static_cast<std::int64_t>(labels.size()); }
  std::int64_t trial_len() const { return channels * samples; }

  const float* trial(std::int64_t i) const { return data.data() + i * trial_len(); }
  float* trial(std::int64_t i) { return data.data() + i * trial_len(); }

  void validate() const {
    if (channels < 1 || samples < 1) throw DataError("epochs: empty trial shape");
    if (rate <= 0) throw DataError("epochs: rate must be positive");
    if (n_classes < 2) throw DataError("epochs: need at least 2 classes");
    if (labels.size() != subjects.size()) {
      throw DataError("epochs: label/subject count mismatch");
    }
    if (static_cast<std::int64_t>(data.size()) != n_trials() * trial_len()) {
      throw DataError("epochs: payload length does not match trial count");
    }
    for (std::uint16_t lab : labels) {
      if (lab >= n_classes) throw DataError("epochs: label out of range");
    }
  }

  // Trials at `idx`, in the order given.
  EpochSet subset(const std::vector<std::int64_t>& idx) const {
    EpochSet out = like(*this);
    out.data.reserve(idx.size() * static_cast<std::size_t>(trial_len()));
    for (std::int64_t i : idx) {
      if (i < 0 || i >= n_trials()) throw DataError("epochs: subset index out of range");
      out.data.insert(out.data.end(), trial(i), trial(i) + trial_len());
      out.labels.push_back(labels[static_cast<std::size_t>(i)]);
      out.subjects.push_back(subjects[static_cast<std::size_t>(i)]);
    }
    return out;
  }

  static EpochSet like(const EpochSet& other) {
    EpochSet out;
    out.channels = other.channels;
    out.samples = other.samples;
    out.n_classes = other.n_classes;
    out.rate = other.rate;
    out.window_start = other.window_start;
    out.window_end = other.window_end;
    return out;
  }
};

inline EpochSet concat_epochs(const std::vector<const EpochSet*>& parts) {
  if (parts.empty()) throw DataError("epochs: nothing to concatenate");
  EpochSet out = EpochSet::like(*parts[0]);
  for (const EpochSet* p : parts) {
    if (p->channels != out.channels || p->samples != out.samples ||
        p->rate != out.rate || p->n_classes != out.n_classes) {
      throw DataError("epochs: incompatible sets in concatenation");
    }
    out.data.insert(out.data.end(), p->data.begin(), p->data.end());
    out.labels.insert(out.labels.end(), p->labels.begin(), p->labels.end());
    out.subjects.insert(out.subjects.end(), p->subjects.begin(), p->subjects.end());
  }
  return out;
}

// Cut fixed windows around the events. The window is [start, end) seconds
// relative to each event; its length in samples rounds half away from zero.
// A window that leaves the recording is an error rather than a silent skip.
inline EpochSet extract_epochs(const ContinuousRecording& rec,
                               double win_start, double win_end,
                               std::uint32_t subject_id,
                               std::int64_t n_classes) {
  rec.validate();
  if (!(win_end > win_start)) throw ValueError("extract: empty window");
  if (n_classes < 2) throw ValueError("extract: need at least 2 classes");
  const std::int64_t T = std::llround((win_end - win_start) * rec.rate);
  if (T < 1) throw ValueError("extract: window shorter than one sample");
  const std::int64_t offset = std::llround(win_start * rec.rate);
  EpochSet out;
  out.channels = rec.channels;
  out.samples = T;
  out.n_classes = n_classes;
  out.rate = rec.rate;
  out.window_start = win_start;
  out.window_end = win_end;
  if (rec.events.empty()) throw DataError("extract: recording has no events");
  out.data.reserve(rec.events.size() * static_cast<std::size_t>(rec.channels * T));
  for (const Event& e : rec.events) {
    if (e.label >= n_classes) throw DataError("extract: event label out of range");
    const std::int64_t s0 = e.sample + offset;
    if (s0 < 0 || s0 + T > rec.samples) {
      throw DataError("extract: window for event at sample " +
                      std::to_string(e.sample) + " leaves the recording");
    }
    for (std::int64_t c = 0; c < rec.channels; ++c) {
      const double* src = rec.channel(c) + s0;
      for (std::int64_t t = 0; t < T; ++t) {
        out.data.push_back(static_cast<float>(src[t]));
      }
    }
    out.labels.push_back(e.label);
    out.subjects.push_back(subject_id);
  }
  return out;
}

// Trim every class down to the size of the smallest one by removing uniformly
// chosen trials; surviving trials keep their original order.
inline EpochSet balance_classes(const EpochSet& set, RngStream rng) {
  set.validate();
  if (set.n_trials() == 0) throw DataError("balance: empty set");
  std::vector<std::vector<std::int64_t>> by_class(
      static_cast<std::size_t>(set.n_classes));
  for (std::int64_t i = 0; i < set.n_trials(); ++i) {
    by_class[set.labels[static_cast<std::size_t>(i)]].push_back(i);
  }
  std::size_t smallest = set.data.size();
  for (std::int64_t c = 0; c < set.n_classes; ++c) {
    const auto& grp = by_class[static_cast<std::size_t>(c)];
    if (grp.empty()) {
      throw DataError("balance: class " + std::to_string(c) + " has no trials");
    }
    smallest = std::min(smallest, grp.size());
  }
  std::vector<bool> drop(static_cast<std::size_t>(set.n_trials()), false);
  for (std::int64_t c = 0; c < set.n_classes; ++c) {
    const auto& grp = by_class[static_cast<std::size_t>(c)];
    const std::int64_t excess = static_cast<std::int64_t>(grp.size() - smallest);
    if (excess == 0) continue;
    for (std::int64_t pos : rng.sample_without_replacement(
             static_cast<std::int64_t>(grp.size()), excess)) {
      drop[static_cast<std::size_t>(grp[static_cast<std::size_t>(pos)])] = true;
    }
  }
  std::vector<std::int64_t> keep;
  for (std::int64_t i = 0; i < set.n_trials(); ++i) {
    if (!drop[static_cast<std::size_t>(i)]) keep.push_back(i);
  }
  return set.subset(keep);
}

// K distinct trials drawn uniformly, returned in draw order. K equal to the
// set size yields a permutation of the whole set.
inline EpochSet subsample_training(const EpochSet& set, std::int64_t k,
                                   RngStream rng) {
  if (k < 1 || k > set.n_trials()) {
    throw ValueError("subsample: k must be in [1, n_trials]");
  }
  return set.subset(rng.sample_without_replacement(set.n_trials(), k));
}

// ---- .eege io -------------------------------------------------------------

inline void write_epochs(const std::string& path, const EpochSet& set) {
  set.validate();
  if (set.n_classes > 0xffff) throw DataError("write_epochs: too many classes");
  std::vector<std::uint32_t> ids;
  std::vector<std::uint16_t> subject_index(set.subjects.size());
  for (std::size_t i = 0; i < set.subjects.size(); ++i) {
    const std::uint32_t s = set.subjects[i];
    auto it = std::find(ids.begin(), ids.end(), s);
    if (it == ids.end()) {
      ids.push_back(s);
      it = ids.end() - 1;
    }
    const auto idx = static_cast<std::size_t>(it - ids.begin());
    if (idx > 0xffff) throw DataError("write_epochs: too many subjects");
    subject_index[i] = static_cast<std::uint16_t>(idx);
  }
  std::ostringstream buf(std::ios::binary);
  buf.write("EEGE", 4);
  binio::write_u16(buf, 1);
  binio::write_f64(buf, set.rate);
  binio::write_f64(buf, set.window_start);
  binio::write_f64(buf, set.window_end);
  binio::write_u32(buf, static_cast<std::uint32_t>(set.channels));
  binio::write_u32(buf, static_cast<std::uint32_t>(set.samples));
  binio::write_u32(buf, static_cast<std::uint32_t>(set.n_trials()));
  binio::write_u32(buf, static_cast<std::uint32_t>(set.n_classes));
  binio::write_u32(buf, static_cast<std::uint32_t>(ids.size()));
  for (std::uint32_t id : ids) binio::write_u32(buf, id);
  for (std::uint16_t idx : subject_index) binio::write_u16(buf, idx);
  for (std::uint16_t lab : set.labels) binio::write_u16(buf, lab);
  for (float v : set.data) binio::write_f32(buf, v);
  std::string bytes = std::move(buf).str();
  const std::uint32_t crc = binio::crc32(bytes);
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("write_epochs: cannot open " + path);
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  binio::write_u32(os, crc);
  if (!os) throw FormatError("write_epochs: write failed for " + path);
}

inline EpochSet read_epochs(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("read_epochs: cannot open " + path);
  std::ostringstream raw;
  raw << is.rdbuf();
  std::string bytes = std::move(raw).str();
  if (bytes.size() < 4 + 2 + 3 * 8 + 4 * 4 + 4 + 4) {
    throw FormatError("read_epochs: file too short: " + path);
  }
  const std::string body = bytes.substr(0, bytes.size() - 4);
  std::istringstream bs(bytes.substr(bytes.size() - 4), std::ios::binary);
  const std::uint32_t stored_crc = binio::read_u32(bs);
  if (binio::crc32(body) != stored_crc) {
    throw FormatError("read_epochs: checksum mismatch in " + path);
  }
  std::istringstream in(body, std::ios::binary);
  char magic[4];
  in.read(magic, 4);
  if (std::string(magic, 4) != "EEGE") {
    throw FormatError("read_epochs: bad magic in " + path);
  }
  const std::uint16_t version = binio::read_u16(in);
  if (version != 1) {
    throw FormatError("read_epochs: unsupported version " + std::to_string(version));
  }
  EpochSet set;
  set.rate = binio::read_f64(in);
  set.window_start = binio::read_f64(in);
  set.window_end = binio::read_f64(in);
  set.channels = binio::read_u32(in);
  set.samples = binio::read_u32(in);
  const std::uint32_t n_trials = binio::read_u32(in);
  set.n_classes = binio::read_u32(in);
  const std::uint32_t n_subjects = binio::read_u32(in);
  std::vector<std::uint32_t> ids(n_subjects);
  for (auto& id : ids) id = binio::read_u32(in);
  std::vector<std::uint16_t> subject_index(n_trials);
  for (auto& idx : subject_index) {
    idx = binio::read_u16(in);
    if (idx >= n_subjects) {
      throw FormatError("read_epochs: subject index out of table range");
    }
  }
  set.labels.resize(n_trials);
  for (auto& lab : set.labels) lab = binio::read_u16(in);
  set.subjects.resize(n_trials);
  for (std::uint32_t i = 0; i < n_trials; ++i) {
    set.subjects[i] = ids[subject_index[i]];
  }
  const std::int64_t payload = static_cast<std::int64_t>(n_trials) *
                               set.channels * set.samples;
  set.data.resize(static_cast<std::size_t>(payload));
  for (auto& v : set.data) v = binio::read_f32(in);
  in.peek();
  if (!in.eof()) throw FormatError("read_epochs: trailing bytes in " + path);
  try {
    set.validate();
  } catch (const DataError& e) {
    throw FormatError(std::string("read_epochs: invalid contents: ") + e.what());
  }
  return set;
}

}  // namespace eegnet
