#pragma once

// Cross-validation plans over subjects. A fold names subjects per role; a
// subject can contribute either its whole trial set or a designated half,
// which is how the nine-fold leave-one-subject-out scheme reuses one
// subject's recording for both validation and test without overlap.

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "eegnet/error.hpp"
#include "eegnet/rng.hpp"

namespace eegnet {

enum class Portion : std::uint8_t { all, train_half, test_half };

inline const char* portion_name(Portion p) {
  switch (p) {
    case Portion::all: return "all";
    case Portion::train_half: return "train_half";
    case Portion::test_half: return "test_half";
  }
  throw ValueError("unknown portion");
}

struct SubjectRef {
  std::uint32_t subject = 0;
  Portion portion = Portion::all;
  bool operator==(const SubjectRef&) const = default;
};

struct Fold {
  std::vector<SubjectRef> train;
  std::vector<SubjectRef> validation;
  std::vector<SubjectRef> test;
};

struct FoldPlan {
  std::vector<Fold> folds;
};

namespace detail {

inline void check_no_overlap(const Fold& fold) {
  const std::vector<const std::vector<SubjectRef>*> roles = {
      &fold.train, &fold.validation, &fold.test};
  for (std::size_t a = 0; a < roles.size(); ++a) {
    for (std::size_t b = a + 1; b < roles.size(); ++b) {
      for (const SubjectRef& x : *roles[a]) {
        for (const SubjectRef& y : *roles[b]) {
          if (x.subject != y.subject) continue;
          const bool disjoint_halves =
              (x.portion == Portion::train_half && y.portion == Portion::test_half) ||
              (x.portion == Portion::test_half && y.portion == Portion::train_half);
          if (!disjoint_halves) {
            throw InvariantError("folds: subject " + std::to_string(x.subject) +
                                 " appears in two roles with overlapping data");
          }
        }
      }
    }
  }
}

inline void check_unique(const std::vector<std::uint32_t>& subjects) {
  std::vector<std::uint32_t> s = subjects;
  std::sort(s.begin(), s.end());
  if (std::adjacent_find(s.begin(), s.end()) != s.end()) {
    throw DataError("folds: duplicate subject ids");
  }
}

}  // namespace detail

// n_folds independent random partitions of the subjects into
// train/validation/test of the given sizes. If fixed_test is non-empty those
// subjects form the test role of every fold and only the remainder is
// shuffled. Role lists come out sorted by subject id.
inline FoldPlan make_random_folds(const std::vector<std::uint32_t>& subjects,
                                  std::int64_t n_train, std::int64_t n_val,
                                  std::int64_t n_test, std::int64_t n_folds,
                                  const RngStream& rng,
                                  const std::vector<std::uint32_t>& fixed_test = {}) {
  if (subjects.empty()) throw DataError("folds: no subjects");
  detail::check_unique(subjects);
  if (n_train < 1 || n_val < 1 || n_test < 1 || n_folds < 1) {
    throw ValueError("folds: role sizes and fold count must be positive");
  }
  if (n_train + n_val + n_test != static_cast<std::int64_t>(subjects.size())) {
    throw ValueError("folds: role sizes must sum to the subject count");
  }
  std::vector<std::uint32_t> pool = subjects;
  if (!fixed_test.empty()) {
    if (static_cast<std::int64_t>(fixed_test.size()) != n_test) {
      throw ValueError("folds: fixed test set size disagrees with n_test");
    }
    detail::check_unique(fixed_test);
    for (std::uint32_t t : fixed_test) {
      auto it = std::find(pool.begin(), pool.end(), t);
      if (it == pool.end()) {
        throw DataError("folds: fixed test subject " + std::to_string(t) +
                        " not in the subject list");
      }
      pool.erase(it);
    }
  }
  FoldPlan plan;
  for (std::int64_t f = 0; f < n_folds; ++f) {
    RngStream stream = rng.derive(static_cast<std::uint64_t>(f));
    std::vector<std::uint32_t> order = pool;
    stream.shuffle(order);
    Fold fold;
    std::int64_t at = 0;
    for (std::int64_t i = 0; i < n_val; ++i) {
      fold.validation.push_back({order[static_cast<std::size_t>(at++)], Portion::all});
    }
    if (fixed_test.empty()) {
      for (std::int64_t i = 0; i < n_test; ++i) {
        fold.test.push_back({order[static_cast<std::size_t>(at++)], Portion::all});
      }
    } else {
      for (std::uint32_t t : fixed_test) fold.test.push_back({t, Portion::all});
    }
    while (at < static_cast<std::int64_t>(order.size())) {
      fold.train.push_back({order[static_cast<std::size_t>(at++)], Portion::all});
    }
    auto by_subject = [](const SubjectRef& a, const SubjectRef& b) {
      return a.subject < b.subject;
    };
    std::sort(fold.train.begin(), fold.train.end(), by_subject);
    std::sort(fold.validation.begin(), fold.validation.end(), by_subject);
    std::sort(fold.test.begin(), fold.test.end(), by_subject);
    detail::check_no_overlap(fold);
    plan.folds.push_back(std::move(fold));
  }
  return plan;
}

// One fold per subject k: subject k's test half is the test role, subject
// k's train half is the validation role, and every other subject's train
// half is the training role. Test halves of other subjects are never used.
inline FoldPlan make_smr_folds(const std::vector<std::uint32_t>& subjects) {
  if (subjects.size() < 2) {
    throw DataError("folds: leave-one-subject-out needs at least 2 subjects");
  }
  detail::check_unique(subjects);
  FoldPlan plan;
  for (std::size_t k = 0; k < subjects.size(); ++k) {
    Fold fold;
    for (std::size_t j = 0; j < subjects.size(); ++j) {
      if (j == k) continue;
      fold.train.push_back({subjects[j], Portion::train_half});
    }
    fold.validation.push_back({subjects[k], Portion::train_half});
    fold.test.push_back({subjects[k], Portion::test_half});
    detail::check_no_overlap(fold);
    plan.folds.push_back(std::move(fold));
  }
  return plan;
}

}  // namespace eegnet
