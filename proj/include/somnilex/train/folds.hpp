#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "somnilex/common.hpp"

namespace somnilex {

// Subject-wise cross-validation plan: every subject lands in exactly one
// fold, folds differ in size by at most one subject.
struct FoldPlan {
  int k = 0;
  std::map<std::string, int> assignments;  // subject_id -> fold index

  std::vector<std::string> fold_subjects(int fold) const {
    std::vector<std::string> out;
    for (const auto& [id, f] : assignments)
      if (f == fold) out.push_back(id);
    return out;
  }
};

// Deterministic plan: shuffle subject ids by seed, assign round-robin.
inline FoldPlan make_folds(std::vector<std::string> subject_ids, int k,
                           std::uint64_t seed) {
  if (k < 1) throw ConfigError("fold count must be >= 1");
  if (static_cast<int>(subject_ids.size()) < k)
    throw ConfigError("cannot split " + std::to_string(subject_ids.size()) +
                      " subjects into " + std::to_string(k) +
                      " folds; use a smaller k");
  for (std::size_t i = 0; i + 1 < subject_ids.size(); ++i)
    for (std::size_t j = i + 1; j < subject_ids.size(); ++j)
      if (subject_ids[i] == subject_ids[j])
        throw ConfigError("duplicate subject id: " + subject_ids[i]);

  std::sort(subject_ids.begin(), subject_ids.end());
  Rng rng(derive_seed(seed, "folds"));
  rng.shuffle(subject_ids);

  FoldPlan plan;
  plan.k = k;
  for (std::size_t i = 0; i < subject_ids.size(); ++i)
    plan.assignments[subject_ids[i]] = static_cast<int>(i % k);
  return plan;
}

}  // namespace somnilex
