#ifndef GROUPLEARN_CLASSIFY_HPP
#define GROUPLEARN_CLASSIFY_HPP

#include <algorithm>
#include <array>
#include <span>
#include <vector>

#include "core.hpp"
#include "env.hpp"
#include "indices.hpp"

namespace grouplearn {

/// Options a user is seen choosing most often. Unobserved options fill any
/// remaining slots at random.
inline void estimate_top_set(std::span<const Count> counts, std::size_t k, Engine& rng,
                             std::vector<OptionId>& out) {
  constexpr std::size_t kInline = 32;
  std::array<double, kInline> inline_buf;
  std::vector<double> heap_buf;
  double* score = inline_buf.data();
  if (counts.size() > kInline) {
    heap_buf.resize(counts.size());
    score = heap_buf.data();
  }
  for (std::size_t j = 0; j < counts.size(); ++j) score[j] = static_cast<double>(counts[j]);
  top_k_random_ties(std::span<const double>(score, counts.size()), k, rng, out);
}

inline std::vector<OptionId> estimate_top_set(std::span<const Count> counts, std::size_t k,
                                              Engine& rng) {
  std::vector<OptionId> out;
  estimate_top_set(counts, k, rng, out);
  return out;
}

/// Size of the overlap between two ascending id lists.
inline std::size_t overlap(std::span<const OptionId> a, std::span<const OptionId> b) {
  std::size_t n = 0;
  auto i = a.begin();
  auto j = b.begin();
  while (i != a.end() && j != b.end()) {
    if (*i < *j) ++i;
    else if (*j < *i) ++j;
    else { ++n; ++i; ++j; }
  }
  return n;
}

/// Group whose known preferred set shares the most options with `estimated`.
/// Ties are resolved uniformly at random.
inline GroupId assign_group(std::span<const OptionId> estimated,
                            const std::vector<std::vector<OptionId>>& group_sets, Engine& rng) {
  if (group_sets.empty()) throw ContractViolation("assign_group: no known groups");
  GroupId best = 0;
  std::size_t best_score = 0, tied = 0;
  for (GroupId l = 0; l < group_sets.size(); ++l) {
    const std::size_t d = overlap(estimated, group_sets[l]);
    if (tied == 0 || d > best_score) {
      best = l;
      best_score = d;
      tied = 1;
    } else if (d == best_score) {
      // Reservoir step: keeps each of the tied groups with equal probability.
      ++tied;
      if (std::uniform_int_distribution<std::size_t>(0, tied - 1)(rng) == 0) best = l;
    }
  }
  return best;
}

/// One observer's current belief about every user's group, itself included.
struct ClassifierState {
  std::vector<std::vector<OptionId>> estimated_sets;
  std::vector<GroupId> estimated_group;

  /// Reclassifies every user from its public decision counts (user x option).
  void refresh(const Matrix<Count>& decisions,
               const std::vector<std::vector<OptionId>>& group_sets, std::size_t k, Engine& rng) {
    const std::size_t M = decisions.rows();
    estimated_sets.resize(M);
    estimated_group.resize(M);
    for (UserId u = 0; u < M; ++u) {
      std::span<const Count> row(decisions.row(u), decisions.cols());
      estimate_top_set(row, k, rng, estimated_sets[u]);
      estimated_group[u] = assign_group(estimated_sets[u], group_sets, rng);
    }
  }
};

/// Fraction of (observer, peer) pairs, peer != observer, whose estimated group
/// differs from the true one. states[i] belongs to observer i.
inline double misclassification_rate(const GroupStructure& truth,
                                     std::span<const ClassifierState> states) {
  std::size_t pairs = 0, wrong = 0;
  for (UserId i = 0; i < states.size(); ++i) {
    const auto& est = states[i].estimated_group;
    for (UserId k = 0; k < est.size(); ++k) {
      if (k == i) continue;
      ++pairs;
      if (est[k] != truth.membership.at(k)) ++wrong;
    }
  }
  return pairs == 0 ? 0.0 : static_cast<double>(wrong) / static_cast<double>(pairs);
}

} // namespace grouplearn

#endif // GROUPLEARN_CLASSIFY_HPP
