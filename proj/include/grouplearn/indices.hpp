#ifndef GROUPLEARN_INDICES_HPP
#define GROUPLEARN_INDICES_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "core.hpp"

namespace grouplearn {

/// r + sqrt(2 ln t / n). Unsampled options (n == 0) must be force-sampled
/// by the caller instead.
inline double ucb_index(double mean, Count n, Step t) {
  if (n == 0) throw ContractViolation("ucb_index: option has no samples; force-sample it");
  if (t < 1) throw ContractViolation("ucb_index: t must be at least 1");
  return mean + std::sqrt(2.0 * std::log(static_cast<double>(t)) / static_cast<double>(n));
}

/// Ratio of own to peer sample mean, if the peer mean is usable.
inline std::optional<double> estimate_distortion(double own_mean, double peer_mean) {
  if (peer_mean == 0.0 || !std::isfinite(peer_mean) || !std::isfinite(own_mean))
    return std::nullopt;
  return own_mean / peer_mean;
}

/// Pooled index of the full-information variants: the converted mean over
/// `converted_count` samples plus a width over the raw pooled count.
inline double pooled_index(double converted_sum, double converted_count, Count pooled_count,
                           Step t) {
  if (pooled_count == 0 || converted_count <= 0.0)
    throw ContractViolation("pooled_index: option has no samples; force-sample it");
  if (t < 1) throw ContractViolation("pooled_index: t must be at least 1");
  return converted_sum / converted_count +
         std::sqrt(2.0 * std::log(static_cast<double>(t)) / static_cast<double>(pooled_count));
}

/// r - alpha (1 - beta) sqrt(ln t / t) + sqrt(2 ln t / n).
inline double part_info_index(double mean, Count n, Step t, double alpha, double beta) {
  if (n == 0) throw ContractViolation("part_info_index: option has no samples; force-sample it");
  if (t < 1) throw ContractViolation("part_info_index: t must be at least 1");
  const double log_t = std::log(static_cast<double>(t));
  const double td = static_cast<double>(t);
  return mean - alpha * (1.0 - beta) * std::sqrt(log_t / td) +
         std::sqrt(2.0 * log_t / static_cast<double>(n));
}

/// Share of all selections that went to each option; uniform when empty.
inline std::vector<double> group_frequency(std::span<const Count> counts) {
  std::vector<double> beta(counts.size());
  const double total = static_cast<double>(std::accumulate(counts.begin(), counts.end(), Count{0}));
  if (total == 0.0) {
    std::fill(beta.begin(), beta.end(), 1.0 / static_cast<double>(counts.size()));
    return beta;
  }
  for (std::size_t j = 0; j < counts.size(); ++j) beta[j] = static_cast<double>(counts[j]) / total;
  return beta;
}

/// Frequencies with user k's counts raised to weights[k] before pooling.
/// counts is user x option; 0^w is 0.
inline std::vector<double> weighted_group_frequency(const Matrix<Count>& counts,
                                                    std::span<const double> weights) {
  if (weights.size() != counts.rows())
    throw ContractViolation("weighted_group_frequency: need one weight per user");
  const std::size_t N = counts.cols();
  std::vector<double> num(N, 0.0);
  for (OptionId j = 0; j < N; ++j)
    for (UserId k = 0; k < counts.rows(); ++k) {
      const Count c = counts(k, j);
      if (c == 0) continue;
      num[j] += weights[k] == 1.0 ? static_cast<double>(c)
                                  : std::pow(static_cast<double>(c), weights[k]);
    }
  const double total = std::accumulate(num.begin(), num.end(), 0.0);
  if (total == 0.0) {
    std::fill(num.begin(), num.end(), 1.0 / static_cast<double>(N));
    return num;
  }
  for (double& v : num) v /= total;
  return num;
}

/// The `k` entries of highest score, ties split uniformly at random (each
/// entry draws an independent random key that orders it within its tie).
/// Returned ids are ascending.
inline void top_k_random_ties(std::span<const double> scores, std::size_t k, Engine& rng,
                              std::vector<OptionId>& out) {
  if (k > scores.size()) throw ContractViolation("top_k: K exceeds the number of options");
  struct Entry {
    double score;
    std::uint64_t key;
    OptionId id;
  };
  constexpr std::size_t kInline = 32;
  std::array<Entry, kInline> inline_buf;
  std::vector<Entry> heap_buf;
  Entry* entries = inline_buf.data();
  if (scores.size() > kInline) {
    heap_buf.resize(scores.size());
    entries = heap_buf.data();
  }
  for (std::size_t j = 0; j < scores.size(); ++j) entries[j] = {scores[j], rng(), j};
  std::partial_sort(entries, entries + k, entries + scores.size(), [](const Entry& a, const Entry& b) {
    return a.score > b.score || (a.score == b.score && a.key < b.key);
  });
  out.resize(k);
  for (std::size_t a = 0; a < k; ++a) out[a] = entries[a].id;
  std::sort(out.begin(), out.end());
}

inline std::vector<OptionId> top_k_random_ties(std::span<const double> scores, std::size_t k,
                                               Engine& rng) {
  std::vector<OptionId> out;
  top_k_random_ties(scores, k, rng, out);
  return out;
}

/// Picks the K options of highest index. Options never sampled by this user
/// (own_counts[j] == 0) are taken first; pass an empty span to skip that rule.
inline std::vector<OptionId> select_actions(std::span<const double> indices, std::size_t k,
                                            Engine& rng, std::span<const Count> own_counts = {}) {
  if (own_counts.empty()) return top_k_random_ties(indices, k, rng);
  if (own_counts.size() != indices.size())
    throw ContractViolation("select_actions: counts and indices differ in length");
  std::vector<double> keyed(indices.begin(), indices.end());
  for (std::size_t j = 0; j < keyed.size(); ++j)
    if (own_counts[j] == 0) keyed[j] = std::numeric_limits<double>::infinity();
  return top_k_random_ties(keyed, k, rng);
}

} // namespace grouplearn

#endif // GROUPLEARN_INDICES_HPP
