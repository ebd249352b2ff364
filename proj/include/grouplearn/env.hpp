#ifndef GROUPLEARN_ENV_HPP
#define GROUPLEARN_ENV_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "core.hpp"

namespace grouplearn {

enum class Family { Exponential, Gaussian };

struct RewardFamily {
  Family kind = Family::Exponential;
  double variance = 0.0; // Gaussian only; 0 gives a point mass
};

/// Parameters of the ground-truth world.
///
/// Each group l carries a base mean vector. A user in group l gets means
/// base_l[j] * s_j where s_j is drawn once from N(distortion_mean,
/// distortion_variance) and resampled until positive. The whole draw is
/// repeated until the user's means are separated by `min_gap` and its top-K
/// set matches the group's (and, with `preserve_order`, its full ranking).
struct WorldConfig {
  std::size_t users = 3;
  std::size_t options = 5;
  std::size_t k = 3;
  std::size_t groups = 1;
  std::vector<std::vector<double>> group_means;
  std::vector<GroupId> membership; // empty: user i joins group i % groups
  double distortion_mean = std::numeric_limits<double>::quiet_NaN();
  double distortion_variance = 1.0;
  RewardFamily family;
  bool preserve_order = true;
  bool clip = false;
  double clip_bound = 0.0; // 0: ten times the largest mean
  double min_gap = 1e-6;
  std::size_t max_retries = 10000;
};

struct RewardModel {
  Matrix<double> means;          // user x option
  Matrix<RewardFamily> families; // user x option
  std::vector<double> distortion; // user x user x option, row-major

  std::size_t users() const noexcept { return means.rows(); }
  std::size_t options() const noexcept { return means.cols(); }

  double delta(UserId i, UserId k, OptionId j) const {
    return distortion[(i * users() + k) * options() + j];
  }
};

struct PreferenceProfile {
  std::size_t k = 0;
  std::vector<std::vector<OptionId>> ranking; // per user, best first
  std::vector<std::vector<OptionId>> top_set; // per user, ascending ids
  std::vector<std::vector<OptionId>> bottom_set;
  std::vector<std::vector<double>> gaps; // aligned with bottom_set

  bool in_top(UserId i, OptionId j) const {
    return std::binary_search(top_set[i].begin(), top_set[i].end(), j);
  }
};

struct GroupStructure {
  std::vector<std::vector<OptionId>> group_sets; // ascending ids
  std::vector<GroupId> membership;

  std::size_t groups() const noexcept { return group_sets.size(); }
};

struct World {
  RewardModel model;
  PreferenceProfile profile;
  GroupStructure groups;
  double clip_bound = 0.0; // 0: clipping disabled
};

namespace detail {

inline std::vector<OptionId> rank_desc(const double* values, std::size_t n) {
  std::vector<OptionId> order(n);
  std::iota(order.begin(), order.end(), OptionId{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](OptionId a, OptionId b) { return values[a] > values[b]; });
  return order;
}

inline std::vector<OptionId> top_k(const std::vector<OptionId>& ranking, std::size_t k) {
  std::vector<OptionId> top(ranking.begin(), ranking.begin() + static_cast<std::ptrdiff_t>(k));
  std::sort(top.begin(), top.end());
  return top;
}

inline bool separated(const double* values, std::size_t n, double min_gap) {
  std::vector<double> v(values, values + n);
  std::sort(v.begin(), v.end());
  for (std::size_t j = 1; j < n; ++j)
    if (!(v[j] - v[j - 1] >= min_gap)) return false;
  return true;
}

} // namespace detail

inline PreferenceProfile make_profile(const Matrix<double>& means, std::size_t k) {
  PreferenceProfile p;
  p.k = k;
  for (UserId i = 0; i < means.rows(); ++i) {
    auto ranking = detail::rank_desc(means.row(i), means.cols());
    auto top = detail::top_k(ranking, k);
    std::vector<OptionId> bottom;
    std::vector<double> gaps;
    const double kth = means(i, ranking[k - 1]);
    for (OptionId j = 0; j < means.cols(); ++j) {
      if (!std::binary_search(top.begin(), top.end(), j)) {
        bottom.push_back(j);
        gaps.push_back(kth - means(i, j));
      }
    }
    p.ranking.push_back(std::move(ranking));
    p.top_set.push_back(std::move(top));
    p.bottom_set.push_back(std::move(bottom));
    p.gaps.push_back(std::move(gaps));
  }
  return p;
}

inline void validate(const WorldConfig& c) {
  if (c.users < 1) throw ConfigError("world.users", "must be at least 1");
  if (c.k < 1) throw ConfigError("world.k", "must be at least 1");
  if (c.k > c.options) throw ConfigError("world.k", "K must not exceed N");
  if (c.groups < 1) throw ConfigError("world.groups", "must be at least 1");
  if (c.groups > binomial(c.options, c.k))
    throw ConfigError("world.groups", "G must not exceed C(N, K)");
  if (c.group_means.size() != c.groups)
    throw ConfigError("world.group_means", "need one mean vector per group");
  for (const auto& g : c.group_means) {
    if (g.size() != c.options)
      throw ConfigError("world.group_means", "each mean vector needs N entries");
    for (double m : g)
      if (!(m > 0.0) || !std::isfinite(m))
        throw ConfigError("world.group_means", "means must be positive and finite");
    if (!detail::separated(g.data(), g.size(), c.min_gap))
      throw ConfigError("world.group_means", "means within a group must be distinct");
  }
  std::vector<std::vector<OptionId>> sets;
  for (const auto& g : c.group_means)
    sets.push_back(detail::top_k(detail::rank_desc(g.data(), g.size()), c.k));
  for (std::size_t a = 0; a < sets.size(); ++a)
    for (std::size_t b = a + 1; b < sets.size(); ++b)
      if (sets[a] == sets[b])
        throw ConfigError("world.group_means", "groups must have distinct top-K sets");
  if (!c.membership.empty()) {
    if (c.membership.size() != c.users)
      throw ConfigError("world.membership", "need one group per user");
    for (GroupId g : c.membership)
      if (g >= c.groups) throw ConfigError("world.membership", "group id out of range");
  }
  if (!std::isfinite(c.distortion_mean))
    throw ConfigError("world.distortion.mean", "required");
  if (!(c.distortion_variance >= 0.0))
    throw ConfigError("world.distortion.variance", "must be nonnegative");
  if (c.distortion_variance == 0.0 && !(c.distortion_mean > 0.0))
    throw ConfigError("world.distortion.mean", "point-mass distortion must be positive");
  if (c.family.kind == Family::Gaussian && !(c.family.variance >= 0.0))
    throw ConfigError("world.family.variance", "must be nonnegative");
  if (c.clip && c.clip_bound < 0.0)
    throw ConfigError("world.clip.bound", "must be nonnegative");
  if (!(c.min_gap > 0.0)) throw ConfigError("world.min_gap", "must be positive");
  if (c.max_retries < 1) throw ConfigError("world.max_retries", "must be at least 1");
}

/// Builds a world satisfying every model invariant; deterministic in `seed`.
inline World build_world(const WorldConfig& c, std::uint64_t seed) {
  validate(c);
  Engine rng = make_engine(seed, Stream::World);
  const std::size_t M = c.users, N = c.options;

  std::vector<std::vector<OptionId>> base_rank, base_top;
  for (const auto& g : c.group_means) {
    base_rank.push_back(detail::rank_desc(g.data(), N));
    base_top.push_back(detail::top_k(base_rank.back(), c.k));
  }

  std::normal_distribution<double> scale(c.distortion_mean, std::sqrt(c.distortion_variance));
  auto draw_scale = [&]() {
    if (c.distortion_variance == 0.0) return c.distortion_mean;
    for (std::size_t attempt = 0; attempt < c.max_retries; ++attempt) {
      double s = scale(rng);
      if (s > 0.0) return s;
    }
    throw ConfigError("world.distortion.mean",
                      "could not draw a positive distortion within max_retries");
  };

  World w;
  w.groups.group_sets = base_top;
  w.groups.membership.resize(M);
  w.model.means = Matrix<double>(M, N);
  w.model.families = Matrix<RewardFamily>(M, N, c.family);

  for (UserId i = 0; i < M; ++i) {
    const GroupId g = c.membership.empty() ? i % c.groups : c.membership[i];
    w.groups.membership[i] = g;
    const auto& base = c.group_means[g];
    bool accepted = false;
    std::vector<double> mu(N);
    for (std::size_t attempt = 0; attempt < c.max_retries && !accepted; ++attempt) {
      for (OptionId j = 0; j < N; ++j) mu[j] = draw_scale() * base[j];
      if (!detail::separated(mu.data(), N, c.min_gap)) continue;
      auto rank = detail::rank_desc(mu.data(), N);
      if (c.preserve_order ? rank != base_rank[g] : detail::top_k(rank, c.k) != base_top[g])
        continue;
      accepted = true;
    }
    if (!accepted)
      throw ConfigError("world.distortion",
                        "no admissible distortion for user " + std::to_string(i) +
                            " within max_retries");
    std::copy(mu.begin(), mu.end(), w.model.means.row(i));
  }

  w.model.distortion.resize(M * M * N);
  for (UserId i = 0; i < M; ++i)
    for (UserId k = 0; k < M; ++k)
      for (OptionId j = 0; j < N; ++j)
        w.model.distortion[(i * M + k) * N + j] =
            i == k ? 1.0 : w.model.means(i, j) / w.model.means(k, j);

  w.profile = make_profile(w.model.means, c.k);
  if (c.clip) {
    double top = 0.0;
    for (double m : w.model.means.data()) top = std::max(top, m);
    w.clip_bound = c.clip_bound > 0.0 ? c.clip_bound : 10.0 * top;
  }
  return w;
}

/// One draw of user `i`'s reward from option `j`.
inline double sample_reward(const RewardModel& model, UserId i, OptionId j, Engine& rng) {
  if (i >= model.users() || j >= model.options())
    throw std::out_of_range("sample_reward: identifier out of range");
  const double mean = model.means(i, j);
  const RewardFamily& f = model.families(i, j);
  switch (f.kind) {
  case Family::Exponential:
    return std::exponential_distribution<double>(1.0 / mean)(rng);
  case Family::Gaussian:
    if (f.variance == 0.0) return mean;
    return std::normal_distribution<double>(mean, std::sqrt(f.variance))(rng);
  }
  return mean;
}

/// Rewards drawn for every (user, option) at every step, whether or not the
/// option is chosen, so that all algorithms run on one seed see the same tape.
class RewardTape {
public:
  RewardTape(const World& world, std::uint64_t seed)
      : world_(&world), rng_(make_engine(seed, Stream::Tape)),
        current_(world.model.users(), world.model.options()) {}

  /// Advances to the next step and returns its rewards (user x option).
  const Matrix<double>& advance() {
    const auto& m = world_->model;
    for (UserId i = 0; i < m.users(); ++i)
      for (OptionId j = 0; j < m.options(); ++j) {
        double x = sample_reward(m, i, j, rng_);
        if (world_->clip_bound > 0.0 && (x < 0.0 || x > world_->clip_bound)) {
          x = std::clamp(x, 0.0, world_->clip_bound);
          ++clipped_;
        }
        current_(i, j) = x;
      }
    return current_;
  }

  Count clipped() const noexcept { return clipped_; }

private:
  const World* world_;
  Engine rng_;
  Matrix<double> current_;
  Count clipped_ = 0;
};

} // namespace grouplearn

#endif // GROUPLEARN_ENV_HPP
