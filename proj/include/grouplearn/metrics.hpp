#ifndef GROUPLEARN_METRICS_HPP
#define GROUPLEARN_METRICS_HPP

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <vector>

#include "agent.hpp"
#include "core.hpp"
#include "env.hpp"

namespace grouplearn {

enum class RegretMode { Realized, Pseudo };

/// One user's history: the K options chosen at each step and the rewards
/// they returned, flattened step by step.
struct ActionTrace {
  std::size_t k = 0;
  std::vector<OptionId> actions;
  std::vector<double> rewards;

  std::size_t steps() const noexcept { return k == 0 ? 0 : actions.size() / k; }
  void push(std::span<const OptionId> a, std::span<const double> r) {
    actions.insert(actions.end(), a.begin(), a.end());
    rewards.insert(rewards.end(), r.begin(), r.end());
  }
};

/// Cumulative weak regret of one user after each step. Realized mode
/// subtracts actual rewards from t * (sum of the top-K means); pseudo mode
/// subtracts the chosen options' true means instead.
inline std::vector<double> weak_regret(const ActionTrace& trace, const PreferenceProfile& profile,
                                       const Matrix<double>& means, UserId user, RegretMode mode) {
  if (trace.rewards.size() != trace.actions.size() ||
      (trace.k != 0 && trace.actions.size() % trace.k != 0))
    throw ContractViolation("weak_regret: rewards must align with actions");
  double best = 0.0;
  for (OptionId j : profile.top_set[user]) best += means(user, j);
  const std::size_t T = trace.steps();
  std::vector<double> out(T);
  double total = 0.0;
  for (std::size_t s = 0; s < T; ++s) {
    const std::size_t base = s * trace.k;
    if (mode == RegretMode::Pseudo) {
      double got = 0.0;
      for (std::size_t a = 0; a < trace.k; ++a) got += means(user, trace.actions[base + a]);
      total += best - got;
      out[s] = total;
    } else {
      for (std::size_t a = 0; a < trace.k; ++a) total += trace.rewards[base + a];
      out[s] = static_cast<double>(s + 1) * best - total;
    }
  }
  return out;
}

/// sum over suboptimal j of ceil(scale * ln t / (divisor * gap_j^exponent)) + offset.
struct BoundSpec {
  double scale = 8.0;
  double divisor = 1.0;
  int exponent = 2;
  double offset = 0.0;
};

/// Constants of the logarithmic regret bound attached to each algorithm.
/// Empty for the oracle, whose regret is identically zero.
inline std::optional<BoundSpec> bound_for(Algorithm a, std::size_t users, double epsilon,
                                          int exponent) {
  switch (a) {
  case Algorithm::Oracle: return std::nullopt;
  case Algorithm::UcbIndividual: return BoundSpec{8.0, 1.0, exponent, 0.0};
  case Algorithm::UcbCentralized:
  case Algorithm::UFull:
  case Algorithm::DFull: return BoundSpec{8.0, static_cast<double>(users), exponent, 0.0};
  case Algorithm::UPart:
  case Algorithm::DPart: return BoundSpec{6.0 + epsilon, 1.0, exponent, 0.0};
  }
  return std::nullopt;
}

inline double bound_value(std::span<const double> gaps, const BoundSpec& spec, Step t) {
  if (t < 1) throw ContractViolation("bound_value: t must be at least 1");
  const double log_t = std::log(static_cast<double>(t));
  double total = 0.0;
  for (double gap : gaps) {
    if (!(gap > 0.0)) throw ContractViolation("bound_value: gaps must be positive");
    total += std::ceil(spec.scale * log_t / (spec.divisor * std::pow(gap, spec.exponent)));
  }
  return total + spec.offset;
}

inline std::vector<double> bound_curve(std::span<const double> gaps, const BoundSpec& spec,
                                       std::span<const Step> t_grid) {
  std::vector<double> out;
  out.reserve(t_grid.size());
  for (Step t : t_grid) out.push_back(bound_value(gaps, spec, t));
  return out;
}

struct Summary {
  std::vector<double> mean;
  std::vector<double> std_error;
};

namespace detail {

inline double pairwise_sum(const double* v, std::size_t n) {
  if (n <= 8) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += v[i];
    return s;
  }
  const std::size_t h = n / 2;
  return pairwise_sum(v, h) + pairwise_sum(v + h, n - h);
}

} // namespace detail

/// Pointwise mean and standard error across replications. Values at each
/// point are sorted before a pairwise sum, so the result does not depend on
/// the order of `series`.
inline Summary aggregate(const std::vector<std::vector<double>>& series) {
  if (series.empty()) throw ContractViolation("aggregate: need at least one replication");
  const std::size_t n = series.front().size();
  for (const auto& s : series)
    if (s.size() != n) throw ContractViolation("aggregate: replications use different grids");
  const double r = static_cast<double>(series.size());
  Summary out{std::vector<double>(n), std::vector<double>(n)};
  std::vector<double> column(series.size());
  for (std::size_t p = 0; p < n; ++p) {
    for (std::size_t i = 0; i < series.size(); ++i) column[i] = series[i][p];
    std::sort(column.begin(), column.end());
    const double mean = detail::pairwise_sum(column.data(), column.size()) / r;
    for (double& v : column) v = (v - mean) * (v - mean);
    std::sort(column.begin(), column.end());
    const double ss = detail::pairwise_sum(column.data(), column.size());
    out.mean[p] = mean;
    out.std_error[p] = series.size() > 1 ? std::sqrt(ss / (r - 1.0) / r) : 0.0;
  }
  return out;
}

/// Least-squares constant offset between an observed curve and a bound over
/// the last `tail` fraction of points.
inline double fit_offset(std::span<const double> observed, std::span<const double> bound,
                         double tail = 0.5) {
  if (observed.size() != bound.size()) throw ContractViolation("fit_offset: length mismatch");
  if (observed.empty()) return 0.0;
  const std::size_t start =
      std::min(observed.size() - 1,
               static_cast<std::size_t>(std::floor((1.0 - tail) * static_cast<double>(observed.size()))));
  double total = 0.0;
  for (std::size_t p = start; p < observed.size(); ++p) total += observed[p] - bound[p];
  return total / static_cast<double>(observed.size() - start);
}

} // namespace grouplearn

#endif // GROUPLEARN_METRICS_HPP
