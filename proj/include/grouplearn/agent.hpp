#ifndef GROUPLEARN_AGENT_HPP
#define GROUPLEARN_AGENT_HPP

#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "broadcast.hpp"
#include "classify.hpp"
#include "core.hpp"
#include "env.hpp"
#include "indices.hpp"

namespace grouplearn {

enum class Algorithm { Oracle, UcbIndividual, UcbCentralized, UFull, UPart, DFull, DPart };

inline constexpr Algorithm kAllAlgorithms[] = {
    Algorithm::Oracle, Algorithm::UcbIndividual, Algorithm::UcbCentralized, Algorithm::UFull,
    Algorithm::UPart,  Algorithm::DFull,         Algorithm::DPart};

inline std::string_view to_string(Algorithm a) {
  switch (a) {
  case Algorithm::Oracle: return "oracle";
  case Algorithm::UcbIndividual: return "ucb_individual";
  case Algorithm::UcbCentralized: return "ucb_centralized";
  case Algorithm::UFull: return "u_full";
  case Algorithm::UPart: return "u_part";
  case Algorithm::DFull: return "d_full";
  case Algorithm::DPart: return "d_part";
  }
  return "?";
}

inline std::optional<Algorithm> parse_algorithm(std::string_view s) {
  for (Algorithm a : kAllAlgorithms)
    if (to_string(a) == s) return a;
  return std::nullopt;
}

/// Pools peer rewards through a distortion factor.
inline bool uses_pooling(Algorithm a) {
  return a == Algorithm::UFull || a == Algorithm::DFull || a == Algorithm::UcbCentralized;
}
inline bool needs_reward_sharing(Algorithm a) { return a == Algorithm::UFull || a == Algorithm::DFull; }
inline bool uses_frequency(Algorithm a) { return a == Algorithm::UPart || a == Algorithm::DPart; }

/// How peer samples are converted into the observer's scale.
enum class DistortionSource {
  Estimated, // ratio of sample means
  Exact,     // the world's true factors (coordinated baseline)
  Unit,      // pinned to 1
};

/// Peer samples are converted with the estimate current when they arrive
/// (Streaming) or all at once with the latest estimate (Retroactive).
enum class Conversion { Streaming, Retroactive };

/// alpha below this keeps the penalty's deviation series summable.
inline const double kAlphaLimit = std::sqrt(2.0) - std::sqrt(1.5);

struct PolicyConfig {
  Algorithm algorithm = Algorithm::UcbIndividual;
  double alpha = 0.1;
  double omega_cross = 0.5;
  Conversion conversion = Conversion::Streaming;
  std::optional<DistortionSource> distortion; // default follows the algorithm

  DistortionSource distortion_source() const {
    if (distortion) return *distortion;
    return algorithm == Algorithm::UcbCentralized ? DistortionSource::Exact
                                                  : DistortionSource::Estimated;
  }
  bool alpha_warning() const { return uses_frequency(algorithm) && alpha >= kAlphaLimit; }
};

struct AgentState {
  std::vector<Count> own_count;
  std::vector<double> own_sum;

  // Pooling variants. `converted_*` hold own plus converted peer samples;
  // `width_count` is the raw pooled count behind the confidence width.
  std::vector<double> converted_sum;
  std::vector<Count> converted_count;
  std::vector<Count> width_count;
  Matrix<Count> seen_count; // peer reward stats already consumed
  Matrix<double> seen_sum;
  Matrix<double> distortion_estimate; // NaN while unavailable

  ClassifierState classifier;

  std::optional<double> own_mean(OptionId j) const {
    if (own_count[j] == 0) return std::nullopt;
    return own_sum[j] / static_cast<double>(own_count[j]);
  }
};

/// One user running one algorithm. All inputs from other users arrive
/// through PeerView.
class Agent {
public:
  Agent(UserId self, PolicyConfig config, const World& world)
      : self_(self), config_(config), world_(&world), users_(world.model.users()),
        options_(world.model.options()), k_(world.profile.k) {
    state_.own_count.assign(options_, 0);
    state_.own_sum.assign(options_, 0.0);
    state_.converted_sum.assign(options_, 0.0);
    state_.converted_count.assign(options_, 0);
    state_.width_count.assign(options_, 0);
    state_.seen_count = Matrix<Count>(users_, options_);
    state_.seen_sum = Matrix<double>(users_, options_);
    state_.distortion_estimate =
        Matrix<double>(users_, options_, std::numeric_limits<double>::quiet_NaN());
  }

  UserId self() const noexcept { return self_; }
  const PolicyConfig& config() const noexcept { return config_; }
  const AgentState& state() const noexcept { return state_; }

  /// Called once before step 1 so the classifier has a (random) starting guess.
  void initialize(const PeerView& view, Engine& classifier_rng) {
    if (config_.algorithm == Algorithm::DPart) refresh_classifier(view, classifier_rng);
  }

  /// Index of every option at step t from information through t - 1.
  /// Options this user has never sampled get NaN.
  std::vector<double> indices(Step t, const PeerView& view) const {
    std::vector<double> out(options_, std::numeric_limits<double>::quiet_NaN());
    switch (config_.algorithm) {
    case Algorithm::Oracle:
      for (OptionId j = 0; j < options_; ++j)
        out[j] = world_->profile.in_top(self_, j) ? 1.0 : 0.0;
      return out;
    case Algorithm::UcbIndividual:
      for (OptionId j = 0; j < options_; ++j)
        if (state_.own_count[j] > 0) out[j] = ucb_index(*state_.own_mean(j), state_.own_count[j], t);
      return out;
    case Algorithm::UcbCentralized:
    case Algorithm::UFull:
    case Algorithm::DFull:
      for (OptionId j = 0; j < options_; ++j)
        if (state_.own_count[j] > 0) out[j] = full_info_index(j, t);
      return out;
    case Algorithm::UPart:
    case Algorithm::DPart: {
      const auto beta = frequencies(view);
      for (OptionId j = 0; j < options_; ++j)
        if (state_.own_count[j] > 0)
          out[j] = part_info_index(*state_.own_mean(j), state_.own_count[j], t, config_.alpha,
                                   beta[j]);
      return out;
    }
    }
    return out;
  }

  /// Pooled index for one option; own samples must exist.
  double full_info_index(OptionId j, Step t) const {
    if (config_.conversion == Conversion::Streaming)
      return pooled_index(state_.converted_sum[j], static_cast<double>(state_.converted_count[j]),
                          state_.width_count[j], t);
    double sum = state_.own_sum[j];
    Count count = state_.own_count[j];
    for (UserId k = 0; k < users_; ++k) {
      if (k == self_ || state_.seen_count(k, j) == 0) continue;
      const auto d = conversion_factor(k, j);
      if (!d) continue;
      sum += *d * state_.seen_sum(k, j);
      count += state_.seen_count(k, j);
    }
    return pooled_index(sum, static_cast<double>(count), state_.width_count[j], t);
  }

  /// Group frequencies used by the PART penalty, from decision counts.
  std::vector<double> frequencies(const PeerView& view) const {
    const auto& counts = view.decision_counts();
    if (config_.algorithm == Algorithm::UPart) {
      std::vector<Count> pooled(options_, 0);
      for (UserId k = 0; k < users_; ++k)
        for (OptionId j = 0; j < options_; ++j) pooled[j] += counts(k, j);
      return group_frequency(pooled);
    }
    return weighted_group_frequency(counts, weights());
  }

  /// omega^{i,k}: 1 for the observer and peers believed to share its group.
  std::vector<double> weights() const {
    std::vector<double> w(users_, 1.0);
    const auto& g = state_.classifier.estimated_group;
    if (g.size() != users_) return w;
    for (UserId k = 0; k < users_; ++k)
      if (k != self_ && g[k] != g[self_]) w[k] = config_.omega_cross;
    return w;
  }

  std::vector<OptionId> choose(Step t, const PeerView& view, Engine& ties) const {
    if (config_.algorithm == Algorithm::Oracle) return world_->profile.top_set[self_];
    auto idx = indices(t, view);
    for (std::size_t j = 0; j < options_; ++j)
      if (state_.own_count[j] == 0) idx[j] = std::numeric_limits<double>::infinity();
    return top_k_random_ties(idx, k_, ties);
  }

  /// Folds in this user's step-t rewards and whatever the view releases.
  void observe(std::span<const OptionId> actions, std::span<const double> rewards,
               const PeerView& view, Engine& classifier_rng) {
    for (std::size_t a = 0; a < actions.size(); ++a) {
      const OptionId j = actions[a];
      state_.own_count[j] += 1;
      state_.own_sum[j] += rewards[a];
      state_.converted_count[j] += 1;
      state_.converted_sum[j] += rewards[a];
      state_.width_count[j] += 1;
    }
    if (uses_pooling(config_.algorithm)) absorb_peers(view);
    if (config_.algorithm == Algorithm::DPart) refresh_classifier(view, classifier_rng);
  }

private:
  std::optional<double> conversion_factor(UserId k, OptionId j) const {
    switch (config_.distortion_source()) {
    case DistortionSource::Exact: return world_->model.delta(self_, k, j);
    case DistortionSource::Unit: return 1.0;
    case DistortionSource::Estimated: {
      const double d = state_.distortion_estimate(k, j);
      if (std::isnan(d)) return std::nullopt;
      return d;
    }
    }
    return std::nullopt;
  }

  void absorb_peers(const PeerView& view) {
    if (!view.rewards_visible())
      throw ContractViolation("pooled index needs disclosed peer rewards");
    for (UserId k = 0; k < users_; ++k) {
      if (k == self_) continue;
      for (OptionId j = 0; j < options_; ++j) {
        const Count count = view.reward_count(k, j);
        const double sum = view.reward_sum(k, j);
        const auto own = state_.own_mean(j);
        const auto peer = view.mean(k, j);
        std::optional<double> est;
        if (own && peer) est = estimate_distortion(*own, *peer);
        state_.distortion_estimate(k, j) =
            est ? *est : std::numeric_limits<double>::quiet_NaN();

        const Count fresh = count - state_.seen_count(k, j);
        if (fresh > 0) {
          const double fresh_sum = sum - state_.seen_sum(k, j);
          state_.width_count[j] += fresh;
          if (const auto d = conversion_factor(k, j)) {
            state_.converted_sum[j] += *d * fresh_sum;
            state_.converted_count[j] += fresh;
          }
        }
        state_.seen_count(k, j) = count;
        state_.seen_sum(k, j) = sum;
      }
    }
  }

  void refresh_classifier(const PeerView& view, Engine& rng) {
    state_.classifier.refresh(view.decision_counts(), world_->groups.group_sets, k_, rng);
  }

  UserId self_;
  PolicyConfig config_;
  const World* world_;
  std::size_t users_, options_, k_;
  AgentState state_;
};

} // namespace grouplearn

#endif // GROUPLEARN_AGENT_HPP
