#ifndef GROUPLEARN_BROADCAST_HPP
#define GROUPLEARN_BROADCAST_HPP

#include <algorithm>
#include <optional>
#include <span>
#include <vector>

#include "core.hpp"

namespace grouplearn {

enum class DisclosureMode { FullPerStep, FullPeriodic, Partial };

struct Disclosure {
  DisclosureMode mode = DisclosureMode::FullPerStep;
  Step interval = 1;

  static Disclosure full() { return {DisclosureMode::FullPerStep, 1}; }
  static Disclosure periodic(Step interval) {
    if (interval < 1) throw ConfigError("disclosure.interval", "must be at least 1");
    return {DisclosureMode::FullPeriodic, interval};
  }
  static Disclosure partial() { return {DisclosureMode::Partial, 1}; }

  bool shares_rewards() const noexcept { return mode != DisclosureMode::Partial; }

  /// Last step whose rewards are readable by peers at step t.
  Step released_through(Step t) const noexcept {
    switch (mode) {
    case DisclosureMode::FullPerStep: return t;
    case DisclosureMode::FullPeriodic: return t / interval * interval;
    case DisclosureMode::Partial: return 0;
    }
    return 0;
  }
};

struct Event {
  Step t;
  UserId user;
  OptionId option;
  double reward;
};

/// What one observer may read from the log at a given step. Decision
/// counts are always visible; reward statistics of peers only when the
/// disclosure regime has released them. The observer's own row is live.
class PeerView {
public:
  PeerView(Step t, UserId observer, bool rewards_visible, std::size_t users, std::size_t options)
      : t_(t), observer_(observer), rewards_visible_(rewards_visible),
        decisions_(users, options), counts_(users, options), sums_(users, options) {}

  Step step() const noexcept { return t_; }
  UserId observer() const noexcept { return observer_; }
  bool rewards_visible() const noexcept { return rewards_visible_; }
  std::size_t users() const noexcept { return decisions_.rows(); }
  std::size_t options() const noexcept { return decisions_.cols(); }

  Count decisions(UserId k, OptionId j) const { return decisions_(k, j); }
  const Matrix<Count>& decision_counts() const noexcept { return decisions_; }

  Count reward_count(UserId k, OptionId j) const {
    check(k);
    return counts_(k, j);
  }
  double reward_sum(UserId k, OptionId j) const {
    check(k);
    return sums_(k, j);
  }
  /// Sample mean of released rewards; empty while nothing is released.
  std::optional<double> mean(UserId k, OptionId j) const {
    check(k);
    if (counts_(k, j) == 0) return std::nullopt;
    return sums_(k, j) / static_cast<double>(counts_(k, j));
  }

  friend bool operator==(const PeerView&, const PeerView&) = default;

private:
  friend class BroadcastLog;

  void check(UserId k) const {
    if (k != observer_ && !rewards_visible_)
      throw ContractViolation("peer rewards are not disclosed under partial information");
  }

  Step t_;
  UserId observer_;
  bool rewards_visible_;
  Matrix<Count> decisions_;
  Matrix<Count> counts_;
  Matrix<double> sums_;
};

/// Append-only record of every user's decisions and rewards.
class BroadcastLog {
public:
  BroadcastLog(std::size_t users, std::size_t options, std::size_t k, Disclosure disclosure)
      : users_(users), options_(options), k_(k), disclosure_(disclosure),
        decisions_(users, options), all_counts_(users, options), all_sums_(users, options),
        released_counts_(users, options), released_sums_(users, options),
        published_(users, false) {}

  std::size_t users() const noexcept { return users_; }
  std::size_t options() const noexcept { return options_; }
  std::size_t k() const noexcept { return k_; }
  const Disclosure& disclosure() const noexcept { return disclosure_; }
  Step current_step() const noexcept { return current_; }
  const std::vector<Event>& events() const noexcept { return events_; }

  void publish(Step t, UserId user, std::span<const OptionId> actions,
               std::span<const double> rewards) {
    if (t < 1) throw ContractViolation("publish: steps start at 1");
    if (t < current_) throw ContractViolation("publish: the log is append-only");
    if (user >= users_) throw std::out_of_range("publish: user out of range");
    if (actions.size() != k_) throw ContractViolation("publish: need exactly K actions");
    if (rewards.size() != actions.size())
      throw ContractViolation("publish: rewards must align with actions");
    for (std::size_t a = 0; a < actions.size(); ++a) {
      if (actions[a] >= options_) throw std::out_of_range("publish: option out of range");
      for (std::size_t b = 0; b < a; ++b)
        if (actions[a] == actions[b]) throw ContractViolation("publish: duplicate option");
    }
    if (t > current_) {
      current_ = t;
      std::fill(published_.begin(), published_.end(), false);
      release(disclosure_.released_through(t));
    }
    if (published_[user]) throw ContractViolation("publish: user already published this step");
    published_[user] = true;

    const bool immediate = disclosure_.released_through(t) >= t;
    for (std::size_t a = 0; a < actions.size(); ++a) {
      const OptionId j = actions[a];
      events_.push_back({t, user, j, rewards[a]});
      decisions_(user, j) += 1;
      all_counts_(user, j) += 1;
      all_sums_(user, j) += rewards[a];
      if (immediate) {
        released_counts_(user, j) += 1;
        released_sums_(user, j) += rewards[a];
      }
    }
    if (immediate) release_cursor_ = events_.size();
  }

  /// Whether `e` is readable by users other than its publisher at step t.
  bool disclosed(const Event& e, Step t) const noexcept {
    return disclosure_.shares_rewards() && e.t <= disclosure_.released_through(t);
  }

  PeerView peer_view(Step t, UserId observer) const {
    PeerView v(t, observer, false, users_, options_);
    fill_view(v, t, observer, false);
    return v;
  }

  /// Unfiltered view, for the coordinated baseline that sees every reward live.
  PeerView central_view(Step t, UserId observer) const {
    PeerView v(t, observer, true, users_, options_);
    fill_view(v, t, observer, true);
    return v;
  }

  /// Rebuilds the view at step t from the raw event history.
  PeerView replay_view(Step t, UserId observer, bool unfiltered = false) const {
    PeerView v(t, observer, unfiltered, users_, options_);
    replay_into(v, t, observer, unfiltered);
    return v;
  }

  /// peer_view/central_view into an existing view, reusing its storage.
  void fill_view(PeerView& v, Step t, UserId observer, bool unfiltered) const {
    if (observer >= users_) throw std::out_of_range("peer_view: observer out of range");
    if (t != current_) {
      replay_into(v, t, observer, unfiltered);
      return;
    }
    const bool visible = unfiltered || disclosure_.shares_rewards();
    v.t_ = t;
    v.observer_ = observer;
    v.rewards_visible_ = visible;
    v.decisions_ = decisions_;
    if (unfiltered) {
      v.counts_ = all_counts_;
      v.sums_ = all_sums_;
      return;
    }
    if (visible) {
      v.counts_ = released_counts_;
      v.sums_ = released_sums_;
    } else {
      v.counts_.fill(0);
      v.sums_.fill(0.0);
    }
    std::copy(all_counts_.row(observer), all_counts_.row(observer) + options_,
              v.counts_.row(observer));
    std::copy(all_sums_.row(observer), all_sums_.row(observer) + options_,
              v.sums_.row(observer));
  }

private:
  void replay_into(PeerView& v, Step t, UserId observer, bool unfiltered) const {
    const bool visible = unfiltered || disclosure_.shares_rewards();
    v = PeerView(t, observer, visible, users_, options_);
    const Step through = unfiltered ? t : disclosure_.released_through(t);
    for (const Event& e : events_) {
      if (e.t > t) break;
      v.decisions_(e.user, e.option) += 1;
      const bool readable = e.user == observer || (visible && e.t <= through);
      if (readable) {
        v.counts_(e.user, e.option) += 1;
        v.sums_(e.user, e.option) += e.reward;
      }
    }
  }

  void release(Step through) {
    if (!disclosure_.shares_rewards()) return;
    while (release_cursor_ < events_.size() && events_[release_cursor_].t <= through) {
      const Event& e = events_[release_cursor_++];
      released_counts_(e.user, e.option) += 1;
      released_sums_(e.user, e.option) += e.reward;
    }
  }

  std::size_t users_, options_, k_;
  Disclosure disclosure_;
  Step current_ = 0;
  std::vector<Event> events_;
  Matrix<Count> decisions_;
  Matrix<Count> all_counts_;
  Matrix<double> all_sums_;
  Matrix<Count> released_counts_;
  Matrix<double> released_sums_;
  std::size_t release_cursor_ = 0;
  std::vector<bool> published_;
};

} // namespace grouplearn

#endif // GROUPLEARN_BROADCAST_HPP
