#ifndef GROUPLEARN_SIMULATION_HPP
#define GROUPLEARN_SIMULATION_HPP

#include <cmath>
#include <set>
#include <span>
#include <vector>

#include "agent.hpp"
#include "broadcast.hpp"
#include "classify.hpp"
#include "core.hpp"
#include "env.hpp"
#include "metrics.hpp"

namespace grouplearn {

struct RunSettings {
  Step horizon = 0;
  Disclosure disclosure = Disclosure::full();
  PolicyConfig policy;
  std::vector<Step> grid; // steps to record; empty records every step
  bool keep_history = false;
};

struct Replication {
  std::uint64_t seed = 0;
  std::vector<Step> grid;
  Matrix<double> pseudo;   // user x grid point
  Matrix<double> realized; // user x grid point
  std::vector<double> err_rate; // per grid point; empty unless classifying
  Count clipped = 0;
  // Only with keep_history:
  std::vector<ActionTrace> traces; // per user
  std::vector<Event> events;
  Disclosure disclosure;
};

/// Steps 1..horizon on a log scale: every step up to 10, then `per_decade`
/// points per factor of ten, always including powers of ten and the horizon.
inline std::vector<Step> log_grid(Step horizon, unsigned per_decade = 20) {
  std::set<Step> pts;
  for (Step t = 1; t <= std::min<Step>(horizon, 10); ++t) pts.insert(t);
  if (per_decade == 0) per_decade = 1;
  for (unsigned e = 0;; ++e) {
    const double lo = std::pow(10.0, static_cast<double>(e) / per_decade);
    const auto t = static_cast<Step>(std::llround(lo));
    if (t > horizon) break;
    if (t >= 1) pts.insert(t);
  }
  for (Step p = 1; p <= horizon; p *= 10) pts.insert(p);
  if (horizon >= 1) pts.insert(horizon);
  return {pts.begin(), pts.end()};
}

inline std::vector<Step> stride_grid(Step horizon, Step stride) {
  std::vector<Step> out;
  if (stride == 0) stride = 1;
  for (Step t = stride; t <= horizon; t += stride) out.push_back(t);
  if (horizon >= 1 && (out.empty() || out.back() != horizon)) out.push_back(horizon);
  return out;
}

/// Runs one seeded replication: every step, all users choose from the log
/// through t - 1, publish their decisions and rewards, then update.
inline Replication simulate(const World& world, const RunSettings& settings, std::uint64_t seed) {
  const std::size_t M = world.model.users(), N = world.model.options(), K = world.profile.k;
  const Algorithm alg = settings.policy.algorithm;
  BroadcastLog log(M, N, K, settings.disclosure);
  RewardTape tape(world, seed);
  Engine ties = make_engine(seed, Stream::Ties);
  Engine cls = make_engine(seed, Stream::Classifier);
  const bool central = alg == Algorithm::UcbCentralized;
  const bool needs_view = alg != Algorithm::Oracle && alg != Algorithm::UcbIndividual;
  PeerView view(0, 0, central, M, N);
  auto refresh = [&](Step t, UserId i) {
    if (needs_view) log.fill_view(view, t, i, central);
  };

  std::vector<Agent> agents;
  agents.reserve(M);
  for (UserId i = 0; i < M; ++i) agents.emplace_back(i, settings.policy, world);
  for (UserId i = 0; i < M; ++i) {
    refresh(0, i);
    agents[i].initialize(view, cls);
  }

  Replication rep;
  rep.seed = seed;
  rep.disclosure = settings.disclosure;
  rep.grid = settings.grid;
  if (rep.grid.empty())
    for (Step t = 1; t <= settings.horizon; ++t) rep.grid.push_back(t);
  while (!rep.grid.empty() && rep.grid.back() > settings.horizon) rep.grid.pop_back();

  const bool classifying = alg == Algorithm::DPart;
  std::vector<ActionTrace> traces(M);
  for (auto& tr : traces) {
    tr.k = K;
    tr.actions.reserve(settings.horizon * K);
    tr.rewards.reserve(settings.horizon * K);
  }
  std::vector<double> err_by_step;
  std::vector<ClassifierState> beliefs(M);

  std::vector<std::vector<OptionId>> chosen(M);
  std::vector<std::vector<double>> got(M);
  for (Step t = 1; t <= settings.horizon; ++t) {
    for (UserId i = 0; i < M; ++i) {
      refresh(t - 1, i);
      chosen[i] = agents[i].choose(t, view, ties);
    }
    const Matrix<double>& draw = tape.advance();
    for (UserId i = 0; i < M; ++i) {
      got[i].clear();
      for (OptionId j : chosen[i]) got[i].push_back(draw(i, j));
      log.publish(t, i, chosen[i], got[i]);
      traces[i].push(chosen[i], got[i]);
    }
    for (UserId i = 0; i < M; ++i) {
      refresh(t, i);
      agents[i].observe(chosen[i], got[i], view, cls);
    }
    if (classifying) {
      for (UserId i = 0; i < M; ++i) beliefs[i] = agents[i].state().classifier;
      err_by_step.push_back(misclassification_rate(world.groups, beliefs));
    }
  }

  rep.pseudo = Matrix<double>(M, rep.grid.size());
  rep.realized = Matrix<double>(M, rep.grid.size());
  for (UserId i = 0; i < M; ++i) {
    const auto ps = weak_regret(traces[i], world.profile, world.model.means, i, RegretMode::Pseudo);
    const auto rs =
        weak_regret(traces[i], world.profile, world.model.means, i, RegretMode::Realized);
    for (std::size_t p = 0; p < rep.grid.size(); ++p) {
      rep.pseudo(i, p) = ps[rep.grid[p] - 1];
      rep.realized(i, p) = rs[rep.grid[p] - 1];
    }
  }
  if (classifying)
    for (Step t : rep.grid) rep.err_rate.push_back(err_by_step[t - 1]);
  rep.clipped = tape.clipped();
  if (settings.keep_history) {
    rep.traces = std::move(traces);
    rep.events = log.events();
  }
  return rep;
}

} // namespace grouplearn

#endif // GROUPLEARN_SIMULATION_HPP
