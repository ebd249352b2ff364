#ifndef GROUPLEARN_HARNESS_HPP
#define GROUPLEARN_HARNESS_HPP

#include <atomic>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "agent.hpp"
#include "broadcast.hpp"
#include "core.hpp"
#include "env.hpp"
#include "metrics.hpp"
#include "simulation.hpp"

#ifndef GROUPLEARN_VERSION
#define GROUPLEARN_VERSION "0.1.0"
#endif

namespace grouplearn {

using Json = nlohmann::ordered_json;

enum class Scenario { Uniform, Diverse };

inline std::string_view to_string(Scenario s) { return s == Scenario::Uniform ? "uniform" : "diverse"; }

struct GridSpec {
  enum class Kind { Log, Every } kind = Kind::Log;
  unsigned per_decade = 20;
  Step stride = 1;
};

struct ExperimentConfig {
  std::string run_id = "run";
  WorldConfig world;
  Scenario scenario = Scenario::Uniform;
  Disclosure disclosure = Disclosure::full();
  std::vector<Algorithm> algorithms;
  Step horizon = 10000;
  std::vector<std::uint64_t> seeds;
  std::optional<std::uint64_t> world_seed; // empty: one world per replication seed
  double alpha = 0.1;
  double omega_cross = 0.5;
  double epsilon = 0.01;
  int bound_exponent = 2;
  Conversion conversion = Conversion::Streaming;
  GridSpec grid;
  unsigned threads = 1;
  std::string output;

  std::vector<Step> record_grid() const {
    return grid.kind == GridSpec::Kind::Log ? log_grid(horizon, grid.per_decade)
                                            : stride_grid(horizon, grid.stride);
  }

  PolicyConfig policy(Algorithm a) const {
    PolicyConfig p;
    p.algorithm = a;
    p.alpha = alpha;
    p.omega_cross = omega_cross;
    p.conversion = conversion;
    return p;
  }
};

// ---------------------------------------------------------------------------
// Config parsing

namespace detail {

template <typename T>
T get_or(const Json& j, const char* key, T fallback, const std::string& path) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const Json::exception& e) {
    throw ConfigError(path + key, std::string("wrong type (") + e.what() + ")");
  }
}

template <typename T>
T require(const Json& j, const char* key, const std::string& path) {
  if (!j.contains(key)) throw ConfigError(path + key, "required");
  return get_or<T>(j, key, T{}, path);
}

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

} // namespace detail

inline WorldConfig parse_world(const Json& j) {
  if (!j.is_object()) throw ConfigError("world", "must be an object");
  const std::string p = "world.";
  WorldConfig w;
  w.users = detail::get_or<std::size_t>(j, "users", w.users, p);
  w.options = detail::get_or<std::size_t>(j, "options", w.options, p);
  w.k = detail::get_or<std::size_t>(j, "k", w.k, p);
  w.groups = detail::get_or<std::size_t>(j, "groups", w.groups, p);
  w.group_means = detail::require<std::vector<std::vector<double>>>(j, "group_means", p);
  w.membership = detail::get_or<std::vector<GroupId>>(j, "membership", {}, p);
  if (!j.contains("distortion")) throw ConfigError("world.distortion", "required");
  const Json& d = j.at("distortion");
  w.distortion_mean = detail::require<double>(d, "mean", "world.distortion.");
  w.distortion_variance = detail::get_or<double>(d, "variance", 1.0, "world.distortion.");
  if (j.contains("family")) {
    const Json& f = j.at("family");
    const auto kind = detail::get_or<std::string>(f, "kind", "exponential", "world.family.");
    if (kind == "exponential") w.family = {Family::Exponential, 0.0};
    else if (kind == "gaussian")
      w.family = {Family::Gaussian, detail::require<double>(f, "variance", "world.family.")};
    else throw ConfigError("world.family.kind", "unknown family '" + kind + "'");
  }
  w.preserve_order = detail::get_or<bool>(j, "preserve_order", w.preserve_order, p);
  if (j.contains("clip")) {
    const Json& c = j.at("clip");
    w.clip = detail::get_or<bool>(c, "enabled", false, "world.clip.");
    w.clip_bound = detail::get_or<double>(c, "bound", 0.0, "world.clip.");
  }
  w.min_gap = detail::get_or<double>(j, "min_gap", w.min_gap, p);
  w.max_retries = detail::get_or<std::size_t>(j, "max_retries", w.max_retries, p);
  validate(w);
  return w;
}

inline Disclosure parse_disclosure(const Json& j) {
  const auto mode = detail::get_or<std::string>(j, "mode", "full", "disclosure.");
  if (mode == "full") return Disclosure::full();
  if (mode == "partial") return Disclosure::partial();
  if (mode == "full_periodic")
    return Disclosure::periodic(detail::require<Step>(j, "interval", "disclosure."));
  throw ConfigError("disclosure.mode", "unknown mode '" + mode + "'");
}

/// Checks cross-field constraints.
inline void validate(const ExperimentConfig& c) {
  validate(c.world);
  if (c.algorithms.empty()) throw ConfigError("algorithms", "at least one algorithm is required");
  if (c.scenario == Scenario::Diverse && c.world.groups < 2)
    throw ConfigError("scenario", "diverse scenario needs at least two groups");
  if (c.scenario == Scenario::Uniform && c.world.groups != 1)
    throw ConfigError("scenario", "uniform scenario needs exactly one group");
  for (Algorithm a : c.algorithms)
    if (needs_reward_sharing(a) && !c.disclosure.shares_rewards())
      throw ConfigError("algorithms", std::string(to_string(a)) +
                                          " needs full or full_periodic disclosure");
  if (c.seeds.empty()) throw ConfigError("seeds", "at least one seed is required");
  if (!(c.alpha >= 0.0)) throw ConfigError("alpha", "must be nonnegative");
  if (!(c.omega_cross > 0.0 && c.omega_cross < 1.0))
    throw ConfigError("omega_cross", "must lie strictly between 0 and 1");
  if (!(c.epsilon > 0.0)) throw ConfigError("epsilon", "must be positive");
  if (c.bound_exponent != 1 && c.bound_exponent != 2)
    throw ConfigError("bound_exponent", "must be 1 or 2");
}

inline ExperimentConfig parse_config(const Json& j) {
  if (!j.is_object()) throw ConfigError("", "config must be a JSON object");
  ExperimentConfig c;
  c.run_id = detail::get_or<std::string>(j, "run_id", c.run_id, "");
  if (!j.contains("world")) throw ConfigError("world", "required");
  c.world = parse_world(j.at("world"));
  const auto scenario = detail::get_or<std::string>(j, "scenario", "uniform", "");
  if (scenario == "uniform") c.scenario = Scenario::Uniform;
  else if (scenario == "diverse") c.scenario = Scenario::Diverse;
  else throw ConfigError("scenario", "unknown scenario '" + scenario + "'");
  if (j.contains("disclosure")) c.disclosure = parse_disclosure(j.at("disclosure"));
  for (const auto& name : detail::require<std::vector<std::string>>(j, "algorithms", "")) {
    const auto a = parse_algorithm(name);
    if (!a) throw ConfigError("algorithms", "unknown algorithm '" + name + "'");
    c.algorithms.push_back(*a);
  }
  c.horizon = detail::get_or<Step>(j, "horizon", c.horizon, "");
  if (j.contains("seeds")) {
    c.seeds = detail::get_or<std::vector<std::uint64_t>>(j, "seeds", {}, "");
  } else if (j.contains("base_seed") || j.contains("seed_count")) {
    const auto base = detail::get_or<std::uint64_t>(j, "base_seed", 1, "");
    const auto count = detail::require<std::uint64_t>(j, "seed_count", "");
    for (std::uint64_t s = 0; s < count; ++s) c.seeds.push_back(base + s);
  } else {
    throw ConfigError("seeds", "give either seeds or base_seed/seed_count");
  }
  if (j.contains("world_seed") && !j.at("world_seed").is_null())
    c.world_seed = detail::get_or<std::uint64_t>(j, "world_seed", 0, "");
  c.alpha = detail::get_or<double>(j, "alpha", c.alpha, "");
  c.omega_cross = detail::get_or<double>(j, "omega_cross", c.omega_cross, "");
  c.epsilon = detail::get_or<double>(j, "epsilon", c.epsilon, "");
  c.bound_exponent = detail::get_or<int>(j, "bound_exponent", c.bound_exponent, "");
  const auto conv = detail::get_or<std::string>(j, "conversion", "streaming", "");
  if (conv == "streaming") c.conversion = Conversion::Streaming;
  else if (conv == "retroactive") c.conversion = Conversion::Retroactive;
  else throw ConfigError("conversion", "unknown conversion '" + conv + "'");
  if (j.contains("output_grid")) {
    const Json& g = j.at("output_grid");
    const auto kind = detail::get_or<std::string>(g, "kind", "log", "output_grid.");
    if (kind == "log") {
      c.grid.kind = GridSpec::Kind::Log;
      c.grid.per_decade = detail::get_or<unsigned>(g, "per_decade", 20, "output_grid.");
    } else if (kind == "every") {
      c.grid.kind = GridSpec::Kind::Every;
      c.grid.stride = detail::get_or<Step>(g, "stride", 1, "output_grid.");
    } else {
      throw ConfigError("output_grid.kind", "unknown grid '" + kind + "'");
    }
  }
  c.threads = detail::get_or<unsigned>(j, "threads", c.threads, "");
  c.output = detail::get_or<std::string>(j, "output", "", "");
  validate(c);
  return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot open " + path.string());
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ConfigError("config", std::string("invalid JSON: ") + e.what());
  }
  return parse_config(j);
}

/// The config with every default filled in; parse_config(to_json(c)) == c.
inline Json to_json(const ExperimentConfig& c) {
  Json world;
  const WorldConfig& w = c.world;
  world["users"] = w.users;
  world["options"] = w.options;
  world["k"] = w.k;
  world["groups"] = w.groups;
  world["group_means"] = w.group_means;
  world["membership"] = w.membership;
  world["distortion"] = {{"mean", w.distortion_mean}, {"variance", w.distortion_variance}};
  if (w.family.kind == Family::Exponential) world["family"] = {{"kind", "exponential"}};
  else world["family"] = {{"kind", "gaussian"}, {"variance", w.family.variance}};
  world["preserve_order"] = w.preserve_order;
  world["clip"] = {{"enabled", w.clip}, {"bound", w.clip_bound}};
  world["min_gap"] = w.min_gap;
  world["max_retries"] = w.max_retries;

  Json j;
  j["run_id"] = c.run_id;
  j["world"] = world;
  j["scenario"] = to_string(c.scenario);
  switch (c.disclosure.mode) {
  case DisclosureMode::FullPerStep: j["disclosure"] = {{"mode", "full"}}; break;
  case DisclosureMode::FullPeriodic:
    j["disclosure"] = {{"mode", "full_periodic"}, {"interval", c.disclosure.interval}};
    break;
  case DisclosureMode::Partial: j["disclosure"] = {{"mode", "partial"}}; break;
  }
  j["algorithms"] = Json::array();
  for (Algorithm a : c.algorithms) j["algorithms"].push_back(to_string(a));
  j["horizon"] = c.horizon;
  j["seeds"] = c.seeds;
  j["world_seed"] = c.world_seed ? Json(*c.world_seed) : Json(nullptr);
  j["alpha"] = c.alpha;
  j["omega_cross"] = c.omega_cross;
  j["epsilon"] = c.epsilon;
  j["bound_exponent"] = c.bound_exponent;
  j["conversion"] = c.conversion == Conversion::Streaming ? "streaming" : "retroactive";
  if (c.grid.kind == GridSpec::Kind::Log)
    j["output_grid"] = {{"kind", "log"}, {"per_decade", c.grid.per_decade}};
  else
    j["output_grid"] = {{"kind", "every"}, {"stride", c.grid.stride}};
  j["threads"] = c.threads;
  j["output"] = c.output;
  return j;
}

inline std::string config_hash(const ExperimentConfig& c) {
  Json j = to_json(c);
  j.erase("output");
  j.erase("threads");
  std::ostringstream s;
  s << std::hex << std::setw(16) << std::setfill('0') << detail::fnv1a(j.dump());
  return s.str();
}

// ---------------------------------------------------------------------------
// Running

struct Cell {
  Algorithm algorithm;
  std::vector<World> worlds; // aligned with replications
  std::vector<Replication> replications;
};

struct ExperimentResult {
  ExperimentConfig config;
  std::vector<Cell> cells; // in config.algorithms order
  std::vector<std::string> warnings;

  Count clipped() const {
    Count n = 0;
    for (const auto& c : cells)
      for (const auto& r : c.replications) n += r.clipped;
    return n;
  }
};

inline World world_for(const ExperimentConfig& c, std::uint64_t seed) {
  return build_world(c.world, c.world_seed.value_or(seed));
}

/// Runs every (algorithm, seed) cell. Replications may run on several
/// threads; results are stored in seed order.
inline ExperimentResult run_cells(const ExperimentConfig& config, bool keep_history = false) {
  validate(config);
  ExperimentResult result;
  result.config = config;
  for (Algorithm a : config.algorithms)
    if (config.policy(a).alpha_warning())
      result.warnings.push_back(std::string(to_string(a)) + ": alpha " +
                                detail::format_double(config.alpha) +
                                " is at or above sqrt(2) - sqrt(3/2)");

  const auto grid = config.record_grid();
  const std::size_t S = config.seeds.size();
  std::vector<World> worlds;
  worlds.reserve(S);
  for (std::uint64_t seed : config.seeds) worlds.push_back(world_for(config, seed));

  for (Algorithm a : config.algorithms) {
    Cell cell{a, worlds, std::vector<Replication>(S)};
    RunSettings settings{config.horizon, config.disclosure, config.policy(a), grid, keep_history};
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto work = [&] {
      for (std::size_t s; (s = next.fetch_add(1)) < S;) {
        try {
          cell.replications[s] = simulate(worlds[s], settings, config.seeds[s]);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    };
    const unsigned n_threads = std::max(1u, std::min<unsigned>(config.threads, static_cast<unsigned>(S)));
    if (n_threads == 1) {
      work();
    } else {
      std::vector<std::jthread> pool;
      for (unsigned w = 0; w < n_threads; ++w) pool.emplace_back(work);
    }
    if (failure) std::rethrow_exception(failure);
    result.cells.push_back(std::move(cell));
  }
  return result;
}

inline constexpr const char* kCsvHeader =
    "run_id,seed,algorithm,scenario,user,t,pseudo_regret,realized_regret,err_rate,bound_value";

/// Metrics CSV with one row per (algorithm, seed, user, recorded step).
inline std::string metrics_csv(const ExperimentResult& r) {
  const auto& c = r.config;
  std::string out = kCsvHeader;
  out += '\n';
  for (const Cell& cell : r.cells) {
    const auto bound = bound_for(cell.algorithm, c.world.users, c.epsilon, c.bound_exponent);
    const std::string prefix_alg = std::string(to_string(cell.algorithm)) + ',' +
                                   std::string(to_string(c.scenario)) + ',';
    for (std::size_t s = 0; s < cell.replications.size(); ++s) {
      const Replication& rep = cell.replications[s];
      const World& w = cell.worlds[s];
      for (UserId i = 0; i < w.model.users(); ++i) {
        for (std::size_t p = 0; p < rep.grid.size(); ++p) {
          out += c.run_id;
          out += ',';
          out += std::to_string(rep.seed);
          out += ',';
          out += prefix_alg;
          out += std::to_string(i);
          out += ',';
          out += std::to_string(rep.grid[p]);
          out += ',';
          out += detail::format_double(rep.pseudo(i, p));
          out += ',';
          out += detail::format_double(rep.realized(i, p));
          out += ',';
          if (!rep.err_rate.empty()) out += detail::format_double(rep.err_rate[p]);
          out += ',';
          if (bound) out += detail::format_double(bound_value(w.profile.gaps[i], *bound, rep.grid[p]));
          out += '\n';
        }
      }
    }
  }
  return out;
}

/// Event trace of one replication (requires keep_history).
inline std::string trace_csv(const Replication& rep) {
  std::string out = "t,user,option_chosen,reward,disclosed_flag\n";
  const Step last = rep.events.empty() ? 0 : rep.events.back().t;
  for (const Event& e : rep.events) {
    const bool disclosed = rep.disclosure.shares_rewards() &&
                           e.t <= rep.disclosure.released_through(last);
    out += std::to_string(e.t) + ',' + std::to_string(e.user) + ',' + std::to_string(e.option) +
           ',' + detail::format_double(e.reward) + ',' + (disclosed ? "1" : "0") + '\n';
  }
  return out;
}

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// Run manifest: materialized config, hash, seeds, version, clipping count,
/// warnings and the fitted bound offsets per (algorithm, user).
inline Json manifest(const ExperimentResult& r) {
  const auto& c = r.config;
  Json m;
  m["run_id"] = c.run_id;
  m["code_version"] = GROUPLEARN_VERSION;
  m["config_hash"] = config_hash(c);
  m["seeds"] = c.seeds;
  m["clipping_events"] = r.clipped();
  m["warnings"] = r.warnings;
  Json offsets = Json::array();
  for (const Cell& cell : r.cells) {
    const auto bound = bound_for(cell.algorithm, c.world.users, c.epsilon, c.bound_exponent);
    if (!bound || cell.replications.empty() || cell.replications.front().grid.empty()) continue;
    const auto& grid = cell.replications.front().grid;
    for (UserId i = 0; i < c.world.users; ++i) {
      std::vector<std::vector<double>> series, bounds;
      for (std::size_t s = 0; s < cell.replications.size(); ++s) {
        const auto& rep = cell.replications[s];
        series.emplace_back(rep.pseudo.row(i), rep.pseudo.row(i) + grid.size());
        bounds.push_back(bound_curve(cell.worlds[s].profile.gaps[i], *bound, grid));
      }
      const auto observed = aggregate(series).mean;
      const auto expected = aggregate(bounds).mean;
      offsets.push_back({{"algorithm", to_string(cell.algorithm)},
                         {"user", i},
                         {"c0", fit_offset(observed, expected)}});
    }
  }
  m["bound_offsets"] = offsets;
  m["config"] = to_json(c);
  m["timestamp"] = utc_timestamp();
  return m;
}

/// Writes via a temporary file so a failed run leaves nothing half-written.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("output", "cannot write " + tmp.string());
    out << content;
    if (!out) throw ConfigError("output", "write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

struct RunOutputs {
  std::filesystem::path csv;
  std::filesystem::path manifest;
  std::vector<std::filesystem::path> traces;
};

/// Runs the experiment and writes <out>/<run_id>.csv plus a manifest. Nothing
/// is written unless every replication succeeds.
inline RunOutputs run_experiment(const ExperimentConfig& config, const std::filesystem::path& out_dir,
                                 bool trace = false) {
  const ExperimentResult result = run_cells(config, trace);
  const std::string csv = metrics_csv(result);
  const std::string man = manifest(result).dump(2) + "\n";
  RunOutputs outputs;
  outputs.csv = out_dir / (config.run_id + ".csv");
  outputs.manifest = out_dir / (config.run_id + ".manifest.json");
  std::vector<std::pair<std::filesystem::path, std::string>> traces;
  if (trace)
    for (const Cell& cell : result.cells)
      for (const Replication& rep : cell.replications)
        traces.emplace_back(out_dir / (config.run_id + ".trace." + std::string(to_string(cell.algorithm)) +
                                       "." + std::to_string(rep.seed) + ".csv"),
                            trace_csv(rep));
  write_file_atomic(outputs.csv, csv);
  write_file_atomic(outputs.manifest, man);
  for (auto& [path, content] : traces) {
    write_file_atomic(path, content);
    outputs.traces.push_back(path);
  }
  return outputs;
}

enum class SweepParam { Alpha, OmegaCross, Interval };

inline std::optional<SweepParam> parse_sweep_param(std::string_view s) {
  if (s == "alpha") return SweepParam::Alpha;
  if (s == "omega_cross") return SweepParam::OmegaCross;
  if (s == "L") return SweepParam::Interval;
  return std::nullopt;
}

inline std::string_view to_string(SweepParam p) {
  switch (p) {
  case SweepParam::Alpha: return "alpha";
  case SweepParam::OmegaCross: return "omega_cross";
  case SweepParam::Interval: return "L";
  }
  return "?";
}

/// Config for one sweep point; run_id gains a "_<param>-<value>" suffix.
inline ExperimentConfig sweep_point(const ExperimentConfig& base, SweepParam param, double value) {
  ExperimentConfig c = base;
  bool applies = false;
  for (Algorithm a : base.algorithms) {
    if (param == SweepParam::Alpha) applies |= uses_frequency(a);
    if (param == SweepParam::OmegaCross) applies |= a == Algorithm::DPart;
    if (param == SweepParam::Interval) applies |= needs_reward_sharing(a);
  }
  if (!applies)
    throw ConfigError("param", std::string(to_string(param)) +
                                   " does not affect any configured algorithm");
  std::ostringstream label;
  label << value;
  switch (param) {
  case SweepParam::Alpha: c.alpha = value; break;
  case SweepParam::OmegaCross: c.omega_cross = value; break;
  case SweepParam::Interval:
    if (!(value >= 1.0) || value != std::floor(value))
      throw ConfigError("values", "L must be a positive integer");
    c.disclosure = Disclosure::periodic(static_cast<Step>(value));
    break;
  }
  c.run_id = base.run_id + "_" + std::string(to_string(param)) + "-" + label.str();
  validate(c);
  return c;
}

/// One run per value, all on the base config's seeds.
inline std::vector<RunOutputs> sweep(const ExperimentConfig& base, SweepParam param,
                                     const std::vector<double>& values,
                                     const std::filesystem::path& out_dir) {
  if (values.empty()) throw ConfigError("values", "at least one value is required");
  std::vector<ExperimentConfig> points;
  for (double v : values) points.push_back(sweep_point(base, param, v));
  std::vector<RunOutputs> out;
  for (const auto& c : points) out.push_back(run_experiment(c, out_dir));
  return out;
}

/// Bound curves for the world of the first seed (or world_seed), both
/// exponents, one row per (algorithm, user, exponent, t).
inline std::string bounds_csv(const ExperimentConfig& c) {
  validate(c);
  const World w = world_for(c, c.seeds.front());
  const auto grid = c.record_grid();
  std::string out = "algorithm,user,exponent,t,bound_value\n";
  for (Algorithm a : c.algorithms)
    for (int e : {1, 2}) {
      const auto spec = bound_for(a, c.world.users, c.epsilon, e);
      if (!spec) continue;
      for (UserId i = 0; i < c.world.users; ++i)
        for (Step t : grid)
          out += std::string(to_string(a)) + ',' + std::to_string(i) + ',' + std::to_string(e) +
                 ',' + std::to_string(t) + ',' +
                 detail::format_double(bound_value(w.profile.gaps[i], *spec, t)) + '\n';
    }
  return out;
}

} // namespace grouplearn

#endif // GROUPLEARN_HARNESS_HPP
