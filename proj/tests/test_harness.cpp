#include <gtest/gtest.h>

#include <cstdlib>
#include <sys/wait.h>
#include <set>
#include <sstream>

#include "fixtures.hpp"
#include "grouplearn/harness.hpp"

using namespace grouplearn;
namespace fs = std::filesystem;

namespace {

Json base_json() {
  return Json::parse(R"({
    "run_id": "t",
    "world": {"users": 3, "options": 5, "k": 3,
              "group_means": [[1.0, 0.8, 0.6, 0.4, 0.2]],
              "distortion": {"mean": 3.0, "variance": 1.0}},
    "algorithms": ["ucb_individual", "u_full"],
    "horizon": 200,
    "seeds": [1, 2, 3]
  })");
}

std::string field_of(const Json& j) {
  try {
    parse_config(j);
  } catch (const ConfigError& e) {
    return e.field();
  }
  return "<accepted>";
}

std::vector<std::string> lines(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

std::vector<std::string> split(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  for (std::string c; std::getline(in, c, ',');) out.push_back(c);
  if (!s.empty() && s.back() == ',') out.emplace_back();
  return out;
}

struct Shell {
  int code;
  std::string out, err;
};

Shell cli(const std::string& args, const fs::path& dir) {
  const auto out = dir / "stdout.txt", err = dir / "stderr.txt";
  const std::string cmd = std::string(GROUPLEARN_CLI_PATH) + " " + args + " > " + out.string() +
                          " 2> " + err.string();
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, fixtures::slurp(out), fixtures::slurp(err)};
}

fs::path write_config(const fs::path& dir, const Json& j) {
  const auto p = dir / "config.json";
  std::ofstream(p) << j.dump(2);
  return p;
}

} // namespace

TEST(Config, ParsesAndMaterializesDefaults) {
  const auto c = parse_config(base_json());
  EXPECT_EQ(c.algorithms, (std::vector<Algorithm>{Algorithm::UcbIndividual, Algorithm::UFull}));
  EXPECT_EQ(c.seeds, (std::vector<std::uint64_t>{1, 2, 3}));
  const Json j = to_json(c);
  for (const char* key : {"alpha", "omega_cross", "epsilon", "bound_exponent", "conversion",
                          "disclosure", "scenario", "output_grid", "world_seed"})
    EXPECT_TRUE(j.contains(key)) << key;
  const auto again = parse_config(j);
  EXPECT_EQ(to_json(again).dump(), j.dump());
  EXPECT_EQ(config_hash(again), config_hash(c));
}

TEST(Config, BaseSeedAndCount) {
  Json j = base_json();
  j.erase("seeds");
  j["base_seed"] = 10;
  j["seed_count"] = 4;
  EXPECT_EQ(parse_config(j).seeds, (std::vector<std::uint64_t>{10, 11, 12, 13}));
}

TEST(Config, ErrorsNameTheField) {
  Json j = base_json();
  j["world"]["k"] = 7;
  EXPECT_EQ(field_of(j), "world.k");

  j = base_json();
  j["world"]["distortion"].erase("mean");
  EXPECT_EQ(field_of(j), "world.distortion.mean");

  j = base_json();
  j["disclosure"] = {{"mode", "partial"}};
  EXPECT_EQ(field_of(j), "algorithms");

  j = base_json();
  j["scenario"] = "diverse";
  EXPECT_EQ(field_of(j), "scenario");

  j = base_json();
  j["algorithms"] = Json::array({"thompson"});
  EXPECT_EQ(field_of(j), "algorithms");

  j = base_json();
  j["seeds"] = Json::array();
  EXPECT_EQ(field_of(j), "seeds");

  j = base_json();
  j["omega_cross"] = 1.0;
  EXPECT_EQ(field_of(j), "omega_cross");

  j = base_json();
  j["bound_exponent"] = 3;
  EXPECT_EQ(field_of(j), "bound_exponent");

  j = base_json();
  j["disclosure"] = {{"mode", "full_periodic"}, {"interval", 0}};
  EXPECT_EQ(field_of(j).rfind("disclosure", 0), 0u);

  EXPECT_EQ(field_of(base_json()), "<accepted>");
}

TEST(Run, ZeroHorizonGivesHeaderOnly) {
  Json j = base_json();
  j["horizon"] = 0;
  const auto dir = fixtures::temp_dir("zero");
  const auto out = run_experiment(parse_config(j), dir);
  EXPECT_EQ(fixtures::slurp(out.csv), std::string(kCsvHeader) + "\n");
  EXPECT_TRUE(fs::exists(out.manifest));
}

TEST(Run, CsvShapeAndDeterminism) {
  const auto c = parse_config(base_json());
  const auto a = metrics_csv(run_cells(c));
  auto threaded = c;
  threaded.threads = 3;
  const auto b = metrics_csv(run_cells(threaded));
  EXPECT_EQ(a, b);
  const auto rows = lines(a);
  ASSERT_FALSE(rows.empty());
  EXPECT_EQ(rows[0], kCsvHeader);
  const std::size_t points = c.record_grid().size();
  EXPECT_EQ(rows.size(), 1 + 2 * 3 * 3 * points);
  const auto cols = split(rows[1]);
  ASSERT_EQ(cols.size(), 10u);
  EXPECT_EQ(cols[0], "t");
  EXPECT_EQ(cols[1], "1");
  EXPECT_EQ(cols[2], "ucb_individual");
  EXPECT_EQ(cols[3], "uniform");
  EXPECT_EQ(cols[8], ""); // no classifier, no err_rate
  EXPECT_FALSE(cols[9].empty());
}

TEST(Run, RowsFollowSeedOrder) {
  Json j = base_json();
  j["seeds"] = {9, 2, 5};
  j["threads"] = 2;
  const auto rows = lines(metrics_csv(run_cells(parse_config(j))));
  std::vector<std::string> order;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto s = split(rows[r])[1];
    if (order.empty() || order.back() != s) order.push_back(s);
  }
  EXPECT_EQ(order, (std::vector<std::string>{"9", "2", "5", "9", "2", "5"}));
}

TEST(Run, CommonRandomNumbersAcrossAlgorithms) {
  Json j = base_json();
  j["algorithms"] = {"ucb_individual", "u_full", "oracle"};
  const auto r = run_cells(parse_config(j), true);
  // Every event's reward must equal the tape value for its (t, user, option).
  for (std::size_t s = 0; s < 3; ++s) {
    RewardTape tape(r.cells[0].worlds[s], r.config.seeds[s]);
    std::vector<Matrix<double>> draws;
    for (Step t = 1; t <= 200; ++t) draws.push_back(tape.advance());
    for (const Cell& cell : r.cells)
      for (const Event& e : cell.replications[s].events)
        EXPECT_EQ(e.reward, draws[e.t - 1](e.user, e.option)) << to_string(cell.algorithm);
  }
}

TEST(Run, ManifestRecordsProvenanceFields) {
  const auto dir = fixtures::temp_dir("manifest");
  const auto out = run_experiment(parse_config(base_json()), dir);
  const Json m = Json::parse(fixtures::slurp(out.manifest));
  for (const char* key : {"run_id", "code_version", "config_hash", "seeds", "clipping_events",
                          "warnings", "bound_offsets", "config", "timestamp"})
    EXPECT_TRUE(m.contains(key)) << key;
  EXPECT_EQ(m["seeds"], Json::array({1, 2, 3}));
  EXPECT_EQ(m["bound_offsets"].size(), 6u);
  EXPECT_EQ(parse_config(m["config"]).seeds, parse_config(base_json()).seeds);
}

TEST(Sweep, AlphaSweepSharesSeeds) {
  Json j = base_json();
  j["disclosure"] = {{"mode", "partial"}};
  j["algorithms"] = {"u_part"};
  const auto dir = fixtures::temp_dir("alpha");
  const auto outs = sweep(parse_config(j), SweepParam::Alpha, {0.05, 0.1, 0.15}, dir);
  ASSERT_EQ(outs.size(), 3u);
  std::set<std::string> names;
  std::vector<std::vector<std::string>> seed_cols;
  for (const auto& o : outs) {
    names.insert(o.csv.filename().string());
    std::vector<std::string> seeds;
    const auto rows = lines(fixtures::slurp(o.csv));
    for (std::size_t r = 1; r < rows.size(); ++r) seeds.push_back(split(rows[r])[1]);
    seed_cols.push_back(seeds);
  }
  EXPECT_EQ(names, (std::set<std::string>{"t_alpha-0.05.csv", "t_alpha-0.1.csv", "t_alpha-0.15.csv"}));
  EXPECT_EQ(seed_cols[0], seed_cols[1]);
  EXPECT_EQ(seed_cols[1], seed_cols[2]);
}

TEST(Sweep, SingleValueMatchesRun) {
  Json j = base_json();
  j["disclosure"] = {{"mode", "partial"}};
  j["algorithms"] = {"u_part"};
  const auto base = parse_config(j);
  const auto dir = fixtures::temp_dir("single");
  const auto outs = sweep(base, SweepParam::Alpha, {0.1}, dir);
  auto plain = base;
  plain.run_id = "t_alpha-0.1";
  EXPECT_EQ(fixtures::slurp(outs[0].csv), metrics_csv(run_cells(plain)));
}

TEST(Sweep, RejectsParameterThatAppliesToNothing) {
  const auto c = parse_config(base_json());
  EXPECT_THROW(sweep_point(c, SweepParam::Alpha, 0.1), ConfigError);
  EXPECT_THROW(sweep_point(c, SweepParam::OmegaCross, 0.3), ConfigError);
  EXPECT_THROW(sweep_point(c, SweepParam::Interval, 2.5), ConfigError);
  EXPECT_NO_THROW(sweep_point(c, SweepParam::Interval, 5));
}

TEST(Sweep, StalerBroadcastDoesNotHelp) {
  auto c = fixtures::experiment(fixtures::uniform_world(), {Algorithm::UFull}, 2000, 30);
  std::vector<double> mean, se;
  for (double L : {1.0, 5.0, 20.0}) {
    const auto r = run_cells(sweep_point(c, SweepParam::Interval, L));
    std::vector<std::vector<double>> finals;
    for (const auto& rep : r.cells[0].replications) {
      double total = 0.0;
      for (UserId i = 0; i < 3; ++i) total += rep.pseudo(i, rep.grid.size() - 1);
      finals.push_back({total});
    }
    const auto s = aggregate(finals);
    mean.push_back(s.mean[0]);
    se.push_back(s.std_error[0]);
  }
  for (std::size_t p = 1; p < 3; ++p)
    EXPECT_GE(mean[p] + std::max(se[p], se[p - 1]), mean[p - 1]) << "L index " << p;
}

TEST(Bounds, BothExponentsForEveryAlgorithm) {
  const auto c = parse_config(base_json());
  const auto rows = lines(bounds_csv(c));
  EXPECT_EQ(rows[0], "algorithm,user,exponent,t,bound_value");
  EXPECT_EQ(rows.size(), 1 + 2 * 2 * 3 * c.record_grid().size());
}

TEST(Cli, RunWritesFiles) {
  const auto dir = fixtures::temp_dir("cli_run");
  const auto cfg = write_config(dir, base_json());
  const auto r = cli("run --config " + cfg.string() + " --out " + (dir / "o").string() + " --trace", dir);
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(dir / "o" / "t.csv"));
  EXPECT_TRUE(fs::exists(dir / "o" / "t.manifest.json"));
  const auto trace = fixtures::slurp(dir / "o" / "t.trace.u_full.2.csv");
  EXPECT_EQ(lines(trace).front(), "t,user,option_chosen,reward,disclosed_flag");
  EXPECT_EQ(lines(trace).size(), 1u + 200 * 3 * 3);
}

TEST(Cli, OutputDirFromEnvironment) {
  const auto dir = fixtures::temp_dir("cli_env");
  const auto cfg = write_config(dir, base_json());
  const std::string cmd = "GROUPLEARN_OUT_DIR=" + (dir / "env").string() + " " + GROUPLEARN_CLI_PATH +
                          " run --config " + cfg.string() + " > /dev/null";
  ASSERT_EQ(std::system(cmd.c_str()), 0);
  EXPECT_TRUE(fs::exists(dir / "env" / "t.csv"));
}

TEST(Cli, ConfigErrorIsStructured) {
  const auto dir = fixtures::temp_dir("cli_err");
  Json j = base_json();
  j["alpha"] = -1;
  const auto cfg = write_config(dir, j);
  const auto r = cli("run --config " + cfg.string() + " --out " + dir.string(), dir);
  EXPECT_EQ(r.code, 2);
  const Json err = Json::parse(r.err);
  EXPECT_EQ(err["error"]["field"], "alpha");
  EXPECT_FALSE(fs::exists(dir / "t.csv"));
}

TEST(Cli, SweepAndBounds) {
  const auto dir = fixtures::temp_dir("cli_sweep");
  Json j = base_json();
  j["horizon"] = 50;
  const auto cfg = write_config(dir, j);
  auto r = cli("sweep --config " + cfg.string() + " --param L --values 1,5 --out " + dir.string(), dir);
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(dir / "t_L-1.csv"));
  EXPECT_TRUE(fs::exists(dir / "t_L-5.csv"));
  r = cli("sweep --config " + cfg.string() + " --param alpha --values 0.1 --out " + dir.string(), dir);
  EXPECT_EQ(r.code, 2);
  EXPECT_EQ(Json::parse(r.err)["error"]["field"], "param");
  r = cli("bounds --config " + cfg.string(), dir);
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(lines(r.out).front(), "algorithm,user,exponent,t,bound_value");
}

TEST(Cli, AlphaWarning) {
  const auto dir = fixtures::temp_dir("cli_warn");
  Json j = base_json();
  j["disclosure"] = {{"mode", "partial"}};
  j["algorithms"] = {"u_part"};
  j["alpha"] = 0.3;
  j["horizon"] = 20;
  const auto cfg = write_config(dir, j);
  const auto r = cli("run --config " + cfg.string() + " --out " + dir.string(), dir);
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.err.find("warning"), std::string::npos);
  const Json m = Json::parse(fixtures::slurp(dir / "t.manifest.json"));
  EXPECT_EQ(m["warnings"].size(), 1u);
}
