#ifndef GROUPLEARN_TESTS_FIXTURES_HPP
#define GROUPLEARN_TESTS_FIXTURES_HPP

#include <filesystem>
#include <random>
#include <string>

#include "grouplearn/harness.hpp"

namespace fixtures {

/// Three users, five options, top three shared; exponential rewards.
inline grouplearn::WorldConfig uniform_world() {
  grouplearn::WorldConfig w;
  w.users = 3;
  w.options = 5;
  w.k = 3;
  w.groups = 1;
  w.group_means = {{1.0, 0.8, 0.6, 0.4, 0.2}};
  w.distortion_mean = 3.0;
  w.distortion_variance = 1.0;
  return w;
}

/// Four users in two groups with opposite preferences.
inline grouplearn::WorldConfig diverse_world() {
  grouplearn::WorldConfig w;
  w.users = 4;
  w.options = 5;
  w.k = 3;
  w.groups = 2;
  w.group_means = {{1.0, 0.8, 0.6, 0.4, 0.2}, {0.2, 0.4, 0.6, 0.8, 1.0}};
  w.distortion_mean = 3.0;
  w.distortion_variance = 1.0;
  w.preserve_order = false;
  return w;
}

inline grouplearn::ExperimentConfig experiment(grouplearn::WorldConfig world,
                                               std::vector<grouplearn::Algorithm> algorithms,
                                               grouplearn::Step horizon, std::size_t seeds) {
  grouplearn::ExperimentConfig c;
  c.world = std::move(world);
  c.scenario = c.world.groups > 1 ? grouplearn::Scenario::Diverse : grouplearn::Scenario::Uniform;
  c.algorithms = std::move(algorithms);
  c.horizon = horizon;
  for (std::size_t s = 1; s <= seeds; ++s) c.seeds.push_back(s);
  return c;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() /
             ("grouplearn_" + name + "_" + std::to_string(std::random_device{}()));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

} // namespace fixtures

#endif
