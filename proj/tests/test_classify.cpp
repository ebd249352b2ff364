#include <gtest/gtest.h>

#include <map>
#include <numeric>

#include "fixtures.hpp"
#include "grouplearn/classify.hpp"
#include "grouplearn/simulation.hpp"

using namespace grouplearn;

using Ids = std::vector<OptionId>;

TEST(EstimateTopSet, Examples) {
  Engine rng(1);
  EXPECT_EQ(estimate_top_set(std::vector<Count>{10, 1, 7, 0, 8}, 3, rng), (Ids{0, 2, 4}));
  EXPECT_EQ(estimate_top_set(std::vector<Count>{5, 0, 0}, 1, rng), (Ids{0}));
}

TEST(EstimateTopSet, EqualCountsGiveUniformSubsets) {
  Engine rng(2);
  std::map<Ids, int> hits;
  const int trials = 10000;
  for (int s = 0; s < trials; ++s) ++hits[estimate_top_set(std::vector<Count>{4, 4, 4}, 2, rng)];
  ASSERT_EQ(hits.size(), 3u);
  double chi2 = 0.0;
  for (const auto& [set, h] : hits) chi2 += (h - trials / 3.0) * (h - trials / 3.0) / (trials / 3.0);
  EXPECT_LT(chi2, 9.2103); // chi-square 0.99 quantile, 2 dof
}

TEST(EstimateTopSet, PadsWithUnobservedOptions) {
  Engine rng(3);
  for (int s = 0; s < 50; ++s) {
    const auto set = estimate_top_set(std::vector<Count>{0, 9, 0, 0, 0}, 3, rng);
    ASSERT_EQ(set.size(), 3u);
    EXPECT_TRUE(std::find(set.begin(), set.end(), OptionId{1}) != set.end());
    EXPECT_TRUE(std::is_sorted(set.begin(), set.end()));
  }
}

TEST(AssignGroup, LargestOverlapWins) {
  Engine rng(4);
  const std::vector<Ids> groups{{1, 2}, {2, 3}};
  for (int s = 0; s < 20; ++s) EXPECT_EQ(assign_group(Ids{2, 3}, groups, rng), 1u);
  const std::vector<Ids> three{{0, 1, 2}, {2, 3, 4}, {0, 3, 4}};
  for (GroupId l = 0; l < 3; ++l)
    for (int s = 0; s < 20; ++s) EXPECT_EQ(assign_group(three[l], three, rng), l);
}

TEST(AssignGroup, TiesSplitEvenly) {
  Engine rng(5);
  const std::vector<Ids> groups{{1, 2}, {3, 4}};
  int first = 0;
  const int trials = 10000;
  for (int s = 0; s < trials; ++s) first += assign_group(Ids{1, 3}, groups, rng) == 0;
  // 3 standard errors of a fair coin
  EXPECT_NEAR(first, trials / 2, 3.0 * std::sqrt(trials * 0.25));
}

TEST(AssignGroup, NoGroupsIsAContractViolation) {
  Engine rng(6);
  EXPECT_THROW(assign_group(Ids{0}, {}, rng), ContractViolation);
}

TEST(AssignGroup, FullSetTiesOverAllGroups) {
  Engine rng(7);
  const std::vector<Ids> groups{{0, 1, 2}, {0, 1, 2}, {0, 1, 2}};
  std::vector<int> hits(3, 0);
  for (int s = 0; s < 3000; ++s) {
    const auto set = estimate_top_set(std::vector<Count>{3, 1, 2}, 3, rng);
    ASSERT_EQ(set, (Ids{0, 1, 2}));
    ++hits[assign_group(set, groups, rng)];
  }
  for (int h : hits) EXPECT_GT(h, 800);
}

TEST(Classifier, PermutationEquivariance) {
  const std::vector<OptionId> perm{3, 0, 4, 1, 2}; // option j is renamed perm[j]
  const std::vector<Ids> groups{{0, 1, 2}, {2, 3, 4}};
  std::vector<Ids> renamed;
  for (const auto& g : groups) {
    Ids r;
    for (OptionId j : g) r.push_back(perm[j]);
    std::sort(r.begin(), r.end());
    renamed.push_back(r);
  }
  Engine data(8);
  std::uniform_int_distribution<Count> d(0, 30);
  for (int rep = 0; rep < 200; ++rep) {
    std::vector<Count> counts(5), moved(5);
    for (OptionId j = 0; j < 5; ++j) counts[j] = d(data);
    for (OptionId j = 0; j < 5; ++j) moved[perm[j]] = counts[j];
    std::vector<Count> sorted = counts;
    std::sort(sorted.rbegin(), sorted.rend());
    if (sorted[2] == sorted[3]) continue; // set not unique
    Engine a(rep), b(rep + 1000);
    const auto set = estimate_top_set(counts, 3, a);
    const auto set2 = estimate_top_set(moved, 3, b);
    Ids mapped;
    for (OptionId j : set) mapped.push_back(perm[j]);
    std::sort(mapped.begin(), mapped.end());
    EXPECT_EQ(set2, mapped);
    if (overlap(set, groups[0]) != overlap(set, groups[1]))
      EXPECT_EQ(assign_group(set, groups, a), assign_group(set2, renamed, b));
  }
}

TEST(Overlap, CountsSharedIds) {
  EXPECT_EQ(overlap(Ids{0, 2, 4}, Ids{1, 2, 3, 4}), 2u);
  EXPECT_EQ(overlap(Ids{}, Ids{1}), 0u);
}

TEST(MisclassificationRate, AllRightAndAllWrong) {
  GroupStructure truth;
  truth.group_sets = {{0, 1, 2}, {2, 3, 4}};
  truth.membership = {0, 0, 1, 1};
  std::vector<ClassifierState> right(4), wrong(4);
  for (auto& s : right) s.estimated_group = truth.membership;
  for (auto& s : wrong) s.estimated_group = {1, 1, 0, 0};
  EXPECT_EQ(misclassification_rate(truth, right), 0.0);
  EXPECT_EQ(misclassification_rate(truth, wrong), 1.0);
  // Own slot does not count.
  for (UserId i = 0; i < 4; ++i) right[i].estimated_group[i] = 1 - truth.membership[i];
  EXPECT_EQ(misclassification_rate(truth, right), 0.0);
  EXPECT_EQ(misclassification_rate(truth, std::vector<ClassifierState>(1)), 0.0);
}

TEST(Classifier, RefreshCoversEveryUser) {
  Matrix<Count> decisions(3, 5);
  const std::vector<Ids> groups{{0, 1, 2}, {2, 3, 4}};
  decisions(0, 0) = decisions(0, 1) = decisions(0, 2) = 5;
  decisions(1, 2) = decisions(1, 3) = decisions(1, 4) = 5;
  decisions(2, 0) = decisions(2, 1) = decisions(2, 3) = 5;
  ClassifierState s;
  Engine rng(9);
  s.refresh(decisions, groups, 3, rng);
  EXPECT_EQ(s.estimated_sets[0], (Ids{0, 1, 2}));
  EXPECT_EQ(s.estimated_sets[2], (Ids{0, 1, 3}));
  EXPECT_EQ(s.estimated_group[0], 0u);
  EXPECT_EQ(s.estimated_group[1], 1u);
  EXPECT_EQ(s.estimated_group[2], 0u);
}

TEST(Classifier, RateDecaysInDiverseEnsemble) {
  RunSettings s;
  s.horizon = 10000;
  s.disclosure = Disclosure::partial();
  s.policy.algorithm = Algorithm::DPart;
  s.grid = {100, 1000, 10000};
  int below = 0, better = 0, worse = 0;
  double early = 0.0, mid = 0.0, late = 0.0;
  const int seeds = 100;
  for (int seed = 1; seed <= seeds; ++seed) {
    const World w = build_world(fixtures::diverse_world(), seed);
    const auto r = simulate(w, s, seed);
    ASSERT_EQ(r.err_rate.size(), 3u);
    early += r.err_rate[0];
    mid += r.err_rate[1];
    late += r.err_rate[2];
    below += r.err_rate[2] <= r.err_rate[0];
    better += r.err_rate[2] < r.err_rate[0];
    worse += r.err_rate[2] > r.err_rate[0];
  }
  EXPECT_GE(below, 90);
  EXPECT_GT(better, worse);
  EXPECT_LE(mid, early);
  EXPECT_LE(late, mid);
}
