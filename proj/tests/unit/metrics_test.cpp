#include "bichunter/metrics.hpp"

#include <cmath>

#include <gtest/gtest.h>

#include "bichunter/error.hpp"
#include "bichunter/random.hpp"
#include "support/dense_oracle.hpp"
#include "support/synthetic.hpp"

namespace bichunter {
namespace {

RankingResult ranking(std::string commit, std::vector<std::string> order) {
  RankingResult r;
  r.commit_id = std::move(commit);
  double score = static_cast<double>(order.size());
  for (auto& id : order) r.ranked.emplace_back(std::move(id), score--);
  return r;
}

// Root causes at ranks 1, 2 and 3 of three commits.
std::vector<RankingResult> three_commit_fixture() {
  return {ranking("c1", {"r1", "x1", "y1"}), ranking("c2", {"x2", "r2", "y2"}), ranking("c3", {"x3", "y3", "r3"})};
}

const RootCauseSet kRoots = {"r1", "r2", "r3"};

TEST(Recall, ThreeCommitFixture) {
  const auto results = three_commit_fixture();
  EXPECT_EQ(recall_at_n(results, kRoots, 1), 1.0 / 3.0);
  EXPECT_EQ(recall_at_n(results, kRoots, 2), 2.0 / 3.0);
  EXPECT_EQ(recall_at_n(results, kRoots, 3), 1.0);
  EXPECT_EQ(recall_at_n(results, kRoots, 50), 1.0);
  EXPECT_EQ(mfr(results, kRoots), 2.0);
}

TEST(Mfr, FirstRanksOneAndThree) {
  const std::vector<RankingResult> results = {ranking("a", {"r1", "x"}), ranking("b", {"x", "y", "r2"})};
  EXPECT_EQ(mfr(results, {"r1", "r2"}), 2.0);
  EXPECT_EQ(mfr({ranking("a", {"r1", "x"}), ranking("b", {"r2"})}, {"r1", "r2"}), 1.0);
}

TEST(Metrics, CommitsWithoutRootCauseAreSkipped) {
  auto results = three_commit_fixture();
  results.push_back(ranking("c4", {"p", "q"}));
  const EvalReport report = evaluate(results, kRoots, {1, 2, 3});
  EXPECT_EQ(report.evaluated, 3u);
  EXPECT_EQ(report.skipped, 1u);
  EXPECT_EQ(report.recall_at(1), 1.0 / 3.0);
  EXPECT_EQ(report.mfr, 2.0);
  EXPECT_EQ(recall_at_n({ranking("c4", {"p"})}, kRoots, 1), 0.0);
  EXPECT_TRUE(std::isnan(mfr({ranking("c4", {"p"})}, kRoots)));
}

TEST(RankScores, TiesOrderedByNodeId) {
  const RankingResult r = rank_scores("c", {"b", "a", "c"}, Eigen::Vector3d(1.0, 1.0, 1.0));
  ASSERT_EQ(r.ranked.size(), 3u);
  EXPECT_EQ(r.ranked[0].first, "a");
  EXPECT_EQ(r.ranked[1].first, "b");
  EXPECT_EQ(r.ranked[2].first, "c");
  const RankingResult single = rank_scores("c", {"z"}, Eigen::VectorXd::Constant(1, -3.0));
  EXPECT_EQ(single.ranked.front().first, "z");
}

TEST(RankScores, InvariantUnderConstantShift) {
  Rng rng(4);
  const std::vector<std::string> ids = {"a", "b", "c", "d", "e", "f"};
  for (int t = 0; t < 20; ++t) {
    Eigen::VectorXd s(6);
    for (int i = 0; i < 6; ++i) s[i] = static_cast<double>(uniform_index(rng, 4));  // ties likely
    const auto base = rank_scores("c", ids, s);
    const auto shifted = rank_scores("c", ids, (s.array() + 7.0).matrix());
    for (std::size_t k = 0; k < ids.size(); ++k) EXPECT_EQ(base.ranked[k].first, shifted.ranked[k].first);
  }
}

TEST(RankCommit, MatchesOracleScores) {
  Rng rng(13);
  CommitGraph g;
  g.commit_id = "c";
  g.node_ids = {"d0", "d1", "d2", "x0", "x1"};
  g.num_deleted = 3;
  g.adjacency = testing::random_adjacency(rng, 5, 0.6, true);
  g.features = testing::random_matrix(rng, 5, 4);
  g.root_cause = {false, true, false};
  RankModel model = RankModel::init(4, 6, 2, 1);
  model.head_weight << 1.0, -2.0, 0.5, 0.0, 3.0, -1.0;
  model.head_bias = 0.3;
  const RankingResult r = rank_commit(model, g);
  const auto oracle = testing::oracle_scores(model, testing::oracle_operator(testing::to_dense(g.adjacency)),
                                             testing::to_dense(g.features));
  ASSERT_EQ(r.ranked.size(), 3u);
  for (const auto& [id, score] : r.ranked) {
    const auto i = static_cast<std::size_t>(id[1] - '0');
    EXPECT_NEAR(score, oracle[i], 1e-10);
  }
  for (std::size_t k = 1; k < r.ranked.size(); ++k) EXPECT_GE(r.ranked[k - 1].second, r.ranked[k].second);

  RankModel wrong = RankModel::init(5, 6, 2, 1);
  EXPECT_THROW(rank_commit(wrong, g), ShapeError);
}

struct RandomSet {
  std::vector<RankingResult> results;
  RootCauseSet roots;
};

RandomSet random_results(Rng& rng) {
  RandomSet set;
  const std::size_t commits = 1 + uniform_index(rng, 30);
  for (std::size_t c = 0; c < commits; ++c) {
    const std::size_t size = 1 + uniform_index(rng, 8);
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < size; ++i) {
      ids.push_back("c" + std::to_string(c) + "n" + std::to_string(i));
      if (uniform_index(rng, 4) == 0) set.roots.insert(ids.back());
    }
    Eigen::VectorXd scores(static_cast<Eigen::Index>(size));
    for (auto& s : scores) s = static_cast<double>(uniform_index(rng, 5));
    set.results.push_back(rank_scores("c" + std::to_string(c), ids, scores));
  }
  return set;
}

TEST(Metrics, MatchBruteForceRecount) {
  Rng rng(50);
  for (int trial = 0; trial < 50; ++trial) {
    const RandomSet set = random_results(rng);
    // Recount from scratch: walk each ranking, note the first root position.
    std::vector<std::size_t> firsts;
    for (const auto& r : set.results) {
      for (std::size_t pos = 0; pos < r.ranked.size(); ++pos) {
        if (set.roots.count(r.ranked[pos].first)) {
          firsts.push_back(pos + 1);
          break;
        }
      }
    }
    for (std::size_t n = 1; n <= 9; ++n) {
      std::size_t hits = 0;
      for (std::size_t f : firsts) hits += f <= n ? 1 : 0;
      const double expected = firsts.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(firsts.size());
      EXPECT_EQ(recall_at_n(set.results, set.roots, n), expected);
    }
    if (!firsts.empty()) {
      double sum = 0.0;
      for (std::size_t f : firsts) sum += static_cast<double>(f);
      EXPECT_DOUBLE_EQ(mfr(set.results, set.roots), sum / static_cast<double>(firsts.size()));
      EXPECT_GE(mfr(set.results, set.roots), 1.0);
    }
  }
}

TEST(Metrics, RecallMonotoneInN) {
  Rng rng(51);
  for (int trial = 0; trial < 50; ++trial) {
    const RandomSet set = random_results(rng);
    double prev = 0.0;
    for (std::size_t n = 1; n <= 10; ++n) {
      const double r = recall_at_n(set.results, set.roots, n);
      EXPECT_GE(r, prev);
      EXPECT_LE(r, 1.0);
      prev = r;
    }
  }
}

TEST(Report, AverageJsonAndCsv) {
  const EvalReport a = evaluate(three_commit_fixture(), kRoots, {1, 3});
  const EvalReport b = evaluate({ranking("d", {"r9"})}, {"r9"}, {1, 3});
  const EvalReport mean = average_reports({a, b});
  EXPECT_DOUBLE_EQ(mean.recall_at(1), (1.0 / 3.0 + 1.0) / 2.0);
  EXPECT_DOUBLE_EQ(mean.mfr, 1.5);
  EXPECT_EQ(mean.evaluated, 4u);

  const nlohmann::json j = to_json(a);
  EXPECT_EQ(j["recall@1"], 1.0 / 3.0);
  EXPECT_EQ(j["mfr"], 2.0);
  EXPECT_EQ(j["commits_evaluated"], 3);
  EXPECT_EQ(first_ranks_csv(a), "commit_id,first_rank\nc1,1\nc2,2\nc3,3\n");
}

}  // namespace
}  // namespace bichunter
