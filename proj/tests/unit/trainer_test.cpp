#include "bichunter/trainer.hpp"

#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include "bichunter/checkpoint.hpp"
#include "bichunter/error.hpp"
#include "support/synthetic.hpp"

namespace bichunter {
namespace {

CommitGraph three_deleted_graph() {
  CommitGraph g;
  g.commit_id = "c";
  g.node_ids = {"a", "b", "r", "ctx"};
  g.num_deleted = 3;
  g.adjacency = Eigen::MatrixXd::Zero(4, 4);
  g.features = Eigen::MatrixXd::Zero(4, 2);
  g.root_cause = {false, false, true};
  return g;
}

TEST(GeneratePairs, RootOutranksOthers) {
  const PairBatch pairs = generate_pairs(three_deleted_graph());
  // node order a(0), b(1), r(2); targets are P(i outranks j)
  const PairBatch expected = {{0, 1, 0.5}, {0, 2, 0.0}, {1, 2, 0.0}};
  EXPECT_EQ(pairs, expected);
}

TEST(GeneratePairs, SingleDeletedNodeGivesEmptyBatch) {
  CommitGraph g = three_deleted_graph();
  g.num_deleted = 1;
  g.root_cause = {true};
  EXPECT_TRUE(generate_pairs(g).empty());
}

TEST(GeneratePairs, RemovedRootLeavesOnlyBalancedPairs) {
  const PairBatch pairs = generate_pairs(three_deleted_graph(), {"a", "b"});
  const PairBatch expected = {{0, 1, 0.5}};
  EXPECT_EQ(pairs, expected);
  EXPECT_TRUE(generate_pairs(three_deleted_graph(), {"a", "ctx"}).empty());
}

TEST(Adam, FirstStepIsMinusLearningRateTimesSign) {
  std::vector<double> w = {1.0, -2.0, 0.5};
  const std::vector<double> g = {3.0, -0.01, 1e3};
  AdamState state;
  AdamHyper hyper;
  hyper.learning_rate = 0.01;
  adam_step(w, g, state, hyper);
  EXPECT_NEAR(w[0], 1.0 - 0.01, 1e-9);
  EXPECT_NEAR(w[1], -2.0 + 0.01, 1e-8);
  EXPECT_NEAR(w[2], 0.5 - 0.01, 1e-9);
  EXPECT_EQ(state.step, 1);
}

TEST(Adam, ZeroGradientLeavesParametersAndDecaysMoments) {
  std::vector<double> w = {1.0};
  AdamState state;
  AdamHyper hyper;
  hyper.learning_rate = 0.1;
  adam_step(w, std::vector<double>{2.0}, state, hyper);
  const double after_first = w[0];
  const double m1 = state.first_moment[0];
  const double v1 = state.second_moment[0];
  std::vector<double> frozen = {after_first};
  AdamState copy = state;
  adam_step(frozen, std::vector<double>{0.0}, copy, hyper);
  EXPECT_DOUBLE_EQ(copy.first_moment[0], 0.9 * m1);
  EXPECT_DOUBLE_EQ(copy.second_moment[0], 0.999 * v1);

  std::vector<double> untouched = {4.0};
  AdamState fresh;
  adam_step(untouched, std::vector<double>{0.0}, fresh, hyper);
  EXPECT_EQ(untouched[0], 4.0);
}

TEST(Adam, QuadraticTrajectoryMatchesHandSteppedOracle) {
  // f(w) = w^2, w0 = 1, lr = 0.1; reference values stepped by hand in
  // exact rational arithmetic, then rounded.
  const double expected[] = {0.9000000005, 0.8004122286917928, 0.7015862729460303};
  std::vector<double> w = {1.0};
  AdamState state;
  AdamHyper hyper;
  hyper.learning_rate = 0.1;
  for (double e : expected) {
    adam_step(w, std::vector<double>{2.0 * w[0]}, state, hyper);
    EXPECT_NEAR(w[0], e, 1e-12);
  }
}

TEST(Adam, NonFiniteGradientAborts) {
  std::vector<double> w = {1.0, 2.0};
  AdamState state;
  try {
    adam_step(w, std::vector<double>{0.0, NAN}, state, AdamHyper{});
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("1"), std::string::npos) << e.what();
  }
  EXPECT_THROW(adam_step(w, std::vector<double>{0.0}, state, AdamHyper{}), ShapeError);
}

TrainConfig small_config() {
  TrainConfig c;
  c.embedding_dim = 768;
  c.hidden_dim = 16;
  c.learning_rate = 1e-3;
  c.epochs = 30;
  c.cl_folds = 3;
  return c;
}

class SentinelTrainer : public ::testing::Test {
 protected:
  void SetUp() override {
    index_ = testing::sentinel_corpus(100, 5).index();
    config_ = small_config();
    embeddings_ = embed_dataset(index_, config_.embedding_dim, kHashEmbeddingSeed);
  }
  DatasetIndex index_;
  TrainConfig config_;
  EmbeddingMatrix embeddings_;
};

TEST_F(SentinelTrainer, HeldOutRecallAfterTraining) {
  const Split split = kfold_split(index_, 4, 0).front();
  const FoldOutcome out = run_split(index_, split, config_, embeddings_, {1, 2, 3});
  EXPECT_EQ(out.report.evaluated, split.test.size());
  EXPECT_GE(out.report.recall_at(1), 0.9);
  EXPECT_LE(out.report.mfr, 1.3);
}

TEST_F(SentinelTrainer, LossMostlyDecreasesOverFirstEpochs) {
  TrainConfig c = config_;
  c.epochs = 6;
  const TrainResult r = train(index_, index_.commits(), c, embeddings_);
  ASSERT_EQ(r.loss_trace.size(), 6u);
  int non_increasing = 0;
  for (std::size_t e = 1; e < r.loss_trace.size(); ++e) non_increasing += r.loss_trace[e] <= r.loss_trace[e - 1];
  EXPECT_GE(non_increasing, 4);
}

TEST_F(SentinelTrainer, SameSeedGivesIdenticalCheckpoint) {
  TrainConfig c = config_;
  c.epochs = 3;
  const TrainResult a = train(index_, index_.commits(), c, embeddings_);
  const TrainResult b = train(index_, index_.commits(), c, embeddings_);
  std::ostringstream sa, sb;
  write_checkpoint(sa, a.model, {c.seed, c.hash()});
  write_checkpoint(sb, b.model, {c.seed, c.hash()});
  EXPECT_EQ(sa.str(), sb.str());
  EXPECT_EQ(a.loss_trace, b.loss_trace);

  c.seed = 1;
  const TrainResult other = train(index_, index_.commits(), c, embeddings_);
  EXPECT_NE(other.model.flatten(), a.model.flatten());
}

TEST_F(SentinelTrainer, PreconditionErrors) {
  TrainConfig c = config_;
  c.epochs = 0;
  EXPECT_THROW(train(index_, index_.commits(), c, embeddings_), ConfigError);
  EXPECT_THROW(train(index_, {}, config_, embeddings_), ConfigError);
}

TEST_F(SentinelTrainer, DenoisedNodesNeverEnterPairs) {
  TrainConfig c = config_;
  c.epochs = 1;
  const TrainResult r = train(index_, index_.commits(), c, embeddings_);
  for (const auto& id : r.removed_nodes) EXPECT_FALSE(r.pair_nodes.contains(id)) << id;
}

TEST_F(SentinelTrainer, KFoldAveragesFoldsAndIgnoresJobs) {
  TrainConfig c = config_;
  c.epochs = 2;
  const ExperimentResult one = run_kfold(index_, c, embeddings_, 2, {1, 2});
  const ExperimentResult two = run_kfold(index_, c, embeddings_, 2, {1, 2}, 2);
  ASSERT_EQ(one.folds.size(), 2u);
  const double r1 = (one.folds[0].report.recall_at(1) + one.folds[1].report.recall_at(1)) / 2.0;
  EXPECT_DOUBLE_EQ(one.mean.recall_at(1), r1);
  EXPECT_DOUBLE_EQ(one.mean.mfr, (one.folds[0].report.mfr + one.folds[1].report.mfr) / 2.0);
  for (const auto& f : one.folds) {
    EXPECT_GE(f.report.recall_at(1), 0.0);
    EXPECT_LE(f.report.recall_at(2), 1.0);
  }
  for (std::size_t k = 0; k < 2; ++k) {
    EXPECT_EQ(one.folds[k].training.model.flatten(), two.folds[k].training.model.flatten());
    EXPECT_EQ(one.folds[k].training.loss_trace, two.folds[k].training.loss_trace);
  }
}

TEST_F(SentinelTrainer, GlobalDenoiseScopeRuns) {
  TrainConfig c = config_;
  c.epochs = 1;
  c.denoise_scope = DenoiseScope::global;
  const ExperimentResult r = run_kfold(index_, c, embeddings_, 2, {1});
  EXPECT_EQ(r.folds.size(), 2u);
}

TEST_F(SentinelTrainer, CrossProjectHoldsOutProject) {
  TrainConfig c = config_;
  c.epochs = 2;
  const ExperimentResult r = run_cross_project(index_, c, embeddings_, {"P1"}, {1});
  ASSERT_EQ(r.folds.size(), 1u);
  for (const auto& id : r.folds[0].split.test) EXPECT_EQ(index_.commit_project(id), "P1");
  EXPECT_EQ(r.mean.recall_at(1), r.folds[0].report.recall_at(1));
}

TEST_F(SentinelTrainer, LeakageIsDetected) {
  TrainConfig c = config_;
  c.epochs = 1;
  c.denoise = false;
  const TrainResult r = train(index_, index_.commits(), c, embeddings_);
  const Split split = kfold_split(index_, 4, 0).front();
  try {
    check_no_leakage(index_, split, r);
    FAIL() << "expected leakage error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), "leakage");
  }
}

TEST(Trainer, RootCausesComeFromDatasetLabels) {
  const DatasetIndex index = testing::sentinel_corpus(5, 1).index();
  const RootCauseSet roots = root_causes(index);
  EXPECT_EQ(roots.size(), 5u);
  for (const LineNode& n : index.nodes()) EXPECT_EQ(roots.contains(n.node_id), n.root_cause);
}

}  // namespace
}  // namespace bichunter
