#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "bichunter/config.hpp"
#include "bichunter/dataset.hpp"
#include "bichunter/embedding.hpp"
#include "bichunter/gcnrank.hpp"
#include "bichunter/graphbuild.hpp"
#include "bichunter/metrics.hpp"

namespace bichunter {

/// Seed of the built-in hash embedder; fixed so that embeddings do not
/// change with the training seed.
inline constexpr std::uint64_t kHashEmbeddingSeed = 0;

/// All unordered pairs (i < j in node order) among the deleted nodes of
/// `graph` that are in `kept`, with targets from pair_target.
PairBatch generate_pairs(const CommitGraph& graph, const std::set<std::string>& kept);
/// Every deleted node kept.
PairBatch generate_pairs(const CommitGraph& graph);

struct AdamState {
  std::vector<double> first_moment;
  std::vector<double> second_moment;
  std::int64_t step = 0;
};

struct AdamHyper {
  double learning_rate = 5e-6;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Bias-corrected Adam update in place. Moments are lazily sized on the
/// first call. Throws NumericError naming the first non-finite gradient.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state, const AdamHyper& hyper);

struct TrainResult {
  RankModel model;
  std::vector<double> loss_trace;           // mean pair loss per epoch
  std::vector<std::string> removed_nodes;   // deleted lines pruned by the denoiser
  std::set<std::string> pair_nodes;         // every node id that appeared in a training pair
};

/// Denoiser features for `node_ids`: the node embeddings, or hashed
/// bag-of-words counts when the config asks for them.
EmbeddingMatrix classifier_features(const DatasetIndex& index, const std::vector<std::string>& node_ids,
                                    const TrainConfig& config, const EmbeddingMatrix& embeddings);

/// Runs confident learning over the deleted lines of `commits` and returns
/// the node ids it prunes.
DatasetNoise denoise_commits(const DatasetIndex& index, const CommitSet& commits, const TrainConfig& config,
                             const EmbeddingMatrix& embeddings);

/// Trains a model on `commits`. When `removed` is given it replaces the
/// denoising step (used for globally scoped denoising).
TrainResult train(const DatasetIndex& index, const CommitSet& commits, const TrainConfig& config,
                  const EmbeddingMatrix& embeddings, const std::set<std::string>* removed = nullptr);

/// Ranks every commit in `commits`.
std::vector<RankingResult> rank_commits(const RankModel& model, const DatasetIndex& index, const CommitSet& commits,
                                        const EmbeddingMatrix& embeddings, double edge_weight);

/// Root-cause labels as recorded in the dataset (never denoised).
RootCauseSet root_causes(const DatasetIndex& index);

struct FoldOutcome {
  Split split;
  TrainResult training;
  std::vector<RankingResult> rankings;
  EvalReport report;
};

struct ExperimentResult {
  EvalReport mean;
  std::vector<FoldOutcome> folds;
};

/// Throws if any training-pair node belongs to a test commit.
void check_no_leakage(const DatasetIndex& index, const Split& split, const TrainResult& training);

FoldOutcome run_split(const DatasetIndex& index, const Split& split, const TrainConfig& config,
                      const EmbeddingMatrix& embeddings, const std::vector<int>& ks,
                      const std::set<std::string>* removed = nullptr);

/// k-fold cross-validation; folds run on up to `jobs` threads and the
/// result does not depend on `jobs`.
ExperimentResult run_kfold(const DatasetIndex& index, const TrainConfig& config, const EmbeddingMatrix& embeddings,
                           int k, const std::vector<int>& ks, int jobs = 1);

ExperimentResult run_cross_project(const DatasetIndex& index, const TrainConfig& config,
                                   const EmbeddingMatrix& embeddings, const std::set<std::string>& test_projects,
                                   const std::vector<int>& ks);

}  // namespace bichunter
