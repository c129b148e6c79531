#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "bichunter/baseclf.hpp"
#include "bichunter/dataset.hpp"
#include "bichunter/embedding.hpp"

namespace bichunter {

enum class ThresholdMode { class_conditional, global };

ThresholdMode parse_threshold_mode(const std::string& name);
const char* to_string(ThresholdMode mode);

/// Count matrix: rows are noisy labels, columns are inferred true labels.
using CountMatrix = Eigen::Matrix<long long, Eigen::Dynamic, Eigen::Dynamic>;
/// Estimated joint distribution of (noisy, true) labels; sums to one.
using JointDist = Eigen::MatrixXd;

/// Noise-cell assignment of one sample that was pruned.
struct NoiseCell {
  int noisy = 0;
  int inferred = 0;
  double margin = 0.0;
};

/// Outcome per sample: removed samples carry the first off-diagonal cell
/// (in row-major order) that selected them.
struct NoiseReport {
  std::vector<std::optional<NoiseCell>> decisions;

  std::size_t size() const { return decisions.size(); }
  bool removed(std::size_t sample) const { return decisions[sample].has_value(); }
  std::vector<std::size_t> removed_samples() const;
  std::vector<std::size_t> kept_samples() const;
};

/// Stratified k-fold fold ids: each class's samples are shuffled with the
/// seed and dealt round-robin over the folds. folds == n is leave-one-out.
std::vector<int> stratified_folds(const std::vector<int>& labels, int num_classes, int folds, std::uint64_t seed);

/// Row i comes from a model trained without sample i.
ProbMatrix oof_probabilities(const Eigen::MatrixXd& features, const std::vector<int>& labels,
                             int num_classes, const ClassifierFactory& factory, int folds,
                             std::uint64_t seed);

ProbMatrix oof_probabilities(const Eigen::MatrixXd& features, const std::vector<int>& labels,
                             int num_classes, const ClassifierSpec& spec, int folds, std::uint64_t seed);

/// Per-class confidence thresholds. class_conditional averages column j
/// over samples labelled j; global averages it over all samples.
Eigen::VectorXd compute_thresholds(const ProbMatrix& probs, const std::vector<int>& labels,
                                   ThresholdMode mode = ThresholdMode::class_conditional);

/// Absolute slack on the threshold test. A probability that equals its
/// class mean exactly in real arithmetic can land an ulp below the
/// floating-point mean; the slack keeps such ties on the candidate side.
inline constexpr double kThresholdSlack = 1e-12;

/// A sample with noisy label i counts toward C[i][j*], where j* is the
/// highest-probability class among those meeting their threshold (ties to
/// the lowest index). Samples with no class above threshold count nowhere.
CountMatrix confident_joint(const ProbMatrix& probs, const std::vector<int>& labels,
                            const Eigen::VectorXd& thresholds);

/// Row-normalizes C, scales row i by |X_{noisy=i}|, normalizes to sum 1.
JointDist estimate_joint(const CountMatrix& counts, const std::vector<int>& labels);

/// For each off-diagonal cell (i, j), removes the floor(n * Q[i][j])
/// samples labelled i with the largest P[.][j] - P[.][i] (ties to the
/// lower sample index).
NoiseReport select_noise(const ProbMatrix& probs, const std::vector<int>& labels, const JointDist& joint,
                         std::size_t n);

struct DenoiseConfig {
  ClassifierSpec classifier;
  int folds = 5;
  std::uint64_t seed = 0;
  ThresholdMode threshold_mode = ThresholdMode::class_conditional;
  int num_classes = 2;
};

/// Intermediate products of one confident-learning pass.
struct DenoiseResult {
  ProbMatrix probs;
  Eigen::VectorXd thresholds;
  CountMatrix counts;
  JointDist joint;
  NoiseReport report;
};

DenoiseResult confident_learning(const Eigen::MatrixXd& features, const std::vector<int>& labels,
                                 const DenoiseConfig& config, const ClassifierFactory& factory);

DenoiseResult confident_learning(const Eigen::MatrixXd& features, const std::vector<int>& labels,
                                 const DenoiseConfig& config);

/// Denoised view of the deleted lines of `commits`: samples are their
/// deleted nodes (DatasetIndex::deleted_nodes order), labelled 1 for a
/// root cause and 0 otherwise, with features taken from `features`.
struct DatasetNoise {
  std::vector<std::string> node_ids;
  DenoiseResult result;

  std::vector<std::string> removed_ids() const;
};

DatasetNoise denoise_dataset(const DatasetIndex& index, const CommitSet& commits,
                             const EmbeddingMatrix& features, const DenoiseConfig& config);

/// Writes one JSON line per sample: node_id, decision, cell, margin.
void write_noise_report(std::ostream& out, const std::vector<std::string>& node_ids, const NoiseReport& report);

}  // namespace bichunter
