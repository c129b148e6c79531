#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace bichunter {

inline constexpr double kLayerNormEps = 1e-5;
inline constexpr double kProbClamp = 1e-12;

/// Stacked GCN layers H <- ReLU(L H W), per-node layer normalization of the
/// last hidden layer, and a linear head giving one score per node.
struct RankModel {
  std::vector<Eigen::MatrixXd> weights;  // layer l maps dim_l -> hidden
  Eigen::VectorXd norm_gain;
  Eigen::VectorXd norm_bias;
  Eigen::VectorXd head_weight;
  double head_bias = 0.0;

  /// Glorot-uniform layer and head weights, unit gain, zero biases.
  static RankModel init(int input_dim, int hidden_dim, int layers, std::uint64_t seed);
  /// Same shapes as `like`, every parameter zero (gradient accumulator).
  static RankModel zeros_like(const RankModel& like);

  int input_dim() const { return weights.empty() ? 0 : static_cast<int>(weights.front().rows()); }
  int hidden_dim() const { return static_cast<int>(norm_gain.size()); }
  int layers() const { return static_cast<int>(weights.size()); }

  /// Visits every parameter block in checkpoint order:
  /// W0..W{n-1}, norm_gain, norm_bias, head_weight, head_bias.
  void for_each_block(const std::function<void(const std::string& name, std::span<double> values,
                                               Eigen::Index rows, Eigen::Index cols)>& fn);
  void for_each_block(const std::function<void(const std::string& name, std::span<const double> values,
                                               Eigen::Index rows, Eigen::Index cols)>& fn) const;

  std::size_t parameter_count() const;
  std::vector<double> flatten() const;
  void assign(std::span<const double> flat);
  bool all_finite() const;
};

using RankGradients = RankModel;

/// Activations kept for the backward pass.
struct ForwardCache {
  std::vector<Eigen::MatrixXd> propagated;      // L H^(l)
  std::vector<Eigen::MatrixXd> pre_activation;  // L H^(l) W^(l)
  Eigen::MatrixXd normalized;                   // per-node standardized H^(n)
  Eigen::VectorXd inv_std;
  Eigen::MatrixXd normed_output;                // gain * normalized + bias
  Eigen::VectorXd scores;                       // one per node
};

/// One unordered training pair within a commit graph; `target` is the
/// probability that node i should outrank node j.
struct RankPair {
  Eigen::Index i = 0;
  Eigen::Index j = 0;
  double target = 0.5;

  bool operator==(const RankPair&) const = default;
};
using PairBatch = std::vector<RankPair>;

ForwardCache forward(const RankModel& model, const Eigen::MatrixXd& op, const Eigen::MatrixXd& features);

/// Scores of the first `num_deleted` nodes (deleted lines lead the node order).
Eigen::VectorXd deleted_scores(const ForwardCache& cache, std::size_t num_deleted);

/// sigmoid(s_i - s_j), evaluated without overflow.
double pair_prob(double s_i, double s_j);

/// 1 if only i is a root cause, 0 if only j is, 0.5 otherwise.
double pair_target(bool root_i, bool root_j);

/// Cross-entropy of a pair probability against its target; the
/// probability is clamped to [1e-12, 1 - 1e-12].
double pair_loss(double prob, double target);

/// Same loss written in terms of the score difference d = s_i - s_j:
/// softplus(d) - target * d. Used for training; agrees with pair_loss
/// wherever the clamp is inactive.
double pair_loss_from_diff(double diff, double target);

/// Mean pair loss of a batch given node scores (0 for an empty batch).
double batch_loss(const Eigen::VectorXd& scores, const PairBatch& pairs);

struct BackwardResult {
  double loss = 0.0;
  RankGradients grads;
};

/// Exact gradient of the mean batch loss with respect to every parameter.
/// The ReLU derivative at 0 is taken as 0.
BackwardResult backward(const RankModel& model, const Eigen::MatrixXd& op, const ForwardCache& cache,
                        const PairBatch& pairs);

}  // namespace bichunter
