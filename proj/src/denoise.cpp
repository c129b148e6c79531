#include "bichunter/denoise.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include <json.hpp>

#include "bichunter/error.hpp"
#include "bichunter/random.hpp"

namespace bichunter {

namespace {

// Slack for floor(n * Q) so that products like 3 * (1/3) land on 1.
constexpr double kFloorSlack = 1e-9;

std::vector<std::size_t> class_sizes(const std::vector<int>& labels, Eigen::Index m) {
  std::vector<std::size_t> sizes(static_cast<std::size_t>(m), 0);
  for (int y : labels) {
    if (y < 0 || y >= m) throw ConfigError("label " + std::to_string(y) + " outside [0, " + std::to_string(m) + ")");
    ++sizes[static_cast<std::size_t>(y)];
  }
  return sizes;
}

void check_probs(const ProbMatrix& probs, const std::vector<int>& labels) {
  if (static_cast<std::size_t>(probs.rows()) != labels.size()) {
    throw ShapeError("probability rows (" + std::to_string(probs.rows()) + ") and labels (" +
                     std::to_string(labels.size()) + ") differ");
  }
}

}  // namespace

ThresholdMode parse_threshold_mode(const std::string& name) {
  if (name == "class_conditional") return ThresholdMode::class_conditional;
  if (name == "global") return ThresholdMode::global;
  throw ConfigError("unknown threshold mode '" + name + "'");
}

const char* to_string(ThresholdMode mode) {
  return mode == ThresholdMode::global ? "global" : "class_conditional";
}

std::vector<std::size_t> NoiseReport::removed_samples() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < decisions.size(); ++i) {
    if (decisions[i]) out.push_back(i);
  }
  return out;
}

std::vector<std::size_t> NoiseReport::kept_samples() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < decisions.size(); ++i) {
    if (!decisions[i]) out.push_back(i);
  }
  return out;
}

std::vector<int> stratified_folds(const std::vector<int>& labels, int num_classes, int folds, std::uint64_t seed) {
  if (folds < 2) throw ConfigError("cross-validation needs at least 2 folds");
  const std::size_t n = labels.size();
  if (static_cast<std::size_t>(folds) > n) {
    throw ConfigError(std::to_string(folds) + " folds requested for " + std::to_string(n) + " samples");
  }
  std::vector<int> fold_of(n, 0);
  if (static_cast<std::size_t>(folds) == n) {
    std::iota(fold_of.begin(), fold_of.end(), 0);
    return fold_of;
  }
  const auto sizes = class_sizes(labels, num_classes);
  for (int c = 0; c < num_classes; ++c) {
    if (sizes[static_cast<std::size_t>(c)] < static_cast<std::size_t>(folds)) {
      throw ConfigError("class " + std::to_string(c) + " has " + std::to_string(sizes[static_cast<std::size_t>(c)]) +
                        " samples, too few to stratify into " + std::to_string(folds) + " folds");
    }
  }
  Rng rng(seed);
  for (int c = 0; c < num_classes; ++c) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < n; ++i) {
      if (labels[i] == c) members.push_back(i);
    }
    shuffle(std::span<std::size_t>(members), rng);
    for (std::size_t r = 0; r < members.size(); ++r) fold_of[members[r]] = static_cast<int>(r % static_cast<std::size_t>(folds));
  }
  return fold_of;
}

ProbMatrix oof_probabilities(const Eigen::MatrixXd& features, const std::vector<int>& labels,
                             int num_classes, const ClassifierFactory& factory, int folds,
                             std::uint64_t seed) {
  if (static_cast<std::size_t>(features.rows()) != labels.size()) {
    throw ShapeError("feature rows and labels differ in count");
  }
  const std::vector<int> fold_of = stratified_folds(labels, num_classes, folds, seed);
  ProbMatrix probs(features.rows(), num_classes);
  for (int f = 0; f < folds; ++f) {
    std::vector<Eigen::Index> train;
    std::vector<Eigen::Index> held_out;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      (fold_of[i] == f ? held_out : train).push_back(static_cast<Eigen::Index>(i));
    }
    std::vector<int> train_labels;
    train_labels.reserve(train.size());
    for (Eigen::Index i : train) train_labels.push_back(labels[static_cast<std::size_t>(i)]);
    const auto model = factory(features(train, Eigen::all), train_labels, num_classes);
    probs(held_out, Eigen::all) = model->predict_proba(features(held_out, Eigen::all));
  }
  return probs;
}

ProbMatrix oof_probabilities(const Eigen::MatrixXd& features, const std::vector<int>& labels,
                             int num_classes, const ClassifierSpec& spec, int folds, std::uint64_t seed) {
  return oof_probabilities(features, labels, num_classes, make_factory(spec), folds, seed);
}

Eigen::VectorXd compute_thresholds(const ProbMatrix& probs, const std::vector<int>& labels, ThresholdMode mode) {
  check_probs(probs, labels);
  const Eigen::Index m = probs.cols();
  const auto sizes = class_sizes(labels, m);
  if (mode == ThresholdMode::global) {
    if (probs.rows() == 0) throw ConfigError("cannot compute thresholds over zero samples");
    // sequential sums keep the result independent of vectorization
    Eigen::VectorXd sums = Eigen::VectorXd::Zero(m);
    for (Eigen::Index i = 0; i < probs.rows(); ++i) sums += probs.row(i).transpose();
    return sums / static_cast<double>(probs.rows());
  }
  Eigen::VectorXd sums = Eigen::VectorXd::Zero(m);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    sums[labels[i]] += probs(static_cast<Eigen::Index>(i), labels[i]);
  }
  for (Eigen::Index j = 0; j < m; ++j) {
    if (sizes[static_cast<std::size_t>(j)] == 0) {
      throw ConfigError("class " + std::to_string(j) + " has no samples; class-conditional threshold undefined");
    }
    sums[j] /= static_cast<double>(sizes[static_cast<std::size_t>(j)]);
  }
  return sums;
}

CountMatrix confident_joint(const ProbMatrix& probs, const std::vector<int>& labels,
                            const Eigen::VectorXd& thresholds) {
  check_probs(probs, labels);
  const Eigen::Index m = probs.cols();
  if (thresholds.size() != m) throw ShapeError("threshold count differs from class count");
  class_sizes(labels, m);
  CountMatrix counts = CountMatrix::Zero(m, m);
  for (std::size_t s = 0; s < labels.size(); ++s) {
    const auto row = probs.row(static_cast<Eigen::Index>(s));
    Eigen::Index best = -1;
    for (Eigen::Index j = 0; j < m; ++j) {
      if (row[j] >= thresholds[j] - kThresholdSlack && (best < 0 || row[j] > row[best])) best = j;
    }
    if (best >= 0) ++counts(labels[s], best);
  }
  return counts;
}

JointDist estimate_joint(const CountMatrix& counts, const std::vector<int>& labels) {
  const Eigen::Index m = counts.rows();
  if (counts.cols() != m) throw ShapeError("count matrix must be square");
  const auto sizes = class_sizes(labels, m);
  JointDist joint = JointDist::Zero(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const long long row_total = counts.row(i).sum();
    if (row_total == 0) continue;
    for (Eigen::Index j = 0; j < m; ++j) {
      joint(i, j) = static_cast<double>(counts(i, j)) / static_cast<double>(row_total) *
                    static_cast<double>(sizes[static_cast<std::size_t>(i)]);
    }
  }
  const double total = joint.sum();
  if (!(total > 0.0)) throw NumericError("confident joint is empty; joint distribution undefined");
  return joint / total;
}

NoiseReport select_noise(const ProbMatrix& probs, const std::vector<int>& labels, const JointDist& joint,
                         std::size_t n) {
  check_probs(probs, labels);
  const Eigen::Index m = probs.cols();
  if (joint.rows() != m || joint.cols() != m) throw ShapeError("joint distribution shape differs from class count");
  NoiseReport report;
  report.decisions.assign(labels.size(), std::nullopt);

  for (Eigen::Index i = 0; i < m; ++i) {
    std::vector<std::size_t> members;
    for (std::size_t s = 0; s < labels.size(); ++s) {
      if (labels[s] == i) members.push_back(s);
    }
    for (Eigen::Index j = 0; j < m; ++j) {
      if (i == j) continue;
      const double quota = std::floor(static_cast<double>(n) * joint(i, j) + kFloorSlack);
      const std::size_t take = std::min(members.size(), static_cast<std::size_t>(std::max(quota, 0.0)));
      if (take == 0) continue;
      std::vector<std::pair<double, std::size_t>> ranked;
      ranked.reserve(members.size());
      for (std::size_t s : members) {
        ranked.emplace_back(probs(static_cast<Eigen::Index>(s), j) - probs(static_cast<Eigen::Index>(s), i), s);
      }
      std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        return a.first > b.first || (a.first == b.first && a.second < b.second);
      });
      for (std::size_t r = 0; r < take; ++r) {
        auto& decision = report.decisions[ranked[r].second];
        if (!decision) decision = NoiseCell{static_cast<int>(i), static_cast<int>(j), ranked[r].first};
      }
    }
  }
  return report;
}

DenoiseResult confident_learning(const Eigen::MatrixXd& features, const std::vector<int>& labels,
                                 const DenoiseConfig& config, const ClassifierFactory& factory) {
  DenoiseResult result;
  result.probs = oof_probabilities(features, labels, config.num_classes, factory, config.folds, config.seed);
  result.thresholds = compute_thresholds(result.probs, labels, config.threshold_mode);
  result.counts = confident_joint(result.probs, labels, result.thresholds);
  result.joint = estimate_joint(result.counts, labels);
  result.report = select_noise(result.probs, labels, result.joint, labels.size());
  return result;
}

DenoiseResult confident_learning(const Eigen::MatrixXd& features, const std::vector<int>& labels,
                                 const DenoiseConfig& config) {
  config.classifier.validate();
  return confident_learning(features, labels, config, make_factory(config.classifier));
}

std::vector<std::string> DatasetNoise::removed_ids() const {
  std::vector<std::string> out;
  for (std::size_t s : result.report.removed_samples()) out.push_back(node_ids[s]);
  return out;
}

DatasetNoise denoise_dataset(const DatasetIndex& index, const CommitSet& commits,
                             const EmbeddingMatrix& features, const DenoiseConfig& config) {
  DatasetNoise out;
  out.node_ids = index.deleted_nodes(commits);
  std::vector<int> labels;
  labels.reserve(out.node_ids.size());
  for (const std::string& id : out.node_ids) labels.push_back(index.node(id).root_cause ? 1 : 0);
  out.result = confident_learning(features.gather(out.node_ids), labels, config);
  return out;
}

void write_noise_report(std::ostream& out, const std::vector<std::string>& node_ids, const NoiseReport& report) {
  if (node_ids.size() != report.size()) throw ShapeError("node ids and noise decisions differ in count");
  for (std::size_t s = 0; s < report.size(); ++s) {
    nlohmann::json rec = {{"node_id", node_ids[s]}};
    if (const auto& cell = report.decisions[s]) {
      rec["decision"] = "removed";
      rec["cell"] = {cell->noisy, cell->inferred};
      rec["margin"] = cell->margin;
    } else {
      rec["decision"] = "kept";
      rec["cell"] = nullptr;
      rec["margin"] = nullptr;
    }
    out << rec.dump() << '\n';
  }
}

}  // namespace bichunter
