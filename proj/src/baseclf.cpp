#include "bichunter/baseclf.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "bichunter/error.hpp"

namespace bichunter {

namespace {

// Row-wise softmax of logits (n x m), shifted by the row max.
Eigen::MatrixXd softmax_rows(Eigen::MatrixXd logits) {
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    logits.row(i).array() -= logits.row(i).maxCoeff();
    logits.row(i) = logits.row(i).array().exp().matrix();
    logits.row(i) /= logits.row(i).sum();
  }
  return logits;
}

void check_dim(const Classifier& model, const Eigen::MatrixXd& features) {
  if (features.cols() != model.input_dim()) {
    throw ShapeError("classifier expects " + std::to_string(model.input_dim()) + " features, got " +
                     std::to_string(features.cols()));
  }
}

}  // namespace

void ClassifierSpec::validate() const {
  if (kind == ClassifierKind::logistic_regression) {
    if (l2 < 0.0) throw ConfigError("logistic regression l2 must be >= 0");
    if (iterations < 1) throw ConfigError("logistic regression iterations must be >= 1");
    if (!(learning_rate > 0.0)) throw ConfigError("logistic regression learning rate must be > 0");
  } else if (k < 1) {
    throw ConfigError("knn k must be >= 1");
  }
}

ClassifierKind parse_classifier_kind(const std::string& name) {
  if (name == "lr" || name == "logistic_regression") return ClassifierKind::logistic_regression;
  if (name == "knn") return ClassifierKind::knn;
  throw ConfigError("unknown classifier '" + name + "' (expected lr or knn)");
}

const char* to_string(ClassifierKind kind) {
  return kind == ClassifierKind::knn ? "knn" : "lr";
}

void check_training_data(const Eigen::MatrixXd& features, const std::vector<int>& labels, int num_classes) {
  if (num_classes < 2) throw ConfigError("need at least two classes");
  if (static_cast<std::size_t>(features.rows()) != labels.size()) {
    throw ShapeError("feature rows and labels differ in count");
  }
  if (!features.allFinite()) throw NumericError("non-finite feature value in classifier input");
  std::vector<int> counts(static_cast<std::size_t>(num_classes), 0);
  for (int y : labels) {
    if (y < 0 || y >= num_classes) throw ConfigError("label " + std::to_string(y) + " out of range");
    ++counts[static_cast<std::size_t>(y)];
  }
  for (int c = 0; c < num_classes; ++c) {
    if (counts[static_cast<std::size_t>(c)] == 0) {
      throw ConfigError("class " + std::to_string(c) + " has no training samples");
    }
  }
}

LogisticRegression::LogisticRegression(Eigen::MatrixXd weights, Eigen::VectorXd bias)
    : weights_(std::move(weights)), bias_(std::move(bias)) {}

LogisticRegression LogisticRegression::fit(const ClassifierSpec& spec, const Eigen::MatrixXd& features,
                                           const std::vector<int>& labels, int num_classes,
                                           std::vector<double>* loss_trace) {
  spec.validate();
  check_training_data(features, labels, num_classes);
  const Eigen::Index n = features.rows();
  const Eigen::Index d = features.cols();
  const Eigen::Index m = num_classes;

  Eigen::MatrixXd targets = Eigen::MatrixXd::Zero(n, m);
  for (Eigen::Index i = 0; i < n; ++i) targets(i, labels[static_cast<std::size_t>(i)]) = 1.0;

  // The softmax cross-entropy Hessian is bounded by (1/2) E[||x||^2 + 1] + l2,
  // so capping the step at its inverse keeps every iteration a descent step.
  const double curvature = 0.5 * (features.rowwise().squaredNorm().array() + 1.0).mean() + spec.l2;
  const double step = std::min(spec.learning_rate, 1.0 / curvature);

  Eigen::MatrixXd weights = Eigen::MatrixXd::Zero(m, d);
  Eigen::VectorXd bias = Eigen::VectorXd::Zero(m);
  auto loss_of = [&](const Eigen::MatrixXd& probs) {
    double ce = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) ce -= std::log(std::max(probs(i, labels[static_cast<std::size_t>(i)]), 1e-300));
    return ce / static_cast<double>(n) + 0.5 * spec.l2 * weights.squaredNorm();
  };

  for (int it = 0; it < spec.iterations; ++it) {
    Eigen::MatrixXd logits = features * weights.transpose();
    logits.rowwise() += bias.transpose();
    const Eigen::MatrixXd probs = softmax_rows(std::move(logits));
    if (loss_trace) loss_trace->push_back(loss_of(probs));
    const Eigen::MatrixXd residual = (probs - targets) / static_cast<double>(n);
    const Eigen::MatrixXd grad_w = residual.transpose() * features + spec.l2 * weights;
    const Eigen::VectorXd grad_b = residual.colwise().sum().transpose();
    weights -= step * grad_w;
    bias -= step * grad_b;
  }
  if (loss_trace) {
    Eigen::MatrixXd logits = features * weights.transpose();
    logits.rowwise() += bias.transpose();
    loss_trace->push_back(loss_of(softmax_rows(std::move(logits))));
  }
  return LogisticRegression(std::move(weights), std::move(bias));
}

ProbMatrix LogisticRegression::predict_proba(const Eigen::MatrixXd& features) const {
  check_dim(*this, features);
  Eigen::MatrixXd logits = features * weights_.transpose();
  logits.rowwise() += bias_.transpose();
  return softmax_rows(std::move(logits));
}

KnnClassifier KnnClassifier::fit(const ClassifierSpec& spec, const Eigen::MatrixXd& features,
                                 const std::vector<int>& labels, int num_classes) {
  spec.validate();
  check_training_data(features, labels, num_classes);
  KnnClassifier model;
  model.points_ = features;
  model.labels_ = labels;
  model.num_classes_ = num_classes;
  model.k_ = std::min<int>(spec.k, static_cast<int>(features.rows()));
  return model;
}

ProbMatrix KnnClassifier::predict_proba(const Eigen::MatrixXd& features) const {
  check_dim(*this, features);
  const Eigen::Index n = points_.rows();
  ProbMatrix probs(features.rows(), num_classes_);
  std::vector<std::pair<double, Eigen::Index>> dist(static_cast<std::size_t>(n));
  for (Eigen::Index q = 0; q < features.rows(); ++q) {
    for (Eigen::Index i = 0; i < n; ++i) {
      dist[static_cast<std::size_t>(i)] = {(points_.row(i) - features.row(q)).squaredNorm(), i};
    }
    std::partial_sort(dist.begin(), dist.begin() + k_, dist.end());
    Eigen::RowVectorXd votes = Eigen::RowVectorXd::Ones(num_classes_);
    for (int r = 0; r < k_; ++r) votes[labels_[static_cast<std::size_t>(dist[static_cast<std::size_t>(r)].second)]] += 1.0;
    probs.row(q) = votes / static_cast<double>(k_ + num_classes_);
  }
  return probs;
}

std::unique_ptr<Classifier> fit(const ClassifierSpec& spec, const Eigen::MatrixXd& features,
                                const std::vector<int>& labels, int num_classes) {
  if (spec.kind == ClassifierKind::knn) {
    return std::make_unique<KnnClassifier>(KnnClassifier::fit(spec, features, labels, num_classes));
  }
  return std::make_unique<LogisticRegression>(LogisticRegression::fit(spec, features, labels, num_classes));
}

ClassifierFactory make_factory(const ClassifierSpec& spec) {
  return [spec](const Eigen::MatrixXd& features, const std::vector<int>& labels, int num_classes) {
    return fit(spec, features, labels, num_classes);
  };
}

}  // namespace bichunter
