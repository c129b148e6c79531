#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace bichunter {

/// n x m matrix of class probabilities; each row sums to one.
using ProbMatrix = Eigen::MatrixXd;

enum class ClassifierKind { logistic_regression, knn };

struct ClassifierSpec {
  ClassifierKind kind = ClassifierKind::logistic_regression;
  // logistic regression
  double l2 = 1e-3;
  int iterations = 200;
  double learning_rate = 0.5;
  // k-nearest neighbours (Euclidean)
  int k = 5;

  void validate() const;
};

ClassifierKind parse_classifier_kind(const std::string& name);
const char* to_string(ClassifierKind kind);

/// A fitted probabilistic classifier.
class Classifier {
 public:
  virtual ~Classifier() = default;
  virtual int num_classes() const = 0;
  virtual int input_dim() const = 0;
  virtual ProbMatrix predict_proba(const Eigen::MatrixXd& features) const = 0;
};

/// Fits a classifier on (features, labels in [0, num_classes)). Custom
/// classifiers plug into the denoiser through this signature.
using ClassifierFactory = std::function<std::unique_ptr<Classifier>(
    const Eigen::MatrixXd& features, const std::vector<int>& labels, int num_classes)>;

/// Throws ConfigError when a class has no samples and NumericError when
/// a feature is not finite.
void check_training_data(const Eigen::MatrixXd& features, const std::vector<int>& labels, int num_classes);

/// Multinomial logistic regression trained by full-batch gradient descent
/// on mean cross-entropy plus (l2/2)||W||^2 (bias unpenalized). Weights
/// start at zero, so training is deterministic without a seed.
class LogisticRegression final : public Classifier {
 public:
  LogisticRegression(Eigen::MatrixXd weights, Eigen::VectorXd bias);

  static LogisticRegression fit(const ClassifierSpec& spec, const Eigen::MatrixXd& features,
                                const std::vector<int>& labels, int num_classes,
                                std::vector<double>* loss_trace = nullptr);

  int num_classes() const override { return static_cast<int>(weights_.rows()); }
  int input_dim() const override { return static_cast<int>(weights_.cols()); }
  ProbMatrix predict_proba(const Eigen::MatrixXd& features) const override;

  const Eigen::MatrixXd& weights() const { return weights_; }
  const Eigen::VectorXd& bias() const { return bias_; }

 private:
  Eigen::MatrixXd weights_;  // m x d
  Eigen::VectorXd bias_;     // m
};

/// k-nearest-neighbour vote with add-one smoothing:
/// p_c = (votes_c + 1) / (k + m). Distance ties go to the lower training index.
class KnnClassifier final : public Classifier {
 public:
  static KnnClassifier fit(const ClassifierSpec& spec, const Eigen::MatrixXd& features,
                           const std::vector<int>& labels, int num_classes);

  int num_classes() const override { return num_classes_; }
  int input_dim() const override { return static_cast<int>(points_.cols()); }
  ProbMatrix predict_proba(const Eigen::MatrixXd& features) const override;

 private:
  Eigen::MatrixXd points_;
  std::vector<int> labels_;
  int num_classes_ = 0;
  int k_ = 1;
};

std::unique_ptr<Classifier> fit(const ClassifierSpec& spec, const Eigen::MatrixXd& features,
                                const std::vector<int>& labels, int num_classes);

ClassifierFactory make_factory(const ClassifierSpec& spec);

}  // namespace bichunter
