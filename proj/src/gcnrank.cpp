#include "bichunter/gcnrank.hpp"

#include <cmath>

#include "bichunter/error.hpp"
#include "bichunter/random.hpp"

namespace bichunter {

namespace {

void glorot_fill(Eigen::Ref<Eigen::MatrixXd> block, double fan_in, double fan_out, Rng& rng) {
  const double bound = std::sqrt(6.0 / (fan_in + fan_out));
  for (Eigen::Index c = 0; c < block.cols(); ++c) {
    for (Eigen::Index r = 0; r < block.rows(); ++r) block(r, c) = uniform_real(rng, -bound, bound);
  }
}

template <typename Model, typename Fn>
void visit_blocks(Model& model, Fn&& fn) {
  for (std::size_t l = 0; l < model.weights.size(); ++l) {
    auto& w = model.weights[l];
    fn("W" + std::to_string(l), w.data(), w.size(), w.rows(), w.cols());
  }
  fn(std::string("norm_gain"), model.norm_gain.data(), model.norm_gain.size(), model.norm_gain.size(), Eigen::Index{1});
  fn(std::string("norm_bias"), model.norm_bias.data(), model.norm_bias.size(), model.norm_bias.size(), Eigen::Index{1});
  fn(std::string("head_weight"), model.head_weight.data(), model.head_weight.size(), model.head_weight.size(),
     Eigen::Index{1});
  fn(std::string("head_bias"), &model.head_bias, Eigen::Index{1}, Eigen::Index{1}, Eigen::Index{1});
}

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

}  // namespace

RankModel RankModel::init(int input_dim, int hidden_dim, int layers, std::uint64_t seed) {
  if (input_dim < 1 || hidden_dim < 1) throw ConfigError("model dimensions must be positive");
  if (layers < 1 || layers > 4) throw ConfigError("GCN layer count must be in [1, 4]");
  Rng rng(seed);
  RankModel model;
  int fan_in = input_dim;
  for (int l = 0; l < layers; ++l) {
    Eigen::MatrixXd w(fan_in, hidden_dim);
    glorot_fill(w, fan_in, hidden_dim, rng);
    model.weights.push_back(std::move(w));
    fan_in = hidden_dim;
  }
  model.norm_gain = Eigen::VectorXd::Ones(hidden_dim);
  model.norm_bias = Eigen::VectorXd::Zero(hidden_dim);
  model.head_weight.resize(hidden_dim);
  glorot_fill(model.head_weight, hidden_dim, 1, rng);
  model.head_bias = 0.0;
  return model;
}

RankModel RankModel::zeros_like(const RankModel& like) {
  RankModel z;
  for (const auto& w : like.weights) z.weights.push_back(Eigen::MatrixXd::Zero(w.rows(), w.cols()));
  z.norm_gain = Eigen::VectorXd::Zero(like.norm_gain.size());
  z.norm_bias = Eigen::VectorXd::Zero(like.norm_bias.size());
  z.head_weight = Eigen::VectorXd::Zero(like.head_weight.size());
  z.head_bias = 0.0;
  return z;
}

void RankModel::for_each_block(const std::function<void(const std::string&, std::span<double>, Eigen::Index,
                                                        Eigen::Index)>& fn) {
  visit_blocks(*this, [&](const std::string& name, double* data, Eigen::Index size, Eigen::Index rows,
                          Eigen::Index cols) { fn(name, std::span<double>(data, static_cast<std::size_t>(size)), rows, cols); });
}

void RankModel::for_each_block(const std::function<void(const std::string&, std::span<const double>, Eigen::Index,
                                                        Eigen::Index)>& fn) const {
  visit_blocks(*this, [&](const std::string& name, const double* data, Eigen::Index size, Eigen::Index rows,
                          Eigen::Index cols) {
    fn(name, std::span<const double>(data, static_cast<std::size_t>(size)), rows, cols);
  });
}

std::size_t RankModel::parameter_count() const {
  std::size_t total = 0;
  for_each_block([&](const std::string&, std::span<const double> v, Eigen::Index, Eigen::Index) { total += v.size(); });
  return total;
}

std::vector<double> RankModel::flatten() const {
  std::vector<double> flat;
  flat.reserve(parameter_count());
  for_each_block([&](const std::string&, std::span<const double> v, Eigen::Index, Eigen::Index) {
    flat.insert(flat.end(), v.begin(), v.end());
  });
  return flat;
}

void RankModel::assign(std::span<const double> flat) {
  if (flat.size() != parameter_count()) throw ShapeError("parameter vector length does not match the model");
  std::size_t offset = 0;
  for_each_block([&](const std::string&, std::span<double> v, Eigen::Index, Eigen::Index) {
    std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(offset), v.size(), v.begin());
    offset += v.size();
  });
}

bool RankModel::all_finite() const {
  bool finite = true;
  for_each_block([&](const std::string&, std::span<const double> v, Eigen::Index, Eigen::Index) {
    for (double x : v) finite = finite && std::isfinite(x);
  });
  return finite;
}

ForwardCache forward(const RankModel& model, const Eigen::MatrixXd& op, const Eigen::MatrixXd& features) {
  if (op.rows() != op.cols() || op.rows() != features.rows()) {
    throw ShapeError("operator is " + std::to_string(op.rows()) + "x" + std::to_string(op.cols()) + " but features have " +
                     std::to_string(features.rows()) + " rows");
  }
  if (features.cols() != model.input_dim()) {
    throw ShapeError("model expects " + std::to_string(model.input_dim()) + "-d features, got " +
                     std::to_string(features.cols()));
  }
  ForwardCache cache;
  Eigen::MatrixXd hidden = features;
  for (const auto& w : model.weights) {
    cache.propagated.push_back(op * hidden);
    cache.pre_activation.push_back(cache.propagated.back() * w);
    hidden = cache.pre_activation.back().cwiseMax(0.0);
  }

  const Eigen::Index n = hidden.rows();
  const double h = static_cast<double>(hidden.cols());
  cache.normalized.resize(n, hidden.cols());
  cache.inv_std.resize(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const double mean = hidden.row(r).mean();
    const Eigen::RowVectorXd centered = hidden.row(r).array() - mean;
    const double var = centered.squaredNorm() / h;
    cache.inv_std[r] = 1.0 / std::sqrt(var + kLayerNormEps);
    cache.normalized.row(r) = centered * cache.inv_std[r];
  }
  cache.normed_output = (cache.normalized.array().rowwise() * model.norm_gain.transpose().array()).rowwise() +
                        model.norm_bias.transpose().array();
  cache.scores = (cache.normed_output * model.head_weight).array() + model.head_bias;
  return cache;
}

Eigen::VectorXd deleted_scores(const ForwardCache& cache, std::size_t num_deleted) {
  if (static_cast<Eigen::Index>(num_deleted) > cache.scores.size()) throw ShapeError("more deleted nodes than scores");
  return cache.scores.head(static_cast<Eigen::Index>(num_deleted));
}

double pair_prob(double s_i, double s_j) {
  const double d = s_i - s_j;
  if (d >= 0.0) return 1.0 / (1.0 + std::exp(-d));
  const double e = std::exp(d);
  return e / (1.0 + e);
}

double pair_target(bool root_i, bool root_j) {
  if (root_i == root_j) return 0.5;
  return root_i ? 1.0 : 0.0;
}

double pair_loss(double prob, double target) {
  const double p = std::clamp(prob, kProbClamp, 1.0 - kProbClamp);
  return -target * std::log(p) - (1.0 - target) * std::log(1.0 - p);
}

double pair_loss_from_diff(double diff, double target) { return softplus(diff) - target * diff; }

double batch_loss(const Eigen::VectorXd& scores, const PairBatch& pairs) {
  if (pairs.empty()) return 0.0;
  double total = 0.0;
  for (const RankPair& p : pairs) total += pair_loss_from_diff(scores[p.i] - scores[p.j], p.target);
  return total / static_cast<double>(pairs.size());
}

BackwardResult backward(const RankModel& model, const Eigen::MatrixXd& op, const ForwardCache& cache,
                        const PairBatch& pairs) {
  const Eigen::Index n = cache.scores.size();
  if (static_cast<int>(cache.pre_activation.size()) != model.layers() || op.rows() != n ||
      cache.normalized.cols() != model.hidden_dim()) {
    throw ShapeError("forward cache does not match the model or operator");
  }
  BackwardResult out{0.0, RankModel::zeros_like(model)};
  if (pairs.empty()) return out;

  const double scale = 1.0 / static_cast<double>(pairs.size());
  Eigen::VectorXd grad_scores = Eigen::VectorXd::Zero(n);
  for (const RankPair& p : pairs) {
    if (p.i < 0 || p.j < 0 || p.i >= n || p.j >= n || p.i == p.j) throw ShapeError("pair index out of range");
    const double diff = cache.scores[p.i] - cache.scores[p.j];
    out.loss += pair_loss_from_diff(diff, p.target);
    const double g = (pair_prob(cache.scores[p.i], cache.scores[p.j]) - p.target) * scale;
    grad_scores[p.i] += g;
    grad_scores[p.j] -= g;
  }
  out.loss *= scale;

  RankGradients& grads = out.grads;
  grads.head_weight = cache.normed_output.transpose() * grad_scores;
  grads.head_bias = grad_scores.sum();

  const Eigen::MatrixXd grad_normed = grad_scores * model.head_weight.transpose();
  grads.norm_gain = (grad_normed.array() * cache.normalized.array()).colwise().sum().transpose();
  grads.norm_bias = grad_normed.colwise().sum().transpose();

  const Eigen::MatrixXd grad_xhat = grad_normed.array().rowwise() * model.norm_gain.transpose().array();
  const double h = static_cast<double>(cache.normalized.cols());
  Eigen::MatrixXd grad_hidden(n, cache.normalized.cols());
  for (Eigen::Index r = 0; r < n; ++r) {
    const double sum_g = grad_xhat.row(r).sum();
    const double sum_gx = grad_xhat.row(r).dot(cache.normalized.row(r));
    grad_hidden.row(r) = (cache.inv_std[r] / h) *
                         (h * grad_xhat.row(r).array() - sum_g - cache.normalized.row(r).array() * sum_gx).matrix();
  }

  for (int l = model.layers() - 1; l >= 0; --l) {
    const auto idx = static_cast<std::size_t>(l);
    const Eigen::MatrixXd grad_pre =
        (cache.pre_activation[idx].array() > 0.0).select(grad_hidden, Eigen::MatrixXd::Zero(n, grad_hidden.cols()));
    grads.weights[idx] = cache.propagated[idx].transpose() * grad_pre;
    if (l > 0) grad_hidden = op.transpose() * (grad_pre * model.weights[idx].transpose());
  }
  return out;
}

}  // namespace bichunter
