#include "bichunter/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <thread>
#include <unordered_set>

#include "bichunter/error.hpp"
#include "bichunter/random.hpp"

namespace bichunter {

namespace {

struct PreparedCommit {
  CommitGraph graph;
  Eigen::MatrixXd op;
  PairBatch pairs;
};

// Distinct stream for the epoch order so it does not share draws with init.
constexpr std::uint64_t kOrderStream = 0x6f72646572ULL;

}  // namespace

PairBatch generate_pairs(const CommitGraph& graph, const std::set<std::string>& kept) {
  PairBatch pairs;
  for (std::size_t i = 0; i < graph.num_deleted; ++i) {
    if (!kept.contains(graph.node_ids[i])) continue;
    for (std::size_t j = i + 1; j < graph.num_deleted; ++j) {
      if (!kept.contains(graph.node_ids[j])) continue;
      pairs.push_back({static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j),
                       pair_target(graph.root_cause[i], graph.root_cause[j])});
    }
  }
  return pairs;
}

PairBatch generate_pairs(const CommitGraph& graph) {
  const std::set<std::string> all(graph.node_ids.begin(),
                                  graph.node_ids.begin() + static_cast<std::ptrdiff_t>(graph.num_deleted));
  return generate_pairs(graph, all);
}

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state, const AdamHyper& hyper) {
  if (params.size() != grads.size()) throw ShapeError("parameter and gradient lengths differ");
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (!std::isfinite(grads[i])) {
      throw NumericError("non-finite gradient at parameter " + std::to_string(i) + " on step " +
                         std::to_string(state.step + 1));
    }
  }
  if (state.first_moment.empty()) {
    state.first_moment.assign(params.size(), 0.0);
    state.second_moment.assign(params.size(), 0.0);
  } else if (state.first_moment.size() != params.size()) {
    throw ShapeError("optimizer state does not match the parameter count");
  }
  ++state.step;
  const double correction1 = 1.0 - std::pow(hyper.beta1, static_cast<double>(state.step));
  const double correction2 = 1.0 - std::pow(hyper.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    double& m = state.first_moment[i];
    double& v = state.second_moment[i];
    m = hyper.beta1 * m + (1.0 - hyper.beta1) * grads[i];
    v = hyper.beta2 * v + (1.0 - hyper.beta2) * grads[i] * grads[i];
    const double m_hat = m / correction1;
    const double v_hat = v / correction2;
    params[i] -= hyper.learning_rate * m_hat / (std::sqrt(v_hat) + hyper.eps);
  }
}

EmbeddingMatrix classifier_features(const DatasetIndex& index, const std::vector<std::string>& node_ids,
                                    const TrainConfig& config, const EmbeddingMatrix& embeddings) {
  if (config.classifier_features == ClassifierFeatures::embedding) {
    return EmbeddingMatrix(node_ids, embeddings.gather(node_ids));
  }
  Eigen::MatrixXd counts(static_cast<Eigen::Index>(node_ids.size()), config.bow_dim);
  for (std::size_t i = 0; i < node_ids.size(); ++i) {
    counts.row(static_cast<Eigen::Index>(i)) =
        hash_counts(index.node(node_ids[i]).text, config.bow_dim, kHashEmbeddingSeed).transpose();
  }
  return EmbeddingMatrix(node_ids, std::move(counts));
}

DatasetNoise denoise_commits(const DatasetIndex& index, const CommitSet& commits, const TrainConfig& config,
                             const EmbeddingMatrix& embeddings) {
  DenoiseConfig dc;
  dc.classifier = config.classifier;
  dc.folds = config.cl_folds;
  dc.seed = config.seed;
  dc.threshold_mode = config.threshold_mode;
  const EmbeddingMatrix features = classifier_features(index, index.deleted_nodes(commits), config, embeddings);
  return denoise_dataset(index, commits, features, dc);
}

TrainResult train(const DatasetIndex& index, const CommitSet& commits, const TrainConfig& config,
                  const EmbeddingMatrix& embeddings, const std::set<std::string>* removed) {
  config.validate();
  if (commits.empty()) throw ConfigError("training set is empty");

  TrainResult result;
  std::set<std::string> pruned;
  if (removed) {
    pruned = *removed;
  } else if (config.denoise) {
    const DatasetNoise noise = denoise_commits(index, commits, config, embeddings);
    const auto ids = noise.removed_ids();
    pruned.insert(ids.begin(), ids.end());
  }
  result.removed_nodes.assign(pruned.begin(), pruned.end());

  std::vector<PreparedCommit> prepared;
  for (const std::string& commit : commits) {
    PreparedCommit pc;
    pc.graph = build_commit_graph(index, commit, embeddings, config.edge_weight);
    std::set<std::string> kept;
    for (std::size_t i = 0; i < pc.graph.num_deleted; ++i) {
      if (!pruned.contains(pc.graph.node_ids[i])) kept.insert(pc.graph.node_ids[i]);
    }
    pc.pairs = generate_pairs(pc.graph, kept);
    if (pc.pairs.empty()) continue;
    for (const RankPair& p : pc.pairs) {
      result.pair_nodes.insert(pc.graph.node_ids[static_cast<std::size_t>(p.i)]);
      result.pair_nodes.insert(pc.graph.node_ids[static_cast<std::size_t>(p.j)]);
    }
    pc.op = normalized_operator(pc.graph);
    prepared.push_back(std::move(pc));
  }
  if (prepared.empty()) throw ConfigError("no trainable pairs: every training commit has fewer than 2 kept deleted lines");

  result.model = RankModel::init(embeddings.dim(), config.hidden_dim, config.layers, config.seed);
  std::vector<double> params = result.model.flatten();
  AdamState state;
  const AdamHyper hyper{config.learning_rate, config.beta1, config.beta2, config.adam_eps};

  Rng order_rng(config.seed ^ kOrderStream);
  std::vector<std::size_t> order(prepared.size());
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    shuffle(std::span<std::size_t>(order), order_rng);
    double loss_sum = 0.0;
    std::size_t pair_count = 0;
    for (std::size_t c : order) {
      const PreparedCommit& pc = prepared[c];
      const ForwardCache cache = forward(result.model, pc.op, pc.graph.features);
      const BackwardResult br = backward(result.model, pc.op, cache, pc.pairs);
      if (!std::isfinite(br.loss)) {
        throw NumericError("training diverged: non-finite loss on commit '" + pc.graph.commit_id + "' in epoch " +
                           std::to_string(epoch + 1));
      }
      loss_sum += br.loss * static_cast<double>(pc.pairs.size());
      pair_count += pc.pairs.size();
      const std::vector<double> grads = br.grads.flatten();
      adam_step(params, grads, state, hyper);
      result.model.assign(params);
    }
    result.loss_trace.push_back(loss_sum / static_cast<double>(pair_count));
  }
  return result;
}

std::vector<RankingResult> rank_commits(const RankModel& model, const DatasetIndex& index, const CommitSet& commits,
                                        const EmbeddingMatrix& embeddings, double edge_weight) {
  std::vector<RankingResult> out;
  out.reserve(commits.size());
  for (const std::string& commit : commits) {
    out.push_back(rank_commit(model, build_commit_graph(index, commit, embeddings, edge_weight)));
  }
  return out;
}

RootCauseSet root_causes(const DatasetIndex& index) {
  RootCauseSet out;
  for (const LineNode& node : index.nodes()) {
    if (node.root_cause) out.insert(node.node_id);
  }
  return out;
}

void check_no_leakage(const DatasetIndex& index, const Split& split, const TrainResult& training) {
  for (const std::string& commit : split.test) {
    for (std::size_t i : index.commit_nodes(commit)) {
      if (training.pair_nodes.contains(index.nodes()[i].node_id)) {
        throw Error("leakage", "test node '" + index.nodes()[i].node_id + "' appears in a training pair");
      }
    }
  }
}

FoldOutcome run_split(const DatasetIndex& index, const Split& split, const TrainConfig& config,
                      const EmbeddingMatrix& embeddings, const std::vector<int>& ks,
                      const std::set<std::string>* removed) {
  FoldOutcome fold;
  fold.split = split;
  fold.training = train(index, split.train, config, embeddings, removed);
  check_no_leakage(index, split, fold.training);
  fold.rankings = rank_commits(fold.training.model, index, split.test, embeddings, config.edge_weight);
  fold.report = evaluate(fold.rankings, root_causes(index), ks);
  return fold;
}

ExperimentResult run_kfold(const DatasetIndex& index, const TrainConfig& config, const EmbeddingMatrix& embeddings,
                           int k, const std::vector<int>& ks, int jobs) {
  config.validate();
  const std::vector<Split> splits = kfold_split(index, k, config.seed);

  std::optional<std::set<std::string>> global_removed;
  if (config.denoise && config.denoise_scope == DenoiseScope::global) {
    const auto ids = denoise_commits(index, index.commits(), config, embeddings).removed_ids();
    global_removed.emplace(ids.begin(), ids.end());
  }
  const std::set<std::string>* removed = global_removed ? &*global_removed : nullptr;

  ExperimentResult result;
  result.folds.resize(splits.size());
  std::vector<std::exception_ptr> errors(splits.size());
  std::size_t next = 0;
  std::mutex mutex;
  auto worker = [&] {
    for (;;) {
      std::size_t f;
      {
        std::lock_guard lock(mutex);
        if (next >= splits.size()) return;
        f = next++;
      }
      try {
        result.folds[f] = run_split(index, splits[f], config, embeddings, ks, removed);
      } catch (...) {
        errors[f] = std::current_exception();
      }
    }
  };
  const int threads = std::clamp(jobs, 1, static_cast<int>(splits.size()));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  std::vector<EvalReport> reports;
  for (const FoldOutcome& f : result.folds) reports.push_back(f.report);
  result.mean = average_reports(reports);
  return result;
}

ExperimentResult run_cross_project(const DatasetIndex& index, const TrainConfig& config,
                                   const EmbeddingMatrix& embeddings, const std::set<std::string>& test_projects,
                                   const std::vector<int>& ks) {
  config.validate();
  const Split split = cross_project_split(index, test_projects);
  std::optional<std::set<std::string>> global_removed;
  if (config.denoise && config.denoise_scope == DenoiseScope::global) {
    const auto ids = denoise_commits(index, index.commits(), config, embeddings).removed_ids();
    global_removed.emplace(ids.begin(), ids.end());
  }
  ExperimentResult result;
  result.folds.push_back(run_split(index, split, config, embeddings, ks, global_removed ? &*global_removed : nullptr));
  result.mean = result.folds.front().report;
  return result;
}

}  // namespace bichunter
