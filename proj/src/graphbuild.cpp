#include "bichunter/graphbuild.hpp"

#include <algorithm>
#include <map>
#include <unordered_map>

#include "bichunter/error.hpp"

namespace bichunter {

std::vector<EdgeRecord> derive_edges_by_reachability(const std::vector<Dependency>& deps,
                                                     const std::set<std::string>& sources,
                                                     const std::set<std::string>& targets,
                                                     double weight) {
  std::map<std::string, std::vector<std::string>> out_edges;
  for (const Dependency& d : deps) {
    if (d.from.empty() || d.to.empty()) throw DataError("dependency with an empty endpoint");
    out_edges[d.from].push_back(d.to);
  }

  std::set<std::pair<std::string, std::string>> pairs;
  for (const std::string& source : sources) {
    // Iterative DFS; the visited set makes cycles terminate.
    std::set<std::string> visited{source};
    std::vector<std::string> stack{source};
    while (!stack.empty()) {
      const std::string current = std::move(stack.back());
      stack.pop_back();
      auto it = out_edges.find(current);
      if (it == out_edges.end()) continue;
      for (const std::string& next : it->second) {
        if (visited.insert(next).second) stack.push_back(next);
      }
    }
    for (const std::string& target : targets) {
      if (target == source || !visited.contains(target)) continue;
      pairs.emplace(std::min(source, target), std::max(source, target));
    }
  }

  std::vector<EdgeRecord> edges;
  edges.reserve(pairs.size());
  for (const auto& [a, b] : pairs) edges.push_back({a, b, weight, "reachability"});
  return edges;
}

CommitGraph build_commit_graph(const DatasetIndex& index, const std::string& commit_id,
                               const EmbeddingMatrix& embeddings, double default_weight) {
  if (!index.has_commit(commit_id)) throw DataError("unknown commit '" + commit_id + "'");
  if (!(default_weight > 0.0)) throw ConfigError("default edge weight must be positive");

  std::vector<std::string> deleted;
  std::vector<std::string> context;
  for (std::size_t i : index.commit_nodes(commit_id)) {
    const LineNode& node = index.nodes()[i];
    (node.role == Role::deleted ? deleted : context).push_back(node.node_id);
  }
  std::sort(deleted.begin(), deleted.end());
  std::sort(context.begin(), context.end());

  CommitGraph graph;
  graph.commit_id = commit_id;
  graph.num_deleted = deleted.size();
  graph.node_ids = std::move(deleted);
  graph.node_ids.insert(graph.node_ids.end(), context.begin(), context.end());

  std::unordered_map<std::string, Eigen::Index> position;
  for (std::size_t i = 0; i < graph.node_ids.size(); ++i) {
    position.emplace(graph.node_ids[i], static_cast<Eigen::Index>(i));
  }
  for (std::size_t i = 0; i < graph.num_deleted; ++i) {
    graph.root_cause.push_back(index.node(graph.node_ids[i]).root_cause);
  }

  const auto n = static_cast<Eigen::Index>(graph.node_ids.size());
  graph.adjacency = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t e : index.commit_edges(commit_id)) {
    const EdgeRecord& edge = index.edges()[e];
    const Eigen::Index a = position.at(edge.src);
    const Eigen::Index b = position.at(edge.dst);
    if (a == b) continue;
    const double w = std::max(graph.adjacency(a, b), edge.weight.value_or(default_weight));
    graph.adjacency(a, b) = w;
    graph.adjacency(b, a) = w;
  }
  graph.features = embeddings.gather(graph.node_ids);
  return graph;
}

Eigen::MatrixXd normalized_operator(const Eigen::MatrixXd& adjacency) {
  if (adjacency.rows() != adjacency.cols()) throw ShapeError("adjacency must be square");
  const Eigen::Index n = adjacency.rows();
  Eigen::MatrixXd augmented = adjacency + Eigen::MatrixXd::Identity(n, n);
  const Eigen::VectorXd inv_sqrt_degree = augmented.rowwise().sum().array().rsqrt();
  return inv_sqrt_degree.asDiagonal() * augmented * inv_sqrt_degree.asDiagonal();
}

}  // namespace bichunter
