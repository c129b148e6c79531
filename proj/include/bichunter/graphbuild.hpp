#pragma once

#include <set>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "bichunter/dataset.hpp"
#include "bichunter/embedding.hpp"

namespace bichunter {

/// Homogeneous per-commit graph. Deleted lines come first (sorted by id),
/// then context lines (sorted by id); row i of every matrix is node_ids[i].
struct CommitGraph {
  std::string commit_id;
  std::vector<std::string> node_ids;
  std::size_t num_deleted = 0;
  Eigen::MatrixXd adjacency;  // symmetric, zero diagonal
  Eigen::MatrixXd features;   // one embedding row per node
  std::vector<bool> root_cause;  // over the first num_deleted nodes

  std::size_t size() const { return node_ids.size(); }
};

/// Directed dependency between two lines, before path closure.
struct Dependency {
  std::string from;
  std::string to;
};

/// Emits one undirected edge {u, v} for each u in `sources`, v in
/// `targets`, u != v, such that a directed path u -> ... -> v exists in
/// `deps`. Each unordered pair is emitted once, with weight `weight`.
std::vector<EdgeRecord> derive_edges_by_reachability(const std::vector<Dependency>& deps,
                                                     const std::set<std::string>& sources,
                                                     const std::set<std::string>& targets,
                                                     double weight = 1.0);

/// Edges without an explicit weight get `default_weight`. Edges given in
/// both directions (or repeated) keep the larger weight; self-loops in the
/// file are ignored since the operator adds its own.
CommitGraph build_commit_graph(const DatasetIndex& index, const std::string& commit_id,
                               const EmbeddingMatrix& embeddings, double default_weight = 1.0);

/// D^-1/2 (A + I) D^-1/2 with d_i = 1 + sum_j A_ij.
Eigen::MatrixXd normalized_operator(const Eigen::MatrixXd& adjacency);

inline Eigen::MatrixXd normalized_operator(const CommitGraph& graph) {
  return normalized_operator(graph.adjacency);
}

}  // namespace bichunter
