#include "bichunter/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "bichunter/error.hpp"
#include "bichunter/random.hpp"

namespace bichunter {

using nlohmann::json;

const char* to_string(Role role) { return role == Role::deleted ? "deleted" : "context"; }
const char* to_string(Version version) { return version == Version::old_version ? "old" : "new"; }

namespace {

std::string where(const std::string& source, std::size_t line) {
  return source + ":" + std::to_string(line);
}

const json& require(const json& record, const char* key, const std::string& loc) {
  auto it = record.find(key);
  if (it == record.end()) throw DataError(loc + ": missing key '" + key + "'");
  return *it;
}

std::string require_string(const json& record, const char* key, const std::string& loc) {
  const json& value = require(record, key, loc);
  if (!value.is_string()) throw DataError(loc + ": key '" + key + "' must be a string");
  return value.get<std::string>();
}

template <typename Fn>
void for_each_record(std::istream& in, const std::string& source, Fn&& fn) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    const std::string loc = where(source, line_no);
    json record;
    try {
      record = json::parse(line);
    } catch (const json::parse_error& e) {
      throw DataError(loc + ": malformed JSON: " + e.what());
    }
    if (!record.is_object()) throw DataError(loc + ": record is not a JSON object");
    fn(record, loc);
  }
}

}  // namespace

std::vector<LineNode> parse_nodes_jsonl(std::istream& in, const std::string& source_name) {
  std::vector<LineNode> nodes;
  for_each_record(in, source_name, [&](const json& rec, const std::string& loc) {
    LineNode node;
    node.node_id = require_string(rec, "node_id", loc);
    node.commit_id = require_string(rec, "commit_id", loc);
    node.project_id = require_string(rec, "project_id", loc);
    node.text = require_string(rec, "text", loc);

    const std::string role = require_string(rec, "role", loc);
    if (role == "deleted") {
      node.role = Role::deleted;
    } else if (role == "context") {
      node.role = Role::context;
    } else {
      throw DataError(loc + ": unknown role '" + role + "'");
    }
    const std::string version = require_string(rec, "version", loc);
    if (version == "old") {
      node.version = Version::old_version;
    } else if (version == "new") {
      node.version = Version::new_version;
    } else {
      throw DataError(loc + ": unknown version '" + version + "'");
    }
    if (auto it = rec.find("root_cause"); it != rec.end() && !it->is_null()) {
      if (!it->is_boolean()) throw DataError(loc + ": root_cause must be a boolean");
      node.root_cause = it->get<bool>();
    }
    if (node.root_cause && node.role != Role::deleted) {
      throw DataError(loc + ": node '" + node.node_id + "' is a root cause but not a deleted line");
    }
    nodes.push_back(std::move(node));
  });
  return nodes;
}

std::vector<EdgeRecord> parse_edges_jsonl(std::istream& in, const std::string& source_name) {
  std::vector<EdgeRecord> edges;
  for_each_record(in, source_name, [&](const json& rec, const std::string& loc) {
    EdgeRecord edge;
    edge.src = require_string(rec, "src", loc);
    edge.dst = require_string(rec, "dst", loc);
    if (auto it = rec.find("weight"); it != rec.end() && !it->is_null()) {
      if (!it->is_number()) throw DataError(loc + ": weight must be a number");
      const double w = it->get<double>();
      if (!(w > 0.0) || !std::isfinite(w)) {
        throw DataError(loc + ": edge " + edge.src + "->" + edge.dst + " has non-positive weight");
      }
      edge.weight = w;
    }
    if (auto it = rec.find("relation"); it != rec.end() && !it->is_null()) {
      if (!it->is_string()) throw DataError(loc + ": relation must be a string");
      edge.relation = it->get<std::string>();
    }
    edges.push_back(std::move(edge));
  });
  return edges;
}

DatasetIndex DatasetIndex::build(std::vector<LineNode> nodes, std::vector<EdgeRecord> edges) {
  DatasetIndex index;
  index.nodes_ = std::move(nodes);
  index.edges_ = std::move(edges);

  for (std::size_t i = 0; i < index.nodes_.size(); ++i) {
    const LineNode& node = index.nodes_[i];
    if (node.root_cause && node.role != Role::deleted) {
      throw DataError("node '" + node.node_id + "' is a root cause but not a deleted line");
    }
    if (!index.by_id_.emplace(node.node_id, i).second) {
      throw DataError("duplicate node_id '" + node.node_id + "' (record " + std::to_string(i + 1) + ")");
    }
    index.nodes_by_commit_[node.commit_id].push_back(i);
  }

  for (std::size_t e = 0; e < index.edges_.size(); ++e) {
    const EdgeRecord& edge = index.edges_[e];
    const std::string label = "edge record " + std::to_string(e + 1) + " (" + edge.src + " -> " + edge.dst + ")";
    auto src = index.by_id_.find(edge.src);
    auto dst = index.by_id_.find(edge.dst);
    if (src == index.by_id_.end()) throw DataError(label + ": unknown src node '" + edge.src + "'");
    if (dst == index.by_id_.end()) throw DataError(label + ": unknown dst node '" + edge.dst + "'");
    const std::string& commit = index.nodes_[src->second].commit_id;
    if (commit != index.nodes_[dst->second].commit_id) {
      throw DataError(label + ": endpoints belong to different commits");
    }
    if (edge.weight && !(*edge.weight > 0.0 && std::isfinite(*edge.weight))) {
      throw DataError(label + ": weight must be positive");
    }
    index.edges_by_commit_[commit].push_back(e);
  }

  for (auto& [commit, members] : index.nodes_by_commit_) {
    const bool has_deleted = std::any_of(members.begin(), members.end(), [&](std::size_t i) {
      return index.nodes_[i].role == Role::deleted;
    });
    if (!has_deleted) {
      index.excluded_commits_.push_back(commit);
      index.warnings_.push_back("commit '" + commit + "' has no deleted lines; excluded from training");
      continue;
    }
    index.usable_commits_.push_back(commit);
    index.commits_by_project_[index.nodes_[members.front()].project_id].push_back(commit);
  }
  return index;
}

const LineNode& DatasetIndex::node(const std::string& node_id) const {
  return nodes_[node_position(node_id)];
}

std::size_t DatasetIndex::node_position(const std::string& node_id) const {
  auto it = by_id_.find(node_id);
  if (it == by_id_.end()) throw DataError("unknown node '" + node_id + "'");
  return it->second;
}

CommitSet DatasetIndex::all_commits() const {
  CommitSet out;
  out.reserve(nodes_by_commit_.size());
  for (const auto& entry : nodes_by_commit_) out.push_back(entry.first);
  return out;
}

const std::vector<std::size_t>& DatasetIndex::commit_nodes(const std::string& commit_id) const {
  auto it = nodes_by_commit_.find(commit_id);
  if (it == nodes_by_commit_.end()) throw DataError("unknown commit '" + commit_id + "'");
  return it->second;
}

const std::vector<std::size_t>& DatasetIndex::commit_edges(const std::string& commit_id) const {
  static const std::vector<std::size_t> kNone;
  if (!nodes_by_commit_.contains(commit_id)) throw DataError("unknown commit '" + commit_id + "'");
  auto it = edges_by_commit_.find(commit_id);
  return it == edges_by_commit_.end() ? kNone : it->second;
}

std::string DatasetIndex::commit_project(const std::string& commit_id) const {
  return nodes_[commit_nodes(commit_id).front()].project_id;
}

std::vector<std::string> DatasetIndex::deleted_nodes(const CommitSet& commits) const {
  std::vector<std::string> out;
  for (const std::string& commit : commits) {
    std::vector<std::string> ids;
    for (std::size_t i : commit_nodes(commit)) {
      if (nodes_[i].role == Role::deleted) ids.push_back(nodes_[i].node_id);
    }
    std::sort(ids.begin(), ids.end());
    out.insert(out.end(), ids.begin(), ids.end());
  }
  return out;
}

DatasetIndex load_dataset(const std::filesystem::path& nodes_path,
                          const std::filesystem::path& edges_path) {
  std::ifstream nodes_in(nodes_path);
  if (!nodes_in) throw DataError("cannot open nodes file '" + nodes_path.string() + "'");
  std::ifstream edges_in(edges_path);
  if (!edges_in) throw DataError("cannot open edges file '" + edges_path.string() + "'");
  auto nodes = parse_nodes_jsonl(nodes_in, nodes_path.string());
  auto edges = parse_edges_jsonl(edges_in, edges_path.string());
  return DatasetIndex::build(std::move(nodes), std::move(edges));
}

void write_nodes_jsonl(std::ostream& out, const std::vector<LineNode>& nodes) {
  for (const LineNode& node : nodes) {
    json rec = {{"node_id", node.node_id},   {"commit_id", node.commit_id},
                {"project_id", node.project_id}, {"role", to_string(node.role)},
                {"version", to_string(node.version)}, {"text", node.text},
                {"root_cause", node.root_cause}};
    out << rec.dump() << '\n';
  }
}

void write_edges_jsonl(std::ostream& out, const std::vector<EdgeRecord>& edges) {
  for (const EdgeRecord& edge : edges) {
    json rec = {{"src", edge.src}, {"dst", edge.dst}};
    if (edge.weight) rec["weight"] = *edge.weight;
    if (!edge.relation.empty()) rec["relation"] = edge.relation;
    out << rec.dump() << '\n';
  }
}

void save_dataset(const DatasetIndex& index, const std::filesystem::path& nodes_path,
                  const std::filesystem::path& edges_path) {
  std::ofstream nodes_out(nodes_path);
  std::ofstream edges_out(edges_path);
  if (!nodes_out || !edges_out) throw DataError("cannot write dataset files");
  write_nodes_jsonl(nodes_out, index.nodes());
  write_edges_jsonl(edges_out, index.edges());
}

std::vector<Split> kfold_split(CommitSet commits, int k, std::uint64_t seed) {
  if (k < 2) throw ConfigError("k-fold split needs k >= 2, got " + std::to_string(k));
  if (commits.size() < static_cast<std::size_t>(k)) {
    throw ConfigError("k-fold split: k=" + std::to_string(k) + " exceeds commit count " +
                      std::to_string(commits.size()));
  }
  std::sort(commits.begin(), commits.end());
  commits.erase(std::unique(commits.begin(), commits.end()), commits.end());
  Rng rng(seed);
  shuffle(std::span<std::string>(commits), rng);

  const std::size_t n = commits.size();
  const std::size_t folds = static_cast<std::size_t>(k);
  std::vector<Split> splits(folds);
  std::size_t begin = 0;
  for (std::size_t f = 0; f < folds; ++f) {
    const std::size_t size = n / folds + (f < n % folds ? 1 : 0);
    for (std::size_t i = 0; i < n; ++i) {
      auto& target = (i >= begin && i < begin + size) ? splits[f].test : splits[f].train;
      target.push_back(commits[i]);
    }
    std::sort(splits[f].train.begin(), splits[f].train.end());
    std::sort(splits[f].test.begin(), splits[f].test.end());
    begin += size;
  }
  return splits;
}

std::vector<Split> kfold_split(const DatasetIndex& index, int k, std::uint64_t seed) {
  return kfold_split(index.commits(), k, seed);
}

Split cross_project_split(const DatasetIndex& index, const std::set<std::string>& test_projects) {
  if (test_projects.empty()) throw ConfigError("cross-project split needs at least one test project");
  const auto& projects = index.projects();
  for (const std::string& p : test_projects) {
    if (!projects.contains(p)) throw ConfigError("unknown project id '" + p + "'");
  }
  Split split;
  for (const auto& [project, commits] : projects) {
    auto& target = test_projects.contains(project) ? split.test : split.train;
    target.insert(target.end(), commits.begin(), commits.end());
  }
  if (split.train.empty()) throw ConfigError("cross-project split leaves an empty training set");
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

}  // namespace bichunter
