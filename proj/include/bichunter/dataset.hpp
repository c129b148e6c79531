#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

namespace bichunter {

enum class Role { deleted, context };
enum class Version { old_version, new_version };

const char* to_string(Role role);
const char* to_string(Version version);

/// One code line of a bug-fixing commit.
struct LineNode {
  std::string node_id;
  std::string commit_id;
  std::string project_id;
  Role role = Role::context;
  Version version = Version::old_version;
  std::string text;
  bool root_cause = false;  // only meaningful for deleted lines

  bool operator==(const LineNode&) const = default;
};

/// Dependency edge between two lines of the same commit. The weight is
/// optional in the file; graph construction substitutes the configured
/// uniform weight when it is absent.
struct EdgeRecord {
  std::string src;
  std::string dst;
  std::optional<double> weight;
  std::string relation;

  bool operator==(const EdgeRecord&) const = default;
};

using CommitSet = std::vector<std::string>;

/// Validated, cross-referenced view of a nodes/edges dataset. Immutable
/// once built, so it can be shared read-only between worker threads.
class DatasetIndex {
 public:
  DatasetIndex() = default;

  /// Validates the records and builds the lookup tables. Throws DataError
  /// on duplicate ids, dangling edges, cross-commit edges, non-positive
  /// weights, or root-cause flags on context lines.
  static DatasetIndex build(std::vector<LineNode> nodes, std::vector<EdgeRecord> edges);

  std::size_t node_count() const { return nodes_.size(); }
  std::size_t edge_count() const { return edges_.size(); }

  const std::vector<LineNode>& nodes() const { return nodes_; }
  const std::vector<EdgeRecord>& edges() const { return edges_; }

  const LineNode& node(const std::string& node_id) const;
  bool has_node(const std::string& node_id) const { return by_id_.contains(node_id); }
  std::size_t node_position(const std::string& node_id) const;

  /// Every commit id present in the nodes file, sorted.
  CommitSet all_commits() const;
  /// Commits with at least one deleted line, sorted. Only these take part
  /// in splits, training and evaluation.
  const CommitSet& commits() const { return usable_commits_; }
  /// Commits dropped because they have no deleted line.
  const CommitSet& excluded_commits() const { return excluded_commits_; }

  bool has_commit(const std::string& commit_id) const { return nodes_by_commit_.contains(commit_id); }
  const std::vector<std::size_t>& commit_nodes(const std::string& commit_id) const;
  const std::vector<std::size_t>& commit_edges(const std::string& commit_id) const;
  std::string commit_project(const std::string& commit_id) const;

  /// Usable commits grouped by project id.
  const std::map<std::string, CommitSet>& projects() const { return commits_by_project_; }

  /// Deleted-line node ids of the given commits, in commit then node order.
  std::vector<std::string> deleted_nodes(const CommitSet& commits) const;

  const std::vector<std::string>& warnings() const { return warnings_; }

 private:
  std::vector<LineNode> nodes_;
  std::vector<EdgeRecord> edges_;
  std::unordered_map<std::string, std::size_t> by_id_;
  std::map<std::string, std::vector<std::size_t>> nodes_by_commit_;
  std::map<std::string, std::vector<std::size_t>> edges_by_commit_;
  std::map<std::string, CommitSet> commits_by_project_;
  CommitSet usable_commits_;
  CommitSet excluded_commits_;
  std::vector<std::string> warnings_;
};

/// Parses the JSONL nodes and edges files. Errors carry the file name and
/// 1-based line number of the offending record.
DatasetIndex load_dataset(const std::filesystem::path& nodes_path,
                          const std::filesystem::path& edges_path);

std::vector<LineNode> parse_nodes_jsonl(std::istream& in, const std::string& source_name);
std::vector<EdgeRecord> parse_edges_jsonl(std::istream& in, const std::string& source_name);

void write_nodes_jsonl(std::ostream& out, const std::vector<LineNode>& nodes);
void write_edges_jsonl(std::ostream& out, const std::vector<EdgeRecord>& edges);
void save_dataset(const DatasetIndex& index, const std::filesystem::path& nodes_path,
                  const std::filesystem::path& edges_path);

struct Split {
  CommitSet train;
  CommitSet test;
};

/// Commit-granular k-fold partition. Commit ids are sorted, shuffled with
/// a seeded Fisher-Yates pass, then cut into k folds whose sizes differ by
/// at most one. Fold f is the test set of the f-th split.
std::vector<Split> kfold_split(const DatasetIndex& index, int k, std::uint64_t seed);

/// Same as above over an explicit commit list.
std::vector<Split> kfold_split(CommitSet commits, int k, std::uint64_t seed);

/// All commits of `test_projects` go to test, everything else to train.
Split cross_project_split(const DatasetIndex& index, const std::set<std::string>& test_projects);

}  // namespace bichunter
