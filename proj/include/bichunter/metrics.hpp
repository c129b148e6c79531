#pragma once

#include <optional>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "bichunter/gcnrank.hpp"
#include "bichunter/graphbuild.hpp"

namespace bichunter {

using RootCauseSet = std::unordered_set<std::string>;

/// Deleted lines of one commit, best first.
struct RankingResult {
  std::string commit_id;
  std::vector<std::pair<std::string, double>> ranked;  // (node_id, score)
};

/// Sorts by descending score; equal scores are ordered by node id.
RankingResult rank_scores(std::string commit_id, const std::vector<std::string>& node_ids,
                          const Eigen::VectorXd& scores);

/// Runs the model over the graph and ranks its deleted lines.
RankingResult rank_commit(const RankModel& model, const CommitGraph& graph);

/// 1-based rank of the first root cause, or nullopt when there is none.
std::optional<std::size_t> first_rank(const RankingResult& result, const RootCauseSet& root_causes);

/// Fraction of evaluated commits with a root cause in the top n. Commits
/// without any root cause are skipped. Returns 0 when nothing is evaluated.
double recall_at_n(const std::vector<RankingResult>& results, const RootCauseSet& root_causes, std::size_t n);

/// Mean first rank over evaluated commits; NaN when nothing is evaluated.
double mfr(const std::vector<RankingResult>& results, const RootCauseSet& root_causes);

struct EvalReport {
  std::vector<int> ks;
  std::vector<double> recall;  // parallel to ks
  double mfr = 0.0;
  std::vector<std::pair<std::string, std::size_t>> first_ranks;  // evaluated commits only
  std::size_t evaluated = 0;
  std::size_t skipped = 0;

  double recall_at(int k) const;
};

EvalReport evaluate(const std::vector<RankingResult>& results, const RootCauseSet& root_causes,
                    const std::vector<int>& ks);

/// Arithmetic mean of per-fold metrics; counts and first ranks are pooled.
EvalReport average_reports(const std::vector<EvalReport>& reports);

nlohmann::json to_json(const EvalReport& report);
nlohmann::json to_json(const std::vector<RankingResult>& rankings);
/// commit_id,first_rank lines with a header row.
std::string first_ranks_csv(const EvalReport& report);

}  // namespace bichunter
