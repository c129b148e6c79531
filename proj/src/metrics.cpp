#include "bichunter/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "bichunter/error.hpp"

namespace bichunter {

RankingResult rank_scores(std::string commit_id, const std::vector<std::string>& node_ids,
                          const Eigen::VectorXd& scores) {
  if (static_cast<Eigen::Index>(node_ids.size()) != scores.size()) {
    throw ShapeError("ranking needs one score per node");
  }
  RankingResult result{std::move(commit_id), {}};
  result.ranked.reserve(node_ids.size());
  for (std::size_t i = 0; i < node_ids.size(); ++i) {
    result.ranked.emplace_back(node_ids[i], scores[static_cast<Eigen::Index>(i)]);
  }
  std::sort(result.ranked.begin(), result.ranked.end(), [](const auto& a, const auto& b) {
    return a.second > b.second || (a.second == b.second && a.first < b.first);
  });
  return result;
}

RankingResult rank_commit(const RankModel& model, const CommitGraph& graph) {
  const ForwardCache cache = forward(model, normalized_operator(graph), graph.features);
  const std::vector<std::string> deleted(graph.node_ids.begin(),
                                         graph.node_ids.begin() + static_cast<std::ptrdiff_t>(graph.num_deleted));
  return rank_scores(graph.commit_id, deleted, deleted_scores(cache, graph.num_deleted));
}

std::optional<std::size_t> first_rank(const RankingResult& result, const RootCauseSet& root_causes) {
  for (std::size_t r = 0; r < result.ranked.size(); ++r) {
    if (root_causes.contains(result.ranked[r].first)) return r + 1;
  }
  return std::nullopt;
}

double recall_at_n(const std::vector<RankingResult>& results, const RootCauseSet& root_causes, std::size_t n) {
  std::size_t evaluated = 0;
  std::size_t hits = 0;
  for (const RankingResult& r : results) {
    const auto rank = first_rank(r, root_causes);
    if (!rank) continue;
    ++evaluated;
    if (*rank <= n) ++hits;
  }
  return evaluated == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(evaluated);
}

double mfr(const std::vector<RankingResult>& results, const RootCauseSet& root_causes) {
  std::size_t evaluated = 0;
  double total = 0.0;
  for (const RankingResult& r : results) {
    if (const auto rank = first_rank(r, root_causes)) {
      ++evaluated;
      total += static_cast<double>(*rank);
    }
  }
  return evaluated == 0 ? std::numeric_limits<double>::quiet_NaN() : total / static_cast<double>(evaluated);
}

double EvalReport::recall_at(int k) const {
  for (std::size_t i = 0; i < ks.size(); ++i) {
    if (ks[i] == k) return recall[i];
  }
  throw ConfigError("report has no recall@" + std::to_string(k));
}

EvalReport evaluate(const std::vector<RankingResult>& results, const RootCauseSet& root_causes,
                    const std::vector<int>& ks) {
  EvalReport report;
  report.ks = ks;
  for (int k : ks) {
    if (k < 1) throw ConfigError("recall cutoff must be >= 1");
    report.recall.push_back(recall_at_n(results, root_causes, static_cast<std::size_t>(k)));
  }
  report.mfr = mfr(results, root_causes);
  for (const RankingResult& r : results) {
    if (const auto rank = first_rank(r, root_causes)) {
      report.first_ranks.emplace_back(r.commit_id, *rank);
    } else {
      ++report.skipped;
    }
  }
  report.evaluated = report.first_ranks.size();
  return report;
}

EvalReport average_reports(const std::vector<EvalReport>& reports) {
  if (reports.empty()) throw ConfigError("no reports to average");
  EvalReport mean;
  mean.ks = reports.front().ks;
  mean.recall.assign(mean.ks.size(), 0.0);
  for (const EvalReport& r : reports) {
    if (r.ks != mean.ks) throw ConfigError("fold reports use different recall cutoffs");
    for (std::size_t i = 0; i < r.recall.size(); ++i) mean.recall[i] += r.recall[i];
    mean.mfr += r.mfr;
    mean.first_ranks.insert(mean.first_ranks.end(), r.first_ranks.begin(), r.first_ranks.end());
    mean.evaluated += r.evaluated;
    mean.skipped += r.skipped;
  }
  const double folds = static_cast<double>(reports.size());
  for (double& v : mean.recall) v /= folds;
  mean.mfr /= folds;
  std::sort(mean.first_ranks.begin(), mean.first_ranks.end());
  return mean;
}

nlohmann::json to_json(const EvalReport& report) {
  nlohmann::json out;
  for (std::size_t i = 0; i < report.ks.size(); ++i) {
    out["recall@" + std::to_string(report.ks[i])] = report.recall[i];
  }
  out["mfr"] = std::isfinite(report.mfr) ? nlohmann::json(report.mfr) : nlohmann::json(nullptr);
  out["commits_evaluated"] = report.evaluated;
  out["commits_skipped"] = report.skipped;
  nlohmann::json ranks = nlohmann::json::array();
  for (const auto& [commit, rank] : report.first_ranks) ranks.push_back({{"commit_id", commit}, {"first_rank", rank}});
  out["first_ranks"] = std::move(ranks);
  return out;
}

nlohmann::json to_json(const std::vector<RankingResult>& rankings) {
  nlohmann::json out = nlohmann::json::array();
  for (const RankingResult& r : rankings) {
    nlohmann::json ranked = nlohmann::json::array();
    for (std::size_t i = 0; i < r.ranked.size(); ++i) {
      ranked.push_back({{"rank", i + 1}, {"node_id", r.ranked[i].first}, {"score", r.ranked[i].second}});
    }
    out.push_back({{"commit_id", r.commit_id}, {"ranking", std::move(ranked)}});
  }
  return out;
}

std::string first_ranks_csv(const EvalReport& report) {
  std::string out = "commit_id,first_rank\n";
  for (const auto& [commit, rank] : report.first_ranks) out += commit + "," + std::to_string(rank) + "\n";
  return out;
}

}  // namespace bichunter
