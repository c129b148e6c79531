#include "cl_oracle.hpp"

#include <algorithm>
#include <cmath>

namespace bichunter::testing {

ClOracleResult cl_oracle(const std::vector<std::vector<double>>& probs, const std::vector<int>& labels, int m,
                         bool global_thresholds) {
  const std::size_t n = labels.size();
  ClOracleResult r;

  std::vector<std::size_t> class_count(m, 0);
  for (std::size_t s = 0; s < n; ++s) class_count[labels[s]]++;

  // thresholds
  r.thresholds.assign(m, 0.0);
  for (int j = 0; j < m; ++j) {
    double sum = 0.0;
    std::size_t cnt = 0;
    for (std::size_t s = 0; s < n; ++s) {
      if (global_thresholds || labels[s] == j) {
        sum += probs[s][j];
        ++cnt;
      }
    }
    r.thresholds[j] = sum / static_cast<double>(cnt);
  }

  // confident joint: above-threshold classes, then the max among them
  r.counts.assign(m, std::vector<long long>(m, 0));
  for (std::size_t s = 0; s < n; ++s) {
    std::vector<int> above;
    for (int j = 0; j < m; ++j) {
      if (probs[s][j] >= r.thresholds[j] - 1e-12) above.push_back(j);
    }
    if (above.empty()) continue;
    int best = above[0];
    for (int j : above) {
      if (probs[s][j] > probs[s][best]) best = j;
    }
    r.counts[labels[s]][best] += 1;
  }

  // joint distribution
  r.joint.assign(m, std::vector<double>(m, 0.0));
  double total = 0.0;
  for (int i = 0; i < m; ++i) {
    long long row = 0;
    for (int j = 0; j < m; ++j) row += r.counts[i][j];
    if (row == 0) continue;
    for (int j = 0; j < m; ++j) {
      r.joint[i][j] = (static_cast<double>(r.counts[i][j]) / static_cast<double>(row)) * static_cast<double>(class_count[i]);
      total += r.joint[i][j];
    }
  }
  for (auto& row : r.joint)
    for (double& v : row) v /= total;

  // margin pruning: selection sort over the members of each noisy class
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < m; ++j) {
      if (i == j) continue;
      auto quota = static_cast<long long>(std::floor(static_cast<double>(n) * r.joint[i][j] + 1e-9));
      std::vector<std::size_t> pool;
      for (std::size_t s = 0; s < n; ++s) {
        if (labels[s] == i) pool.push_back(s);
      }
      while (quota-- > 0 && !pool.empty()) {
        std::size_t best_pos = 0;
        for (std::size_t p = 1; p < pool.size(); ++p) {
          const double a = probs[pool[p]][j] - probs[pool[p]][i];
          const double b = probs[pool[best_pos]][j] - probs[pool[best_pos]][i];
          if (a > b) best_pos = p;  // strict: earlier (lower id) wins ties
        }
        r.removed.insert(pool[best_pos]);
        pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(best_pos));
      }
    }
  }
  return r;
}

}  // namespace bichunter::testing
