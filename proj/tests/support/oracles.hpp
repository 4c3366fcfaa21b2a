#pragma once

#include <algorithm>
#include <string>
#include <utility>
#include <vector>

#include "sanitone/evaluation.hpp"

namespace test_support {

// Full-matrix edit-distance oracle, written independently of the
// two-row implementation in the library.
inline double wer_oracle(const std::vector<std::string>& ref,
                         const std::vector<std::string>& hyp) {
  const std::size_t n = ref.size(), m = hyp.size();
  std::vector<std::vector<std::size_t>> d(n + 1, std::vector<std::size_t>(m + 1));
  for (std::size_t i = 0; i <= n; ++i) d[i][0] = i;
  for (std::size_t j = 0; j <= m; ++j) d[0][j] = j;
  for (std::size_t i = 1; i <= n; ++i)
    for (std::size_t j = 1; j <= m; ++j) {
      const std::size_t sub = d[i - 1][j - 1] + (ref[i - 1] == hyp[j - 1] ? 0 : 1);
      d[i][j] = std::min({sub, d[i - 1][j] + 1, d[i][j - 1] + 1});
    }
  return static_cast<double>(d[n][m]) / static_cast<double>(n);
}

// Exhaustive threshold-sweep oracle: explicit counting at every candidate
// threshold, crossing read off the bracketing ROC segment.
inline double eer_oracle(const sanitone::ScoreSet& s) {
  std::vector<double> thresholds = s.genuine;
  thresholds.insert(thresholds.end(), s.impostor.begin(), s.impostor.end());
  std::sort(thresholds.begin(), thresholds.end());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()),
                   thresholds.end());

  std::vector<std::pair<double, double>> points;  // (FAR, FRR), theta ascending
  points.emplace_back(1.0, 0.0);
  for (double t : thresholds) {
    std::size_t fa = 0, fr = 0;
    for (double v : s.impostor)
      if (v >= t) ++fa;
    for (double v : s.genuine)
      if (v < t) ++fr;
    points.emplace_back(static_cast<double>(fa) / s.impostor.size(),
                        static_cast<double>(fr) / s.genuine.size());
  }
  points.emplace_back(0.0, 1.0);

  for (std::size_t i = 0; i + 1 < points.size(); ++i) {
    const double d0 = points[i].first - points[i].second;
    const double d1 = points[i + 1].first - points[i + 1].second;
    if (d1 <= 0.0) {
      if (d0 == d1) return points[i].first;
      const double t = d0 / (d0 - d1);
      return points[i].first + t * (points[i + 1].first - points[i].first);
    }
  }
  return points.back().first;
}

}  // namespace test_support
