#pragma once

#include <algorithm>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "reid/core.hpp"
#include "reid/error.hpp"

namespace reid {

/// Relevant gallery indices per query (same identity).
struct GroundTruth {
  std::vector<std::vector<std::size_t>> relevant;

  std::size_t size() const noexcept { return relevant.size(); }
};

inline constexpr std::size_t kChallengeCutoff = 100;

/// (1 / min(|relevant|, cutoff)) * sum over hits at rank k <= cutoff of
/// (hits so far / k).
inline double average_precision(std::span<const std::size_t> ranking,
                                std::span<const std::size_t> relevant,
                                std::size_t cutoff = kChallengeCutoff) {
  require(!relevant.empty(), ErrorCode::EmptyRelevantSet, "relevant set is empty");
  require(cutoff >= 1, ErrorCode::InvalidArgument, "cutoff must be positive");
  const std::unordered_set<std::size_t> wanted(relevant.begin(), relevant.end());
  std::unordered_set<std::size_t> seen;
  const std::size_t depth = std::min(cutoff, ranking.size());
  double sum = 0.0;
  std::size_t hits = 0;
  for (std::size_t k = 0; k < ranking.size(); ++k) {
    require(seen.insert(ranking[k]).second, ErrorCode::InvalidArgument,
            "ranking repeats gallery index " + std::to_string(ranking[k]));
    if (k < depth && wanted.count(ranking[k])) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(k + 1);
    }
  }
  return sum / static_cast<double>(std::min(wanted.size(), cutoff));
}

namespace detail {

inline void check_coverage(const RankingResult& rankings, const GroundTruth& gt) {
  if (gt.size() < rankings.size()) {
    fail(ErrorCode::MissingGroundTruth, "query " + std::to_string(gt.size()) +
                                            " has a ranking but no ground truth");
  }
  if (rankings.size() < gt.size()) {
    fail(ErrorCode::MissingRanking,
         "query " + std::to_string(rankings.size()) + " has ground truth but no ranking");
  }
  for (std::size_t q = 0; q < gt.size(); ++q) {
    if (gt.relevant[q].empty()) {
      fail(ErrorCode::EmptyRelevantSet, "query " + std::to_string(q) + " has no relevant gallery");
    }
  }
}

}  // namespace detail

/// Per-query AP values in query order.
inline std::vector<double> average_precisions(const RankingResult& rankings, const GroundTruth& gt,
                                              std::size_t cutoff = kChallengeCutoff) {
  detail::check_coverage(rankings, gt);
  std::vector<double> out(rankings.size());
  for (std::size_t q = 0; q < rankings.size(); ++q) {
    out[q] = average_precision(rankings.lists[q], gt.relevant[q], cutoff);
  }
  return out;
}

inline double mean_ap(const RankingResult& rankings, const GroundTruth& gt,
                      std::size_t cutoff = kChallengeCutoff) {
  const auto aps = average_precisions(rankings, gt, cutoff);
  require(!aps.empty(), ErrorCode::MissingGroundTruth, "no queries to score");
  double sum = 0.0;
  for (double ap : aps) sum += ap;
  return sum / static_cast<double>(aps.size());
}

/// Fraction of queries whose first relevant hit is at 1-based position <= r,
/// for each requested r.
inline std::vector<double> cmc(const RankingResult& rankings, const GroundTruth& gt,
                               std::span<const std::size_t> ranks) {
  detail::check_coverage(rankings, gt);
  require(rankings.size() > 0, ErrorCode::MissingGroundTruth, "no queries to score");
  std::vector<std::size_t> first_hit(rankings.size(), 0);  // 0: never
  for (std::size_t q = 0; q < rankings.size(); ++q) {
    const std::unordered_set<std::size_t> wanted(gt.relevant[q].begin(), gt.relevant[q].end());
    const auto& list = rankings.lists[q];
    for (std::size_t k = 0; k < list.size(); ++k) {
      if (wanted.count(list[k])) {
        first_hit[q] = k + 1;
        break;
      }
    }
  }
  std::vector<double> out;
  out.reserve(ranks.size());
  for (std::size_t r : ranks) {
    require(r >= 1, ErrorCode::InvalidArgument, "CMC ranks are 1-based");
    std::size_t count = 0;
    for (std::size_t h : first_hit) {
      if (h != 0 && h <= r) ++count;
    }
    out.push_back(static_cast<double>(count) / static_cast<double>(rankings.size()));
  }
  return out;
}

}  // namespace reid
