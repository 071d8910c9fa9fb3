#pragma once

#include <algorithm>
#include <numeric>
#include <string>
#include <vector>

#include "reid/core.hpp"
#include "reid/distance.hpp"
#include "reid/error.hpp"

namespace reid {

/// Additive type/color penalties on a query x gallery distance matrix.
///
/// literal:          T differs, C same -> +delta_t; T same, C differs -> +delta_c;
///                   T same, C same -> +delta_t + delta_c; otherwise unchanged.
/// mismatch_penalty: T differs, C same -> +delta_t; T same, C differs -> +delta_c;
///                   both differ -> +delta_t + delta_c; both same -> unchanged.
/// off:              unchanged.
///
/// A cell where any of the four ids is unknown is left unchanged.
inline DistanceMatrix attribute_constraint(const DistanceMatrix& dist, const AttributeColumns& q_attrs,
                                           const AttributeColumns& g_attrs, double delta_t,
                                           double delta_c, ConstraintMode mode) {
  require(q_attrs.types.size() == dist.queries() && q_attrs.colors.size() == dist.queries(),
          ErrorCode::AxisMisalignment,
          "query attributes cover " + std::to_string(q_attrs.types.size()) + " rows, matrix has " +
              std::to_string(dist.queries()));
  require(g_attrs.types.size() == dist.galleries() && g_attrs.colors.size() == dist.galleries(),
          ErrorCode::AxisMisalignment,
          "gallery attributes cover " + std::to_string(g_attrs.types.size()) +
              " columns, matrix has " + std::to_string(dist.galleries()));
  require(std::isfinite(delta_t) && delta_t >= 0.0 && std::isfinite(delta_c) && delta_c >= 0.0,
          ErrorCode::InvalidArgument, "punish values must be finite and >= 0");

  DistanceMatrix out = dist;
  if (mode == ConstraintMode::off) return out;

  const double both = delta_t + delta_c;
  for (std::size_t i = 0; i < dist.queries(); ++i) {
    const std::uint32_t ti = q_attrs.types[i];
    const std::uint32_t ci = q_attrs.colors[i];
    if (ti == kUnknownAttribute || ci == kUnknownAttribute) continue;
    auto row = out.values.row(i);
    for (std::size_t j = 0; j < dist.galleries(); ++j) {
      const std::uint32_t tj = g_attrs.types[j];
      const std::uint32_t cj = g_attrs.colors[j];
      if (tj == kUnknownAttribute || cj == kUnknownAttribute) continue;
      const bool same_type = ti == tj;
      const bool same_color = ci == cj;
      if (!same_type && same_color) {
        row[j] += delta_t;
      } else if (same_type && !same_color) {
        row[j] += delta_c;
      } else if (mode == ConstraintMode::literal ? (same_type && same_color)
                                                 : (!same_type && !same_color)) {
        row[j] += both;
      }
    }
  }
  return out;
}

struct QueryGroups {
  std::vector<std::size_t> assignment;  // query index -> group id
  Matrix group_means;                   // one row per group

  std::size_t groups() const noexcept { return group_means.rows(); }
};

namespace detail {

class DisjointSets {
 public:
  explicit DisjointSets(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }

  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }

  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (a > b) std::swap(a, b);
    parent_[b] = a;
  }

 private:
  std::vector<std::size_t> parent_;
};

}  // namespace detail

/// Connected components of the graph joining queries closer than theta
/// (strictly). Group ids follow the first appearance of a member in query
/// order; each group's mean is the plain average of its member rows.
inline QueryGroups group_queries(const EmbeddingSet& queries, double theta, std::size_t workers = 1) {
  require(std::isfinite(theta) && theta >= 0.0, ErrorCode::InvalidArgument, "theta must be >= 0");
  const std::size_t n = queries.size();
  detail::DisjointSets sets(n);
  if (theta > 0.0 && n > 1) {
    const Matrix pairwise =
        euclidean_distances(queries.features().view(), queries.features().view(), workers);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        if (pairwise(i, j) < theta) sets.unite(i, j);
      }
    }
  }

  QueryGroups out;
  out.assignment.assign(n, 0);
  std::vector<std::size_t> root_to_group(n, kNoTracklet);
  std::size_t groups = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t root = sets.find(i);
    if (root_to_group[root] == kNoTracklet) root_to_group[root] = groups++;
    out.assignment[i] = root_to_group[root];
  }
  out.group_means = Matrix(groups, queries.dim());
  std::vector<std::size_t> counts(groups, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t g = out.assignment[i];
    ++counts[g];
    auto mean = out.group_means.row(g);
    const auto row = queries.row(i);
    for (std::size_t k = 0; k < row.size(); ++k) mean[k] += row[k];
  }
  for (std::size_t g = 0; g < groups; ++g) {
    if (counts[g] == 1) {
      // Singletons keep their row bit-for-bit.
      continue;
    }
    for (double& v : out.group_means.row(g)) v /= static_cast<double>(counts[g]);
  }
  return out;
}

/// Each query's row replaced by its group mean, names preserved.
inline EmbeddingSet group_representations(const EmbeddingSet& queries, const QueryGroups& groups) {
  Matrix rows(queries.size(), queries.dim());
  for (std::size_t i = 0; i < queries.size(); ++i) {
    const auto mean = groups.group_means.row(groups.assignment[i]);
    std::copy(mean.begin(), mean.end(), rows.row(i).begin());
  }
  return EmbeddingSet::create(queries.names(), std::move(rows));
}

/// The first `limit` gallery indices of row i by ascending distance, ties by
/// ascending index.
inline std::vector<std::size_t> argsort_row(std::span<const double> row, std::size_t limit) {
  std::vector<std::size_t> order(row.size());
  std::iota(order.begin(), order.end(), 0);
  auto less = [&](std::size_t a, std::size_t b) {
    return row[a] < row[b] || (row[a] == row[b] && a < b);
  };
  limit = std::min(limit, order.size());
  if (limit < order.size()) {
    std::nth_element(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(limit), order.end(),
                     less);
    order.resize(limit);
  }
  std::sort(order.begin(), order.end(), less);
  return order;
}

inline RankingResult plain_ranking(const DistanceMatrix& dist, std::size_t top_k) {
  RankingResult out;
  out.lists.reserve(dist.queries());
  for (std::size_t i = 0; i < dist.queries(); ++i) {
    out.lists.push_back(argsort_row(dist.values.row(i), top_k));
  }
  return out;
}

/// Tracklet promotion. Walking each query's ascending-distance order, a
/// gallery closer than theta pulls its not-yet-placed tracklet mates in
/// directly behind it, mates ordered by their own distance (then index).
/// Every gallery appears at most once; lists are cut at top_k.
inline RankingResult group_rerank(const DistanceMatrix& dist, const TrackletIndex& tracklets,
                                  double theta, std::size_t top_k) {
  require(std::isfinite(theta) && theta >= 0.0, ErrorCode::InvalidArgument, "theta must be >= 0");
  require(top_k >= 1, ErrorCode::InvalidArgument, "top_k must be positive");
  const BoundTracklets bound = bind_tracklets(tracklets, dist.gallery_names);
  const std::size_t limit = std::min(top_k, dist.galleries());

  RankingResult out;
  out.lists.resize(dist.queries());
  std::vector<char> placed(dist.galleries(), 0);
  for (std::size_t i = 0; i < dist.queries(); ++i) {
    const auto row = dist.values.row(i);
    auto less = [&](std::size_t a, std::size_t b) {
      return row[a] < row[b] || (row[a] == row[b] && a < b);
    };
    // At most `limit` entries of the base order are consumed.
    const std::vector<std::size_t> base = argsort_row(row, limit);
    auto& list = out.lists[i];
    list.reserve(limit);
    std::vector<std::size_t> touched;
    for (std::size_t g : base) {
      if (list.size() >= limit) break;
      if (placed[g]) continue;
      placed[g] = 1;
      touched.push_back(g);
      list.push_back(g);
      const std::size_t t = bound.tracklet_of[g];
      if (row[g] < theta && t != kNoTracklet) {
        std::vector<std::size_t> mates;
        for (std::size_t m : bound.members[t]) {
          if (!placed[m]) mates.push_back(m);
        }
        std::sort(mates.begin(), mates.end(), less);
        for (std::size_t m : mates) {
          placed[m] = 1;
          touched.push_back(m);
          list.push_back(m);
        }
      }
    }
    if (list.size() > limit) list.resize(limit);
    for (std::size_t g : touched) placed[g] = 0;
  }
  return out;
}

}  // namespace reid
