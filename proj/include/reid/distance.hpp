#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <thread>
#include <vector>

#if defined(__AVX2__) && defined(__FMA__)
#include <immintrin.h>
#define REID_HAVE_AVX2_FMA 1
#endif

#include "reid/core.hpp"
#include "reid/error.hpp"
#include "reid/matrix.hpp"

namespace reid {

/// Scales every row to unit Euclidean norm. Throws ZeroVector on an all-zero row.
inline EmbeddingSet l2_normalize_rows(const EmbeddingSet& set) {
  Matrix out = set.features();
  for (std::size_t i = 0; i < out.rows(); ++i) {
    auto row = out.row(i);
    double sq = 0.0;
    for (double v : row) sq += v * v;
    if (sq == 0.0) {
      fail(ErrorCode::ZeroVector,
           "row " + std::to_string(i) + " (" + set.names()[i] + ") has zero norm");
    }
    const double norm = std::sqrt(sq);
    for (double& v : row) v /= norm;
  }
  return EmbeddingSet::create(set.names(), std::move(out));
}

struct EnsembleSpec {
  std::vector<std::string> member_names;
  std::vector<double> weights;
  Normalization normalize = Normalization::per_extractor_l2;

  /// Unit weights for n anonymous members.
  static EnsembleSpec uniform(std::size_t n, Normalization normalize = Normalization::per_extractor_l2) {
    EnsembleSpec spec;
    for (std::size_t i = 0; i < n; ++i) spec.member_names.push_back("m" + std::to_string(i));
    spec.weights.assign(n, 1.0);
    spec.normalize = normalize;
    return spec;
  }
};

/// Row i of the result is the concatenation over members m of
/// weight_m * (optionally L2-normalized) row i of member m.
inline EmbeddingSet ensemble_concat(const std::vector<EmbeddingSet>& sets, const EnsembleSpec& spec) {
  require(!sets.empty(), ErrorCode::DimensionError, "ensemble needs at least one member");
  require(spec.weights.size() == sets.size(), ErrorCode::DimensionError,
          std::to_string(spec.weights.size()) + " weights for " + std::to_string(sets.size()) +
              " members");
  require(spec.member_names.empty() || spec.member_names.size() == sets.size(),
          ErrorCode::DimensionError, "member name count does not match member count");
  for (double w : spec.weights) {
    require(std::isfinite(w) && w > 0.0, ErrorCode::InvalidArgument,
            "ensemble weights must be finite and positive");
  }
  const auto& names = sets.front().names();
  std::size_t total_dim = 0;
  for (std::size_t m = 0; m < sets.size(); ++m) {
    if (sets[m].names() != names) {
      const std::string who = spec.member_names.empty() ? std::to_string(m) : spec.member_names[m];
      fail(ErrorCode::NameMismatch, "member '" + who + "' does not share the first member's names");
    }
    total_dim += sets[m].dim();
  }

  Matrix out(names.size(), total_dim);
  std::size_t offset = 0;
  for (std::size_t m = 0; m < sets.size(); ++m) {
    const EmbeddingSet member =
        spec.normalize == Normalization::per_extractor_l2 ? l2_normalize_rows(sets[m]) : sets[m];
    const double w = spec.weights[m];
    for (std::size_t i = 0; i < names.size(); ++i) {
      const auto src = member.row(i);
      auto dst = out.row(i).subspan(offset, member.dim());
      for (std::size_t k = 0; k < src.size(); ++k) dst[k] = w == 1.0 ? src[k] : w * src[k];
    }
    offset += member.dim();
  }
  return EmbeddingSet::create(names, std::move(out));
}

namespace detail {

// Every cell accumulates its dot product as acc = fma(q_k, g_k, acc) for
// k = 0..D-1 in order, in both the vector and scalar paths, so results do
// not depend on blocking, partitioning or instruction set.
inline constexpr std::size_t kPanel = 8;     // galleries per packed panel
inline constexpr std::size_t kQuad = 4;      // queries per micro-kernel call
inline constexpr std::size_t kQueryBlock = 64;

inline std::vector<double> squared_norms(MatrixView m) {
  std::vector<double> out(m.rows, 0.0);
  for (std::size_t i = 0; i < m.rows; ++i) {
    double acc = 0.0;
    for (double v : m.row(i)) acc = std::fma(v, v, acc);
    out[i] = acc;
  }
  return out;
}

// Gallery transposed into panels: panel p holds galleries p*8 .. p*8+7 laid
// out as [k][lane], zero-padded past the last gallery.
inline std::vector<double> pack_gallery(MatrixView g) {
  const std::size_t panels = (g.rows + kPanel - 1) / kPanel;
  std::vector<double> packed(panels * kPanel * g.cols, 0.0);
  for (std::size_t j = 0; j < g.rows; ++j) {
    double* base = packed.data() + (j / kPanel) * kPanel * g.cols + (j % kPanel);
    const auto row = g.row(j);
    for (std::size_t k = 0; k < g.cols; ++k) base[k * kPanel] = row[k];
  }
  return packed;
}

inline void dot_quad_panel(const double* const q[kQuad], const double* panel, std::size_t dim,
                           double out[kQuad][kPanel]) {
#if defined(REID_HAVE_AVX2_FMA)
  __m256d acc[kQuad][2];
  for (std::size_t r = 0; r < kQuad; ++r) acc[r][0] = acc[r][1] = _mm256_setzero_pd();
  for (std::size_t k = 0; k < dim; ++k) {
    const __m256d g0 = _mm256_loadu_pd(panel + k * kPanel);
    const __m256d g1 = _mm256_loadu_pd(panel + k * kPanel + 4);
    for (std::size_t r = 0; r < kQuad; ++r) {
      const __m256d qb = _mm256_broadcast_sd(q[r] + k);
      acc[r][0] = _mm256_fmadd_pd(qb, g0, acc[r][0]);
      acc[r][1] = _mm256_fmadd_pd(qb, g1, acc[r][1]);
    }
  }
  for (std::size_t r = 0; r < kQuad; ++r) {
    _mm256_storeu_pd(out[r], acc[r][0]);
    _mm256_storeu_pd(out[r] + 4, acc[r][1]);
  }
#else
  for (std::size_t r = 0; r < kQuad; ++r) {
    for (std::size_t l = 0; l < kPanel; ++l) out[r][l] = 0.0;
  }
  for (std::size_t k = 0; k < dim; ++k) {
    const double* g = panel + k * kPanel;
    for (std::size_t r = 0; r < kQuad; ++r) {
      const double qv = q[r][k];
      for (std::size_t l = 0; l < kPanel; ++l) out[r][l] = std::fma(qv, g[l], out[r][l]);
    }
  }
#endif
}

inline double stabilized_distance(double q_norm, double g_norm, double dot) {
  // Grouped so that q == g yields exactly zero.
  const double sq = (q_norm - dot) + (g_norm - dot);
  return sq > 0.0 ? std::sqrt(sq) : 0.0;
}

// Fills rows [quad_begin*4, quad_end*4) of out (clipped to real queries).
inline void distance_rows(MatrixView q, MatrixView g, const std::vector<double>& q_norms,
                          const std::vector<double>& g_norms, const std::vector<double>& packed,
                          const std::vector<double>& zero_row, std::size_t quad_begin,
                          std::size_t quad_end, Matrix& out) {
  const std::size_t panels = (g.rows + kPanel - 1) / kPanel;
  const std::size_t quads_per_block = kQueryBlock / kQuad;
  double tile[kQuad][kPanel];
  for (std::size_t block = quad_begin; block < quad_end; block += quads_per_block) {
    const std::size_t block_end = std::min(quad_end, block + quads_per_block);
    for (std::size_t p = 0; p < panels; ++p) {
      const double* panel = packed.data() + p * kPanel * g.cols;
      const std::size_t lanes = std::min(kPanel, g.rows - p * kPanel);
      for (std::size_t quad = block; quad < block_end; ++quad) {
        const double* rows[kQuad];
        for (std::size_t r = 0; r < kQuad; ++r) {
          const std::size_t i = quad * kQuad + r;
          rows[r] = i < q.rows ? q.data + i * q.cols : zero_row.data();
        }
        dot_quad_panel(rows, panel, g.cols, tile);
        for (std::size_t r = 0; r < kQuad; ++r) {
          const std::size_t i = quad * kQuad + r;
          if (i >= q.rows) break;
          for (std::size_t l = 0; l < lanes; ++l) {
            const std::size_t j = p * kPanel + l;
            out(i, j) = stabilized_distance(q_norms[i], g_norms[j], tile[r][l]);
          }
        }
      }
    }
  }
}

}  // namespace detail

/// Dense Q x G Euclidean distances via ||q||^2 + ||g||^2 - 2 q.g with tiny
/// negatives clamped to zero. Query rows are split across `workers` threads;
/// the output is bit-identical for any worker count.
inline Matrix euclidean_distances(MatrixView queries, MatrixView gallery, std::size_t workers = 1) {
  require(queries.cols == gallery.cols, ErrorCode::DimensionMismatch,
          "query width " + std::to_string(queries.cols) + " differs from gallery width " +
              std::to_string(gallery.cols));
  Matrix out(queries.rows, gallery.rows);
  if (queries.rows == 0 || gallery.rows == 0) return out;

  const auto q_norms = detail::squared_norms(queries);
  const auto g_norms = detail::squared_norms(gallery);
  const auto packed = detail::pack_gallery(gallery);
  const std::vector<double> zero_row(queries.cols, 0.0);

  const std::size_t quads = (queries.rows + detail::kQuad - 1) / detail::kQuad;
  workers = std::clamp<std::size_t>(workers, 1, quads);
  if (workers == 1) {
    detail::distance_rows(queries, gallery, q_norms, g_norms, packed, zero_row, 0, quads, out);
    return out;
  }
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t begin = quads * w / workers;
    const std::size_t end = quads * (w + 1) / workers;
    pool.emplace_back([&, begin, end] {
      detail::distance_rows(queries, gallery, q_norms, g_norms, packed, zero_row, begin, end, out);
    });
  }
  pool.clear();
  return out;
}

inline DistanceMatrix euclidean_distances(const EmbeddingSet& queries, const EmbeddingSet& gallery,
                                          std::size_t workers = 1) {
  return DistanceMatrix{euclidean_distances(queries.features().view(), gallery.features().view(),
                                            workers),
                        queries.names(), gallery.names()};
}

}  // namespace reid
