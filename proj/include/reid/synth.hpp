#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numeric>
#include <string>
#include <vector>

#include "reid/core.hpp"
#include "reid/error.hpp"
#include "reid/eval.hpp"
#include "reid/rng.hpp"

namespace reid::synth {

/// Parameters of a synthetic retrieval instance. Every identity contributes
/// one query and images_per_identity - 1 gallery images per view.
struct SynthSpec {
  std::size_t n_identities = 10;
  std::size_t images_per_identity = 6;
  std::size_t dim = 16;
  double cluster_std = 0.05;
  std::size_t n_tracklets_per_identity = 2;
  std::uint32_t n_types = 4;
  std::uint32_t n_colors = 6;
  std::uint64_t seed = 1;
  /// Extractor views of the same images; each view has its own centers and noise.
  std::size_t n_views = 1;
  /// Identity centers are unit vectors at least this far apart.
  double min_center_distance = 1.0;
  /// Gallery images per identity placed near its query, labelled with a
  /// different type and color and relevant to no query.
  std::size_t distractors_per_identity = 0;
  double distractor_distance = 0.05;

  void validate() const {
    require(n_identities >= 1 && dim >= 1 && n_tracklets_per_identity >= 1 && n_views >= 1,
            ErrorCode::InvalidArgument, "synthetic counts must be >= 1");
    require(images_per_identity >= 2, ErrorCode::InvalidArgument,
            "images_per_identity must be >= 2 (one query plus at least one gallery image)");
    require(n_types >= 1 && n_colors >= 1, ErrorCode::InvalidArgument,
            "attribute vocabularies must be non-empty");
    require(std::isfinite(cluster_std) && cluster_std >= 0.0, ErrorCode::InvalidArgument,
            "cluster_std must be >= 0");
    require(min_center_distance >= 0.0 && min_center_distance <= 2.0, ErrorCode::InvalidArgument,
            "min_center_distance must lie in [0, 2]");
    require(distractors_per_identity == 0 || (n_types >= 2 && n_colors >= 2),
            ErrorCode::InvalidArgument, "distractors need at least two types and two colors");
  }
};

struct SynthData {
  std::vector<EmbeddingSet> query_views;
  std::vector<EmbeddingSet> gallery_views;
  AttributeTable attributes;
  TrackletIndex tracklets;
  GroundTruth ground_truth;
  std::vector<std::size_t> query_identity;
  std::vector<std::size_t> gallery_identity;  // n_identities for distractors

  const EmbeddingSet& queries() const { return query_views.front(); }
  const EmbeddingSet& gallery() const { return gallery_views.front(); }
};

namespace detail {

inline std::vector<double> random_unit(Rng& rng, std::size_t dim) {
  std::vector<double> v(dim);
  double sq = 0.0;
  do {
    sq = 0.0;
    for (double& x : v) {
      x = rng.normal();
      sq += x * x;
    }
  } while (sq == 0.0);
  const double norm = std::sqrt(sq);
  for (double& x : v) x /= norm;
  return v;
}

inline std::vector<std::vector<double>> place_centers(Rng& rng, const SynthSpec& spec) {
  constexpr int kMaxTries = 10000;
  std::vector<std::vector<double>> centers;
  centers.reserve(spec.n_identities);
  for (std::size_t id = 0; id < spec.n_identities; ++id) {
    bool placed = false;
    for (int attempt = 0; attempt < kMaxTries && !placed; ++attempt) {
      auto candidate = random_unit(rng, spec.dim);
      bool ok = true;
      for (const auto& c : centers) {
        double sq = 0.0;
        for (std::size_t k = 0; k < spec.dim; ++k) sq += (c[k] - candidate[k]) * (c[k] - candidate[k]);
        if (std::sqrt(sq) < spec.min_center_distance) {
          ok = false;
          break;
        }
      }
      if (ok) {
        centers.push_back(std::move(candidate));
        placed = true;
      }
    }
    if (!placed) {
      fail(ErrorCode::InvalidArgument, "cannot place " + std::to_string(spec.n_identities) +
                                           " centers in dimension " + std::to_string(spec.dim) +
                                           " at distance >= " +
                                           std::to_string(spec.min_center_distance));
    }
  }
  return centers;
}

inline std::string name(const char* fmt, std::size_t a, std::size_t b = 0) {
  char buf[64];
  std::snprintf(buf, sizeof buf, fmt, a, b);
  return buf;
}

}  // namespace detail

/// Deterministic per seed.
inline SynthData generate(const SynthSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);

  // Identity labels first so they do not depend on view count.
  std::vector<Attributes> identity_attrs(spec.n_identities);
  for (auto& a : identity_attrs) {
    a.type_id = static_cast<std::uint32_t>(rng.below(spec.n_types));
    a.color_id = static_cast<std::uint32_t>(rng.below(spec.n_colors));
  }

  const std::size_t per_id_gallery = spec.images_per_identity - 1;
  const std::size_t n_gallery = spec.n_identities * (per_id_gallery + spec.distractors_per_identity);

  // Gallery slot layout: identity-major, then shuffled once.
  struct Slot {
    std::size_t identity;
    std::size_t image;      // index within its identity
    bool distractor;
  };
  std::vector<Slot> slots;
  slots.reserve(n_gallery);
  for (std::size_t id = 0; id < spec.n_identities; ++id) {
    for (std::size_t k = 0; k < per_id_gallery; ++k) slots.push_back({id, k, false});
    for (std::size_t k = 0; k < spec.distractors_per_identity; ++k) slots.push_back({id, k, true});
  }
  rng.shuffle(slots);

  SynthData data;
  data.attributes = AttributeTable(spec.n_types, spec.n_colors);
  std::vector<std::string> query_names(spec.n_identities);
  for (std::size_t id = 0; id < spec.n_identities; ++id) {
    query_names[id] = detail::name("id%04zu_q", id);
    data.attributes.insert(query_names[id], identity_attrs[id]);
    data.query_identity.push_back(id);
  }
  std::vector<std::string> gallery_names(n_gallery);
  std::vector<std::vector<std::size_t>> gallery_of(spec.n_identities);
  for (std::size_t j = 0; j < n_gallery; ++j) {
    const Slot& s = slots[j];
    if (s.distractor) {
      gallery_names[j] = detail::name("id%04zu_d%02zu", s.identity, s.image);
      const Attributes own = identity_attrs[s.identity];
      Attributes other;
      other.type_id = (own.type_id + 1 + static_cast<std::uint32_t>(rng.below(spec.n_types - 1))) %
                      spec.n_types;
      other.color_id =
          (own.color_id + 1 + static_cast<std::uint32_t>(rng.below(spec.n_colors - 1))) %
          spec.n_colors;
      data.attributes.insert(gallery_names[j], other);
      data.gallery_identity.push_back(spec.n_identities);
    } else {
      gallery_names[j] = detail::name("id%04zu_g%02zu", s.identity, s.image);
      data.attributes.insert(gallery_names[j], identity_attrs[s.identity]);
      data.gallery_identity.push_back(s.identity);
      gallery_of[s.identity].push_back(j);
    }
  }

  // Tracklets: contiguous chunks of each identity's images in image order.
  for (std::size_t id = 0; id < spec.n_identities; ++id) {
    std::vector<std::size_t> members = gallery_of[id];
    std::sort(members.begin(), members.end(),
              [&](std::size_t a, std::size_t b) { return slots[a].image < slots[b].image; });
    const std::size_t chunks = std::min(spec.n_tracklets_per_identity, members.size());
    for (std::size_t t = 0; t < chunks; ++t) {
      const std::size_t begin = members.size() * t / chunks;
      const std::size_t end = members.size() * (t + 1) / chunks;
      std::vector<std::string> names;
      for (std::size_t k = begin; k < end; ++k) names.push_back(gallery_names[members[k]]);
      data.tracklets.add(std::move(names));
    }
    std::sort(gallery_of[id].begin(), gallery_of[id].end());
    data.ground_truth.relevant.push_back(gallery_of[id]);
  }

  for (std::size_t view = 0; view < spec.n_views; ++view) {
    const auto centers = detail::place_centers(rng, spec);
    Matrix q(spec.n_identities, spec.dim);
    for (std::size_t id = 0; id < spec.n_identities; ++id) {
      auto row = q.row(id);
      for (std::size_t k = 0; k < spec.dim; ++k) row[k] = centers[id][k] + spec.cluster_std * rng.normal();
    }
    Matrix g(n_gallery, spec.dim);
    for (std::size_t j = 0; j < n_gallery; ++j) {
      const Slot& s = slots[j];
      auto row = g.row(j);
      if (s.distractor) {
        const auto dir = detail::random_unit(rng, spec.dim);
        const auto anchor = q.row(s.identity);
        for (std::size_t k = 0; k < spec.dim; ++k) row[k] = anchor[k] + spec.distractor_distance * dir[k];
      } else {
        for (std::size_t k = 0; k < spec.dim; ++k) {
          row[k] = centers[s.identity][k] + spec.cluster_std * rng.normal();
        }
      }
    }
    data.query_views.push_back(EmbeddingSet::create(query_names, std::move(q)));
    data.gallery_views.push_back(EmbeddingSet::create(gallery_names, std::move(g)));
  }
  return data;
}

// ---------------------------------------------------------------------------
// Reference implementations. Deliberately naive; fast paths are tested
// against them.

/// Per-pair subtraction loop.
inline Matrix oracle_distances(const EmbeddingSet& queries, const EmbeddingSet& gallery) {
  require(queries.dim() == gallery.dim(), ErrorCode::DimensionMismatch, "width mismatch");
  Matrix out(queries.size(), gallery.size());
  for (std::size_t i = 0; i < queries.size(); ++i) {
    for (std::size_t j = 0; j < gallery.size(); ++j) {
      double sq = 0.0;
      for (std::size_t k = 0; k < queries.dim(); ++k) {
        const double d = queries.row(i)[k] - gallery.row(j)[k];
        sq += d * d;
      }
      out(i, j) = std::sqrt(sq);
    }
  }
  return out;
}

/// Full sort of every gallery by (distance, index).
inline RankingResult oracle_rank(const EmbeddingSet& queries, const EmbeddingSet& gallery) {
  const Matrix dist = oracle_distances(queries, gallery);
  RankingResult out;
  for (std::size_t i = 0; i < dist.rows(); ++i) {
    std::vector<std::pair<double, std::size_t>> keyed;
    for (std::size_t j = 0; j < dist.cols(); ++j) keyed.emplace_back(dist(i, j), j);
    std::sort(keyed.begin(), keyed.end());
    std::vector<std::size_t> order;
    for (const auto& [d, j] : keyed) order.push_back(j);
    out.lists.push_back(std::move(order));
  }
  return out;
}

/// Tracklet promotion by literal list surgery: walk the full sequence, and
/// at each position whose gallery is closer than theta insert its tracklet
/// mates right after it, then drop every later repeat.
inline RankingResult oracle_group_rerank(const DistanceMatrix& dist, const TrackletIndex& tracklets,
                                         double theta, std::size_t top_k) {
  std::vector<int> tracklet_of(dist.galleries(), -1);
  for (std::size_t t = 0; t < tracklets.size(); ++t) {
    for (const auto& name : tracklets.tracklets()[t]) {
      const auto it = std::find(dist.gallery_names.begin(), dist.gallery_names.end(), name);
      require(it != dist.gallery_names.end(), ErrorCode::UnknownGalleryInTracklet, name);
      tracklet_of[static_cast<std::size_t>(it - dist.gallery_names.begin())] = static_cast<int>(t);
    }
  }
  RankingResult out;
  for (std::size_t i = 0; i < dist.queries(); ++i) {
    std::vector<std::pair<double, std::size_t>> keyed;
    for (std::size_t j = 0; j < dist.galleries(); ++j) keyed.emplace_back(dist.values(i, j), j);
    std::sort(keyed.begin(), keyed.end());
    std::vector<std::size_t> seq;
    for (const auto& [d, j] : keyed) seq.push_back(j);

    for (std::size_t pos = 0; pos < seq.size(); ++pos) {
      const std::size_t g = seq[pos];
      if (!(dist.values(i, g) < theta) || tracklet_of[g] < 0) continue;
      std::vector<std::pair<double, std::size_t>> mates;
      for (std::size_t j = 0; j < dist.galleries(); ++j) {
        if (j != g && tracklet_of[j] == tracklet_of[g]) mates.emplace_back(dist.values(i, j), j);
      }
      std::sort(mates.begin(), mates.end());
      std::vector<std::size_t> inserted;
      for (const auto& [d, j] : mates) inserted.push_back(j);
      seq.insert(seq.begin() + static_cast<std::ptrdiff_t>(pos + 1), inserted.begin(), inserted.end());
      std::vector<std::size_t> dedup;
      for (std::size_t j : seq) {
        if (std::find(dedup.begin(), dedup.end(), j) == dedup.end()) dedup.push_back(j);
      }
      seq = std::move(dedup);
    }
    if (seq.size() > top_k) seq.resize(top_k);
    out.lists.push_back(std::move(seq));
  }
  return out;
}

}  // namespace reid::synth
