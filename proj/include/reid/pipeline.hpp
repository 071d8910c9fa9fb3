#pragma once

#include <vector>

#include "reid/core.hpp"
#include "reid/distance.hpp"
#include "reid/error.hpp"
#include "reid/rerank.hpp"

namespace reid {

/// Intermediate products of one pipeline run, for reporting.
struct PipelineTrace {
  std::size_t query_groups = 0;
  std::size_t fused_dim = 0;
};

/// ensemble -> per-extractor normalization -> query grouping -> distances
/// from group means to the gallery -> attribute constraint -> tracklet
/// re-ranking. `attributes` may be null only when the constraint is off.
inline RankingResult run_pipeline(const std::vector<EmbeddingSet>& query_views,
                                  const std::vector<EmbeddingSet>& gallery_views,
                                  const AttributeTable* attributes, const TrackletIndex& tracklets,
                                  const PipelineConfig& config, PipelineTrace* trace = nullptr) {
  require(!query_views.empty() && query_views.size() == gallery_views.size(),
          ErrorCode::DimensionError,
          "query and gallery need the same, nonzero number of embedding sets");
  config.validate(query_views.size());
  for (std::size_t m = 0; m < query_views.size(); ++m) {
    require(query_views[m].dim() == gallery_views[m].dim(), ErrorCode::DimensionMismatch,
            "extractor " + std::to_string(m) + " has query width " +
                std::to_string(query_views[m].dim()) + " but gallery width " +
                std::to_string(gallery_views[m].dim()));
  }

  EnsembleSpec spec = EnsembleSpec::uniform(query_views.size(), config.normalize);
  if (!config.ensemble_weights.empty()) spec.weights = config.ensemble_weights;
  const EmbeddingSet queries = ensemble_concat(query_views, spec);
  const EmbeddingSet gallery = ensemble_concat(gallery_views, spec);

  const QueryGroups groups = group_queries(queries, config.theta, config.workers);
  const EmbeddingSet representatives = group_representations(queries, groups);
  DistanceMatrix dist = euclidean_distances(representatives, gallery, config.workers);

  if (config.constraint_mode != ConstraintMode::off) {
    require(attributes != nullptr, ErrorCode::InvalidArgument,
            "attribute constraint enabled but no attribute table given");
    const AttributeColumns q_attrs = align_attributes(queries, *attributes, config.attribute_policy);
    const AttributeColumns g_attrs = align_attributes(gallery, *attributes, config.attribute_policy);
    dist = attribute_constraint(dist, q_attrs, g_attrs, config.delta_t, config.delta_c,
                                config.constraint_mode);
  }

  if (trace) {
    trace->query_groups = groups.groups();
    trace->fused_dim = queries.dim();
  }
  return group_rerank(dist, tracklets, config.theta, config.top_k);
}

}  // namespace reid
