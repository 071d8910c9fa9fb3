#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "reid/error.hpp"
#include "reid/matrix.hpp"

namespace reid {

/// A named N x D block of appearance features. Only obtainable through
/// validation, so every instance satisfies: D >= 1, all values finite,
/// names unique and one per row.
class EmbeddingSet {
 public:
  EmbeddingSet() = default;

  /// Validates and takes ownership. Throws DimensionMismatch, NonFinite or
  /// DuplicateName; never repairs input.
  static EmbeddingSet create(std::vector<std::string> names, Matrix features) {
    require(names.size() == features.rows(), ErrorCode::DimensionMismatch,
            "name count " + std::to_string(names.size()) + " does not match row count " +
                std::to_string(features.rows()));
    require(features.cols() >= 1, ErrorCode::DimensionMismatch, "feature width must be >= 1");
    for (std::size_t i = 0; i < features.rows(); ++i) {
      const auto row = features.row(i);
      for (std::size_t j = 0; j < row.size(); ++j) {
        if (!std::isfinite(row[j])) {
          fail(ErrorCode::NonFinite, "non-finite value at row " + std::to_string(i) + ", column " +
                                         std::to_string(j) + " (" + names[i] + ")");
        }
      }
    }
    std::unordered_map<std::string, std::size_t> seen;
    seen.reserve(names.size());
    for (std::size_t i = 0; i < names.size(); ++i) {
      auto [it, inserted] = seen.emplace(names[i], i);
      if (!inserted) {
        fail(ErrorCode::DuplicateName, "name '" + names[i] + "' at row " + std::to_string(i) +
                                           " already used at row " + std::to_string(it->second));
      }
    }
    EmbeddingSet set;
    set.names_ = std::move(names);
    set.features_ = std::move(features);
    return set;
  }

  std::size_t size() const noexcept { return names_.size(); }
  std::size_t dim() const noexcept { return features_.cols(); }
  const std::vector<std::string>& names() const noexcept { return names_; }
  const Matrix& features() const noexcept { return features_; }
  std::span<const double> row(std::size_t i) const { return features_.row(i); }

  friend bool operator==(const EmbeddingSet&, const EmbeddingSet&) = default;

 private:
  std::vector<std::string> names_;
  Matrix features_;
};

/// Validates possibly ragged rows into an EmbeddingSet.
inline EmbeddingSet validate_embedding_set(std::vector<std::string> names,
                                           const std::vector<std::vector<double>>& rows) {
  require(names.size() == rows.size(), ErrorCode::DimensionMismatch,
          "name count " + std::to_string(names.size()) + " does not match row count " +
              std::to_string(rows.size()));
  const std::size_t dim = rows.empty() ? 0 : rows.front().size();
  std::vector<double> flat;
  flat.reserve(rows.size() * dim);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != dim) {
      fail(ErrorCode::DimensionMismatch, "row " + std::to_string(i) + " has width " +
                                             std::to_string(rows[i].size()) + ", expected " +
                                             std::to_string(dim));
    }
    flat.insert(flat.end(), rows[i].begin(), rows[i].end());
  }
  if (rows.empty()) {
    fail(ErrorCode::DimensionMismatch, "feature width must be >= 1");
  }
  return EmbeddingSet::create(std::move(names), Matrix(rows.size(), dim, std::move(flat)));
}

/// Reserved id for rows with no attribute record; never penalised.
inline constexpr std::uint32_t kUnknownAttribute = std::numeric_limits<std::uint32_t>::max();

struct Attributes {
  std::uint32_t type_id = kUnknownAttribute;
  std::uint32_t color_id = kUnknownAttribute;
  friend bool operator==(const Attributes&, const Attributes&) = default;
};

/// Per-image (type, color) labels with optional declared vocabulary sizes.
class AttributeTable {
 public:
  AttributeTable() = default;
  AttributeTable(std::optional<std::uint32_t> type_vocab, std::optional<std::uint32_t> color_vocab)
      : type_vocab_(type_vocab), color_vocab_(color_vocab) {}

  void insert(const std::string& name, Attributes attrs) {
    require(attrs.type_id != kUnknownAttribute && attrs.color_id != kUnknownAttribute,
            ErrorCode::InvalidArgument, "attribute ids must be known labels for '" + name + "'");
    if (type_vocab_ && attrs.type_id >= *type_vocab_) {
      fail(ErrorCode::LabelOutOfRange, "type id " + std::to_string(attrs.type_id) + " for '" +
                                           name + "' exceeds vocabulary of " +
                                           std::to_string(*type_vocab_));
    }
    if (color_vocab_ && attrs.color_id >= *color_vocab_) {
      fail(ErrorCode::LabelOutOfRange, "color id " + std::to_string(attrs.color_id) + " for '" +
                                           name + "' exceeds vocabulary of " +
                                           std::to_string(*color_vocab_));
    }
    auto [it, inserted] = entries_.emplace(name, attrs);
    require(inserted, ErrorCode::DuplicateName, "attribute record for '" + name + "' repeated");
  }

  const Attributes* find(const std::string& name) const {
    auto it = entries_.find(name);
    return it == entries_.end() ? nullptr : &it->second;
  }

  std::size_t size() const noexcept { return entries_.size(); }
  const std::map<std::string, Attributes>& entries() const noexcept { return entries_; }
  std::optional<std::uint32_t> type_vocab() const noexcept { return type_vocab_; }
  std::optional<std::uint32_t> color_vocab() const noexcept { return color_vocab_; }

 private:
  std::optional<std::uint32_t> type_vocab_;
  std::optional<std::uint32_t> color_vocab_;
  std::map<std::string, Attributes> entries_;
};

enum class AttributePolicy { strict, unknown_label };

/// Attribute ids in the row order of an EmbeddingSet.
struct AttributeColumns {
  std::vector<std::uint32_t> types;
  std::vector<std::uint32_t> colors;
  std::size_t size() const noexcept { return types.size(); }
};

inline AttributeColumns align_attributes(const EmbeddingSet& set, const AttributeTable& table,
                                         AttributePolicy policy) {
  AttributeColumns out;
  out.types.reserve(set.size());
  out.colors.reserve(set.size());
  for (std::size_t i = 0; i < set.size(); ++i) {
    const Attributes* attrs = table.find(set.names()[i]);
    if (attrs == nullptr) {
      if (policy == AttributePolicy::strict) {
        fail(ErrorCode::MissingAttribute,
             "no attributes for '" + set.names()[i] + "' (row " + std::to_string(i) + ")");
      }
      out.types.push_back(kUnknownAttribute);
      out.colors.push_back(kUnknownAttribute);
    } else {
      out.types.push_back(attrs->type_id);
      out.colors.push_back(attrs->color_id);
    }
  }
  return out;
}

/// Disjoint groups of gallery image names, each from one continuous track.
class TrackletIndex {
 public:
  TrackletIndex() = default;

  /// Throws DuplicateAcrossTracklets if a name is already listed.
  void add(std::vector<std::string> members) {
    const std::size_t id = tracklets_.size();
    for (const auto& name : members) {
      auto [it, inserted] = owner_.emplace(name, id);
      if (!inserted) {
        fail(ErrorCode::DuplicateAcrossTracklets, "'" + name + "' listed in tracklet " +
                                                      std::to_string(id) + " and tracklet " +
                                                      std::to_string(it->second));
      }
    }
    tracklets_.push_back(std::move(members));
  }

  std::size_t size() const noexcept { return tracklets_.size(); }
  const std::vector<std::vector<std::string>>& tracklets() const noexcept { return tracklets_; }

 private:
  std::vector<std::vector<std::string>> tracklets_;
  std::unordered_map<std::string, std::size_t> owner_;
};

inline constexpr std::size_t kNoTracklet = std::numeric_limits<std::size_t>::max();

/// Tracklet membership resolved against a gallery axis.
struct BoundTracklets {
  std::vector<std::size_t> tracklet_of;            // per gallery index, kNoTracklet if none
  std::vector<std::vector<std::size_t>> members;   // per tracklet, gallery indices
};

inline BoundTracklets bind_tracklets(const TrackletIndex& index,
                                     const std::vector<std::string>& gallery_names,
                                     ErrorCode on_unknown = ErrorCode::UnknownGalleryInTracklet) {
  std::unordered_map<std::string, std::size_t> position;
  position.reserve(gallery_names.size());
  for (std::size_t i = 0; i < gallery_names.size(); ++i) position.emplace(gallery_names[i], i);

  BoundTracklets bound;
  bound.tracklet_of.assign(gallery_names.size(), kNoTracklet);
  bound.members.resize(index.size());
  for (std::size_t t = 0; t < index.size(); ++t) {
    for (const auto& name : index.tracklets()[t]) {
      auto it = position.find(name);
      if (it == position.end()) {
        fail(on_unknown, "tracklet " + std::to_string(t) + " lists '" + name +
                             "' which is not in the gallery");
      }
      bound.tracklet_of[it->second] = t;
      bound.members[t].push_back(it->second);
    }
  }
  return bound;
}

/// Q x G distances with the names of both axes.
struct DistanceMatrix {
  Matrix values;
  std::vector<std::string> query_names;
  std::vector<std::string> gallery_names;

  std::size_t queries() const noexcept { return values.rows(); }
  std::size_t galleries() const noexcept { return values.cols(); }
};

/// Per-query ordered gallery indices, 0-based.
struct RankingResult {
  std::vector<std::vector<std::size_t>> lists;

  std::size_t size() const noexcept { return lists.size(); }
  friend bool operator==(const RankingResult&, const RankingResult&) = default;
};

inline void check_ranking(const RankingResult& ranking, std::size_t gallery_size) {
  for (std::size_t q = 0; q < ranking.size(); ++q) {
    std::unordered_set<std::size_t> seen;
    for (std::size_t idx : ranking.lists[q]) {
      require(idx < gallery_size, ErrorCode::InvalidArgument,
              "query " + std::to_string(q) + " ranks invalid gallery index " + std::to_string(idx));
      require(seen.insert(idx).second, ErrorCode::InvalidArgument,
              "query " + std::to_string(q) + " ranks gallery index " + std::to_string(idx) +
                  " twice");
    }
  }
}

enum class ConstraintMode { literal, mismatch_penalty, off };
enum class Normalization { per_extractor_l2, none };

struct PipelineConfig {
  double theta = 0.0;
  double delta_t = 0.0;
  double delta_c = 0.0;
  ConstraintMode constraint_mode = ConstraintMode::literal;
  std::vector<double> ensemble_weights;  // empty: weight 1 for every member
  Normalization normalize = Normalization::per_extractor_l2;
  std::size_t top_k = 100;
  AttributePolicy attribute_policy = AttributePolicy::unknown_label;
  std::size_t workers = 1;

  void validate(std::size_t members) const {
    require(std::isfinite(theta) && theta >= 0.0, ErrorCode::InvalidArgument, "theta must be >= 0");
    require(std::isfinite(delta_t) && delta_t >= 0.0, ErrorCode::InvalidArgument,
            "delta_t must be >= 0");
    require(std::isfinite(delta_c) && delta_c >= 0.0, ErrorCode::InvalidArgument,
            "delta_c must be >= 0");
    require(top_k >= 1, ErrorCode::InvalidArgument, "top_k must be positive");
    require(workers >= 1, ErrorCode::InvalidArgument, "workers must be positive");
    if (!ensemble_weights.empty()) {
      require(ensemble_weights.size() == members, ErrorCode::InvalidArgument,
              "ensemble_weights has " + std::to_string(ensemble_weights.size()) +
                  " entries for " + std::to_string(members) + " embedding sets");
      for (double w : ensemble_weights) {
        require(std::isfinite(w) && w > 0.0, ErrorCode::InvalidArgument,
                "ensemble weights must be finite and positive");
      }
    }
  }
};

inline std::string_view to_string(ConstraintMode mode) {
  switch (mode) {
    case ConstraintMode::literal: return "literal";
    case ConstraintMode::mismatch_penalty: return "mismatch_penalty";
    case ConstraintMode::off: return "off";
  }
  return "?";
}

inline std::string_view to_string(Normalization mode) {
  return mode == Normalization::none ? "none" : "per_extractor_l2";
}

inline std::string_view to_string(AttributePolicy policy) {
  return policy == AttributePolicy::strict ? "strict" : "unknown_label";
}

}  // namespace reid
