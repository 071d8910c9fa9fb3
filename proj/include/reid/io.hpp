#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "reid/binary.hpp"
#include "reid/core.hpp"
#include "reid/error.hpp"
#include "reid/eval.hpp"

namespace reid::io {

/// Receives non-fatal diagnostics (skipped lines, short rankings).
using WarningSink = std::function<void(const std::string&)>;

inline void warn_stderr(const std::string& message) { std::cerr << "warning: " << message << '\n'; }

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = s.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(s.substr(start));
      return out;
    }
    out.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
}

inline std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    const std::size_t start = i;
    while (i < s.size() && !std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    if (i > start) out.push_back(s.substr(start, i - start));
  }
  return out;
}

inline std::vector<std::string_view> lines(std::string_view text) {
  auto out = split(text, '\n');
  if (!out.empty() && out.back().empty()) out.pop_back();
  return out;
}

inline std::string where(const std::string& source, std::size_t line) {
  return source + ":" + std::to_string(line);
}

template <typename T>
inline T parse_number(std::string_view token, const std::string& location, std::string_view what) {
  token = trim(token);
  T value{};
  const auto* first = token.data();
  const auto* last = token.data() + token.size();
  if (!token.empty() && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (token.empty() || ec != std::errc() || ptr != last) {
    fail(ErrorCode::ParseError, location + ": cannot parse " + std::string(what) + " '" +
                                    std::string(token) + "'");
  }
  return value;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Embeddings. Binary layout, all little-endian:
//   "REID" | u32 version (1) | u32 count | u32 dim |
//   count x (u32 byte length, UTF-8 name) | count*dim f32 row-major values

inline constexpr std::uint32_t kEmbeddingVersion = 1;

inline std::vector<std::uint8_t> encode_embeddings(const EmbeddingSet& set) {
  std::vector<std::uint8_t> out;
  binary::put_bytes(out, "REID");
  binary::put_u32(out, kEmbeddingVersion);
  binary::put_u32(out, static_cast<std::uint32_t>(set.size()));
  binary::put_u32(out, static_cast<std::uint32_t>(set.dim()));
  for (const auto& name : set.names()) {
    binary::put_u32(out, static_cast<std::uint32_t>(name.size()));
    binary::put_bytes(out, name);
  }
  for (std::size_t i = 0; i < set.size(); ++i) {
    const auto row = set.row(i);
    for (std::size_t k = 0; k < row.size(); ++k) {
      const auto v = static_cast<float>(row[k]);
      if (!std::isfinite(v)) {
        fail(ErrorCode::NonFinite, "value at row " + std::to_string(i) + ", column " +
                                       std::to_string(k) + " does not fit a 32-bit float");
      }
      binary::put_f32(out, v);
    }
  }
  return out;
}

inline EmbeddingSet decode_embeddings(const std::vector<std::uint8_t>& bytes, const std::string& source) {
  binary::Reader in(bytes, source);
  if (in.remaining() < 4 || in.bytes(4, "magic") != "REID") {
    fail(ErrorCode::BadMagic, source + ": missing 'REID' magic bytes");
  }
  const std::uint32_t version = in.u32("version");
  if (version != kEmbeddingVersion) {
    fail(ErrorCode::VersionUnsupported,
         source + ": format version " + std::to_string(version) + " is not supported");
  }
  const std::uint32_t count = in.u32("count");
  const std::uint32_t dim = in.u32("dim");
  std::vector<std::string> names;
  names.reserve(std::min<std::size_t>(count, in.remaining() / 4));
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t len = in.u32("name length");
    names.push_back(in.bytes(len, "name"));
  }
  const std::size_t values = static_cast<std::size_t>(count) * dim;
  in.need(values * 4, "feature values");
  std::vector<double> flat(values);
  for (std::size_t i = 0; i < values; ++i) {
    const float v = in.f32("feature value");
    if (!std::isfinite(v)) {
      fail(ErrorCode::NonFinite, source + ": non-finite value at row " + std::to_string(i / dim) +
                                     ", column " + std::to_string(i % dim) + " (byte offset " +
                                     std::to_string(in.offset() - 4) + ")");
    }
    flat[i] = v;
  }
  if (in.remaining() != 0) {
    fail(ErrorCode::ParseError, source + ": " + std::to_string(in.remaining()) +
                                    " trailing bytes after offset " + std::to_string(in.offset()));
  }
  return EmbeddingSet::create(std::move(names), Matrix(count, dim, std::move(flat)));
}

/// One row per line: name, then D comma-separated values. Values are read
/// at 32-bit precision, the same as the binary format; written with
/// enough digits to round-trip that precision.
inline std::string format_embeddings_csv(const EmbeddingSet& set) {
  std::string out;
  char buf[32];
  for (std::size_t i = 0; i < set.size(); ++i) {
    out += set.names()[i];
    for (double v : set.row(i)) {
      std::snprintf(buf, sizeof buf, ",%.9g", static_cast<double>(static_cast<float>(v)));
      out += buf;
    }
    out += '\n';
  }
  return out;
}

inline EmbeddingSet parse_embeddings_csv(std::string_view text, const std::string& source) {
  std::vector<std::string> names;
  std::vector<std::vector<double>> rows;
  const auto all = detail::lines(text);
  for (std::size_t n = 0; n < all.size(); ++n) {
    const auto line = detail::trim(all[n]);
    const std::string loc = detail::where(source, n + 1);
    if (line.empty()) fail(ErrorCode::ParseError, loc + ": empty line");
    const auto fields = detail::split(line, ',');
    if (fields.size() < 2) fail(ErrorCode::ParseError, loc + ": expected name and values");
    names.emplace_back(detail::trim(fields[0]));
    std::vector<double> row;
    row.reserve(fields.size() - 1);
    for (std::size_t k = 1; k < fields.size(); ++k) {
      const float v = detail::parse_number<float>(fields[k], loc, "feature value");
      if (!std::isfinite(v)) {
        fail(ErrorCode::NonFinite, loc + ": non-finite value in column " + std::to_string(k));
      }
      row.push_back(v);
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      fail(ErrorCode::DimensionMismatch, loc + ": row has " + std::to_string(row.size()) +
                                             " values, expected " +
                                             std::to_string(rows.front().size()));
    }
    rows.push_back(std::move(row));
  }
  return validate_embedding_set(std::move(names), rows);
}

inline bool is_csv_path(const std::string& path) {
  return std::filesystem::path(path).extension() == ".csv";
}

/// Format chosen by extension: ".csv" for text, anything else binary.
inline void write_embeddings(const std::string& path, const EmbeddingSet& set) {
  if (is_csv_path(path)) {
    binary::write_text(path, format_embeddings_csv(set));
  } else {
    binary::write_file(path, encode_embeddings(set));
  }
}

inline EmbeddingSet read_embeddings(const std::string& path) {
  if (is_csv_path(path)) return parse_embeddings_csv(binary::read_text(path), path);
  return decode_embeddings(binary::read_file(path), path);
}

// ---------------------------------------------------------------------------
// Attributes: optional "# vocab types=<n> colors=<m>" line, then the header
// "name,type_id,color_id", then one row per image.

inline AttributeTable parse_attributes(std::string_view text, const std::string& source) {
  const auto all = detail::lines(text);
  std::size_t n = 0;
  std::optional<std::uint32_t> types;
  std::optional<std::uint32_t> colors;
  auto skip_blank = [&] {
    while (n < all.size() && detail::trim(all[n]).empty()) ++n;
  };
  skip_blank();
  if (n < all.size() && detail::trim(all[n]).starts_with("#")) {
    const std::string loc = detail::where(source, n + 1);
    auto tokens = detail::split_ws(detail::trim(all[n]).substr(1));
    if (tokens.empty() || tokens[0] != "vocab") {
      fail(ErrorCode::ParseError, loc + ": expected '# vocab types=<n> colors=<m>'");
    }
    for (std::size_t t = 1; t < tokens.size(); ++t) {
      const auto kv = detail::split(tokens[t], '=');
      if (kv.size() != 2) fail(ErrorCode::ParseError, loc + ": bad vocab entry '" + std::string(tokens[t]) + "'");
      const auto v = detail::parse_number<std::uint32_t>(kv[1], loc, "vocabulary size");
      if (kv[0] == "types") {
        types = v;
      } else if (kv[0] == "colors") {
        colors = v;
      } else {
        fail(ErrorCode::ParseError, loc + ": unknown vocab key '" + std::string(kv[0]) + "'");
      }
    }
    ++n;
    skip_blank();
  }
  if (n >= all.size() || detail::trim(all[n]) != "name,type_id,color_id") {
    fail(ErrorCode::ParseError, detail::where(source, n + 1) + ": expected header 'name,type_id,color_id'");
  }
  ++n;
  AttributeTable table(types, colors);
  std::unordered_map<std::string, std::size_t> first_line;
  for (; n < all.size(); ++n) {
    const auto line = detail::trim(all[n]);
    if (line.empty()) continue;
    const std::string loc = detail::where(source, n + 1);
    const auto fields = detail::split(line, ',');
    if (fields.size() != 3) fail(ErrorCode::ParseError, loc + ": expected 3 fields");
    const std::string name(detail::trim(fields[0]));
    if (name.empty()) fail(ErrorCode::ParseError, loc + ": empty name");
    Attributes a;
    a.type_id = detail::parse_number<std::uint32_t>(fields[1], loc, "type_id");
    a.color_id = detail::parse_number<std::uint32_t>(fields[2], loc, "color_id");
    if (a.type_id == kUnknownAttribute || a.color_id == kUnknownAttribute) {
      fail(ErrorCode::ParseError, loc + ": id value is reserved");
    }
    if (types && a.type_id >= *types) {
      fail(ErrorCode::ParseError, loc + ": type_id " + std::to_string(a.type_id) +
                                      " outside declared vocabulary of " + std::to_string(*types));
    }
    if (colors && a.color_id >= *colors) {
      fail(ErrorCode::ParseError, loc + ": color_id " + std::to_string(a.color_id) +
                                      " outside declared vocabulary of " + std::to_string(*colors));
    }
    auto [it, inserted] = first_line.emplace(name, n + 1);
    if (!inserted) {
      fail(ErrorCode::DuplicateName, loc + ": '" + name + "' already defined at line " +
                                         std::to_string(it->second));
    }
    table.insert(name, a);
  }
  return table;
}

inline std::string format_attributes(const AttributeTable& table) {
  std::string out;
  if (table.type_vocab() || table.color_vocab()) {
    out += "# vocab";
    if (table.type_vocab()) out += " types=" + std::to_string(*table.type_vocab());
    if (table.color_vocab()) out += " colors=" + std::to_string(*table.color_vocab());
    out += '\n';
  }
  out += "name,type_id,color_id\n";
  for (const auto& [name, a] : table.entries()) {
    out += name + "," + std::to_string(a.type_id) + "," + std::to_string(a.color_id) + "\n";
  }
  return out;
}

inline AttributeTable read_attributes(const std::string& path) {
  return parse_attributes(binary::read_text(path), path);
}
inline void write_attributes(const std::string& path, const AttributeTable& table) {
  binary::write_text(path, format_attributes(table));
}

// ---------------------------------------------------------------------------
// Tracklets: one tracklet per line, whitespace-separated gallery names.
// Blank lines are skipped with a warning.

inline TrackletIndex parse_tracklets(std::string_view text, const std::string& source,
                                     const WarningSink& warn = warn_stderr) {
  TrackletIndex index;
  std::unordered_map<std::string, std::size_t> first_line;
  const auto all = detail::lines(text);
  for (std::size_t n = 0; n < all.size(); ++n) {
    const auto tokens = detail::split_ws(all[n]);
    const std::string loc = detail::where(source, n + 1);
    if (tokens.empty()) {
      if (warn) warn(loc + ": empty tracklet line skipped");
      continue;
    }
    std::vector<std::string> members;
    for (auto token : tokens) {
      std::string name(token);
      auto [it, inserted] = first_line.emplace(name, n + 1);
      if (!inserted) {
        fail(ErrorCode::DuplicateAcrossTracklets, loc + ": '" + name + "' already listed at line " +
                                                      std::to_string(it->second));
      }
      members.push_back(std::move(name));
    }
    index.add(std::move(members));
  }
  return index;
}

inline std::string format_tracklets(const TrackletIndex& index) {
  std::string out;
  for (const auto& t : index.tracklets()) {
    for (std::size_t k = 0; k < t.size(); ++k) {
      if (k) out += ' ';
      out += t[k];
    }
    out += '\n';
  }
  return out;
}

inline TrackletIndex read_tracklets(const std::string& path, const WarningSink& warn = warn_stderr) {
  return parse_tracklets(binary::read_text(path), path, warn);
}
inline void write_tracklets(const std::string& path, const TrackletIndex& index) {
  binary::write_text(path, format_tracklets(index));
}

/// Resolves tracklet names against a gallery; unknown names are UnknownName.
inline BoundTracklets bind_tracklets(const TrackletIndex& index, const EmbeddingSet& gallery) {
  return reid::bind_tracklets(index, gallery.names(), ErrorCode::UnknownName);
}

// ---------------------------------------------------------------------------
// Submission: one line per query, 1-based gallery indices separated by
// single spaces, at most max_length per line.

inline constexpr std::size_t kSubmissionLength = 100;

inline std::string format_submission(const RankingResult& rankings, std::size_t max_length = kSubmissionLength,
                                     const WarningSink& warn = warn_stderr) {
  std::string out;
  for (std::size_t q = 0; q < rankings.size(); ++q) {
    const auto& list = rankings.lists[q];
    const std::size_t n = std::min(list.size(), max_length);
    if (list.size() < max_length && warn) {
      warn("query " + std::to_string(q + 1) + " has " + std::to_string(list.size()) +
           " ranked galleries, fewer than " + std::to_string(max_length));
    }
    for (std::size_t k = 0; k < n; ++k) {
      if (k) out += ' ';
      out += std::to_string(list[k] + 1);
    }
    out += '\n';
  }
  return out;
}

inline RankingResult parse_submission(std::string_view text, const std::string& source) {
  RankingResult out;
  const auto all = detail::lines(text);
  for (std::size_t n = 0; n < all.size(); ++n) {
    const std::string loc = detail::where(source, n + 1);
    std::vector<std::size_t> list;
    for (auto token : detail::split_ws(all[n])) {
      const auto v = detail::parse_number<std::size_t>(token, loc, "gallery index");
      if (v == 0) fail(ErrorCode::ParseError, loc + ": gallery indices are 1-based");
      list.push_back(v - 1);
    }
    out.lists.push_back(std::move(list));
  }
  return out;
}

inline void write_submission(const std::string& path, const RankingResult& rankings,
                             std::size_t max_length = kSubmissionLength,
                             const WarningSink& warn = warn_stderr) {
  binary::write_text(path, format_submission(rankings, max_length, warn));
}

inline RankingResult read_submission(const std::string& path) {
  return parse_submission(binary::read_text(path), path);
}

// ---------------------------------------------------------------------------
// Ground truth: one line per query, the query name followed by the names of
// its relevant gallery images, whitespace-separated.

inline std::string format_ground_truth(const GroundTruth& gt, const std::vector<std::string>& query_names,
                                       const std::vector<std::string>& gallery_names) {
  require(gt.size() == query_names.size(), ErrorCode::DimensionMismatch,
          "ground truth and query names differ in length");
  std::string out;
  for (std::size_t q = 0; q < gt.size(); ++q) {
    out += query_names[q];
    for (std::size_t j : gt.relevant[q]) out += " " + gallery_names.at(j);
    out += '\n';
  }
  return out;
}

/// Resolves names against the query and gallery axes; the result is in
/// query order.
inline GroundTruth parse_ground_truth(std::string_view text, const std::string& source,
                                      const std::vector<std::string>& query_names,
                                      const std::vector<std::string>& gallery_names) {
  std::unordered_map<std::string, std::size_t> q_pos;
  std::unordered_map<std::string, std::size_t> g_pos;
  for (std::size_t i = 0; i < query_names.size(); ++i) q_pos.emplace(query_names[i], i);
  for (std::size_t j = 0; j < gallery_names.size(); ++j) g_pos.emplace(gallery_names[j], j);

  std::vector<std::optional<std::vector<std::size_t>>> slots(query_names.size());
  const auto all = detail::lines(text);
  for (std::size_t n = 0; n < all.size(); ++n) {
    const auto tokens = detail::split_ws(all[n]);
    if (tokens.empty()) continue;
    const std::string loc = detail::where(source, n + 1);
    const auto q = q_pos.find(std::string(tokens[0]));
    if (q == q_pos.end()) fail(ErrorCode::UnknownName, loc + ": unknown query '" + std::string(tokens[0]) + "'");
    if (slots[q->second]) fail(ErrorCode::DuplicateName, loc + ": query '" + q->first + "' repeated");
    std::vector<std::size_t> relevant;
    for (std::size_t t = 1; t < tokens.size(); ++t) {
      const auto g = g_pos.find(std::string(tokens[t]));
      if (g == g_pos.end()) fail(ErrorCode::UnknownName, loc + ": unknown gallery '" + std::string(tokens[t]) + "'");
      relevant.push_back(g->second);
    }
    slots[q->second] = std::move(relevant);
  }
  GroundTruth gt;
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (!slots[i]) fail(ErrorCode::MissingGroundTruth, source + ": no entry for query '" + query_names[i] + "'");
    gt.relevant.push_back(std::move(*slots[i]));
  }
  return gt;
}

// ---------------------------------------------------------------------------
// Distance matrix: "RDMX" | u32 version (1) | u32 queries | u32 galleries |
// query names | gallery names (u32 length + bytes each) | f64 row-major values

inline std::vector<std::uint8_t> encode_distances(const DistanceMatrix& dist) {
  std::vector<std::uint8_t> out;
  binary::put_bytes(out, "RDMX");
  binary::put_u32(out, 1);
  binary::put_u32(out, static_cast<std::uint32_t>(dist.queries()));
  binary::put_u32(out, static_cast<std::uint32_t>(dist.galleries()));
  for (const auto* names : {&dist.query_names, &dist.gallery_names}) {
    for (const auto& name : *names) {
      binary::put_u32(out, static_cast<std::uint32_t>(name.size()));
      binary::put_bytes(out, name);
    }
  }
  out.reserve(out.size() + dist.values.size() * 8);
  for (double v : dist.values.data()) binary::put_f64(out, v);
  return out;
}

inline DistanceMatrix decode_distances(const std::vector<std::uint8_t>& bytes, const std::string& source) {
  binary::Reader in(bytes, source);
  if (in.remaining() < 4 || in.bytes(4, "magic") != "RDMX") {
    fail(ErrorCode::BadMagic, source + ": missing 'RDMX' magic bytes");
  }
  const std::uint32_t version = in.u32("version");
  if (version != 1) fail(ErrorCode::VersionUnsupported, source + ": version " + std::to_string(version));
  DistanceMatrix dist;
  const std::uint32_t q = in.u32("query count");
  const std::uint32_t g = in.u32("gallery count");
  for (std::uint32_t i = 0; i < q; ++i) dist.query_names.push_back(in.bytes(in.u32("name length"), "name"));
  for (std::uint32_t j = 0; j < g; ++j) dist.gallery_names.push_back(in.bytes(in.u32("name length"), "name"));
  in.need(static_cast<std::size_t>(q) * g * 8, "distance values");
  dist.values = Matrix(q, g);
  for (double& v : dist.values.data()) v = in.f64("distance value");
  return dist;
}

inline void write_distances(const std::string& path, const DistanceMatrix& dist) {
  binary::write_file(path, encode_distances(dist));
}
inline DistanceMatrix read_distances(const std::string& path) {
  return decode_distances(binary::read_file(path), path);
}

// ---------------------------------------------------------------------------
// Flat "key = value" text with '#' comments, used for configs and manifests.

struct KeyValues {
  std::vector<std::pair<std::string, std::string>> entries;  // file order
  std::vector<std::size_t> lines;                            // source line per entry
};

inline KeyValues parse_key_values(std::string_view text, const std::string& source) {
  KeyValues kv;
  std::unordered_map<std::string, std::size_t> first_line;
  const auto all = detail::lines(text);
  for (std::size_t n = 0; n < all.size(); ++n) {
    auto line = all[n];
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const std::string loc = detail::where(source, n + 1);
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) fail(ErrorCode::ParseError, loc + ": expected 'key = value'");
    std::string key(detail::trim(line.substr(0, eq)));
    std::string value(detail::trim(line.substr(eq + 1)));
    if (key.empty()) fail(ErrorCode::ParseError, loc + ": empty key");
    auto [it, inserted] = first_line.emplace(key, n + 1);
    if (!inserted) {
      fail(ErrorCode::ParseError, loc + ": key '" + key + "' already set at line " + std::to_string(it->second));
    }
    kv.entries.emplace_back(std::move(key), std::move(value));
    kv.lines.push_back(n + 1);
  }
  return kv;
}

/// Applies recognised keys onto `config`; unknown keys are a ParseError.
inline void apply_config(PipelineConfig& config, const KeyValues& kv, const std::string& source) {
  for (std::size_t e = 0; e < kv.entries.size(); ++e) {
    const auto& [key, value] = kv.entries[e];
    const std::string loc = detail::where(source, kv.lines[e]);
    if (key == "theta") {
      config.theta = detail::parse_number<double>(value, loc, key);
    } else if (key == "delta_t") {
      config.delta_t = detail::parse_number<double>(value, loc, key);
    } else if (key == "delta_c") {
      config.delta_c = detail::parse_number<double>(value, loc, key);
    } else if (key == "top_k") {
      config.top_k = detail::parse_number<std::size_t>(value, loc, key);
    } else if (key == "workers") {
      config.workers = detail::parse_number<std::size_t>(value, loc, key);
    } else if (key == "constraint_mode") {
      if (value == "literal") config.constraint_mode = ConstraintMode::literal;
      else if (value == "mismatch_penalty") config.constraint_mode = ConstraintMode::mismatch_penalty;
      else if (value == "off") config.constraint_mode = ConstraintMode::off;
      else fail(ErrorCode::ParseError, loc + ": constraint_mode must be literal, mismatch_penalty or off");
    } else if (key == "normalize") {
      if (value == "per_extractor_l2") config.normalize = Normalization::per_extractor_l2;
      else if (value == "none") config.normalize = Normalization::none;
      else fail(ErrorCode::ParseError, loc + ": normalize must be per_extractor_l2 or none");
    } else if (key == "attribute_policy") {
      if (value == "strict") config.attribute_policy = AttributePolicy::strict;
      else if (value == "unknown_label") config.attribute_policy = AttributePolicy::unknown_label;
      else fail(ErrorCode::ParseError, loc + ": attribute_policy must be strict or unknown_label");
    } else if (key == "ensemble_weights") {
      config.ensemble_weights.clear();
      if (!value.empty()) {
        for (auto token : detail::split(value, ',')) {
          config.ensemble_weights.push_back(detail::parse_number<double>(token, loc, "ensemble weight"));
        }
      }
    } else {
      fail(ErrorCode::ParseError, loc + ": unknown config key '" + key + "'");
    }
  }
}

inline PipelineConfig parse_config(std::string_view text, const std::string& source) {
  PipelineConfig config;
  apply_config(config, parse_key_values(text, source), source);
  return config;
}

inline PipelineConfig read_config(const std::string& path) {
  return parse_config(binary::read_text(path), path);
}

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string format_config(const PipelineConfig& config) {
  std::string out;
  out += "theta = " + format_double(config.theta) + "\n";
  out += "delta_t = " + format_double(config.delta_t) + "\n";
  out += "delta_c = " + format_double(config.delta_c) + "\n";
  out += "constraint_mode = " + std::string(to_string(config.constraint_mode)) + "\n";
  out += "ensemble_weights = ";
  for (std::size_t i = 0; i < config.ensemble_weights.size(); ++i) {
    if (i) out += ",";
    out += format_double(config.ensemble_weights[i]);
  }
  out += "\n";
  out += "normalize = " + std::string(to_string(config.normalize)) + "\n";
  out += "top_k = " + std::to_string(config.top_k) + "\n";
  out += "attribute_policy = " + std::string(to_string(config.attribute_policy)) + "\n";
  out += "workers = " + std::to_string(config.workers) + "\n";
  return out;
}

// ---------------------------------------------------------------------------
// Manifest:
//   extractor.<name>.query = <path>
//   extractor.<name>.gallery = <path>     (one pair per extractor, file order)
//   attributes = <path>      (optional)
//   tracklets = <path>       (optional)
//   config = <path>          (optional)
//   ground_truth = <path>    (optional)
// Relative paths resolve against the manifest's directory.

struct ExtractorFiles {
  std::string name;
  std::string query;
  std::string gallery;
};

struct Manifest {
  std::vector<ExtractorFiles> extractors;
  std::string attributes;
  std::string tracklets;
  std::string config;
  std::string ground_truth;
};

inline Manifest parse_manifest(std::string_view text, const std::string& source,
                               const std::filesystem::path& base_dir) {
  const KeyValues kv = parse_key_values(text, source);
  Manifest m;
  auto resolve = [&](const std::string& p) {
    const std::filesystem::path path(p);
    return (path.is_absolute() ? path : base_dir / path).lexically_normal().string();
  };
  for (std::size_t e = 0; e < kv.entries.size(); ++e) {
    const auto& [key, value] = kv.entries[e];
    const std::string loc = detail::where(source, kv.lines[e]);
    if (value.empty()) fail(ErrorCode::ParseError, loc + ": empty path for '" + key + "'");
    if (key.starts_with("extractor.")) {
      const auto dot = key.rfind('.');
      const std::string name = key.substr(10, dot - 10);
      const std::string role = key.substr(dot + 1);
      if (name.empty() || dot < 10 || (role != "query" && role != "gallery")) {
        fail(ErrorCode::ParseError, loc + ": expected extractor.<name>.query or extractor.<name>.gallery");
      }
      auto it = std::find_if(m.extractors.begin(), m.extractors.end(),
                             [&](const ExtractorFiles& x) { return x.name == name; });
      if (it == m.extractors.end()) {
        m.extractors.push_back({name, "", ""});
        it = std::prev(m.extractors.end());
      }
      (role == "query" ? it->query : it->gallery) = resolve(value);
    } else if (key == "attributes") {
      m.attributes = resolve(value);
    } else if (key == "tracklets") {
      m.tracklets = resolve(value);
    } else if (key == "config") {
      m.config = resolve(value);
    } else if (key == "ground_truth") {
      m.ground_truth = resolve(value);
    } else {
      fail(ErrorCode::ParseError, loc + ": unknown manifest key '" + key + "'");
    }
  }
  if (m.extractors.empty()) fail(ErrorCode::ParseError, source + ": manifest lists no extractors");
  for (const auto& x : m.extractors) {
    if (x.query.empty() || x.gallery.empty()) {
      fail(ErrorCode::ParseError, source + ": extractor '" + x.name + "' needs both query and gallery files");
    }
  }
  auto exists = [&](const std::string& p, const char* what) {
    if (!p.empty() && !std::filesystem::exists(p)) {
      fail(ErrorCode::IoError, source + ": " + what + " file '" + p + "' does not exist");
    }
  };
  for (const auto& x : m.extractors) {
    exists(x.query, "query embedding");
    exists(x.gallery, "gallery embedding");
  }
  exists(m.attributes, "attribute");
  exists(m.tracklets, "tracklet");
  exists(m.config, "config");
  exists(m.ground_truth, "ground truth");
  return m;
}

inline Manifest read_manifest(const std::string& path) {
  return parse_manifest(binary::read_text(path), path, std::filesystem::path(path).parent_path());
}

inline std::string format_manifest(const Manifest& m) {
  std::string out;
  for (const auto& x : m.extractors) {
    out += "extractor." + x.name + ".query = " + x.query + "\n";
    out += "extractor." + x.name + ".gallery = " + x.gallery + "\n";
  }
  if (!m.attributes.empty()) out += "attributes = " + m.attributes + "\n";
  if (!m.tracklets.empty()) out += "tracklets = " + m.tracklets + "\n";
  if (!m.config.empty()) out += "config = " + m.config + "\n";
  if (!m.ground_truth.empty()) out += "ground_truth = " + m.ground_truth + "\n";
  return out;
}

}  // namespace reid::io
