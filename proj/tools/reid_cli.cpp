// Command-line front end: distance, rerank, eval, synth, losses-check.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "losses_check.hpp"
#include "reid/reid.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

enum ExitCode : int {
  kOk = 0,
  kInternal = 1,
  kUsage = 2,
  kDataError = 3,
  kIoError = 4,
  kCheckFailed = 5,
};

class Report {
 public:
  explicit Report(std::string command) { doc_["command"] = std::move(command); }

  void config(const reid::PipelineConfig& c) {
    doc_["config"] = {
        {"theta", c.theta},
        {"delta_t", c.delta_t},
        {"delta_c", c.delta_c},
        {"constraint_mode", std::string(reid::to_string(c.constraint_mode))},
        {"ensemble_weights", c.ensemble_weights},
        {"normalize", std::string(reid::to_string(c.normalize))},
        {"top_k", c.top_k},
        {"attribute_policy", std::string(reid::to_string(c.attribute_policy))},
        {"workers", c.workers},
    };
  }

  void input(const std::string& path) { doc_["inputs"].push_back(path); }

  void output(const std::string& path) {
    const std::string bytes = reid::binary::read_text(path);
    char digest[17];
    std::snprintf(digest, sizeof digest, "%016llx",
                  static_cast<unsigned long long>(reid::binary::fnv1a64(bytes)));
    doc_["outputs"].push_back({{"path", path}, {"bytes", bytes.size()}, {"fnv1a64", digest}});
  }

  template <typename F>
  auto time(const std::string& stage, F&& body) {
    const auto start = std::chrono::steady_clock::now();
    auto finish = [&] {
      const std::chrono::duration<double, std::milli> ms = std::chrono::steady_clock::now() - start;
      doc_["timings_ms"][stage] = ms.count();
    };
    if constexpr (std::is_void_v<decltype(body())>) {
      body();
      finish();
    } else {
      auto result = body();
      finish();
      return result;
    }
  }

  json& doc() { return doc_; }

  void write(const std::string& path) const {
    if (path.empty()) return;
    reid::binary::write_text(path, doc_.dump(2) + "\n");
  }

 private:
  json doc_;
};

struct Inputs {
  reid::io::Manifest manifest;
  std::vector<reid::EmbeddingSet> query_views;
  std::vector<reid::EmbeddingSet> gallery_views;
  reid::PipelineConfig config;
};

Inputs load(const std::string& manifest_path, const std::vector<std::string>& overrides, Report& report) {
  Inputs in;
  in.manifest = reid::io::read_manifest(manifest_path);
  report.input(manifest_path);
  for (const auto& x : in.manifest.extractors) {
    in.query_views.push_back(reid::io::read_embeddings(x.query));
    in.gallery_views.push_back(reid::io::read_embeddings(x.gallery));
    report.input(x.query);
    report.input(x.gallery);
  }
  if (!in.manifest.config.empty()) {
    in.config = reid::io::read_config(in.manifest.config);
    report.input(in.manifest.config);
  }
  std::string text;
  for (const auto& o : overrides) text += o + "\n";
  reid::io::apply_config(in.config, reid::io::parse_key_values(text, "--set"), "--set");
  return in;
}

// ---------------------------------------------------------------------------

int run_distance(const std::string& manifest, const std::string& out, const std::vector<std::string>& overrides,
                 const std::string& report_path) {
  Report report("distance");
  Inputs in = report.time("load", [&] { return load(manifest, overrides, report); });
  in.config.validate(in.query_views.size());
  report.config(in.config);
  reid::EnsembleSpec spec = reid::EnsembleSpec::uniform(in.query_views.size(), in.config.normalize);
  for (std::size_t m = 0; m < in.manifest.extractors.size(); ++m) {
    spec.member_names[m] = in.manifest.extractors[m].name;
  }
  if (!in.config.ensemble_weights.empty()) spec.weights = in.config.ensemble_weights;
  const auto dist = report.time("distance", [&] {
    const auto q = reid::ensemble_concat(in.query_views, spec);
    const auto g = reid::ensemble_concat(in.gallery_views, spec);
    return reid::euclidean_distances(q, g, in.config.workers);
  });
  reid::io::write_distances(out, dist);
  report.output(out);
  report.write(report_path);
  std::cout << "distances " << dist.queries() << "x" << dist.galleries() << " -> " << out << "\n";
  return kOk;
}

int run_rerank(const std::string& manifest, const std::string& out, const std::vector<std::string>& overrides,
               const std::string& report_path) {
  Report report("rerank");
  Inputs in = report.time("load", [&] { return load(manifest, overrides, report); });
  report.config(in.config);
  std::optional<reid::AttributeTable> attrs;
  if (!in.manifest.attributes.empty()) {
    attrs = reid::io::read_attributes(in.manifest.attributes);
    report.input(in.manifest.attributes);
  }
  reid::TrackletIndex tracklets;
  if (!in.manifest.tracklets.empty()) {
    tracklets = reid::io::read_tracklets(in.manifest.tracklets);
    reid::io::bind_tracklets(tracklets, in.gallery_views.front());
    report.input(in.manifest.tracklets);
  }
  reid::PipelineTrace trace;
  const auto ranking = report.time("pipeline", [&] {
    return reid::run_pipeline(in.query_views, in.gallery_views, attrs ? &*attrs : nullptr, tracklets,
                              in.config, &trace);
  });
  reid::io::write_submission(out, ranking, reid::io::kSubmissionLength,
                             [](const std::string&) { /* short lists are expected for small galleries */ });
  report.output(out);
  report.doc()["query_groups"] = trace.query_groups;
  report.doc()["fused_dim"] = trace.fused_dim;
  report.write(report_path);
  std::cout << "ranked " << ranking.size() << " queries (" << trace.query_groups << " groups) -> " << out
            << "\n";
  return kOk;
}

int run_eval(const std::string& manifest_path, const std::string& submission, std::size_t cutoff,
             const std::vector<std::size_t>& ranks, const std::string& report_path) {
  Report report("eval");
  const auto manifest = reid::io::read_manifest(manifest_path);
  if (manifest.ground_truth.empty()) {
    throw reid::Error(reid::ErrorCode::MissingGroundTruth, manifest_path + ": manifest has no ground_truth entry");
  }
  const auto queries = reid::io::read_embeddings(manifest.extractors.front().query);
  const auto gallery = reid::io::read_embeddings(manifest.extractors.front().gallery);
  const auto gt = reid::io::parse_ground_truth(reid::binary::read_text(manifest.ground_truth),
                                               manifest.ground_truth, queries.names(), gallery.names());
  const auto ranking = reid::io::read_submission(submission);
  reid::check_ranking(ranking, gallery.size());
  report.input(manifest_path);
  report.input(submission);

  const double map = reid::mean_ap(ranking, gt, cutoff);
  const auto curve = reid::cmc(ranking, gt, ranks);
  char line[128];
  std::snprintf(line, sizeof line, "metric=mAP cutoff=%zu value=%.10f", cutoff, map);
  std::cout << line << "\n";
  report.doc()["metrics"]["mAP"] = map;
  for (std::size_t i = 0; i < ranks.size(); ++i) {
    std::snprintf(line, sizeof line, "metric=cmc rank=%zu value=%.10f", ranks[i], curve[i]);
    std::cout << line << "\n";
    report.doc()["metrics"]["cmc"][std::to_string(ranks[i])] = curve[i];
  }
  report.write(report_path);
  return kOk;
}

int run_synth(const reid::synth::SynthSpec& spec, const std::string& out_dir, bool csv,
              const std::string& report_path) {
  Report report("synth");
  const auto data = report.time("generate", [&] { return reid::synth::generate(spec); });
  fs::create_directories(out_dir);
  const fs::path dir(out_dir);
  const std::string ext = csv ? ".csv" : ".bin";

  reid::io::Manifest manifest;
  std::vector<std::string> written;
  for (std::size_t v = 0; v < data.query_views.size(); ++v) {
    const std::string name = "view" + std::to_string(v);
    const std::string q = "query_" + name + ext;
    const std::string g = "gallery_" + name + ext;
    reid::io::write_embeddings((dir / q).string(), data.query_views[v]);
    reid::io::write_embeddings((dir / g).string(), data.gallery_views[v]);
    manifest.extractors.push_back({name, q, g});
    written.push_back(q);
    written.push_back(g);
  }
  reid::io::write_attributes((dir / "attributes.csv").string(), data.attributes);
  reid::io::write_tracklets((dir / "tracklets.txt").string(), data.tracklets);
  reid::binary::write_text((dir / "ground_truth.txt").string(),
                           reid::io::format_ground_truth(data.ground_truth, data.queries().names(),
                                                         data.gallery().names()));
  reid::binary::write_text((dir / "config.txt").string(), reid::io::format_config(reid::PipelineConfig{}));
  manifest.attributes = "attributes.csv";
  manifest.tracklets = "tracklets.txt";
  manifest.ground_truth = "ground_truth.txt";
  manifest.config = "config.txt";
  reid::binary::write_text((dir / "manifest.txt").string(), reid::io::format_manifest(manifest));
  for (const char* f : {"attributes.csv", "tracklets.txt", "ground_truth.txt", "config.txt", "manifest.txt"}) {
    written.push_back(f);
  }
  for (const auto& f : written) report.output((dir / f).string());
  report.doc()["spec"] = {{"identities", spec.n_identities}, {"images_per_identity", spec.images_per_identity},
                          {"dim", spec.dim}, {"cluster_std", spec.cluster_std},
                          {"tracklets_per_identity", spec.n_tracklets_per_identity},
                          {"types", spec.n_types}, {"colors", spec.n_colors}, {"seed", spec.seed},
                          {"views", spec.n_views}, {"distractors_per_identity", spec.distractors_per_identity}};
  report.write(report_path);
  std::cout << "synthetic instance: " << data.queries().size() << " queries, " << data.gallery().size()
            << " gallery -> " << (dir / "manifest.txt").string() << "\n";
  return kOk;
}

int run_losses_check(std::uint64_t seed, std::size_t points, const std::string& report_path) {
  Report report("losses-check");
  auto records = reid::tools::loss_value_checks();
  auto grads = report.time("gradient_checks", [&] { return reid::tools::gradient_checks(seed, points); });
  records.insert(records.end(), grads.begin(), grads.end());
  bool ok = true;
  char line[160];
  for (const auto& r : records) {
    std::snprintf(line, sizeof line, "check=%s status=%s value=%.17g tolerance=%.3g", r.name.c_str(),
                  r.passed ? "pass" : "fail", r.value, r.tolerance);
    std::cout << line << "\n";
    report.doc()["checks"][r.name] = {{"passed", r.passed}, {"value", r.value}};
    ok = ok && r.passed;
  }
  report.write(report_path);
  return ok ? kOk : kCheckFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Re-identification retrieval engine"};
  app.require_subcommand(1);

  std::string manifest, out, submission, report_path, out_dir;
  std::vector<std::string> overrides;
  std::size_t cutoff = reid::kChallengeCutoff;
  std::vector<std::size_t> ranks = {1, 5, 10};
  std::size_t workers = 0;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--report", report_path, "Write a JSON run report here");
  };
  auto add_pipeline = [&](CLI::App* sub) {
    sub->add_option("--manifest", manifest, "Manifest file")->required();
    sub->add_option("--out", out, "Output file")->required();
    sub->add_option("--set", overrides, "Config override, key=value (repeatable)");
    sub->add_option("--workers", workers, "Worker threads (overrides config)");
    add_common(sub);
  };

  auto* distance = app.add_subcommand("distance", "Ensemble features and write the query x gallery distances");
  add_pipeline(distance);
  auto* rerank = app.add_subcommand("rerank", "Run the full pipeline and write a submission file");
  add_pipeline(rerank);

  auto* eval = app.add_subcommand("eval", "Score a submission against the manifest's ground truth");
  eval->add_option("--manifest", manifest, "Manifest file")->required();
  eval->add_option("--submission", submission, "Submission file")->required();
  eval->add_option("--cutoff", cutoff, "mAP cutoff")->check(CLI::PositiveNumber);
  eval->add_option("--ranks", ranks, "CMC ranks")->delimiter(',');
  add_common(eval);

  reid::synth::SynthSpec spec;
  bool csv = false;
  auto* synth = app.add_subcommand("synth", "Generate a deterministic synthetic instance");
  synth->add_option("--out", out_dir, "Output directory")->required();
  synth->add_option("--ids", spec.n_identities, "Identities");
  synth->add_option("--images", spec.images_per_identity, "Images per identity (one becomes the query)");
  synth->add_option("--dim", spec.dim, "Feature width");
  synth->add_option("--std", spec.cluster_std, "Per-coordinate noise");
  synth->add_option("--tracklets", spec.n_tracklets_per_identity, "Tracklets per identity");
  synth->add_option("--types", spec.n_types, "Type vocabulary size");
  synth->add_option("--colors", spec.n_colors, "Color vocabulary size");
  synth->add_option("--seed", spec.seed, "Seed");
  synth->add_option("--views", spec.n_views, "Extractor views");
  synth->add_option("--min-center-distance", spec.min_center_distance, "Minimum center separation");
  synth->add_option("--distractors", spec.distractors_per_identity, "Attribute-distinct distractors per identity");
  synth->add_option("--distractor-distance", spec.distractor_distance, "Distractor offset from the query");
  synth->add_flag("--csv", csv, "Write embeddings as CSV instead of binary");
  add_common(synth);

  std::uint64_t seed = 7;
  std::size_t points = 100;
  auto* losses = app.add_subcommand("losses-check", "Verify loss kernels, gradients and LR schedule");
  losses->add_option("--seed", seed, "Seed for gradient-check points");
  losses->add_option("--points", points, "Points per gradient check");
  add_common(losses);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  if (workers > 0) overrides.push_back("workers = " + std::to_string(workers));
  try {
    if (*distance) return run_distance(manifest, out, overrides, report_path);
    if (*rerank) return run_rerank(manifest, out, overrides, report_path);
    if (*eval) return run_eval(manifest, submission, cutoff, ranks, report_path);
    if (*synth) return run_synth(spec, out_dir, csv, report_path);
    if (*losses) return run_losses_check(seed, points, report_path);
  } catch (const reid::Error& e) {
    std::cerr << "error [" << e.category() << "]: " << e.what() << "\n";
    return e.code() == reid::ErrorCode::IoError ? kIoError : kDataError;
  } catch (const std::exception& e) {
    std::cerr << "error [Internal]: " << e.what() << "\n";
    return kInternal;
  }
  return kUsage;
}
