#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include "reid/binary.hpp"
#include "reid/eval.hpp"
#include "reid/io.hpp"
#include "reid/pipeline.hpp"

#ifndef REID_CLI_PATH
#error "REID_CLI_PATH must point at the reid executable"
#endif

namespace fs = std::filesystem;

namespace {

struct RunResult {
  int status = -1;
  std::string output;
};

RunResult run(const std::string& args) {
  const std::string cmd = std::string(REID_CLI_PATH) + " " + args + " 2>&1";
  RunResult r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  char buf[4096];
  while (const std::size_t n = std::fread(buf, 1, sizeof buf, pipe)) r.output.append(buf, n);
  const int raw = pclose(pipe);
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  return r;
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           (std::string("reid_cli_") + ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  fs::path dir_;
};

double parse_metric(const std::string& output, const std::string& prefix) {
  const auto pos = output.find(prefix);
  if (pos == std::string::npos) return -1.0;
  return std::stod(output.substr(pos + prefix.size()));
}

TEST_F(CliTest, SynthRerankEvalMatchesLibrary) {
  const std::string synth_args = "--ids 12 --images 5 --dim 8 --std 0.35 --seed 4 --views 2";
  auto r = run("synth --out " + path("s") + " " + synth_args);
  ASSERT_EQ(r.status, 0) << r.output;
  r = run("rerank --manifest " + path("s/manifest.txt") + " --out " + path("sub.txt") + " --report " +
          path("report.json"));
  ASSERT_EQ(r.status, 0) << r.output;
  r = run("eval --manifest " + path("s/manifest.txt") + " --submission " + path("sub.txt") + " --ranks 1,5");
  ASSERT_EQ(r.status, 0) << r.output;
  const double cli_map = parse_metric(r.output, "metric=mAP cutoff=100 value=");
  EXPECT_NE(r.output.find("metric=cmc rank=5"), std::string::npos);

  // Same files through the library.
  const auto m = reid::io::read_manifest(path("s/manifest.txt"));
  std::vector<reid::EmbeddingSet> qv, gv;
  for (const auto& x : m.extractors) {
    qv.push_back(reid::io::read_embeddings(x.query));
    gv.push_back(reid::io::read_embeddings(x.gallery));
  }
  ASSERT_EQ(qv.size(), 2u);
  const auto attrs = reid::io::read_attributes(m.attributes);
  const auto tracklets = reid::io::read_tracklets(m.tracklets);
  const auto gt = reid::io::parse_ground_truth(reid::binary::read_text(m.ground_truth), m.ground_truth,
                                               qv[0].names(), gv[0].names());
  const auto ranked = reid::run_pipeline(qv, gv, &attrs, tracklets, reid::io::read_config(m.config));
  EXPECT_NEAR(cli_map, reid::mean_ap(ranked, gt), 1e-9);

  const std::string report = reid::binary::read_text(path("report.json"));
  EXPECT_NE(report.find("\"command\""), std::string::npos);
  EXPECT_NE(report.find("fnv1a64"), std::string::npos);
}

TEST_F(CliTest, RepeatedRunsAreByteIdentical) {
  ASSERT_EQ(run("synth --out " + path("s") + " --ids 20 --std 0.3").status, 0);
  for (const char* name : {"a.txt", "b.txt"}) {
    ASSERT_EQ(run("rerank --manifest " + path("s/manifest.txt") + " --out " + path(name)).status, 0);
  }
  ASSERT_EQ(run("rerank --manifest " + path("s/manifest.txt") + " --out " + path("c.txt") + " --workers 3").status, 0);
  const auto a = reid::binary::read_text(path("a.txt"));
  EXPECT_FALSE(a.empty());
  EXPECT_EQ(a, reid::binary::read_text(path("b.txt")));
  EXPECT_EQ(a, reid::binary::read_text(path("c.txt")));
}

TEST_F(CliTest, CsvInstanceMatchesBinaryInstance) {
  ASSERT_EQ(run("synth --out " + path("bin") + " --std 0.3 --seed 9").status, 0);
  ASSERT_EQ(run("synth --out " + path("csv") + " --std 0.3 --seed 9 --csv").status, 0);
  ASSERT_EQ(run("rerank --manifest " + path("bin/manifest.txt") + " --out " + path("a.txt")).status, 0);
  ASSERT_EQ(run("rerank --manifest " + path("csv/manifest.txt") + " --out " + path("b.txt")).status, 0);
  EXPECT_EQ(reid::binary::read_text(path("a.txt")), reid::binary::read_text(path("b.txt")));
}

TEST_F(CliTest, DistanceSubcommand) {
  ASSERT_EQ(run("synth --out " + path("s") + " --ids 4 --images 3").status, 0);
  const auto r = run("distance --manifest " + path("s/manifest.txt") + " --out " + path("d.rdmx") +
                     " --set theta=0 --report " + path("r.json"));
  ASSERT_EQ(r.status, 0) << r.output;
  const auto d = reid::io::read_distances(path("d.rdmx"));
  EXPECT_EQ(d.queries(), 4u);
  EXPECT_EQ(d.galleries(), 8u);
  for (double v : d.values.data()) EXPECT_GE(v, 0.0);
}

TEST_F(CliTest, LossesCheckPasses) {
  const auto r = run("losses-check --points 20");
  EXPECT_EQ(r.status, 0) << r.output;
  EXPECT_NE(r.output.find("check=triplet_loss_gradient status=pass"), std::string::npos) << r.output;
  EXPECT_EQ(r.output.find("status=fail"), std::string::npos) << r.output;
}

TEST_F(CliTest, UsageAndDataErrors) {
  EXPECT_EQ(run("rerank").status, 2);
  EXPECT_EQ(run("no-such-command").status, 2);
  EXPECT_EQ(run("rerank --manifest " + path("missing.txt") + " --out " + path("x.txt")).status, 4);
  reid::binary::write_text(path("bad.txt"), "bogus = 1\n");
  EXPECT_EQ(run("rerank --manifest " + path("bad.txt") + " --out " + path("x.txt")).status, 3);
  ASSERT_EQ(run("synth --out " + path("s") + " --ids 3").status, 0);
  EXPECT_EQ(run("rerank --manifest " + path("s/manifest.txt") + " --out " + path("x.txt") + " --set nope=1").status, 3);
  EXPECT_EQ(run("synth --out " + path("t") + " --images 1").status, 3);
}

}  // namespace
