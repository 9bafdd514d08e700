#include "multisage/experiments.hpp"

#include "test_util.hpp"

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include <sys/wait.h>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;
using namespace multisage;

namespace {

struct Outcome {
  int code = -1;
  std::string output;
};

Outcome run_cli(const std::string& args, const std::string& stdin_text = {}) {
  std::string cmd = std::string(MULTISAGE_CLI) + " " + args + " 2>&1";
  if (!stdin_text.empty()) cmd = "printf '%s' '" + stdin_text + "' | " + cmd;
  Outcome o;
  FILE* pipe = ::popen(cmd.c_str(), "r");
  if (!pipe) return o;
  char buf[4096];
  while (std::size_t n = std::fread(buf, 1, sizeof buf, pipe)) o.output.append(buf, n);
  const int status = ::pclose(pipe);
  o.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return o;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("multisage_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    std::ofstream(dir_ / "toy.edges") << multisage::testing::planted_edge_list(2, 4, 6, 0.6, 1);
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  fs::path dir_;
};

}  // namespace

TEST_F(Cli, ExitCodes) {
  EXPECT_EQ(run_cli("inspect --edges " + path("missing.edges")).code, 3);
  std::ofstream(dir_ / "bad.json") << "{ broken";
  EXPECT_EQ(run_cli("inspect --config " + path("bad.json")).code, 2);
  std::ofstream(dir_ / "unknown.json") << R"({"schema_version": 1, "surprise": true})";
  EXPECT_EQ(run_cli("inspect --config " + path("unknown.json") + " --edges " + path("toy.edges")).code, 2);
  EXPECT_EQ(run_cli("sweep --edges " + path("toy.edges") + " --kind bogus").code, 2);
  EXPECT_EQ(run_cli("train --edges " + path("toy.edges") + " --no-such-flag").code, 2);
  EXPECT_EQ(run_cli("train --edges " + path("toy.edges") + " --activation tanh").code, 2);
  EXPECT_EQ(run_cli("").code, 2);
  std::ofstream(dir_ / "malformed.edges") << "1 a\n";
  auto o = run_cli("inspect --edges " + path("malformed.edges"));
  EXPECT_EQ(o.code, 3);
  EXPECT_NE(o.output.find("line 1"), std::string::npos) << o.output;
}

TEST_F(Cli, InspectReportsCountsAndChecksExpectations) {
  std::istringstream in(slurp(dir_ / "toy.edges"));
  auto g = parse_multiplex(in, nullptr, CouplingPolicy::derive_shared_label);
  const auto counts = std::to_string(g.num_replicas()) + "," + std::to_string(g.num_layers()) + "," +
                      std::to_string(g.num_intra_edges()) + "," + std::to_string(g.num_inter_edges());
  auto ok = run_cli("inspect --edges " + path("toy.edges") + " --expect " + counts);
  EXPECT_EQ(ok.code, 0) << ok.output;
  EXPECT_NE(ok.output.find(std::to_string(g.num_replicas()) + " nodes, 2 layers"), std::string::npos) << ok.output;
  auto bad = run_cli("inspect --edges " + path("toy.edges") + " --expect 1,2,3,4");
  EXPECT_EQ(bad.code, 5);
  EXPECT_NE(bad.output.find("MISMATCH"), std::string::npos);
}

TEST_F(Cli, TrainIsReproducibleAndScoresSelfPairsAsOne) {
  const std::string common = "train --edges " + path("toy.edges") + " --epochs 20 --hidden-dims 8,8 --seed 3 --embeddings";
  auto a = run_cli(common + " --out " + path("a"));
  ASSERT_EQ(a.code, 0) << a.output;
  auto b = run_cli(common + " --out " + path("a2"));
  ASSERT_EQ(b.code, 0) << b.output;
  for (const char* f : {"checkpoint.txt", "loss.csv", "embeddings.tsv", "split.txt"}) {
    auto x = slurp(dir_ / "a" / f), y = slurp(dir_ / "a2" / f);
    // Provenance lines differ only in the output directory.
    auto strip = [](std::string s) {
      std::istringstream in(s);
      std::string line, out;
      while (std::getline(in, line))
        if (line.find("provenance") == std::string::npos && line.rfind("# config", 0) != 0) out += line + "\n";
      return out;
    };
    EXPECT_EQ(strip(x), strip(y)) << f;
    EXPECT_FALSE(strip(x).empty()) << f;
  }
  auto ma = nlohmann::json::parse(slurp(dir_ / "a" / "metrics.json"));
  auto mb = nlohmann::json::parse(slurp(dir_ / "a2" / "metrics.json"));
  for (auto* m : {&ma, &mb}) {
    m->erase("runtime_s");
    m->erase("provenance");
  }
  EXPECT_EQ(ma, mb);
  EXPECT_TRUE(ma.at("auc_inter").is_number());

  auto s = run_cli("score --edges " + path("toy.edges") + " --checkpoint " + path("a/checkpoint.txt") + " --pairs -",
                   "1 n0 1 n0\n2 n3 2 n3\n");
  ASSERT_EQ(s.code, 0) << s.output;
  std::istringstream lines(s.output);
  std::string l1, l2, x, y, z, w;
  double v1 = 0, v2 = 0;
  std::getline(lines, l1);
  std::getline(lines, l2);
  std::istringstream(l1) >> x >> y >> z >> w >> v1;
  std::istringstream(l2) >> x >> y >> z >> w >> v2;
  EXPECT_NEAR(v1, 1.0, 1e-12) << s.output;
  EXPECT_NEAR(v2, 1.0, 1e-12) << s.output;
  EXPECT_EQ(run_cli("score --edges " + path("toy.edges") + " --checkpoint " + path("a/checkpoint.txt") + " --pairs -",
                    "1 nobody 1 n0\n")
                .code,
            3);
}

TEST_F(Cli, SplitExportImportAndReuse) {
  auto e = run_cli("split-export --edges " + path("toy.edges") + " --seed 4 --out " + path("s.txt"));
  ASSERT_EQ(e.code, 0) << e.output;
  auto i = run_cli("split-import --edges " + path("toy.edges") + " --split " + path("s.txt"));
  EXPECT_EQ(i.code, 0) << i.output;
  EXPECT_NE(i.output.find("marked"), std::string::npos) << i.output;
  auto t = run_cli("train --edges " + path("toy.edges") + " --epochs 2 --hidden-dims 4 --split " + path("s.txt") +
                   " --out " + path("t"));
  ASSERT_EQ(t.code, 0) << t.output;
  auto strip_comments = [](const std::string& s) {
    std::istringstream in(s);
    std::string line, out;
    while (std::getline(in, line))
      if (line.rfind("#", 0) != 0) out += line + "\n";
    return out;
  };
  EXPECT_EQ(strip_comments(slurp(dir_ / "t" / "split.txt")), strip_comments(slurp(dir_ / "s.txt")));

  std::ofstream(dir_ / "other.edges") << "1 a b\n1 b c\n";
  EXPECT_EQ(run_cli("split-import --edges " + path("other.edges") + " --split " + path("s.txt")).code, 3);
}

TEST_F(Cli, WsSweepSmokeProfile) {
  const auto start = std::chrono::steady_clock::now();
  auto o = run_cli("sweep --kind ws_sweep --ws-nodes 2000 --ws-k 4 --grid 0.001,1 --runs 3 --epochs 30 "
                   "--hidden-dims 32,32 --lr 0.01 --threads 0 --seed 5 --format json --out " +
                   path("r"));
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  ASSERT_EQ(o.code, 0) << o.output;
  std::cout << "ws smoke profile: " << seconds << " s\n";
  auto r = load_results(dir_ / "r" / "ws_n2000_k4_ws_sweep.json", ResultFormat::json);
  ASSERT_EQ(r.rows.size(), 2u);
  const auto* ordered = r.find("phi=0.001", Mode::graphsage);
  const auto* random = r.find("phi=1", Mode::graphsage);
  ASSERT_TRUE(ordered && random);
  EXPECT_EQ(ordered->runs, 3u);
  EXPECT_GT(ordered->auc_intra->mean, random->auc_intra->mean);
  EXPECT_LT(seconds, 120.0);
}
