#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "support/testing.hpp"

using namespace tmdcore;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "tmdcore");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir = fs::temp_directory_path() /
          ("tmdcore_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir);
    fs::create_directories(dir);
  }

  std::string dataset(const std::string& name, const std::vector<Graph>& graphs) {
    const auto p = dir / name;
    save_jsonl(p, make_dataset(name, graphs));
    return p.string();
  }

  std::string path(const std::string& name) const { return (dir / name).string(); }

  fs::path dir;
};

Graph k3() { return make_graph(3, {{0, 1}, {1, 2}, {0, 2}}, {{1}, {1}, {1}}); }
Graph p2() { return make_graph(2, {{0, 1}}, {{1}, {1}}); }
Graph k3f() { return make_graph(3, {{0, 1}, {1, 2}, {0, 2}}, {{3}, {1}, {1}}); }

}  // namespace

TEST_F(Cli, TreeNorm) {
  const auto ds = dataset("pk.jsonl", {p2(), k3()});
  auto r = run({"treenorm", "--dataset", ds, "--depth", "2", "--weights", "const:1"});
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(r.out, "4\n9\n");
  r = run({"treenorm", "--dataset", ds, "--depth", "2", "--json"});
  EXPECT_EQ(nlohmann::json::parse(r.out), nlohmann::json({4.0, 9.0}));
  r = run({"treenorm", "--dataset", dataset("one.jsonl", {make_graph(1, {}, {{5}})})});
  EXPECT_EQ(r.out, "5\n");
}

TEST_F(Cli, DistWritesBitExactCache) {
  const auto ds = dataset("pk.jsonl", {k3(), p2()});
  const auto out = path("m.bin");
  auto r = run({"dist", "--dataset", ds, "--depth", "2", "--out", out});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("n=2"), std::string::npos);
  EXPECT_NE(r.out.find("checksum="), std::string::npos);
  const auto dm = read_distance_cache(out);
  EXPECT_EQ(dm.values, (std::vector<double>{5.0}));
  EXPECT_EQ(encode_distance_cache(dm), encode_distance_cache(pairwise_matrix(load_jsonl(ds), tmdtest::make_cfg(2))));
}

TEST_F(Cli, CacheHitSkipsRecomputation) {
  const auto ds = dataset("kkpp.jsonl", {k3(), k3(), p2(), p2()});
  const auto cache = path("c.bin");
  auto r = run({"subsample-graphs", "--dataset", ds, "--depth", "2", "--k", "2", "--cache", cache});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto first = nlohmann::json::parse(r.out);
  EXPECT_EQ(first.at("indices"), nlohmann::json({0, 2}));
  EXPECT_EQ(first.at("tau"), nlohmann::json({2, 2}));
  const auto before = pairwise_matrix_calls().load();
  r = run({"subsample-graphs", "--dataset", ds, "--depth", "2", "--k", "2", "--cache", cache, "--timing"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(pairwise_matrix_calls().load(), before);
  EXPECT_NE(r.err.find("cache hit"), std::string::npos);
  EXPECT_EQ(nlohmann::json::parse(r.out), first);
}

TEST_F(Cli, StaleCacheIsRejected) {
  const auto ds = dataset("kkpp.jsonl", {k3(), k3(), p2(), p2()});
  const auto cache = path("c.bin");
  ASSERT_EQ(run({"dist", "--dataset", ds, "--depth", "2", "--cache", cache}).code, 0);
  EXPECT_EQ(run({"subsample-graphs", "--dataset", ds, "--depth", "3", "--k", "2", "--cache", cache}).code, 3);
  EXPECT_EQ(run({"dist", "--dataset", ds, "--depth", "2", "--norm", "l1", "--cache", cache}).code, 3);
  const auto other = dataset("other.jsonl", {k3(), p2(), p2(), p2()});
  EXPECT_EQ(run({"dist", "--dataset", other, "--depth", "2", "--cache", cache}).code, 3);
  EXPECT_EQ(run({"dist", "--dataset", ds, "--depth", "2", "--cache", cache}).code, 0);
}

TEST_F(Cli, ExitCodes) {
  const auto ds = dataset("pk.jsonl", {k3(), p2()});
  auto r = run({"dist", "--dataset", ds, "--weights", "pascal", "--out", path("x.bin")});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("pascal"), std::string::npos);
  EXPECT_EQ(run({"dist", "--dataset", path("missing.jsonl"), "--out", path("x.bin")}).code, 2);
  EXPECT_EQ(run({"treenorm", "--dataset", ds, "--bogus"}).code, 1);
  EXPECT_EQ(run({"treenorm"}).code, 1);
  EXPECT_EQ(run({}).code, 1);
  EXPECT_EQ(run({"treenorm", "--dataset", ds, "--depth", "3", "--weights", "table:1"}).code, 1);
  EXPECT_EQ(run({"subsample-graphs", "--dataset", ds, "--k", "3"}).code, 1);
  EXPECT_EQ(run({"--help"}).code, 0);
  std::ofstream(path("bad.jsonl")) << "{not json}\n";
  EXPECT_EQ(run({"treenorm", "--dataset", path("bad.jsonl")}).code, 2);
}

TEST_F(Cli, RandomSelectionIsReproducible) {
  std::mt19937_64 rng(71);
  std::vector<Graph> gs;
  for (int i = 0; i < 12; ++i) gs.push_back(tmdtest::random_graph(rng, 1, 5, 0.5, 1));
  const auto ds = dataset("r.jsonl", gs);
  const auto a = run({"subsample-graphs", "--dataset", ds, "--k", "4", "--method", "random", "--seed", "5"});
  const auto b = run({"subsample-graphs", "--dataset", ds, "--k", "4", "--method", "random", "--seed", "5"});
  ASSERT_EQ(a.code, 0);
  EXPECT_EQ(a.out, b.out);
  for (const char* method : {"wl", "feature"}) {
    const auto r = run({"subsample-graphs", "--dataset", ds, "--k", "4", "--method", method});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(nlohmann::json::parse(r.out).at("method"), method);
  }
}

TEST_F(Cli, SubsampleNodes) {
  auto r = run({"subsample-nodes", "--dataset", dataset("k.jsonl", {k3f()}), "--depth", "2", "--frac", "0.67"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(nlohmann::json::parse(r.out).at("kept"), nlohmann::json({0, 1}));
  EXPECT_NE(r.err.find("mean_epsilon=7"), std::string::npos);
  r = run({"subsample-nodes", "--dataset", dataset("pk.jsonl", {k3(), p2()}), "--frac", "1.0"});
  ASSERT_EQ(r.code, 0);
  std::istringstream lines(r.out);
  std::string line;
  while (std::getline(lines, line)) EXPECT_EQ(nlohmann::json::parse(line).at("tmd"), 0.0);
  std::ofstream(path("empty.jsonl")).close();
  r = run({"subsample-nodes", "--dataset", path("empty.jsonl"), "--frac", "0.5"});
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(r.out, "");
  EXPECT_EQ(run({"subsample-nodes", "--dataset", path("empty.jsonl"), "--frac", "0"}).code, 1);
}

TEST_F(Cli, VerifyModes) {
  auto r = run({"verify", "wl-counterexample"});
  ASSERT_EQ(r.code, 0) << r.err;
  auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j.at("wl_distance"), 0.0);
  EXPECT_GT(j.at("gin_gap").get<double>(), 1e-6);

  r = run({"verify", "erm-graphs", "--synthetic", "10", "3", "--k", "10", "--hypotheses", "5"});
  ASSERT_EQ(r.code, 0) << r.err;
  j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j.at("epsilon"), 0.0);
  EXPECT_TRUE(j.at("satisfied").get<bool>());

  r = run({"verify", "stability", "--synthetic", "20", "4", "--pairs", "20", "--hypotheses", "3"});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(nlohmann::json::parse(r.out).contains("max_ratio"));

  r = run({"verify", "erm-nodes", "--synthetic", "10", "5", "--hypotheses", "4", "--frac", "0.5"});
  EXPECT_TRUE(r.code == 0 || r.code == 4) << r.err;
  EXPECT_EQ(nlohmann::json::parse(r.out).at("mode"), "erm-nodes");
}

TEST_F(Cli, VerifySweepFailureExitsFour) {
  const auto r = run({"verify", "stability", "--synthetic", "20", "4", "--pairs", "40", "--hypotheses", "3",
                      "--eta", "50", "--sweep"});
  EXPECT_EQ(r.code, 4) << r.out;
  EXPECT_NE(r.err.find("preset-conditional"), std::string::npos);
  EXPECT_EQ(nlohmann::json::parse(r.out).at("sweep").size(), 4u);
}
