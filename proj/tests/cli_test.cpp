#include "commands.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <nlohmann/json.hpp>
#include <sstream>

#include "fisum/io.hpp"

namespace fisum::cli {
namespace {

namespace fs = std::filesystem;

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "fisum");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("fisum_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::create_directories(dir_);
    write_file(dir_ / "z.csv", "1,2\n3,4\n");
    write_file(dir_ / "ne.json", R"({"order":2,"nodes":[{"kind":"identity","channel":0},
        {"kind":"identity","channel":0}],"edges":[{"parent":0,"child":1,"dir":"NE"}]})");
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string p(const std::string& name) const { return (dir_ / name).string(); }

  fs::path dir_;
};

TEST_F(CliTest, FeaturesSum) {
  auto r = run_cli({"features", p("z.csv"), "--trees", p("ne.json"), "--reduce", "sum"});
  EXPECT_EQ(r.code, kOk) << r.err;
  EXPECT_EQ(nlohmann::json::parse(r.out), nlohmann::json::parse(R"({"cts":[4.0]})"));
  r = run_cli({"features", p("z.csv"), "--trees", p("ne.json"), "--reduce", "sum", "--semiring", "max-plus"});
  EXPECT_EQ(r.code, kOk) << r.err;
  EXPECT_EQ(nlohmann::json::parse(r.out), nlohmann::json::parse(R"({"cts":[5.0]})"));
}

TEST_F(CliTest, FeaturesFieldAsNpy) {
  const auto r = run_cli({"features", p("z.csv"), "--trees", p("ne.json"), "--out", p("f.npy")});
  ASSERT_EQ(r.code, kOk) << r.err;
  const NpyArray a = decode_npy(read_file(p("f.npy")));
  EXPECT_EQ(a.shape, (std::vector<std::size_t>{2, 2}));
  EXPECT_EQ(a.data, (std::vector<double>{4, 0, 0, 0}));
}

TEST_F(CliTest, FeaturesSeveralGeneratedTrees) {
  const auto r = run_cli({"features", p("z.csv"), "--count", "3", "--nodes", "2", "--out", p("f.json")});
  ASSERT_EQ(r.code, kOk) << r.err;
  for (int t = 0; t < 3; ++t) EXPECT_TRUE(fs::exists(p("f." + std::to_string(t) + ".json")));
}

TEST_F(CliTest, ValidationFailuresExitOne) {
  EXPECT_EQ(run_cli({"features", p("missing.csv"), "--trees", p("ne.json")}).code, kValidation);
  write_file(dir_ / "bad.json", R"({"order":2,"nodes":[{"kind":"identity","channel":3}],"edges":[]})");
  EXPECT_EQ(run_cli({"features", p("z.csv"), "--trees", p("bad.json")}).code, kValidation);
  EXPECT_EQ(run_cli({"gen-tree", "--family", "ladder"}).code, kValidation);
  EXPECT_EQ(run_cli({"features", p("z.csv"), "--semiring", "min-plus"}).code, kValidation);
  EXPECT_EQ(run_cli({"bogus"}).code, kValidation);
}

TEST_F(CliTest, VerifyPasses) {
  auto r = run_cli({"verify", "--trials", "30"});
  EXPECT_EQ(r.code, kOk) << r.err;
  EXPECT_NE(r.out.find("30/30 ok"), std::string::npos) << r.out;
  r = run_cli({"verify", "--trials", "10", "--order", "3", "--max-extent", "3", "--semiring", "max-plus"});
  EXPECT_EQ(r.code, kOk) << r.err;
  EXPECT_NE(r.out.find("10/10 ok"), std::string::npos) << r.out;
}

TEST_F(CliTest, VerifyReportsCounterexample) {
  const auto r = run_cli({"verify", "--trials", "5", "--corrupt-ctps"});
  EXPECT_EQ(r.code, kCounterexample);
  EXPECT_NE((r.out + r.err).find("\"nodes\""), std::string::npos);
}

TEST_F(CliTest, GenTree) {
  auto r = run_cli({"gen-tree", "--family", "linear-ne", "--nodes", "3", "--order", "2"});
  ASSERT_EQ(r.code, kOk) << r.err;
  const auto j = nlohmann::json::parse(r.out);
  ASSERT_EQ(j.at("edges").size(), 2u);
  for (const auto& e : j.at("edges")) EXPECT_EQ(e.at("dir"), "++");

  r = run_cli({"gen-tree", "--nodes", "1"});
  EXPECT_TRUE(nlohmann::json::parse(r.out).at("edges").empty());

  ASSERT_EQ(run_cli({"gen-tree", "--nodes", "5", "--seed", "3", "--out", p("a.json")}).code, kOk);
  ASSERT_EQ(run_cli({"gen-tree", "--nodes", "5", "--seed", "3", "--out", p("b.json")}).code, kOk);
  EXPECT_EQ(read_file(p("a.json")), read_file(p("b.json")));
}

TEST_F(CliTest, BenchEmitsCsv) {
  const auto r = run_cli({"bench", "--sizes", "16,32", "--nodes", "2", "--repeats", "1"});
  ASSERT_EQ(r.code, kOk) << r.err;
  std::istringstream in(r.out);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "size,median_seconds,ratio,peak_bytes");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 2);
}

TEST_F(CliTest, DemoTrainZeroEpochs) {
  const auto r = run_cli({"demo-train", "--epochs", "0"});
  ASSERT_EQ(r.code, kOk) << r.err;
  std::istringstream in(r.out);
  int count = 0;
  for (std::string line; std::getline(in, line);) ++count;
  EXPECT_EQ(count, 1);
}

TEST_F(CliTest, DemoTrainIsDeterministic) {
  const std::vector<std::string> args{"demo-train", "--epochs", "2", "--samples", "40", "--trees", "4"};
  const auto a = run_cli(args), b = run_cli(args);
  ASSERT_EQ(a.code, kOk) << a.err;
  EXPECT_EQ(a.out, b.out);
  EXPECT_NE(a.out.find("accuracy"), std::string::npos);
}

}  // namespace
}  // namespace fisum::cli
