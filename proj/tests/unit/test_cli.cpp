// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "nlohmann/json.hpp"
#include "stgsnas/arch_io.hpp"
#include "stgsnas/derived_arch.hpp"

namespace stgsnas::cli {
namespace {

namespace fs = std::filesystem;

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome invoke(std::vector<std::string> args) {
  std::ostringstream out;
  std::ostringstream err;
  const int code = run(args, out, err);
  return {code, out.str(), err.str()};
}

std::size_t line_count(const fs::path& p) {
  const std::string text = read_text_file(p);
  return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
}

nlohmann::json manifest(const fs::path& dir) { return nlohmann::json::parse(read_text_file(dir / "manifest.json")); }

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    root_ = fs::temp_directory_path() /
            ("stgsnas_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(root_);
    fs::create_directories(root_);
  }
  void TearDown() override { fs::remove_all(root_); }

  std::string dir(const std::string& name) const { return (root_ / name).string(); }

  static std::vector<std::string> small_data() {
    return {"--synthetic", "xor", "--n-train", "32", "--n-val", "32", "--n-test", "16", "--width", "4"};
  }

  static std::vector<std::string> with(std::vector<std::string> head, const std::vector<std::string>& tail) {
    head.insert(head.end(), tail.begin(), tail.end());
    return head;
  }

  fs::path root_;
};

TEST_F(CliTest, UsageErrors) {
  EXPECT_EQ(invoke({}).code, kExitUsage);
  EXPECT_EQ(invoke({"frobnicate"}).code, kExitUsage);
  EXPECT_EQ(invoke({"search", "--lambda", "-1"}).code, kExitUsage);
  EXPECT_EQ(invoke({"--help"}).code, kExitOk);

  const Outcome no_data = invoke({"search", "--out-dir", dir("nodata")});
  EXPECT_EQ(no_data.code, kExitUsage);
  EXPECT_NE(no_data.err.find("--synthetic"), std::string::npos);
  EXPECT_EQ(manifest(dir("nodata"))["status"], "failed");

  EXPECT_EQ(invoke({"search", "--dataset", dir("absent"), "--out-dir", dir("x")}).code, kExitUsage);
  EXPECT_EQ(invoke({"eval", "--out-dir", dir("y")}).code, kExitUsage);
  EXPECT_EQ(invoke({"replay", "--manifest", dir("absent.json"), "--out-dir", dir("z")}).code, kExitUsage);
}

TEST_F(CliTest, OversizedOracleSpaceIsAUsageError) {
  const Outcome r = invoke(with({"oracle", "--cells", "2", "--out-dir", dir("big")}, small_data()));
  EXPECT_EQ(r.code, kExitUsage);
  EXPECT_NE(r.err.find("enumeration limit"), std::string::npos);
}

TEST_F(CliTest, GenerateThenSearchFromFiles) {
  ASSERT_EQ(invoke(with({"generate", "--out-dir", dir("data"), "--seed", "3"}, small_data())).code, kExitOk);
  for (const char* f : {"train.bmnf", "val.bmnf", "test.bmnf", "labels.csv", "manifest.json"})
    EXPECT_TRUE(fs::exists(root_ / "data" / f)) << f;
  EXPECT_EQ(line_count(root_ / "data" / "labels.csv"), 1u + 80u);

  const Outcome s = invoke({"search", "--dataset", dir("data"), "--epochs", "3", "--samples", "2", "--out-dir",
                            dir("search")});
  ASSERT_EQ(s.code, kExitOk) << s.err;
  for (const char* f : {"arch.json", "arch.dot", "final_arch.json", "final_arch.dot", "entropy.csv",
                        "checkpoint/checkpoint.json", "checkpoint/params.bin"})
    EXPECT_TRUE(fs::exists(root_ / "search" / f)) << f;
  EXPECT_EQ(line_count(root_ / "search" / "entropy.csv"), 4u);
  const auto m = manifest(dir("search"));
  EXPECT_EQ(m["status"], "ok");
  EXPECT_EQ(m["command"], "search");
  EXPECT_EQ(m["inputs"].size(), 3u);
  EXPECT_EQ(m["outputs"].size(), 7u);
  EXPECT_TRUE(m["config"].contains("lambda"));
  EXPECT_EQ(m["config"]["epochs"], "3");

  const Outcome d = invoke({"derive", "--checkpoint", dir("search/checkpoint"), "--out-dir", dir("derive")});
  ASSERT_EQ(d.code, kExitOk) << d.err;
  EXPECT_EQ(read_text_file(root_ / "derive" / "arch.json"), read_text_file(root_ / "search" / "final_arch.json"));

  const Outcome e = invoke({"eval", "--arch", dir("search/arch.json"), "--dataset", dir("data"), "--retrain-epochs",
                            "2", "--out-dir", dir("eval")});
  ASSERT_EQ(e.code, kExitOk) << e.err;
  EXPECT_EQ(e.out.rfind("test accuracy=", 0), 0u);
  const auto ev = nlohmann::json::parse(read_text_file(root_ / "eval" / "eval.json"));
  EXPECT_TRUE(ev.contains("test"));
  EXPECT_EQ(ev["parameter_count"], count_parameters(load_arch(root_ / "search" / "arch.json")));
}

TEST_F(CliTest, CorruptDatasetIsADataError) {
  ASSERT_EQ(invoke(with({"generate", "--out-dir", dir("data")}, small_data())).code, kExitOk);
  {
    std::fstream f(root_ / "data" / "val.bmnf", std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(40);
    f.put('\x55');
  }
  const Outcome r = invoke({"search", "--dataset", dir("data"), "--epochs", "1", "--out-dir", dir("s")});
  EXPECT_EQ(r.code, kExitData);
  EXPECT_NE(r.err.find("crc32"), std::string::npos);
}

TEST_F(CliTest, DivergentTrainingIsANumericalError) {
  const Outcome r = invoke(with({"search", "--epochs", "3", "--lr-max", "1e300", "--out-dir", dir("nan")}, small_data()));
  EXPECT_EQ(r.code, kExitNumerical) << r.err;
  EXPECT_EQ(manifest(dir("nan"))["status"], "failed");
}

TEST_F(CliTest, ReplayReproducesOutputs) {
  ASSERT_EQ(invoke(with({"search", "--epochs", "2", "--samples", "2", "--seed", "9", "--out-dir", dir("run")},
                        small_data()))
                .code,
            kExitOk);
  const Outcome r = invoke({"replay", "--manifest", dir("run/manifest.json"), "--out-dir", dir("again")});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_NE(r.out.find("replay: 7/7 outputs identical\n"), std::string::npos);
  EXPECT_EQ(read_text_file(root_ / "run" / "entropy.csv"), read_text_file(root_ / "again" / "entropy.csv"));
  EXPECT_EQ(invoke({"replay", "--manifest", dir("run/manifest.json"), "--out-dir", dir("run")}).code, kExitUsage);

  auto m = manifest(dir("run"));
  m["outputs"][0]["crc32"] = m["outputs"][0]["crc32"].get<std::uint32_t>() ^ 1u;
  write_text_file(root_ / "run" / "manifest.json", m.dump(2));
  const Outcome bad = invoke({"replay", "--manifest", dir("run/manifest.json"), "--out-dir", dir("third")});
  EXPECT_EQ(bad.code, kExitFailure);
  EXPECT_NE(bad.err.find("replay mismatch"), std::string::npos);
}

TEST_F(CliTest, SingleCellAblation) {
  const Outcome r = invoke(with({"ablate", "--lambda-grid", "10", "--samples-grid", "2", "--epochs", "2",
                                 "--retrain-epochs", "2", "--out-dir", dir("abl")},
                                small_data()));
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const std::string csv = read_text_file(root_ / "abl" / "ablation.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "lambda,samples,auc,accuracy,params,status,arch");
  EXPECT_EQ(line_count(root_ / "abl" / "ablation.csv"), 2u);
  EXPECT_EQ(invoke(with({"ablate", "--lambda-grid", "10,x", "--out-dir", dir("abl2")}, small_data())).code,
            kExitUsage);
}

TEST_F(CliTest, OracleCoversTheSpace) {
  // 2 edges kept or dropped, 2 x 2 slot choices, 5 ops
  const Outcome r = invoke(with({"oracle", "--steps", "1", "--retrain-epochs", "1", "--jobs", "2", "--out-dir",
                                 dir("orc")},
                                small_data()));
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_EQ(line_count(root_ / "orc" / "oracle.csv"), 1u + 80u);
  EXPECT_EQ(manifest(dir("orc"))["result"]["space_size"], 80);
}

TEST_F(CliTest, VersionIsRecorded) {
  ASSERT_EQ(invoke(with({"generate", "--out-dir", dir("v")}, small_data())).code, kExitOk);
  const auto m = manifest(dir("v"));
  EXPECT_EQ(m["format"], "stgsnas-run-manifest");
  EXPECT_FALSE(m["code_version"].get<std::string>().empty());
  EXPECT_EQ(m["config"]["data-seed"], std::to_string(m["seed"].get<std::uint64_t>()));
}

}  // namespace
}  // namespace stgsnas::cli
