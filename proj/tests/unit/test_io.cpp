// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "stgsnas/arch_io.hpp"
#include "stgsnas/checkpoint.hpp"
#include "stgsnas/errors.hpp"
#include "stgsnas/oracle.hpp"

namespace stgsnas {
namespace {

namespace fs = std::filesystem;

class TempDir {
 public:
  explicit TempDir(const std::string& name) : path_(fs::temp_directory_path() / name) {
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

DerivedArch sample_arch() {
  DerivedArch a;
  a.config.num_image_features = 2;
  a.config.num_speech_features = 1;
  a.config.num_cells = 2;
  a.config.steps_per_cell = 2;
  a.config.feature_width = 5;
  a.kept_edges = {{0, 3}, {2, 3}, {2, 4}, {3, 4}};
  a.cells = {{{0, 2}, {OpKind::ConcatFC, OpKind::Attention}}, {{3, 1}, {OpKind::Zero, OpKind::LinearGLU}}};
  a.validate();
  return a;
}

TEST(ArchJson, RoundTripIsByteStable) {
  const DerivedArch a = sample_arch();
  const std::string text = arch_to_json(a);
  const DerivedArch back = arch_from_json(text);
  EXPECT_EQ(back, a);
  EXPECT_EQ(arch_to_json(back), text);
}

TEST(ArchJson, EveryEnumeratedArchRoundTrips) {
  SpaceConfig c;
  c.num_image_features = 1;
  c.num_speech_features = 1;
  c.num_cells = 1;
  c.steps_per_cell = 2;
  c.feature_width = 3;
  for (const auto& a : enumerate_space(c)) ASSERT_EQ(arch_from_json(arch_to_json(a)), a) << a.fingerprint();
}

TEST(ArchJson, DocumentFields) {
  const DerivedArch a = sample_arch();
  const std::string text = arch_to_json(a);
  EXPECT_NE(text.find("\"format\": \"stgsnas-derived-arch\""), std::string::npos);
  EXPECT_NE(text.find("\"modality_dropped\""), std::string::npos);
  EXPECT_NE(text.find("\"parameter_count\": " + std::to_string(count_parameters(a))), std::string::npos);
}

TEST(ArchJson, RejectsMalformedDocuments) {
  EXPECT_THROW(arch_from_json("{not json"), ParseError);
  EXPECT_THROW(arch_from_json("{\"format\": \"other\", \"version\": 1}"), DataError);
  std::string text = arch_to_json(sample_arch());
  const auto pos = text.find("ConcatFC");
  ASSERT_NE(pos, std::string::npos);
  text.replace(pos, 8, "Conv3x3X");
  EXPECT_THROW(arch_from_json(text), DataError);
}

TEST(ArchJson, SpaceConfigRoundTrip) {
  SpaceConfig c = sample_arch().config;
  c.op_pool = {OpKind::Sum, OpKind::Zero};
  EXPECT_EQ(space_config_from_json(space_config_to_json(c)), c);
}

TEST(ArchDot, ListsNodesAndOps) {
  const std::string dot = arch_to_dot(sample_arch());
  EXPECT_EQ(dot.rfind("digraph", 0), 0u);
  for (const char* s : {"I1", "I2", "S1", "Cell1", "Cell2", "ConcatFC", "LinearGLU", "head"})
    EXPECT_NE(dot.find(s), std::string::npos) << s;
  EXPECT_EQ(dot, arch_to_dot(sample_arch()));
}

TEST(ArchFile, SaveAndLoad) {
  TempDir dir("stgsnas_test_arch");
  save_arch(sample_arch(), dir.path() / "arch.json");
  EXPECT_EQ(load_arch(dir.path() / "arch.json"), sample_arch());
  EXPECT_THROW(load_arch(dir.path() / "missing.json"), DataError);
}

TEST(Checkpoint, RoundTripRestoresEveryTensor) {
  TempDir dir("stgsnas_test_ckpt");
  SuperNet net(sample_arch().config, 42);
  net.arch().saturate_to(sample_arch(), 3.0);
  net.head_bias().value[1] = 0.25;
  save_checkpoint(net, 42, dir.path());
  const SuperNet back = load_checkpoint(dir.path());
  EXPECT_EQ(back.config(), net.config());
  const auto a = static_cast<const SuperNet&>(net).parameters();
  const auto b = back.parameters();
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i]->id, b[i]->id);
    EXPECT_EQ(a[i]->value, b[i]->value) << a[i]->id;
  }
  EXPECT_EQ(back.derive(), sample_arch());
}

TEST(Checkpoint, CorruptBlobIsDetected) {
  TempDir dir("stgsnas_test_ckpt_bad");
  const SuperNet net(sample_arch().config, 1);
  save_checkpoint(net, 1, dir.path());
  {
    std::fstream f(dir.path() / "params.bin", std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(16);
    f.put('\x7f');
  }
  EXPECT_THROW(load_checkpoint(dir.path()), ChecksumError);
  fs::remove(dir.path() / "params.bin");
  EXPECT_THROW(load_checkpoint(dir.path()), DataError);
}

}  // namespace
}  // namespace stgsnas
