// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace stgsnas::cli {

using json = nlohmann::ordered_json;

struct FileRecord {
  std::string path;
  std::uint32_t crc32 = 0;
  std::uintmax_t bytes = 0;
};

FileRecord record_file(const std::filesystem::path& path, std::string recorded_name);

/// manifest.json of one run. Written with status "running" by begin() and
/// rewritten by finish().
class RunManifest {
 public:
  RunManifest(std::filesystem::path out_dir, std::string command, std::vector<std::string> argv,
              json config, std::uint64_t seed);

  const std::filesystem::path& out_dir() const noexcept { return out_dir_; }

  void add_input(const std::filesystem::path& path);
  /// Writes `text` to out_dir / rel and records it.
  void write_output(const std::string& rel, std::string_view text);
  /// Records a file that something else already wrote under out_dir.
  void add_output(const std::string& rel);
  void set_result(json result) { result_ = std::move(result); }

  void begin();
  void finish(bool ok, const std::string& error = {});

 private:
  json to_json(std::string_view status, const std::string& error) const;
  void write(const json& j) const;

  std::filesystem::path out_dir_;
  std::string command_;
  std::vector<std::string> argv_;
  json config_;
  std::uint64_t seed_;
  std::vector<FileRecord> inputs_;
  std::vector<FileRecord> outputs_;
  json result_ = json::object();
  std::string started_at_;
  std::chrono::steady_clock::time_point start_{};
};

inline constexpr const char* kManifestName = "manifest.json";

}  // namespace stgsnas::cli
