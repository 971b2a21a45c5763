// SPDX-License-Identifier: Apache-2.0
#include "manifest.hpp"

#include <algorithm>
#include <ctime>
#include <fstream>
#include <iterator>
#include <utility>

#include "stgsnas/arch_io.hpp"
#include "stgsnas/dataset.hpp"
#include "stgsnas/errors.hpp"

#ifndef STGSNAS_VERSION
#define STGSNAS_VERSION "unknown"
#endif

namespace stgsnas::cli {
namespace fs = std::filesystem;

namespace {

std::string utc_now() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

json records_to_json(const std::vector<FileRecord>& records) {
  json arr = json::array();
  for (const auto& r : records) arr.push_back({{"path", r.path}, {"crc32", r.crc32}, {"bytes", r.bytes}});
  return arr;
}

}  // namespace

FileRecord record_file(const fs::path& path, std::string recorded_name) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return {std::move(recorded_name), crc32(bytes), bytes.size()};
}

RunManifest::RunManifest(fs::path out_dir, std::string command, std::vector<std::string> argv, json config,
                         std::uint64_t seed)
    : out_dir_(std::move(out_dir)),
      command_(std::move(command)),
      argv_(std::move(argv)),
      config_(std::move(config)),
      seed_(seed) {}

void RunManifest::add_input(const fs::path& path) {
  if (fs::is_directory(path)) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(path))
      if (e.is_regular_file()) files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) inputs_.push_back(record_file(f, f.string()));
    return;
  }
  inputs_.push_back(record_file(path, path.string()));
}

void RunManifest::write_output(const std::string& rel, std::string_view text) {
  const fs::path p = out_dir_ / rel;
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  write_text_file(p, text);
  add_output(rel);
}

void RunManifest::add_output(const std::string& rel) { outputs_.push_back(record_file(out_dir_ / rel, rel)); }

void RunManifest::begin() {
  fs::create_directories(out_dir_);
  started_at_ = utc_now();
  start_ = std::chrono::steady_clock::now();
  write(to_json("running", {}));
}

void RunManifest::finish(bool ok, const std::string& error) {
  json j = to_json(ok ? "ok" : "failed", error);
  j["finished_at"] = utc_now();
  j["wall_clock_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  write(j);
}

json RunManifest::to_json(std::string_view status, const std::string& error) const {
  json j;
  j["format"] = "stgsnas-run-manifest";
  j["version"] = 1;
  j["code_version"] = STGSNAS_VERSION;
  j["command"] = command_;
  j["status"] = status;
  j["argv"] = argv_;
  j["config"] = config_;
  j["seed"] = seed_;
  j["inputs"] = records_to_json(inputs_);
  j["outputs"] = records_to_json(outputs_);
  j["result"] = result_;
  j["started_at"] = started_at_;
  if (!error.empty()) j["error"] = error;
  return j;
}

void RunManifest::write(const json& j) const { write_text_file(out_dir_ / kManifestName, j.dump(2) + "\n"); }

}  // namespace stgsnas::cli
