// SPDX-License-Identifier: Apache-2.0
#include "stgsnas/checkpoint.hpp"

#include <bit>
#include <fstream>
#include <map>

#include "json_convert.hpp"
#include "stgsnas/arch_io.hpp"
#include "stgsnas/dataset.hpp"
#include "stgsnas/errors.hpp"

namespace stgsnas {

using detail::ojson;

namespace {

constexpr const char* kFormat = "stgsnas-checkpoint";
constexpr int kVersion = 1;

}  // namespace

void save_checkpoint(const SuperNet& net, std::uint64_t seed, const std::filesystem::path& dir) {
  std::vector<std::uint8_t> blob;
  ojson tensors = ojson::array();
  std::size_t offset = 0;
  for (const Param* p : net.parameters()) {
    tensors.push_back(ojson{{"id", p->id},
                            {"group", std::string(to_string(p->group))},
                            {"shape", p->value.shape()},
                            {"offset", offset}});
    for (double v : p->value.data()) {
      const auto bits = std::bit_cast<std::uint64_t>(v);
      for (int b = 0; b < 8; ++b) blob.push_back(static_cast<std::uint8_t>(bits >> (8 * b)));
    }
    offset += p->value.numel();
  }
  ojson doc{{"format", kFormat},
            {"version", kVersion},
            {"config", detail::config_to_json(net.config())},
            {"seed", seed},
            {"params_file", "params.bin"},
            {"params_crc32", crc32(blob)},
            {"num_scalars", offset},
            {"tensors", tensors}};
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "params.bin", std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char*>(blob.data()), static_cast<std::streamsize>(blob.size()));
    if (!out) throw DataError("failed writing " + (dir / "params.bin").string());
  }
  write_text_file(dir / "checkpoint.json", doc.dump(2) + "\n");
}

SuperNet load_checkpoint(const std::filesystem::path& dir) {
  const ojson doc = detail::parse_json(read_text_file(dir / "checkpoint.json"));
  try {
    if (doc.at("format").get<std::string>() != kFormat) throw DataError("not a checkpoint manifest");
    if (doc.at("version").get<int>() != kVersion) throw DataError("unsupported checkpoint version");
    SuperNet net(detail::config_from_json(doc.at("config")), doc.at("seed").get<std::uint64_t>());

    std::ifstream in(dir / doc.at("params_file").get<std::string>(), std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint parameter blob");
    const std::vector<std::uint8_t> blob((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (crc32(blob) != doc.at("params_crc32").get<std::uint32_t>()) throw ChecksumError("params.bin crc32 mismatch");
    const auto scalars = doc.at("num_scalars").get<std::size_t>();
    if (blob.size() != scalars * 8) throw DataError("params.bin size disagrees with the manifest");

    std::map<std::string, Param*> by_id;
    for (Param* p : net.parameters()) by_id[p->id] = p;
    std::size_t restored = 0;
    for (const auto& t : doc.at("tensors")) {
      const auto id = t.at("id").get<std::string>();
      auto it = by_id.find(id);
      if (it == by_id.end()) throw DataError("checkpoint tensor '" + id + "' has no counterpart");
      Param& p = *it->second;
      if (t.at("shape").get<Shape>() != p.value.shape()) throw DataError("checkpoint tensor '" + id + "' has the wrong shape");
      if (param_group_from_string(t.at("group").get<std::string>()) != p.group)
        throw DataError("checkpoint tensor '" + id + "' has the wrong group");
      const auto offset = t.at("offset").get<std::size_t>();
      if (offset + p.value.numel() > scalars) throw DataError("checkpoint tensor '" + id + "' overruns the blob");
      for (std::size_t i = 0; i < p.value.numel(); ++i) {
        std::uint64_t bits = 0;
        for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(blob[(offset + i) * 8 + static_cast<std::size_t>(b)]) << (8 * b);
        p.value[i] = std::bit_cast<double>(bits);
      }
      ++restored;
    }
    if (restored != by_id.size()) throw DataError("checkpoint is missing tensors");
    return net;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed checkpoint manifest: ") + e.what());
  }
}

}  // namespace stgsnas
