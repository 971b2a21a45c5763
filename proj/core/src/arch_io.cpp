// SPDX-License-Identifier: Apache-2.0
#include "stgsnas/arch_io.hpp"

#include <fstream>
#include <sstream>

#include "json_convert.hpp"
#include "stgsnas/errors.hpp"

namespace stgsnas {
namespace detail {

ojson config_to_json(const SpaceConfig& config) {
  ojson pool = ojson::array();
  for (auto op : config.op_pool) pool.push_back(std::string(to_string(op)));
  return ojson{{"num_image_features", config.num_image_features},
               {"num_speech_features", config.num_speech_features},
               {"num_cells", config.num_cells},
               {"steps_per_cell", config.steps_per_cell},
               {"feature_width", config.feature_width},
               {"op_pool", pool}};
}

SpaceConfig config_from_json(const ojson& j) {
  SpaceConfig c;
  try {
    c.num_image_features = j.at("num_image_features").get<int>();
    c.num_speech_features = j.at("num_speech_features").get<int>();
    c.num_cells = j.at("num_cells").get<int>();
    c.steps_per_cell = j.at("steps_per_cell").get<int>();
    c.feature_width = j.at("feature_width").get<int>();
    c.op_pool.clear();
    for (const auto& name : j.at("op_pool")) c.op_pool.push_back(op_kind_from_string(name.get<std::string>()));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed space config: ") + e.what());
  }
  try {
    c.validate();
  } catch (const ContractError& e) {
    throw DataError(std::string("invalid space config: ") + e.what());
  }
  return c;
}

ojson parse_json(std::string_view text) {
  try {
    return ojson::parse(text.begin(), text.end());
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(e.byte, e.what());
  }
}

}  // namespace detail

using detail::ojson;

namespace {

constexpr const char* kArchFormat = "stgsnas-derived-arch";
constexpr int kArchVersion = 1;

}  // namespace

std::string arch_to_json(const DerivedArch& arch) {
  arch.validate();
  ojson edges = ojson::array();
  for (const auto& e : arch.kept_edges) edges.push_back(ojson::array({e.from, e.to}));
  ojson cells = ojson::array();
  for (const auto& cell : arch.cells) {
    ojson ops = ojson::array();
    for (auto op : cell.ops) ops.push_back(std::string(to_string(op)));
    cells.push_back(ojson{{"inputs", ojson::array({cell.inputs[0], cell.inputs[1]})}, {"ops", ops}});
  }
  ojson doc{{"format", kArchFormat},
            {"version", kArchVersion},
            {"config", detail::config_to_json(arch.config)},
            {"first_level", ojson{{"kept_edges", edges}}},
            {"cells", cells},
            {"modality_dropped", arch.modality_dropped()},
            {"parameter_count", count_parameters(arch)}};
  return doc.dump(2) + "\n";
}

DerivedArch arch_from_json(std::string_view text) {
  const ojson doc = detail::parse_json(text);
  DerivedArch arch;
  try {
    if (doc.at("format").get<std::string>() != kArchFormat) throw DataError("not a derived-arch document");
    if (doc.at("version").get<int>() != kArchVersion) throw DataError("unsupported derived-arch version");
    arch.config = detail::config_from_json(doc.at("config"));
    for (const auto& e : doc.at("first_level").at("kept_edges")) {
      arch.kept_edges.push_back({e.at(0).get<int>(), e.at(1).get<int>()});
    }
    for (const auto& c : doc.at("cells")) {
      CellChoice cell;
      const auto& inputs = c.at("inputs");
      if (inputs.size() != 2) throw DataError("each cell needs exactly two inputs");
      cell.inputs = {inputs.at(0).get<int>(), inputs.at(1).get<int>()};
      for (const auto& op : c.at("ops")) cell.ops.push_back(op_kind_from_string(op.get<std::string>()));
      arch.cells.push_back(std::move(cell));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed derived-arch document: ") + e.what());
  } catch (const ContractError& e) {
    throw DataError(std::string("malformed derived-arch document: ") + e.what());
  }
  try {
    arch.validate();
  } catch (const ContractError& e) {
    throw DataError(std::string("invalid derived arch: ") + e.what());
  }
  if (doc.contains("parameter_count") &&
      doc["parameter_count"].get<std::size_t>() != count_parameters(arch)) {
    throw DataError("parameter_count field disagrees with the architecture");
  }
  return arch;
}

std::string space_config_to_json(const SpaceConfig& config) { return detail::config_to_json(config).dump(2); }

SpaceConfig space_config_from_json(std::string_view text) {
  return detail::config_from_json(detail::parse_json(text));
}

std::string arch_to_dot(const DerivedArch& arch) {
  arch.validate();
  const auto& cfg = arch.config;
  std::ostringstream os;
  os << "digraph derived_arch {\n";
  os << "  rankdir=LR;\n";
  os << "  node [shape=box, fontname=\"Helvetica\"];\n";
  for (int u = 0; u < cfg.num_backbone_nodes(); ++u) {
    const char* color = cfg.node_kind(u) == NodeKind::Image ? "lightblue" : "lightyellow";
    os << "  \"" << cfg.node_name(u) << "\" [shape=ellipse, style=filled, fillcolor=" << color << "];\n";
  }
  for (int c = 0; c < cfg.num_cells; ++c) {
    const std::string name = cfg.node_name(cfg.cell_node(c));
    const auto& cell = arch.cells[static_cast<std::size_t>(c)];
    os << "  subgraph \"cluster_" << name << "\" {\n";
    os << "    label=\"" << name << "\";\n";
    os << "    \"" << name << "/in0\" [label=\"in0\"];\n";
    os << "    \"" << name << "/in1\" [label=\"in1\"];\n";
    for (int j = 0; j < cfg.steps_per_cell; ++j) {
      os << "    \"" << name << "/step" << j << "\" [label=\"step" << j << "\\n"
         << to_string(cell.ops[static_cast<std::size_t>(j)]) << "\"];\n";
    }
    os << "    \"" << name << "/out\" [label=\"out (concat)\", shape=oval];\n";
    os << "  }\n";
    for (int s = 0; s < 2; ++s) {
      const int src = cell.inputs[static_cast<std::size_t>(s)];
      const bool kept = arch.edge_kept(src, cfg.cell_node(c));
      const std::string src_name =
          cfg.node_kind(src) == NodeKind::Cell ? cfg.node_name(src) + "/out" : cfg.node_name(src);
      os << "  \"" << src_name << "\" -> \"" << name << "/in" << s << "\"";
      if (!kept) os << " [style=dashed, label=\"Zero\"]";
      os << ";\n";
    }
    auto local_name = [&](int idx) {
      return idx < 2 ? name + "/in" + std::to_string(idx) : name + "/step" + std::to_string(idx - 2);
    };
    for (int j = 0; j < cfg.steps_per_cell; ++j) {
      auto [xi, yi] = SpaceConfig::step_inputs(j);
      os << "  \"" << local_name(xi) << "\" -> \"" << name << "/step" << j << "\" [label=\"x\"];\n";
      os << "  \"" << local_name(yi) << "\" -> \"" << name << "/step" << j << "\" [label=\"y\"];\n";
      os << "  \"" << name << "/step" << j << "\" -> \"" << name << "/out\";\n";
    }
    os << "  \"" << name << "/out\" -> \"head\";\n";
  }
  os << "  \"head\" [label=\"mean-pool + linear\", shape=doubleoctagon];\n";
  os << "}\n";
  return os.str();
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw DataError("failed writing " + path.string());
}

void save_arch(const DerivedArch& arch, const std::filesystem::path& json_path) {
  write_text_file(json_path, arch_to_json(arch));
}

DerivedArch load_arch(const std::filesystem::path& json_path) { return arch_from_json(read_text_file(json_path)); }

}  // namespace stgsnas
