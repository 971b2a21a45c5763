// SPDX-License-Identifier: Apache-2.0
#include "stgsnas/derived_arch.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "stgsnas/errors.hpp"

namespace stgsnas {

void SpaceConfig::validate() const {
  if (num_image_features < 1 || num_speech_features < 1) {
    throw ContractError("each modality needs at least one backbone feature node");
  }
  if (num_cells < 1) throw ContractError("num_cells must be >= 1");
  if (steps_per_cell < 1) throw ContractError("steps_per_cell must be >= 1");
  if (feature_width < 1) throw ContractError("feature_width must be >= 1");
  if (op_pool.empty()) throw ContractError("fusion op pool is empty");
  std::set<OpKind> seen(op_pool.begin(), op_pool.end());
  if (seen.size() != op_pool.size()) throw ContractError("fusion op pool has duplicates");
}

NodeKind SpaceConfig::node_kind(int node) const {
  if (node < 0 || node >= num_nodes()) throw ContractError("node index out of range");
  if (node < num_image_features) return NodeKind::Image;
  if (node < num_backbone_nodes()) return NodeKind::Speech;
  return NodeKind::Cell;
}

std::string SpaceConfig::node_name(int node) const {
  switch (node_kind(node)) {
    case NodeKind::Image: return "I" + std::to_string(node + 1);
    case NodeKind::Speech: return "S" + std::to_string(node - num_image_features + 1);
    case NodeKind::Cell: return "Cell" + std::to_string(node - num_backbone_nodes() + 1);
  }
  return {};
}

std::vector<Edge> SpaceConfig::first_level_edges() const {
  std::vector<Edge> edges;
  for (int c = 0; c < num_cells; ++c) {
    const int v = cell_node(c);
    for (int u = 0; u < v; ++u) edges.push_back({u, v});
  }
  return edges;
}

std::size_t SpaceConfig::num_first_level_edges() const {
  std::size_t n = 0;
  for (int c = 0; c < num_cells; ++c) n += static_cast<std::size_t>(num_predecessors(c));
  return n;
}

bool DerivedArch::edge_kept(int from, int to) const {
  return std::binary_search(kept_edges.begin(), kept_edges.end(), Edge{from, to});
}

void DerivedArch::validate() const {
  config.validate();
  if (cells.size() != static_cast<std::size_t>(config.num_cells)) {
    throw ContractError("derived arch has " + std::to_string(cells.size()) + " cells, config says " +
                        std::to_string(config.num_cells));
  }
  if (!std::is_sorted(kept_edges.begin(), kept_edges.end()) ||
      std::adjacent_find(kept_edges.begin(), kept_edges.end()) != kept_edges.end()) {
    throw ContractError("kept edge list must be sorted and duplicate-free");
  }
  for (const auto& e : kept_edges) {
    if (e.to < config.num_backbone_nodes() || e.to >= config.num_nodes() || e.from < 0 ||
        e.from >= e.to) {
      throw ContractError("invalid first-level edge (" + std::to_string(e.from) + "," +
                          std::to_string(e.to) + ")");
    }
  }
  for (int c = 0; c < config.num_cells; ++c) {
    const auto& cell = cells[static_cast<std::size_t>(c)];
    for (int in : cell.inputs) {
      // Inputs must precede the cell: this is what keeps the graph acyclic.
      if (in < 0 || in >= config.cell_node(c)) {
        throw ContractError("cell " + std::to_string(c + 1) + " input " + std::to_string(in) +
                            " does not resolve to an earlier node");
      }
    }
    if (cell.ops.size() != static_cast<std::size_t>(config.steps_per_cell)) {
      throw ContractError("cell " + std::to_string(c + 1) + " has the wrong number of step ops");
    }
    for (auto op : cell.ops) {
      if (std::find(config.op_pool.begin(), config.op_pool.end(), op) == config.op_pool.end()) {
        throw ContractError(std::string("op ") + std::string(to_string(op)) + " is not in the pool");
      }
    }
  }
}

namespace {

constexpr unsigned kImageBit = 1u;
constexpr unsigned kSpeechBit = 2u;

struct FlowAnalysis {
  unsigned output = 0;
  bool cross_modal = false;
};

FlowAnalysis analyze(const DerivedArch& arch) {
  const auto& cfg = arch.config;
  std::vector<unsigned> node_mods(static_cast<std::size_t>(cfg.num_nodes()), 0);
  for (int i = 0; i < cfg.num_image_features; ++i) node_mods[static_cast<std::size_t>(i)] = kImageBit;
  for (int i = 0; i < cfg.num_speech_features; ++i)
    node_mods[static_cast<std::size_t>(cfg.num_image_features + i)] = kSpeechBit;

  FlowAnalysis result;
  for (int c = 0; c < cfg.num_cells; ++c) {
    const int v = cfg.cell_node(c);
    const auto& cell = arch.cells[static_cast<std::size_t>(c)];
    std::vector<unsigned> local;
    for (int in : cell.inputs) {
      local.push_back(arch.edge_kept(in, v) ? node_mods[static_cast<std::size_t>(in)] : 0u);
    }
    unsigned cell_mods = 0;
    for (int s = 0; s < cfg.steps_per_cell; ++s) {
      auto [xi, yi] = SpaceConfig::step_inputs(s);
      const unsigned mx = local[static_cast<std::size_t>(xi)];
      const unsigned my = local[static_cast<std::size_t>(yi)];
      unsigned out = 0;
      if (cell.ops[static_cast<std::size_t>(s)] != OpKind::Zero) {
        out = mx | my;
        if (mx && my && out == (kImageBit | kSpeechBit)) result.cross_modal = true;
      }
      local.push_back(out);
      cell_mods |= out;
    }
    node_mods[static_cast<std::size_t>(v)] = cell_mods;
    result.output |= cell_mods;
  }
  return result;
}

}  // namespace

bool DerivedArch::retains_modality(Modality m) const {
  const unsigned bit = m == Modality::Image ? kImageBit : kSpeechBit;
  return (analyze(*this).output & bit) != 0;
}

bool DerivedArch::has_cross_modal_fusion() const { return analyze(*this).cross_modal; }

std::string DerivedArch::fingerprint() const {
  std::ostringstream os;
  os << "e=";
  for (const auto& e : config.first_level_edges()) os << (edge_kept(e.from, e.to) ? '1' : '0');
  for (std::size_t c = 0; c < cells.size(); ++c) {
    os << ";c" << c << '=' << cells[c].inputs[0] << ',' << cells[c].inputs[1] << ':';
    for (std::size_t s = 0; s < cells[c].ops.size(); ++s) {
      if (s) os << ',';
      os << to_string(cells[c].ops[s]);
    }
  }
  return os.str();
}

std::size_t head_parameter_count(const SpaceConfig& config) {
  const auto in = static_cast<std::size_t>(config.head_nodes() * config.feature_width);
  const auto k = static_cast<std::size_t>(SpaceConfig::kNumClasses);
  return in * k + k;
}

std::size_t count_parameters(const DerivedArch& arch) {
  std::size_t n = head_parameter_count(arch.config);
  const auto c = static_cast<std::size_t>(arch.config.feature_width);
  for (const auto& cell : arch.cells)
    for (auto op : cell.ops) n += op_parameter_count(op, c);
  return n;
}

}  // namespace stgsnas
