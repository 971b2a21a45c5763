// SPDX-License-Identifier: Apache-2.0
#include "stgsnas/search_space.hpp"

#include <algorithm>

#include "stgsnas/errors.hpp"
#include "stgsnas/ops.hpp"

namespace stgsnas {

ArchParams::ArchParams(const SpaceConfig& config)
    : edges_(config.first_level_edges()), steps_(config.steps_per_cell), pool_(config.op_pool) {
  config.validate();
  for (const auto& e : edges_) {
    alpha.emplace_back("alpha/" + config.node_name(e.from) + "->" + config.node_name(e.to),
                       ParamGroup::ArchAlpha, Tensor({kNumEdgeKinds}, 0.0));
  }
  for (int c = 0; c < config.num_cells; ++c) {
    for (int s = 0; s < SpaceConfig::kInputsPerCell; ++s) {
      beta.emplace_back("beta/" + config.node_name(config.cell_node(c)) + "/slot" + std::to_string(s),
                        ParamGroup::ArchBeta,
                        Tensor({static_cast<std::size_t>(config.num_predecessors(c))}, 0.0));
    }
  }
  for (int c = 0; c < config.num_cells; ++c) {
    for (int j = 0; j < config.steps_per_cell; ++j) {
      gamma.emplace_back("gamma/" + config.node_name(config.cell_node(c)) + "/step" + std::to_string(j),
                         ParamGroup::ArchGamma, Tensor({config.op_pool.size()}, 0.0));
    }
  }
}

std::size_t ArchParams::edge_index(Edge e) const {
  auto it = std::lower_bound(edges_.begin(), edges_.end(), e, [](const Edge& a, const Edge& b) {
    return a.to != b.to ? a.to < b.to : a.from < b.from;
  });
  if (it == edges_.end() || *it != e) throw ContractError("edge not present in the search space");
  return static_cast<std::size_t>(it - edges_.begin());
}

void ArchParams::saturate_to(const DerivedArch& arch, double magnitude) {
  auto set = [magnitude](Param& p, std::size_t chosen) {
    for (std::size_t i = 0; i < p.value.numel(); ++i) p.value[i] = i == chosen ? magnitude : -magnitude;
  };
  for (std::size_t e = 0; e < edges_.size(); ++e) {
    set(alpha[e], arch.edge_kept(edges_[e].from, edges_[e].to) ? 0 : 1);
  }
  for (std::size_t c = 0; c < arch.cells.size(); ++c) {
    const auto& cell = arch.cells[c];
    for (int s = 0; s < 2; ++s) set(beta[c * 2 + static_cast<std::size_t>(s)], static_cast<std::size_t>(cell.inputs[static_cast<std::size_t>(s)]));
    for (std::size_t j = 0; j < cell.ops.size(); ++j) {
      auto it = std::find(pool_.begin(), pool_.end(), cell.ops[j]);
      if (it == pool_.end()) throw ContractError("op not in pool");
      set(gamma[c * static_cast<std::size_t>(steps_) + j], static_cast<std::size_t>(it - pool_.begin()));
    }
  }
}

namespace {

double entropy_sum(const std::vector<Param>& family) {
  double h = 0.0;
  for (const auto& p : family) h += shannon_entropy(softmax_values(p.value.data()));
  return h;
}

}  // namespace

double entropy_alpha(const ArchParams& arch) { return entropy_sum(arch.alpha); }
double entropy_beta(const ArchParams& arch) { return entropy_sum(arch.beta); }
double entropy_gamma(const ArchParams& arch) { return entropy_sum(arch.gamma); }

SuperNet::SuperNet(SpaceConfig config, std::uint64_t seed) : config_(std::move(config)), arch_(config_) {
  const auto width = static_cast<std::size_t>(config_.feature_width);
  for (int c = 0; c < config_.num_cells; ++c) {
    for (int j = 0; j < config_.steps_per_cell; ++j) {
      std::vector<OpWeights> ops;
      const std::string prefix =
          "w/" + config_.node_name(config_.cell_node(c)) + "/step" + std::to_string(j) + "/";
      for (auto kind : config_.op_pool) {
        ops.push_back(OpWeights::create(kind, width, prefix + std::string(to_string(kind)), seed));
      }
      step_weights_.push_back(std::move(ops));
    }
  }
  const auto head_in = static_cast<std::size_t>(config_.head_nodes()) * width;
  const auto classes = static_cast<std::size_t>(SpaceConfig::kNumClasses);
  Tensor w({head_in, classes});
  glorot_uniform(w, head_in, classes, seed, stable_hash("w/head/W"));
  head_w_ = Param("w/head/W", ParamGroup::Weights, std::move(w));
  head_b_ = Param("w/head/b", ParamGroup::Weights, Tensor({classes}, 0.0));
}

std::vector<OpWeights>& SuperNet::step_weights(int cell, int step) {
  return step_weights_.at(static_cast<std::size_t>(cell * config_.steps_per_cell + step));
}

std::vector<Param*> SuperNet::parameters() {
  std::vector<Param*> out;
  for (auto& p : arch_.alpha) out.push_back(&p);
  for (auto& p : arch_.beta) out.push_back(&p);
  for (auto& p : arch_.gamma) out.push_back(&p);
  for (auto& step : step_weights_)
    for (auto& op : step)
      for (auto& p : op.params()) out.push_back(&p);
  out.push_back(&head_w_);
  out.push_back(&head_b_);
  return out;
}

std::vector<const Param*> SuperNet::parameters() const {
  std::vector<const Param*> out;
  for (auto* p : const_cast<SuperNet*>(this)->parameters()) out.push_back(p);
  return out;
}

std::vector<Param*> SuperNet::parameters(ParamGroup group) {
  auto all = parameters();
  std::vector<Param*> out;
  std::copy_if(all.begin(), all.end(), std::back_inserter(out),
               [group](const Param* p) { return p->group == group; });
  return out;
}

std::size_t SuperNet::weight_count() const {
  std::size_t n = 0;
  for (const auto* p : parameters())
    if (p->group == ParamGroup::Weights) n += p->value.numel();
  return n;
}

void SuperNet::check_inputs(const Tensor& image, const Tensor& speech) const {
  const auto c = static_cast<std::size_t>(config_.feature_width);
  auto check = [c](const Tensor& t, int nodes, const char* name) {
    if (t.rank() != 3 || t.dim(1) != static_cast<std::size_t>(nodes) || t.dim(2) != c) {
      throw DimensionError(std::string(name) + " features " + shape_str(t.shape()) + " do not match [B," +
                           std::to_string(nodes) + "," + std::to_string(c) + "]");
    }
  };
  check(image, config_.num_image_features, "image");
  check(speech, config_.num_speech_features, "speech");
  if (image.dim(0) != speech.dim(0)) throw DimensionError("image and speech batch sizes differ");
}

Var SuperNet::forward(Tape& tape, const Tensor& image, const Tensor& speech,
                      const RelaxationConfig& cfg, NoiseCursor& cursor) {
  check_inputs(image, speech);
  MixWeights mix;
  for (auto& p : arch_.alpha) mix.alpha.push_back(ad::multi_sample_average(tape.param(p), cfg, cursor));
  for (auto& p : arch_.beta) mix.beta.push_back(ad::multi_sample_average(tape.param(p), cfg, cursor));
  for (auto& p : arch_.gamma) mix.gamma.push_back(ad::multi_sample_average(tape.param(p), cfg, cursor));
  return forward_impl(tape, image, speech, mix);
}

Var SuperNet::forward_fixed(Tape& tape, const Tensor& image, const Tensor& speech,
                            const DerivedArch& arch) {
  check_inputs(image, speech);
  if (arch.config != config_) throw ContractError("derived arch belongs to a different search space");
  arch.validate();
  auto constant_one_hot = [&tape](std::size_t index, std::size_t n) {
    return tape.constant(Tensor({n}, one_hot(index, n)));
  };
  MixWeights mix;
  for (const auto& e : arch_.edges()) {
    mix.alpha.push_back(constant_one_hot(arch.edge_kept(e.from, e.to) ? 0 : 1, kNumEdgeKinds));
  }
  for (int c = 0; c < config_.num_cells; ++c) {
    for (int s = 0; s < 2; ++s) {
      mix.beta.push_back(constant_one_hot(
          static_cast<std::size_t>(arch.cells[static_cast<std::size_t>(c)].inputs[static_cast<std::size_t>(s)]),
          static_cast<std::size_t>(config_.num_predecessors(c))));
    }
  }
  for (const auto& cell : arch.cells) {
    for (auto op : cell.ops) {
      auto it = std::find(config_.op_pool.begin(), config_.op_pool.end(), op);
      mix.gamma.push_back(constant_one_hot(static_cast<std::size_t>(it - config_.op_pool.begin()),
                                           config_.op_pool.size()));
    }
  }
  return forward_impl(tape, image, speech, mix);
}

Var SuperNet::forward_impl(Tape& tape, const Tensor& image, const Tensor& speech, const MixWeights& mix) {
  const std::size_t batch = image.dim(0);
  const auto width = static_cast<std::size_t>(config_.feature_width);
  Var img = tape.constant(image);
  Var spk = tape.constant(speech);

  std::vector<Var> nodes;
  for (int i = 0; i < config_.num_image_features; ++i)
    nodes.push_back(ad::reshape(ad::select(img, 1, static_cast<std::size_t>(i)), {batch, 1, width}));
  for (int i = 0; i < config_.num_speech_features; ++i)
    nodes.push_back(ad::reshape(ad::select(spk, 1, static_cast<std::size_t>(i)), {batch, 1, width}));

  auto weighted = [](Var weights, std::size_t k, Var x) { return ad::mul(ad::select(weights, 0, k), x); };

  std::vector<Var> head_parts;
  std::size_t edge = 0;
  for (int c = 0; c < config_.num_cells; ++c) {
    const int v = config_.cell_node(c);
    std::vector<Var> edge_out;
    for (int u = 0; u < v; ++u, ++edge) {
      const Var& a = mix.alpha[edge];
      Var out = weighted(a, 0, apply_edge(EdgeKind::Identity, nodes[static_cast<std::size_t>(u)]));
      out = ad::add(out, weighted(a, 1, apply_edge(EdgeKind::Zero, nodes[static_cast<std::size_t>(u)])));
      edge_out.push_back(out);
    }
    std::vector<Var> local;
    for (int s = 0; s < 2; ++s) {
      const Var& b = mix.beta[static_cast<std::size_t>(c * 2 + s)];
      Var slot = weighted(b, 0, edge_out[0]);
      for (int u = 1; u < v; ++u) slot = ad::add(slot, weighted(b, static_cast<std::size_t>(u), edge_out[static_cast<std::size_t>(u)]));
      local.push_back(slot);
    }
    std::vector<Var> steps;
    for (int j = 0; j < config_.steps_per_cell; ++j) {
      auto [xi, yi] = SpaceConfig::step_inputs(j);
      Var x = local[static_cast<std::size_t>(xi)];
      Var y = local[static_cast<std::size_t>(yi)];
      const Var& g = mix.gamma[static_cast<std::size_t>(c * config_.steps_per_cell + j)];
      auto& ops = step_weights(c, j);
      Var out;
      for (std::size_t k = 0; k < config_.op_pool.size(); ++k) {
        Var term = weighted(g, k, apply_op(config_.op_pool[k], x, y, ops[k].bind(tape)));
        out = k == 0 ? term : ad::add(out, term);
      }
      local.push_back(out);
      steps.push_back(out);
      head_parts.push_back(out);
    }
    Var cell_value = steps[0];
    for (std::size_t j = 1; j < steps.size(); ++j) cell_value = ad::add(cell_value, steps[j]);
    if (steps.size() > 1) cell_value = ad::scale(cell_value, 1.0 / static_cast<double>(steps.size()));
    nodes.push_back(cell_value);
  }

  Var features = ad::mean_axis(ad::concat(head_parts, 2), 1);
  return ad::add_bias(ad::matmul(features, tape.param(head_w_)), tape.param(head_b_));
}

DerivedArch SuperNet::derive() const {
  DerivedArch arch;
  arch.config = config_;
  const auto& edges = arch_.edges();
  for (std::size_t e = 0; e < edges.size(); ++e) {
    if (argmax(arch_.alpha[e].value.data()) == 0) arch.kept_edges.push_back(edges[e]);
  }
  std::sort(arch.kept_edges.begin(), arch.kept_edges.end());
  for (int c = 0; c < config_.num_cells; ++c) {
    CellChoice cell;
    for (int s = 0; s < 2; ++s)
      cell.inputs[static_cast<std::size_t>(s)] = static_cast<int>(argmax(arch_.beta_for(c, s).value.data()));
    for (int j = 0; j < config_.steps_per_cell; ++j)
      cell.ops.push_back(config_.op_pool[argmax(arch_.gamma_for(c, j).value.data())]);
    arch.cells.push_back(std::move(cell));
  }
  arch.validate();
  return arch;
}

DerivedArch derive(const SuperNet& net) { return net.derive(); }

}  // namespace stgsnas
