// SPDX-License-Identifier: Apache-2.0
#include "stgsnas/derived_net.hpp"

#include "stgsnas/errors.hpp"
#include "stgsnas/ops.hpp"
#include "stgsnas/sampler.hpp"

namespace stgsnas {

DerivedNet::DerivedNet(DerivedArch arch, std::uint64_t seed) : arch_(std::move(arch)) {
  arch_.validate();
  const auto& cfg = arch_.config;
  const auto width = static_cast<std::size_t>(cfg.feature_width);
  for (int c = 0; c < cfg.num_cells; ++c) {
    for (int j = 0; j < cfg.steps_per_cell; ++j) {
      const OpKind kind = arch_.cells[static_cast<std::size_t>(c)].ops[static_cast<std::size_t>(j)];
      const std::string id = "w/" + cfg.node_name(cfg.cell_node(c)) + "/step" + std::to_string(j) + "/" +
                             std::string(to_string(kind));
      step_weights_.push_back(OpWeights::create(kind, width, id, seed));
    }
  }
  const auto head_in = static_cast<std::size_t>(cfg.head_nodes()) * width;
  const auto classes = static_cast<std::size_t>(SpaceConfig::kNumClasses);
  Tensor w({head_in, classes});
  glorot_uniform(w, head_in, classes, seed, stable_hash("w/head/W"));
  head_w_ = Param("w/head/W", ParamGroup::Weights, std::move(w));
  head_b_ = Param("w/head/b", ParamGroup::Weights, Tensor({classes}, 0.0));
}

std::vector<Param*> DerivedNet::parameters() {
  std::vector<Param*> out;
  for (auto& op : step_weights_)
    for (auto& p : op.params()) out.push_back(&p);
  out.push_back(&head_w_);
  out.push_back(&head_b_);
  return out;
}

std::vector<const Param*> DerivedNet::parameters() const {
  std::vector<const Param*> out;
  for (auto* p : const_cast<DerivedNet*>(this)->parameters()) out.push_back(p);
  return out;
}

std::size_t DerivedNet::parameter_count() const {
  std::size_t n = 0;
  for (const auto* p : parameters()) n += p->value.numel();
  return n;
}

Var DerivedNet::forward(Tape& tape, const Tensor& image, const Tensor& speech) {
  const auto& cfg = arch_.config;
  const auto width = static_cast<std::size_t>(cfg.feature_width);
  if (image.rank() != 3 || speech.rank() != 3 || image.dim(0) != speech.dim(0) ||
      image.dim(1) != static_cast<std::size_t>(cfg.num_image_features) ||
      speech.dim(1) != static_cast<std::size_t>(cfg.num_speech_features) || image.dim(2) != width ||
      speech.dim(2) != width) {
    throw DimensionError("feature shapes " + shape_str(image.shape()) + ", " + shape_str(speech.shape()) +
                         " do not match the architecture");
  }
  const std::size_t batch = image.dim(0);
  Var img = tape.constant(image);
  Var spk = tape.constant(speech);

  std::vector<Var> nodes;
  for (int i = 0; i < cfg.num_image_features; ++i)
    nodes.push_back(ad::reshape(ad::select(img, 1, static_cast<std::size_t>(i)), {batch, 1, width}));
  for (int i = 0; i < cfg.num_speech_features; ++i)
    nodes.push_back(ad::reshape(ad::select(spk, 1, static_cast<std::size_t>(i)), {batch, 1, width}));

  std::vector<Var> head_parts;
  for (int c = 0; c < cfg.num_cells; ++c) {
    const auto& cell = arch_.cells[static_cast<std::size_t>(c)];
    std::vector<Var> local;
    for (int s = 0; s < 2; ++s) {
      const int src = cell.inputs[static_cast<std::size_t>(s)];
      const EdgeKind kind = arch_.edge_kept(src, cfg.cell_node(c)) ? EdgeKind::Identity : EdgeKind::Zero;
      local.push_back(apply_edge(kind, nodes[static_cast<std::size_t>(src)]));
    }
    std::vector<Var> steps;
    for (int j = 0; j < cfg.steps_per_cell; ++j) {
      auto [xi, yi] = SpaceConfig::step_inputs(j);
      auto& weights = step_weights_[static_cast<std::size_t>(c * cfg.steps_per_cell + j)];
      Var out = apply_op(cell.ops[static_cast<std::size_t>(j)], local[static_cast<std::size_t>(xi)],
                         local[static_cast<std::size_t>(yi)], weights.bind(tape));
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

}  // namespace stgsnas
