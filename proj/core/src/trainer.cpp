// SPDX-License-Identifier: Apache-2.0
#include "stgsnas/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "stgsnas/csv.hpp"
#include "stgsnas/errors.hpp"
#include "stgsnas/metrics.hpp"
#include "stgsnas/ops.hpp"
#include "stgsnas/optimizer.hpp"

namespace stgsnas {

void TrainConfig::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) throw ContractError(std::string(name) + " must be positive");
  };
  positive(arch_lr, "arch_lr");
  positive(weight_lr_max, "weight_lr_max");
  positive(weight_lr_min, "weight_lr_min");
  if (arch_weight_decay < 0.0 || weight_decay < 0.0) throw ContractError("weight decay must be >= 0");
  if (batch_size == 0 || eval_batch_size == 0) throw ContractError("batch sizes must be positive");
  if (max_epochs == 0) throw ContractError("max_epochs must be positive");
  if (convergence_window == 0) throw ContractError("convergence_window must be >= 1");
  if (!(convergence_tol >= 0.0)) throw ContractError("convergence_tol must be >= 0");
  relaxation.validate();
}

void RetrainConfig::validate() const {
  if (epochs == 0 || batch_size == 0) throw ContractError("retrain epochs and batch size must be positive");
  if (!(lr_max > 0.0) || !(lr_min > 0.0)) throw ContractError("retrain learning rates must be positive");
  if (weight_decay < 0.0) throw ContractError("weight decay must be >= 0");
}

std::string EntropyTrace::to_csv() const {
  CsvWriter w({"epoch", "E_alpha", "E_gamma", "train_loss", "val_loss", "val_acc", "E_beta", "best_val_acc",
               "best_arch"});
  for (const auto& r : rows) {
    w.add_row({std::to_string(r.epoch), format_double(r.e_alpha), format_double(r.e_gamma),
               format_double(r.train_loss), format_double(r.val_loss), format_double(r.val_acc),
               format_double(r.e_beta), format_double(r.best_val_acc), r.best_arch});
  }
  return w.str();
}

bool entropy_converged(const EntropyTrace& trace, std::size_t window, double tol) {
  if (window == 0 || trace.rows.size() < window) return false;
  const auto first = trace.rows.end() - static_cast<std::ptrdiff_t>(window);
  auto span_of = [&](auto field) {
    double lo = field(*first);
    double hi = lo;
    for (auto it = first; it != trace.rows.end(); ++it) {
      lo = std::min(lo, field(*it));
      hi = std::max(hi, field(*it));
    }
    return hi - lo;
  };
  return span_of([](const EntropyRow& r) { return r.e_alpha; }) < tol &&
         span_of([](const EntropyRow& r) { return r.e_gamma; }) < tol;
}

namespace {

std::vector<std::size_t> shuffled(std::size_t n, const SeededRng& rng) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  NoiseCursor cur(rng);
  for (std::size_t i = n; i > 1; --i) {
    const auto j = std::min(i - 1, static_cast<std::size_t>(cur.next_uniform() * static_cast<double>(i)));
    std::swap(order[i - 1], order[j]);
  }
  return order;
}

template <typename Fn>
void for_each_batch(const std::vector<std::size_t>& order, std::size_t batch_size, Fn&& fn) {
  for (std::size_t start = 0, b = 0; start < order.size(); start += batch_size, ++b) {
    const std::size_t end = std::min(order.size(), start + batch_size);
    fn(std::span<const std::size_t>(order.data() + start, end - start), b);
  }
}

void require_nonempty(const BimodalDataset& d, const char* name) {
  if (d.size() == 0) throw DataError(std::string(name) + " set is empty");
  d.validate();
}

void check_finite(const Var& loss, const char* phase, std::size_t epoch, std::size_t batch) {
  if (!std::isfinite(loss.value().item())) {
    throw NumericalError(std::string("non-finite loss in ") + phase + " phase at epoch " + std::to_string(epoch) +
                         ", batch " + std::to_string(batch));
  }
}

void note_groups(std::vector<ParamGroup>& seen, const std::vector<ParamGroup>& updated) {
  for (auto g : updated)
    if (std::find(seen.begin(), seen.end(), g) == seen.end()) seen.push_back(g);
}

std::vector<Param*> arch_params(SuperNet& net) {
  std::vector<Param*> out;
  for (auto g : {ParamGroup::ArchAlpha, ParamGroup::ArchBeta, ParamGroup::ArchGamma}) {
    auto ps = net.parameters(g);
    out.insert(out.end(), ps.begin(), ps.end());
  }
  return out;
}

// Batched inference; `forward` maps (tape, image, speech) to logits.
template <typename Forward>
EvalResult run_eval(const BimodalDataset& data, std::size_t batch_size, Forward&& forward) {
  require_nonempty(data, "evaluation");
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Tensor all_logits({data.size(), 2});
  double loss_sum = 0.0;
  Tensor image;
  Tensor speech;
  std::vector<int> labels;
  for_each_batch(order, batch_size, [&](std::span<const std::size_t> rows, std::size_t) {
    data.gather(rows, image, speech, labels);
    Tape tape;
    tape.set_trainable_groups({});
    Var logits = forward(tape, image, speech);
    loss_sum += ad::softmax_cross_entropy(logits, labels).value().item() * static_cast<double>(rows.size());
    std::copy(logits.value().data().begin(), logits.value().data().end(),
              all_logits.data().begin() + static_cast<std::ptrdiff_t>(rows[0] * 2));
  });
  EvalResult r;
  r.accuracy = accuracy(all_logits, data.labels);
  r.auc = roc_auc(positive_scores(all_logits), data.labels);
  r.loss = loss_sum / static_cast<double>(data.size());
  return r;
}

}  // namespace

EvalResult evaluate(DerivedNet& net, const BimodalDataset& data, std::size_t batch_size) {
  return run_eval(data, batch_size,
                  [&](Tape& t, const Tensor& i, const Tensor& s) { return net.forward(t, i, s); });
}

EvalResult evaluate(SuperNet& net, const BimodalDataset& data, const RelaxationConfig& mode,
                    std::size_t batch_size) {
  if (mode.mode != RelaxationMode::EvalDeterministic && mode.mode != RelaxationMode::PlainSoftmax)
    throw ContractError("supernet evaluation needs a noise-free relaxation mode");
  NoiseCursor unused(SeededRng(0, 0));
  return run_eval(data, batch_size,
                  [&](Tape& t, const Tensor& i, const Tensor& s) { return net.forward(t, i, s, mode, unused); });
}

EvalResult evaluate_fixed(SuperNet& net, const DerivedArch& arch, const BimodalDataset& data,
                          std::size_t batch_size) {
  return run_eval(data, batch_size,
                  [&](Tape& t, const Tensor& i, const Tensor& s) { return net.forward_fixed(t, i, s, arch); });
}

SearchResult search(SuperNet& net, const BimodalDataset& train, const BimodalDataset& val,
                    const TrainConfig& cfg, const EpochCallback& on_epoch) {
  cfg.validate();
  require_nonempty(train, "training");
  require_nonempty(val, "validation");

  Adam weight_opt(net.parameters(ParamGroup::Weights), AdamConfig{.weight_decay = cfg.weight_decay});
  Adam arch_opt(arch_params(net), AdamConfig{.weight_decay = cfg.arch_weight_decay});

  const SeededRng train_order(cfg.seed, stable_hash("order/train"));
  const SeededRng val_order(cfg.seed, stable_hash("order/val"));
  const SeededRng weight_noise(cfg.seed, stable_hash("noise/weights"));
  const SeededRng arch_noise(cfg.seed, stable_hash("noise/arch"));

  SearchResult result;
  Tensor image;
  Tensor speech;
  std::vector<int> labels;
  bool have_best = false;

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const double lr = cosine_lr(cfg.weight_lr_max, cfg.weight_lr_min, epoch - 1, cfg.max_epochs);

    double train_loss = 0.0;
    for_each_batch(shuffled(train.size(), train_order.substream(epoch)), cfg.batch_size,
                   [&](std::span<const std::size_t> rows, std::size_t b) {
                     train.gather(rows, image, speech, labels);
                     Tape tape;
                     tape.set_trainable_groups({ParamGroup::Weights});
                     NoiseCursor noise(weight_noise.substream(epoch).substream(b));
                     Var loss = ad::softmax_cross_entropy(net.forward(tape, image, speech, cfg.relaxation, noise),
                                                          labels);
                     check_finite(loss, "weight", epoch, b);
                     weight_opt.zero_grad();
                     tape.backward(loss);
                     for (auto g : tape.groups_updated())
                       if (g != ParamGroup::Weights) throw ContractError("architecture gradient in the weight phase");
                     note_groups(result.phases.weight_phase_groups, tape.groups_updated());
                     weight_opt.step(lr);
                     ++result.phases.weight_steps;
                     train_loss += loss.value().item() * static_cast<double>(rows.size());
                   });
    train_loss /= static_cast<double>(train.size());

    double val_loss = 0.0;
    for_each_batch(shuffled(val.size(), val_order.substream(epoch)), cfg.batch_size,
                   [&](std::span<const std::size_t> rows, std::size_t b) {
                     val.gather(rows, image, speech, labels);
                     Tape tape;
                     tape.set_trainable_groups({ParamGroup::ArchAlpha, ParamGroup::ArchBeta, ParamGroup::ArchGamma});
                     NoiseCursor noise(arch_noise.substream(epoch).substream(b));
                     Var loss = ad::softmax_cross_entropy(net.forward(tape, image, speech, cfg.relaxation, noise),
                                                          labels);
                     check_finite(loss, "architecture", epoch, b);
                     arch_opt.zero_grad();
                     tape.backward(loss);
                     for (auto g : tape.groups_updated())
                       if (!is_arch_group(g)) throw ContractError("weight gradient in the architecture phase");
                     note_groups(result.phases.arch_phase_groups, tape.groups_updated());
                     arch_opt.step(cfg.arch_lr);
                     ++result.phases.arch_steps;
                     val_loss += loss.value().item() * static_cast<double>(rows.size());
                   });
    val_loss /= static_cast<double>(val.size());

    DerivedArch derived = net.derive();
    const double val_acc = evaluate_fixed(net, derived, val, cfg.eval_batch_size).accuracy;
    if (!have_best || val_acc > result.best_val_acc) {
      result.best = derived;
      result.best_val_acc = val_acc;
      have_best = true;
    }
    result.final_arch = std::move(derived);

    EntropyRow row;
    row.epoch = epoch;
    row.e_alpha = entropy_alpha(net.arch());
    row.e_beta = entropy_beta(net.arch());
    row.e_gamma = entropy_gamma(net.arch());
    row.train_loss = train_loss;
    row.val_loss = val_loss;
    row.val_acc = val_acc;
    row.best_val_acc = result.best_val_acc;
    row.best_arch = result.best.fingerprint();
    result.trace.rows.push_back(row);
    if (on_epoch) on_epoch(row);

    if (entropy_converged(result.trace, cfg.convergence_window, cfg.convergence_tol)) {
      result.converged = true;
      break;
    }
  }
  return result;
}

SearchResult baseline_softmax_search(SuperNet& net, const BimodalDataset& train, const BimodalDataset& val,
                                     const TrainConfig& cfg, const EpochCallback& on_epoch) {
  TrainConfig plain = cfg;
  plain.relaxation.mode = RelaxationMode::PlainSoftmax;
  return search(net, train, val, plain, on_epoch);
}

RetrainResult retrain(const DerivedArch& arch, const BimodalDataset& train, const BimodalDataset& val,
                      const RetrainConfig& cfg, DerivedNet* out) {
  cfg.validate();
  require_nonempty(train, "training");
  require_nonempty(val, "validation");
  DerivedNet net(arch, cfg.seed);
  Adam opt(net.parameters(), AdamConfig{.weight_decay = cfg.weight_decay});
  const SeededRng order_rng(cfg.seed, stable_hash("order/retrain"));

  RetrainResult r;
  r.parameter_count = net.parameter_count();
  Tensor image;
  Tensor speech;
  std::vector<int> labels;
  std::size_t since_best = 0;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const double lr = cosine_lr(cfg.lr_max, cfg.lr_min, epoch - 1, cfg.epochs);
    for_each_batch(shuffled(train.size(), order_rng.substream(epoch)), cfg.batch_size,
                   [&](std::span<const std::size_t> rows, std::size_t b) {
                     train.gather(rows, image, speech, labels);
                     Tape tape;
                     Var loss = ad::softmax_cross_entropy(net.forward(tape, image, speech), labels);
                     check_finite(loss, "retrain", epoch, b);
                     opt.zero_grad();
                     if (loss.requires_grad()) tape.backward(loss);
                     opt.step(lr);
                   });
    const EvalResult e = evaluate(net, val);
    r.epochs_run = epoch;
    if (r.best_epoch == 0 || e.accuracy > r.val_accuracy) {
      r.val_accuracy = e.accuracy;
      r.val_auc = e.auc;
      r.best_epoch = epoch;
      since_best = 0;
    } else if (cfg.patience > 0 && ++since_best >= cfg.patience) {
      break;
    }
  }
  if (out) *out = net;
  return r;
}

}  // namespace stgsnas
