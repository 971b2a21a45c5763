// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "stgsnas/dataset.hpp"
#include "stgsnas/derived_arch.hpp"
#include "stgsnas/derived_net.hpp"
#include "stgsnas/sampler.hpp"
#include "stgsnas/search_space.hpp"

namespace stgsnas {

struct TrainConfig {
  double arch_lr = 0.003;
  double arch_weight_decay = 0.001;
  double weight_lr_max = 0.003;
  double weight_lr_min = 0.0006;
  double momentum = 0.9;  // recorded in manifests; Adam's beta1 plays this role
  double weight_decay = 0.003;
  std::size_t batch_size = 8;
  std::size_t max_epochs = 100;
  std::size_t convergence_window = 20;
  double convergence_tol = 1e-3;
  RelaxationConfig relaxation;  // lambda = 10, M = 15, stgs
  std::uint64_t seed = 1;
  std::size_t eval_batch_size = 256;

  /// Throws ContractError on non-positive rates or sizes.
  void validate() const;
};

struct EntropyRow {
  std::size_t epoch = 0;  // 1-based
  double e_alpha = 0.0;
  double e_gamma = 0.0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_acc = 0.0;  // accuracy of this epoch's derived arch
  double e_beta = 0.0;
  double best_val_acc = 0.0;
  std::string best_arch;  // fingerprint
};

struct EntropyTrace {
  std::vector<EntropyRow> rows;
  /// Columns: epoch,E_alpha,E_gamma,train_loss,val_loss,val_acc,E_beta,best_val_acc,best_arch
  std::string to_csv() const;
};

/// True iff the trace holds at least `window` rows and, over the last
/// `window` rows, both E(alpha) and E(gamma) span less than `tol`.
bool entropy_converged(const EntropyTrace& trace, std::size_t window, double tol);

/// Parameter-group bookkeeping for the two phases of each epoch.
struct PhaseLog {
  std::size_t weight_steps = 0;
  std::size_t arch_steps = 0;
  /// Groups that ever received gradient during each phase.
  std::vector<ParamGroup> weight_phase_groups;
  std::vector<ParamGroup> arch_phase_groups;
};

struct SearchResult {
  DerivedArch best;  // best derived arch by validation accuracy
  double best_val_acc = 0.0;
  DerivedArch final_arch;  // derived from the last epoch's logits
  EntropyTrace trace;
  PhaseLog phases;
  bool converged = false;
};

using EpochCallback = std::function<void(const EntropyRow&)>;

/// Alternating search. Each epoch: one pass of weight updates on shuffled
/// training batches (architecture sampled with cfg.relaxation), one pass of
/// architecture updates on validation batches, then derivation, validation
/// of the derived arch with the shared weights, and a trace row. Stops at
/// max_epochs or when entropy_converged fires.
///
/// Throws DataError on empty sets, NumericalError on a non-finite loss.
SearchResult search(SuperNet& net, const BimodalDataset& train, const BimodalDataset& val,
                    const TrainConfig& cfg, const EpochCallback& on_epoch = {});

/// search() with the relaxation forced to plain softmax(logits).
/// Data order follows the same seed as the STGS run.
SearchResult baseline_softmax_search(SuperNet& net, const BimodalDataset& train, const BimodalDataset& val,
                                     const TrainConfig& cfg, const EpochCallback& on_epoch = {});

struct EvalResult {
  double accuracy = 0.0;
  double auc = 0.0;
  double loss = 0.0;
};

EvalResult evaluate(DerivedNet& net, const BimodalDataset& data, std::size_t batch_size = 256);
/// Relaxed supernet in a noise-free mode (eval-deterministic or plain-softmax).
EvalResult evaluate(SuperNet& net, const BimodalDataset& data, const RelaxationConfig& mode,
                    std::size_t batch_size = 256);
/// Discrete architecture evaluated with the supernet's shared weights.
EvalResult evaluate_fixed(SuperNet& net, const DerivedArch& arch, const BimodalDataset& data,
                          std::size_t batch_size = 256);

struct RetrainConfig {
  std::size_t epochs = 30;
  std::size_t batch_size = 16;
  double lr_max = 0.003;
  double lr_min = 0.0006;
  double weight_decay = 0.003;
  /// Stop after this many epochs without a validation-accuracy gain; 0 disables.
  std::size_t patience = 5;
  std::uint64_t seed = 1;

  void validate() const;
};

struct RetrainResult {
  double val_accuracy = 0.0;  // best over epochs
  double val_auc = 0.0;       // at the best epoch
  std::size_t best_epoch = 0;
  std::size_t epochs_run = 0;
  std::size_t parameter_count = 0;
};

/// Trains a fresh DerivedNet on `train`, early-stopping on `val` accuracy.
/// Pass `out` to keep the trained network (state at the last epoch).
RetrainResult retrain(const DerivedArch& arch, const BimodalDataset& train, const BimodalDataset& val,
                      const RetrainConfig& cfg, DerivedNet* out = nullptr);

}  // namespace stgsnas
