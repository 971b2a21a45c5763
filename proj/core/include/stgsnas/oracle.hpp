// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "stgsnas/dataset.hpp"
#include "stgsnas/derived_arch.hpp"
#include "stgsnas/errors.hpp"
#include "stgsnas/trainer.hpp"

namespace stgsnas {

/// Optional restrictions on the enumerated space.
struct EnumerationConstraints {
  std::vector<Edge> forced_kept;                  // edges fixed to Identity
  std::map<std::pair<int, int>, int> forced_slots;  // (cell, slot) -> predecessor node
};

inline constexpr std::uint64_t kMaxEnumeratedArchs = 10000;

/// Raised when a space exceeds the enumeration guard.
class SpaceTooLargeError : public ContractError {
 public:
  explicit SpaceTooLargeError(std::uint64_t size);
  std::uint64_t size() const noexcept { return size_; }

 private:
  std::uint64_t size_;
};

/// Closed form 2^{free edges} * prod(slot choices) * |pool|^{cells * steps},
/// saturating at UINT64_MAX.
std::uint64_t space_size(const SpaceConfig& config, const EnumerationConstraints& constraints = {});

/// Every discrete architecture of the space, ordered by fingerprint.
std::vector<DerivedArch> enumerate_space(const SpaceConfig& config,
                                         const EnumerationConstraints& constraints = {},
                                         std::uint64_t max_size = kMaxEnumeratedArchs);

struct OracleEntry {
  DerivedArch arch;
  std::string fingerprint;
  double val_accuracy = 0.0;
  double val_auc = 0.0;
  std::size_t parameter_count = 0;
  std::size_t rank = 0;          // 1-based; ties share the better rank
  std::size_t ordinal_rank = 0;  // 1-based and unique; ties broken by fingerprint
  std::size_t worst_rank = 0;    // 1-based; ties share the worse rank
};

struct EnumerationReport {
  SpaceConfig config;
  std::vector<OracleEntry> entries;  // fingerprint order

  const OracleEntry* find(const DerivedArch& arch) const;
  std::string to_csv() const;
};

using OracleProgress = std::function<void(std::size_t done, std::size_t total)>;

/// Retrains every architecture of the space with the same RetrainConfig and
/// ranks them by validation accuracy. Runs on up to `jobs` threads; the
/// result does not depend on `jobs`.
EnumerationReport run_oracle(const SpaceConfig& config, const BimodalDataset& train, const BimodalDataset& val,
                             const RetrainConfig& retrain_cfg, std::size_t jobs = 1,
                             const EnumerationConstraints& constraints = {},
                             const OracleProgress& progress = {});

/// Fills the rank fields from val_accuracy. `rank` is 1 + the number of
/// strictly better entries, `worst_rank` the number of entries at least as
/// good.
void assign_ranks(std::vector<OracleEntry>& entries);

enum class TiePolicy { Optimistic, Pessimistic, Ordinal };

/// Rank of `arch` in the report; ContractError if it is not in the space.
std::size_t rank_search_result(const DerivedArch& arch, const EnumerationReport& report,
                               TiePolicy ties = TiePolicy::Optimistic);

/// Runs fn(i) for i in [0, n) on up to `jobs` worker threads. The first
/// exception thrown by any task is rethrown after all workers stop.
void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& fn);

}  // namespace stgsnas
