// SPDX-License-Identifier: Apache-2.0
#include "stgsnas/oracle.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <limits>
#include <mutex>
#include <numeric>
#include <thread>

#include "stgsnas/csv.hpp"

namespace stgsnas {

SpaceTooLargeError::SpaceTooLargeError(std::uint64_t size)
    : ContractError("search space holds " + std::to_string(size) + " architectures, above the enumeration limit of " +
                    std::to_string(kMaxEnumeratedArchs)),
      size_(size) {}

namespace {

std::uint64_t sat_mul(std::uint64_t a, std::uint64_t b) {
  if (a != 0 && b > std::numeric_limits<std::uint64_t>::max() / a) return std::numeric_limits<std::uint64_t>::max();
  return a * b;
}

struct Radices {
  std::vector<Edge> free_edges;
  std::vector<Edge> forced_edges;
  std::vector<std::vector<int>> slot_choices;  // [cell * 2 + slot]
};

Radices radices(const SpaceConfig& config, const EnumerationConstraints& k) {
  config.validate();
  Radices r;
  const auto all = config.first_level_edges();
  for (const auto& e : k.forced_kept)
    if (std::find(all.begin(), all.end(), e) == all.end()) throw ContractError("forced edge is not in the space");
  for (const auto& e : all) {
    if (std::find(k.forced_kept.begin(), k.forced_kept.end(), e) != k.forced_kept.end())
      r.forced_edges.push_back(e);
    else
      r.free_edges.push_back(e);
  }
  for (const auto& [key, node] : k.forced_slots) {
    if (key.first < 0 || key.first >= config.num_cells || key.second < 0 || key.second > 1)
      throw ContractError("forced slot is not in the space");
    if (node < 0 || node >= config.num_predecessors(key.first))
      throw ContractError("forced slot source is not a predecessor of the cell");
  }
  for (int c = 0; c < config.num_cells; ++c) {
    for (int s = 0; s < 2; ++s) {
      std::vector<int> choices;
      if (auto it = k.forced_slots.find({c, s}); it != k.forced_slots.end()) {
        choices.push_back(it->second);
      } else {
        for (int u = 0; u < config.num_predecessors(c); ++u) choices.push_back(u);
      }
      r.slot_choices.push_back(std::move(choices));
    }
  }
  return r;
}

std::uint64_t size_of(const SpaceConfig& config, const Radices& r) {
  std::uint64_t n = 1;
  for (std::size_t i = 0; i < r.free_edges.size(); ++i) n = sat_mul(n, 2);
  for (const auto& s : r.slot_choices) n = sat_mul(n, s.size());
  const auto steps = static_cast<std::size_t>(config.num_cells * config.steps_per_cell);
  for (std::size_t i = 0; i < steps; ++i) n = sat_mul(n, config.op_pool.size());
  return n;
}

}  // namespace

std::uint64_t space_size(const SpaceConfig& config, const EnumerationConstraints& constraints) {
  return size_of(config, radices(config, constraints));
}

std::vector<DerivedArch> enumerate_space(const SpaceConfig& config, const EnumerationConstraints& constraints,
                                         std::uint64_t max_size) {
  const Radices r = radices(config, constraints);
  const std::uint64_t total = size_of(config, r);
  if (total > max_size) throw SpaceTooLargeError(total);

  const std::size_t n_steps = static_cast<std::size_t>(config.num_cells * config.steps_per_cell);
  const std::size_t pool = config.op_pool.size();
  std::vector<DerivedArch> out;
  out.reserve(static_cast<std::size_t>(total));
  for (std::uint64_t index = 0; index < total; ++index) {
    // Mixed-radix decode: ops, then slots, then free-edge bits.
    std::uint64_t rest = index;
    DerivedArch a;
    a.config = config;
    a.cells.resize(static_cast<std::size_t>(config.num_cells));
    for (std::size_t k = 0; k < n_steps; ++k) {
      const auto op = config.op_pool[static_cast<std::size_t>(rest % pool)];
      rest /= pool;
      a.cells[k / static_cast<std::size_t>(config.steps_per_cell)].ops.push_back(op);
    }
    for (std::size_t s = 0; s < r.slot_choices.size(); ++s) {
      const auto& choices = r.slot_choices[s];
      a.cells[s / 2].inputs[s % 2] = choices[static_cast<std::size_t>(rest % choices.size())];
      rest /= choices.size();
    }
    a.kept_edges = r.forced_edges;
    for (const auto& e : r.free_edges) {
      if (rest % 2 == 1) a.kept_edges.push_back(e);
      rest /= 2;
    }
    std::sort(a.kept_edges.begin(), a.kept_edges.end());
    out.push_back(std::move(a));
  }
  std::vector<std::pair<std::string, std::size_t>> keys;
  keys.reserve(out.size());
  for (std::size_t i = 0; i < out.size(); ++i) keys.emplace_back(out[i].fingerprint(), i);
  std::sort(keys.begin(), keys.end());
  std::vector<DerivedArch> sorted;
  sorted.reserve(out.size());
  for (const auto& [key, i] : keys) sorted.push_back(std::move(out[i]));
  return sorted;
}

const OracleEntry* EnumerationReport::find(const DerivedArch& arch) const {
  const std::string key = arch.fingerprint();
  auto it = std::lower_bound(entries.begin(), entries.end(), key,
                             [](const OracleEntry& e, const std::string& k) { return e.fingerprint < k; });
  if (it == entries.end() || it->fingerprint != key || !(it->arch == arch)) return nullptr;
  return &*it;
}

std::string EnumerationReport::to_csv() const {
  CsvWriter w({"fingerprint", "rank", "val_acc", "val_auc", "params", "modality_dropped", "cross_modal_fusion"});
  for (const auto& e : entries) {
    w.add_row({e.fingerprint, std::to_string(e.rank), format_double(e.val_accuracy), format_double(e.val_auc),
               std::to_string(e.parameter_count), e.arch.modality_dropped() ? "1" : "0",
               e.arch.has_cross_modal_fusion() ? "1" : "0"});
  }
  return w.str();
}

void assign_ranks(std::vector<OracleEntry>& entries) {
  std::vector<double> accs;
  accs.reserve(entries.size());
  for (const auto& e : entries) accs.push_back(e.val_accuracy);
  std::sort(accs.begin(), accs.end(), std::greater<>());
  for (auto& e : entries) {
    const auto better = std::lower_bound(accs.begin(), accs.end(), e.val_accuracy, std::greater<>()) - accs.begin();
    const auto at_least = std::upper_bound(accs.begin(), accs.end(), e.val_accuracy, std::greater<>()) - accs.begin();
    e.rank = static_cast<std::size_t>(better) + 1;
    e.worst_rank = static_cast<std::size_t>(at_least);
  }
  std::vector<std::size_t> order(entries.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (entries[a].val_accuracy != entries[b].val_accuracy) return entries[a].val_accuracy > entries[b].val_accuracy;
    return entries[a].fingerprint < entries[b].fingerprint;
  });
  for (std::size_t i = 0; i < order.size(); ++i) entries[order[i]].ordinal_rank = i + 1;
}

std::size_t rank_search_result(const DerivedArch& arch, const EnumerationReport& report, TiePolicy ties) {
  if (arch.config != report.config) throw ContractError("architecture belongs to a different search space");
  const OracleEntry* e = report.find(arch);
  if (!e) throw ContractError("architecture " + arch.fingerprint() + " is not in the enumerated space");
  switch (ties) {
    case TiePolicy::Pessimistic: return e->worst_rank;
    case TiePolicy::Ordinal: return e->ordinal_rank;
    case TiePolicy::Optimistic: break;
  }
  return e->rank;
}

void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& fn) {
  jobs = std::max<std::size_t>(1, std::min(jobs, n));
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n || failed.load()) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        failed = true;
      }
    }
  };
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t j = 0; j < jobs; ++j) pool.emplace_back(worker);
  }
  if (first_error) std::rethrow_exception(first_error);
}

EnumerationReport run_oracle(const SpaceConfig& config, const BimodalDataset& train, const BimodalDataset& val,
                             const RetrainConfig& retrain_cfg, std::size_t jobs,
                             const EnumerationConstraints& constraints, const OracleProgress& progress) {
  retrain_cfg.validate();
  EnumerationReport report;
  report.config = config;
  auto archs = enumerate_space(config, constraints);
  report.entries.resize(archs.size());
  std::atomic<std::size_t> done{0};
  std::mutex progress_mutex;
  parallel_for(archs.size(), jobs, [&](std::size_t i) {
    const RetrainResult r = retrain(archs[i], train, val, retrain_cfg);
    auto& e = report.entries[i];
    e.arch = archs[i];
    e.fingerprint = archs[i].fingerprint();
    e.val_accuracy = r.val_accuracy;
    e.val_auc = r.val_auc;
    e.parameter_count = r.parameter_count;
    const std::size_t finished = ++done;
    if (progress) {
      std::lock_guard lock(progress_mutex);
      progress(finished, archs.size());
    }
  });
  assign_ranks(report.entries);
  return report;
}

}  // namespace stgsnas
