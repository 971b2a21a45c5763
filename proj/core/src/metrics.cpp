// SPDX-License-Identifier: Apache-2.0
#include "stgsnas/metrics.hpp"

#include <algorithm>
#include <numeric>
#include <vector>

#include "stgsnas/errors.hpp"
#include "stgsnas/sampler.hpp"

namespace stgsnas {

double accuracy(const Tensor& logits, std::span<const int> labels) {
  if (logits.rank() != 2 || logits.dim(0) != labels.size())
    throw DimensionError("accuracy expects logits [n, K] with n labels");
  const std::size_t k = logits.dim(1);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (static_cast<int>(argmax(logits.data().subspan(i * k, k))) == labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(labels.size());
}

double roc_auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw DimensionError("roc_auc: scores and labels differ in length");
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Midranks for tie groups, then U = R1 - n1(n1+1)/2.
  double rank_sum_pos = 0.0;
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) {
      if (labels[order[k]] == 1) {
        rank_sum_pos += midrank;
        ++n_pos;
      }
    }
    i = j;
  }
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) throw DataError("AUC is undefined when only one class is present");
  const double np = static_cast<double>(n_pos);
  const double u = rank_sum_pos - np * (np + 1.0) / 2.0;
  return u / (np * static_cast<double>(n_neg));
}

std::vector<double> positive_scores(const Tensor& logits) {
  if (logits.rank() != 2 || logits.dim(1) != 2) throw DimensionError("positive_scores expects logits [n, 2]");
  std::vector<double> s(logits.dim(0));
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = logits[2 * i + 1] - logits[2 * i];
  return s;
}

}  // namespace stgsnas
