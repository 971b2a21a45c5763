// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>

#include "stgsnas/tensor.hpp"

namespace stgsnas {

/// Fraction of rows of `logits` [n, K] whose argmax equals the label.
double accuracy(const Tensor& logits, std::span<const int> labels);

/// Area under the ROC curve as the Mann-Whitney statistic over the scores of
/// class-1 vs class-0 samples; ties count one half. Throws DataError if
/// either class is absent.
double roc_auc(std::span<const double> scores, std::span<const int> labels);

/// Class-1 score per row of two-class logits: z1 - z0.
std::vector<double> positive_scores(const Tensor& logits);

}  // namespace stgsnas
