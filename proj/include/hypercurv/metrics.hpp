#pragma once

#include <span>

namespace hypercurv::metrics {

/// Probability that a random positive outranks a random negative, ties
/// counting one half. Computed from mid-ranks. Throws std::invalid_argument
/// unless both classes are present.
double roc_auc(std::span<const double> scores, std::span<const int> labels);

/// Micro-averaged F1; for single-label multiclass this is accuracy.
double micro_f1(std::span<const int> predicted, std::span<const int> truth);

}  // namespace hypercurv::metrics
