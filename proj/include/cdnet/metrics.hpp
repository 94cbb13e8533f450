#pragma once

#include "cdnet/model_core.hpp"

#include <string>

namespace cdnet {

/// Median of |actual - predicted|; mean of the two middle values for even N.
double mae(const Vector& actual, const Vector& predicted);

/// Plug-in mutual information (nats) on a ceil(sqrt(N)) x ceil(sqrt(N))
/// equal-width histogram spanning each variable's observed range. Clamped at
/// zero. A constant input yields 0 and a warning on stderr.
double mutual_information(const Vector& actual, const Vector& predicted);

/// One line of a metrics table.
struct MetricsReport {
  std::string score;
  std::string split;  // "train" or "test"
  std::string fold;   // fold index, "mean" (average over folds) or "pooled"
  double mae = 0.0;
  double mi = 0.0;
  bool has_mi = false;  // MI needs at least 4 points
};

}  // namespace cdnet
