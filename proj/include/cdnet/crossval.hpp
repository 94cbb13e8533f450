#pragma once

#include "cdnet/dataset.hpp"
#include "cdnet/metrics.hpp"
#include "cdnet/trainer.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace cdnet {

/// Shuffles subject indices with `seed` and deals them round-robin into
/// `folds` groups. Entry i is the test fold of subject i.
std::vector<int> assign_folds(std::size_t n, int folds, std::uint64_t seed);

/// Seed used to fit fold `fold` of a run seeded with `seed`.
std::uint64_t fold_seed(std::uint64_t seed, int fold);

struct ScatterRow {
  double actual = 0.0;
  double predicted = 0.0;
  std::string score;
  std::string split;
  int fold = 0;
  std::string subject_id;
};

struct CrossValResult {
  std::vector<int> fold_of;
  std::vector<MetricsReport> reports;
  std::vector<ScatterRow> scatter;
  /// Out-of-fold predictions, one per subject in dataset order.
  std::vector<Vector> test_predictions;
};

CrossValResult cross_validate(const Dataset& data, const TrainConfig& config, int folds,
                              std::uint64_t seed);

/// Looks up a report line; throws std::out_of_range if absent.
const MetricsReport& find_report(const CrossValResult& r, const std::string& score,
                                 const std::string& split, const std::string& fold);

void write_metrics_csv(const std::filesystem::path& path, const std::vector<MetricsReport>& reports);
void write_scatter_csv(const std::filesystem::path& path, const std::vector<ScatterRow>& rows);

/// One grid point and its cross-validated summary.
struct GridRow {
  double gamma1 = 0.0;
  double gamma2 = 0.0;
  double lambda = 0.0;
  /// Mean over scores of (mean test MAE / score range).
  double normalized_mae = 0.0;
  std::vector<double> test_mae;   // per score, mean over folds
  std::vector<double> pooled_mi;  // per score, pooled test predictions
};

/// Evaluates every grid point by cross-validation and ranks by
/// normalized_mae (ascending). Selection is left to the caller.
std::vector<GridRow> grid_search(const Dataset& data, const TrainConfig& base,
                                 const std::vector<double>& gamma1, const std::vector<double>& gamma2,
                                 const std::vector<double>& lambda, int folds, std::uint64_t seed);

void write_grid_csv(const std::filesystem::path& path, const std::vector<GridRow>& rows,
                    const std::vector<std::string>& score_names);

}  // namespace cdnet
