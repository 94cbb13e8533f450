#pragma once

#include "cdnet/model_core.hpp"
#include "cdnet/trainer.hpp"

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace cdnet {

/// A cohort in memory: matrices, optional score table, score metadata.
struct Dataset {
  std::vector<std::string> ids;
  std::vector<CorrelationMatrix> gammas;
  std::vector<Vector> scores;  // empty when the manifest has no score table
  std::vector<std::string> score_names;
  std::vector<std::pair<double, double>> score_ranges;

  std::size_t size() const { return gammas.size(); }
  Eigen::Index p() const { return gammas.empty() ? 0 : gammas.front().size(); }
  int m() const { return static_cast<int>(score_names.size()); }
  bool has_scores() const { return !scores.empty(); }

  Dataset subset(const std::vector<std::size_t>& indices) const;
  TrainingSet training_set() const;
};

struct GroundTruth;

/// Reads a JSON manifest plus the matrix and score files it references
/// (paths relative to the manifest). Matrices are symmetrized; when the
/// manifest sets "raw": true the leading eigencomponent is removed.
Dataset load_dataset(const std::filesystem::path& manifest_path);

/// Writes manifest.json, matrices/<id>.csv, scores.csv and, when given,
/// ground_truth.json into `dir`. Returns the manifest path.
std::filesystem::path write_dataset(const std::filesystem::path& dir, const Dataset& data,
                                    const GroundTruth* truth = nullptr, bool raw = false);

/// Reads a scores CSV (subject_id column followed by one column per measure).
struct ScoreTable {
  std::vector<std::string> names;
  std::vector<std::string> ids;
  std::vector<Vector> rows;
};
ScoreTable read_scores(const std::filesystem::path& path);

}  // namespace cdnet
