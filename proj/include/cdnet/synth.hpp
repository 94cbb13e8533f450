#pragma once

#include "cdnet/dataset.hpp"
#include "cdnet/model_core.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace cdnet {

enum class ScoreMapKind { linear, mlp };

struct SynthSpec {
  int p = 30;
  int k_true = 4;
  int n = 52;
  int m = 3;
  double sparsity = 0.3;          // fraction of nonzeros per planted column
  double noise_sigma = 0.05;      // matrix noise: sigma (E + E^T) / 2
  double score_noise_sigma = 0.02;  // added before the affine map to score ranges
  std::uint64_t seed = 0;
  ScoreMapKind score_map = ScoreMapKind::mlp;
  /// Defaults to ADOS [0,30], SRS [70,200], Praxis [0,100], cycled past m = 3.
  std::vector<std::string> score_names;
  std::vector<std::pair<double, double>> score_ranges;

  void validate() const;
  std::vector<std::string> names() const;
  std::vector<std::pair<double, double>> ranges() const;
};

/// Planted score map: g(c) followed by a per-dimension affine map.
struct ScoreMap {
  ScoreMapKind kind = ScoreMapKind::mlp;
  Matrix w1;  // hidden x K (mlp) or M x K (linear)
  Vector b1;
  Matrix w2;  // M x hidden (mlp only)
  Vector b2;
  Vector affine_scale;
  Vector affine_offset;

  /// Noise-free raw map before the affine step.
  Vector raw(const Loadings& c) const;
  Vector apply(const Loadings& c) const;
};

struct GroundTruth {
  Dictionary x;
  std::vector<Loadings> cs;
  ScoreMap score_map;
};

std::pair<Dataset, GroundTruth> generate(const SynthSpec& spec);

void write_ground_truth(const std::filesystem::path& path, const GroundTruth& truth,
                        const std::vector<std::string>& ids);
GroundTruth read_ground_truth(const std::filesystem::path& path);

struct BasisMatch {
  /// est column matched to each true column.
  std::vector<int> permutation;
  /// sign of the cosine for each true column.
  std::vector<int> signs;
  double mean_abs_cosine = 0.0;
};

/// Optimal one-to-one column assignment maximizing the summed |cosine|.
BasisMatch match_bases(const Dictionary& x_est, const Dictionary& x_true);

/// Loadings rescaled by squared column norms so they are comparable across
/// dictionaries with different column scales, reordered by `match`.
Loadings aligned_loadings(const Loadings& c, const Dictionary& x, const BasisMatch& match);

double pearson(const Vector& a, const Vector& b);

}  // namespace cdnet
