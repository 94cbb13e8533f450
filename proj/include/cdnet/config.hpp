#pragma once

#include "cdnet/synth.hpp"
#include "cdnet/trainer.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace cdnet {

/// Training configuration from a JSON object. Missing keys keep their
/// defaults; unknown keys are rejected.
TrainConfig train_config_from_json(const std::string& text);
TrainConfig load_train_config(const std::filesystem::path& path);
std::string train_config_to_json(const TrainConfig& config);

SynthSpec synth_spec_from_json(const std::string& text);
SynthSpec load_synth_spec(const std::filesystem::path& path);

/// Hyperparameter sweep for the grid-search helper.
struct GridSpec {
  std::vector<double> gamma1;
  std::vector<double> gamma2;
  std::vector<double> lambda;
  int folds = 10;
  TrainConfig base;
};
GridSpec load_grid(const std::filesystem::path& path);

}  // namespace cdnet
