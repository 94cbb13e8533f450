#pragma once

#include "cdnet/inference.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace cdnet {

inline constexpr int kCheckpointVersion = 1;

/// Trained model plus the metadata needed to label its predictions.
struct Checkpoint {
  Model model;
  std::vector<std::string> score_names;
};

/// Canonical text form; saving the result of a load reproduces the bytes.
std::string checkpoint_to_string(const Checkpoint& ckpt);
Checkpoint checkpoint_from_string(const std::string& text);

void checkpoint_save(const Checkpoint& ckpt, const std::filesystem::path& path);
/// Throws VersionError on a format mismatch, CorruptionError on a truncated
/// or inconsistent payload.
Checkpoint checkpoint_load(const std::filesystem::path& path);

}  // namespace cdnet
