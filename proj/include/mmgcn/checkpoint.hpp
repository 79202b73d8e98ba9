#pragma once

#include <filesystem>
#include <string>

#include "mmgcn/training.hpp"

namespace mmgcn {

inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  TrainState state;
  double scale = 1.0;  // data divisor the parameters were trained under
};

/// Writes `<stem>.json` (manifest) and `<stem>.bin` (little-endian float64 blob) into `dir`.
/// The blob holds every tensor in canonical order: weights, biases, covariances
/// and both Adam moments per layer, then the scalar state.
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& dir, const std::string& stem = "checkpoint");

/// Inverse of save_checkpoint; throws LoadError on missing files, size or version mismatch.
Checkpoint load_checkpoint(const std::filesystem::path& dir, const std::string& stem = "checkpoint");

}  // namespace mmgcn
