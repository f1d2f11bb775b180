#pragma once

// Desk-scale synthetic few-shot data.
//
// Each class has a unit direction (orthonormalized when D >= N). An image or prompt is
// normalize(direction + noise * g) with g standard normal in D dimensions, i.e. `noise` is
// the per-coordinate standard deviation. In every class a fixed number
// round(corrupt_fraction * P) of prompts is replaced by an unrelated random unit vector.
// Query rows cycle through the classes (label = row mod N).

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "timo/types.hpp"

namespace timo {

struct SyntheticSpec {
  std::string dataset_name = "synthetic";
  std::size_t classes = 10;
  std::size_t prompts = 8;
  std::size_t shots = 1;
  std::size_t dim = 64;
  std::size_t validation_per_class = 10;
  std::size_t test_per_class = 20;
  double noise = 0.6;
  std::optional<double> text_noise;  // defaults to noise
  double corrupt_fraction = 0.3;
  std::uint64_t seed = 0;
};

struct SyntheticDataset {
  Matrix directions;  // N x D
  ClassBank text;     // N x P x D
  ClassBank support;  // N x K x D
  Matrix validation;
  std::vector<int> validation_labels;
  Matrix test;
  std::vector<int> test_labels;
  std::vector<std::vector<std::size_t>> corrupted;  // per class, corrupted prompt indices
  bool directions_orthogonal = true;
};

std::size_t corrupted_prompt_count(const SyntheticSpec& spec);

/// Values are rounded through float32 so the in-memory and on-disk datasets coincide.
SyntheticDataset generate_synthetic(const SyntheticSpec& spec);

struct SyntheticPaths {
  std::filesystem::path support_manifest;
  std::filesystem::path validation_manifest;
  std::filesystem::path test_manifest;
};

/// Writes tensors, label files and the three split manifests into `dir`.
SyntheticPaths write_synthetic(const SyntheticDataset& data, const SyntheticSpec& spec, const std::filesystem::path& dir);

}  // namespace timo
