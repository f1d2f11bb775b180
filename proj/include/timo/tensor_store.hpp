#pragma once

// Binary tensor container and dataset manifests.
//
// Container layout (all integers little-endian):
//   offset 0   4 bytes  magic "TIMO"
//   offset 4   u32      version (1)
//   offset 8   u8       dtype (0 = float32 LE)
//   offset 9   u8       rank (1..3)
//   offset 10  rank*u32 dims, each >= 1
//   then                row-major payload, 4 * prod(dims) bytes

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "timo/features.hpp"
#include "timo/types.hpp"

namespace timo {

inline constexpr std::uint32_t kTensorVersion = 1;
inline constexpr std::uint8_t kDtypeFloat32 = 0;
inline constexpr std::size_t kMaxRank = 3;

struct Tensor {
  std::vector<std::uint32_t> dims;
  std::vector<float> data;

  std::size_t element_count() const;

  static Tensor from_matrix(const Matrix& m);
  /// Rank-3 tensor from equally shaped class blocks.
  static Tensor from_bank(const ClassBank& bank);

  /// Rank-2 view as a matrix (rank 1 becomes a single row).
  Matrix to_matrix() const;
  /// Rank-3 tensor as per-class blocks.
  ClassBank to_bank() const;

  friend bool operator==(const Tensor&, const Tensor&) = default;
};

void write_tensor(const Tensor& t, const std::filesystem::path& path);
Tensor read_tensor(const std::filesystem::path& path);

/// Header + payload size in bytes of a valid tensor.
std::size_t encoded_size(const Tensor& t);

enum class Split { support, validation, test };
const char* to_string(Split s);
Split parse_split(const std::string& s);

/// Tensor roles: "text" (N x P x D), "support" (N x K x D), "queries" (Q x D).
struct Manifest {
  std::string dataset_name;
  std::vector<std::string> class_names;
  Split split = Split::support;
  std::size_t shots = 0;
  std::size_t prompts_per_class = 0;
  std::size_t feature_dim = 0;
  std::map<std::string, std::filesystem::path> tensor_paths;
  std::optional<std::filesystem::path> label_path;
  std::vector<std::vector<std::string>> prompt_texts;
  /// Directory that relative paths are resolved against; not serialized.
  std::filesystem::path base_dir;

  std::filesystem::path resolve(const std::filesystem::path& p) const;
};

Manifest read_manifest(const std::filesystem::path& path);
void write_manifest(const Manifest& m, const std::filesystem::path& path);

/// Label files hold one decimal class index per line.
std::vector<int> read_labels(const std::filesystem::path& path);
void write_labels(const std::vector<int>& labels, const std::filesystem::path& path);

struct LoadedSplit {
  Manifest manifest;
  std::optional<TextFeatureBank> text;
  std::optional<ImageSupportBank> support;
  std::optional<QueryBatch> queries;
};

/// Reads a manifest and every tensor it references, checking shapes against (N, P, K, D)
/// and label ranges against N.
LoadedSplit load_dataset(const std::filesystem::path& manifest_path);

}  // namespace timo
