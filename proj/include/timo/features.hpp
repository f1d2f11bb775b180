#pragma once

#include <string>
#include <vector>

#include "timo/types.hpp"

namespace timo {

/// Norms at or below this are treated as zero vectors.
inline constexpr double kDegenerateNorm = 1e-12;

/// Default logit scale for cosine classifiers.
inline constexpr double kDefaultLogitScale = 100.0;

struct Normalized {
  Vector value;
  bool degenerate = false;
};

/// Unit L2 vector; zero (or near-zero) input is returned unchanged and flagged.
Normalized l2_normalize(const Vector& v);

/// Normalizes every row in place. Returns per-row degenerate flags.
std::vector<bool> normalize_rows(Matrix& rows);

/// Prompt embeddings, one P x D block per class, all rows unit norm.
struct TextFeatureBank {
  ClassBank prompts;
  std::vector<std::vector<std::string>> prompt_texts;  // optional, N x P when present

  /// Validates the N x P x D shape and normalizes every row.
  static TextFeatureBank from_raw(ClassBank prompts, std::vector<std::vector<std::string>> texts = {});

  std::size_t classes() const { return prompts.size(); }
  std::size_t prompts_per_class() const { return prompts.empty() ? 0 : static_cast<std::size_t>(prompts[0].rows()); }
  std::size_t dim() const { return prompts.empty() ? 0 : static_cast<std::size_t>(prompts[0].cols()); }
};

/// Support image embeddings (K x D per class) and their normalized class means.
struct ImageSupportBank {
  ClassBank shots;
  Matrix prototypes;
  std::vector<bool> degenerate;

  static ImageSupportBank from_raw(ClassBank shots);

  std::size_t classes() const { return shots.size(); }
  std::size_t shots_per_class() const { return shots.empty() ? 0 : static_cast<std::size_t>(shots[0].rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(prototypes.cols()); }
};

struct QueryBatch {
  Matrix features;          // Q x D, unit rows
  std::vector<int> labels;  // empty for unlabeled batches

  static QueryBatch from_raw(Matrix features, std::vector<int> labels, std::size_t classes);

  std::size_t size() const { return static_cast<std::size_t>(features.rows()); }
};

/// N x D unit-norm class prototypes.
struct PrototypeSet {
  Matrix weights;
  std::vector<bool> degenerate;

  std::size_t classes() const { return static_cast<std::size_t>(weights.rows()); }
};

/// Row i = l2_normalize(mean of block i).
PrototypeSet class_mean_prototypes(const ClassBank& bank);

inline PrototypeSet text_prototypes(const TextFeatureBank& text) { return class_mean_prototypes(text.prompts); }
inline PrototypeSet image_prototypes(const ClassBank& shots) { return class_mean_prototypes(shots); }

/// scale * <W[i], q> with both sides re-normalized.
Vector cosine_logits(const PrototypeSet& prototypes, const Vector& query, double scale = kDefaultLogitScale);

/// Batched form of cosine_logits; returns Q x N.
Matrix cosine_logits(const PrototypeSet& prototypes, const Matrix& queries, double scale = kDefaultLogitScale);

/// Groups labeled query rows into per-class blocks (row order preserved within a class).
ClassBank group_by_class(const QueryBatch& batch, std::size_t classes);

}  // namespace timo
