#pragma once

// Text-guided image refinement: prompts are weighted by their cosine to the class image
// prototype, the top-beta weighted prompts are appended to the class's support samples,
// and the image classifier is then built over the enlarged bank.

#include <cstddef>
#include <vector>

#include "timo/features.hpp"
#include "timo/types.hpp"

namespace timo {

struct SimilarityWeights {
  Matrix sims;                                 // N x P, sims(i, p) = <F_t[i, p], W_v[i]>
  std::vector<std::vector<std::size_t>> order;  // per class, prompt indices by descending sim (stable)
};

SimilarityWeights prompt_image_similarity(const TextFeatureBank& text, const Matrix& image_prototypes);

struct RetainedPrompt {
  std::size_t prompt;
  double weight;
};

/// Per class, the retained prompts in selection order (non-increasing weight).
using RetainedSet = std::vector<std::vector<RetainedPrompt>>;

/// beta in [0, 2P]. For beta <= P the beta best prompts; for beta > P every prompt once plus
/// the (beta - P) best prompts a second time, copies adjacent.
RetainedSet select_top_beta(const SimilarityWeights& weights, int beta);

/// Class block i = [support rows; weight * prompt rows in selection order]. Weighted rows
/// are not re-normalized.
ClassBank build_tgi_features(const ClassBank& support, const TextFeatureBank& text, const RetainedSet& retained);

/// Convenience: similarity, selection and concatenation in one call.
ClassBank tgi_features(const ImageSupportBank& support, const TextFeatureBank& text, int beta);

}  // namespace timo
