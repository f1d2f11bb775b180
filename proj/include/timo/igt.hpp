#pragma once

// Image-guided text reweighting.
//
// For class i the prompt weights r maximize r^T (F_t[i] W_v[i]) subject to ||r|| = gamma.
// The stationary points of the Lagrangian are r = +-gamma v / ||v|| with v = F_t[i] W_v[i];
// the positive root is the maximizer. The softmax of r weights the class's prompts.

#include <vector>

#include "timo/features.hpp"
#include "timo/types.hpp"

namespace timo {

struct PromptWeightSolution {
  Vector weights;  // r, norm gamma
  bool degenerate = false;
};

/// Closed-form maximizer; if ||v|| < 1e-12 returns gamma / sqrt(P) in every entry, flagged.
PromptWeightSolution solve_prompt_weights(const Matrix& prompts, const Vector& image_prototype, double gamma);

/// Softmax with max subtraction.
Vector softmax(const Vector& logits);

struct PromptWeights {
  Matrix raw;   // N x P, rows of norm gamma
  Matrix probs; // N x P, row-stochastic
  std::vector<bool> degenerate;
};

PromptWeights compute_prompt_weights(const TextFeatureBank& text, const Matrix& image_prototypes, double gamma);

/// Row i = normalize(sum_p R[i, p] * F_t[i, p]).
PrototypeSet build_igt_prototypes(const TextFeatureBank& text, const Matrix& probs);

/// Per-class projections v = F_t[i] W_v[i]; reusable across gamma values.
Matrix prompt_projections(const TextFeatureBank& text, const Matrix& image_prototypes);

/// Prompt weights for one gamma from precomputed projections.
PromptWeights prompt_weights_from_projections(const Matrix& projections, double gamma);

Matrix igt_logits(const PrototypeSet& igt_prototypes, const Matrix& queries, double scale = kDefaultLogitScale);

}  // namespace timo
