#include "timo/igt.hpp"

#include <cmath>
#include <string>

#include "timo/errors.hpp"

namespace timo {

namespace {

void check_gamma(double gamma) {
  if (!(gamma > 0.0) || !std::isfinite(gamma)) throw ConfigError("gamma must be a positive finite number");
}

PromptWeightSolution scale_to_sphere(const Vector& v, double gamma) {
  const double norm = v.norm();
  if (norm < kDegenerateNorm) {
    return {Vector::Constant(v.size(), gamma / std::sqrt(static_cast<double>(v.size()))), true};
  }
  return {gamma * v / norm, false};
}

}  // namespace

PromptWeightSolution solve_prompt_weights(const Matrix& prompts, const Vector& image_prototype, double gamma) {
  check_gamma(gamma);
  const Vector v = prompts * image_prototype;
  return scale_to_sphere(v, gamma);
}

Vector softmax(const Vector& logits) {
  if (logits.size() == 0) return logits;
  const double top = logits.maxCoeff();
  Vector e = (logits.array() - top).exp().matrix();
  return e / e.sum();
}

Matrix prompt_projections(const TextFeatureBank& text, const Matrix& image_prototypes) {
  const auto n = static_cast<Eigen::Index>(text.classes());
  if (image_prototypes.rows() != n) throw DataError("prompt_projections: prototype count mismatch");
  Matrix out(n, static_cast<Eigen::Index>(text.prompts_per_class()));
  for (Eigen::Index i = 0; i < n; ++i) {
    out.row(i) = (text.prompts[static_cast<std::size_t>(i)] * image_prototypes.row(i).transpose()).transpose();
  }
  return out;
}

PromptWeights prompt_weights_from_projections(const Matrix& projections, double gamma) {
  check_gamma(gamma);
  PromptWeights out;
  out.raw.resize(projections.rows(), projections.cols());
  out.probs.resize(projections.rows(), projections.cols());
  out.degenerate.assign(static_cast<std::size_t>(projections.rows()), false);
  for (Eigen::Index i = 0; i < projections.rows(); ++i) {
    auto solved = scale_to_sphere(projections.row(i).transpose(), gamma);
    out.raw.row(i) = solved.weights.transpose();
    out.probs.row(i) = softmax(solved.weights).transpose();
    out.degenerate[static_cast<std::size_t>(i)] = solved.degenerate;
  }
  return out;
}

PromptWeights compute_prompt_weights(const TextFeatureBank& text, const Matrix& image_prototypes, double gamma) {
  return prompt_weights_from_projections(prompt_projections(text, image_prototypes), gamma);
}

PrototypeSet build_igt_prototypes(const TextFeatureBank& text, const Matrix& probs) {
  const auto n = static_cast<Eigen::Index>(text.classes());
  const auto p = static_cast<Eigen::Index>(text.prompts_per_class());
  if (probs.rows() != n || probs.cols() != p) throw DataError("build_igt_prototypes: weight shape mismatch");
  PrototypeSet out;
  out.weights.resize(n, static_cast<Eigen::Index>(text.dim()));
  out.degenerate.assign(static_cast<std::size_t>(n), false);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& block = text.prompts[static_cast<std::size_t>(i)];
    Vector combined = Vector::Zero(block.cols());
    for (Eigen::Index k = 0; k < p; ++k) combined += probs(i, k) * block.row(k).transpose();
    auto normalized = l2_normalize(combined);
    out.weights.row(i) = normalized.value.transpose();
    out.degenerate[static_cast<std::size_t>(i)] = normalized.degenerate;
  }
  return out;
}

Matrix igt_logits(const PrototypeSet& igt_prototypes, const Matrix& queries, double scale) {
  return cosine_logits(igt_prototypes, queries, scale);
}

}  // namespace timo
