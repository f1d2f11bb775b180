#include "timo/tgi.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "timo/errors.hpp"

namespace timo {

SimilarityWeights prompt_image_similarity(const TextFeatureBank& text, const Matrix& image_prototypes) {
  const std::size_t n = text.classes();
  const std::size_t p = text.prompts_per_class();
  if (static_cast<std::size_t>(image_prototypes.rows()) != n)
    throw DataError("prompt_image_similarity: " + std::to_string(image_prototypes.rows()) + " prototypes for " +
                    std::to_string(n) + " classes");
  SimilarityWeights out;
  out.sims.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
  out.order.resize(n);
#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < n; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    const auto& block = text.prompts[i];
    for (std::size_t k = 0; k < p; ++k) out.sims(ii, static_cast<Eigen::Index>(k)) = block.row(static_cast<Eigen::Index>(k)).dot(image_prototypes.row(ii));
    auto& order = out.order[i];
    order.resize(p);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return out.sims(ii, static_cast<Eigen::Index>(a)) > out.sims(ii, static_cast<Eigen::Index>(b));
    });
  }
  return out;
}

RetainedSet select_top_beta(const SimilarityWeights& weights, int beta) {
  const auto p = static_cast<int>(weights.sims.cols());
  if (beta < 0 || beta > 2 * p)
    throw ConfigError("beta " + std::to_string(beta) + " outside [0, " + std::to_string(2 * p) + "]");
  RetainedSet out(weights.order.size());
  const int repeated = std::max(0, beta - p);
  for (std::size_t i = 0; i < weights.order.size(); ++i) {
    const auto& order = weights.order[i];
    auto& kept = out[i];
    kept.reserve(static_cast<std::size_t>(beta));
    const int distinct = std::min(beta, p);
    for (int r = 0; r < distinct; ++r) {
      const std::size_t prompt = order[static_cast<std::size_t>(r)];
      const double w = weights.sims(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(prompt));
      kept.push_back({prompt, w});
      if (r < repeated) kept.push_back({prompt, w});
    }
  }
  return out;
}

ClassBank build_tgi_features(const ClassBank& support, const TextFeatureBank& text, const RetainedSet& retained) {
  if (support.size() != text.classes() || retained.size() != text.classes())
    throw DataError("build_tgi_features: class counts disagree");
  const std::size_t beta = retained.empty() ? 0 : retained[0].size();
  ClassBank out(support.size());
  for (std::size_t i = 0; i < support.size(); ++i) {
    if (retained[i].size() != beta) throw DataError("build_tgi_features: inconsistent retained count for class " + std::to_string(i));
    const auto k = support[i].rows();
    Matrix block(k + static_cast<Eigen::Index>(beta), support[i].cols());
    block.topRows(k) = support[i];
    for (std::size_t r = 0; r < beta; ++r) {
      const auto& kept = retained[i][r];
      block.row(k + static_cast<Eigen::Index>(r)) = kept.weight * text.prompts[i].row(static_cast<Eigen::Index>(kept.prompt));
    }
    out[i] = std::move(block);
  }
  return out;
}

ClassBank tgi_features(const ImageSupportBank& support, const TextFeatureBank& text, int beta) {
  const auto weights = prompt_image_similarity(text, support.prototypes);
  return build_tgi_features(support.shots, text, select_top_beta(weights, beta));
}

}  // namespace timo
