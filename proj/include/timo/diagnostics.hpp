#pragma once

// Analysis statistics: anomalous prototype matches, prompt quality ranking and half-split
// prototypes, the Q-statistic for classifier diversity, and the Kruskal-Wallis H test.

#include <cstddef>
#include <string>
#include <vector>

#include "timo/features.hpp"
#include "timo/types.hpp"

namespace timo {

struct AnomalyMode {
  enum class Kind { relative, threshold } kind = Kind::relative;
  double threshold = 0.0;

  static AnomalyMode relative() { return {}; }
  static AnomalyMode above(double t) { return {Kind::threshold, t}; }
  /// "relative" or "threshold(<t>)".
  static AnomalyMode parse(const std::string& s);
  std::string label() const;
};

struct AnomalyReport {
  AnomalyMode mode;
  std::vector<std::size_t> counts;      // per prototype class
  std::vector<std::size_t> foreign;     // samples from other classes each count is drawn from
  std::size_t total() const;
};

/// Sample x of class j is an anomalous match for prototype i != j when <x, W[i]> exceeds
/// <x, W[j]> (relative) or the threshold.
AnomalyReport anomalous_matches(const Matrix& prototypes, const ClassBank& samples_by_class,
                                const AnomalyMode& mode = AnomalyMode::relative());

struct RankedPrompt {
  std::size_t prompt;
  double similarity;
};

struct PromptQuality {
  std::vector<std::vector<RankedPrompt>> ranked;  // per class, descending similarity
};

PromptQuality prompt_quality(const TextFeatureBank& text, const Matrix& image_prototypes);

enum class PromptHalf { best, worst, all };
PromptHalf parse_prompt_half(const std::string& s);

/// Prototypes from the best ceil(P/2) prompts, the remaining worst prompts, or all.
PrototypeSet split_prototypes(const TextFeatureBank& text, const PromptQuality& quality, PromptHalf half);

struct QStatistic {
  double value = 0.0;
  bool defined = false;
  std::size_t both_correct = 0, both_wrong = 0, only_a = 0, only_b = 0;
};

QStatistic q_statistic(const std::vector<int>& preds_a, const std::vector<int>& preds_b, const std::vector<int>& labels);

struct KruskalWallis {
  double h = 0.0;
  double p_value = 1.0;
  std::size_t dof = 0;
};

KruskalWallis kruskal_wallis(const std::vector<std::vector<double>>& groups);

/// Regularized upper incomplete gamma Q(a, x), by series for x < a + 1 and Lentz continued
/// fraction otherwise.
double regularized_gamma_q(double a, double x);

/// Upper tail of the chi-squared distribution.
double chi_squared_survival(double x, double dof);

}  // namespace timo
