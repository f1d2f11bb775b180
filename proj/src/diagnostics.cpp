#include "timo/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "timo/errors.hpp"
#include "timo/tgi.hpp"

namespace timo {

AnomalyMode AnomalyMode::parse(const std::string& s) {
  if (s == "relative") return relative();
  const std::string prefix = "threshold(";
  if (s.starts_with(prefix) && s.ends_with(")")) {
    const std::string body = s.substr(prefix.size(), s.size() - prefix.size() - 1);
    try {
      std::size_t used = 0;
      const double t = std::stod(body, &used);
      if (used == body.size()) return above(t);
    } catch (const std::exception&) {
    }
  }
  throw ConfigError("invalid anomaly mode '" + s + "' (expected relative or threshold(<t>))");
}

std::string AnomalyMode::label() const {
  if (kind == Kind::relative) return "relative";
  std::ostringstream ss;
  ss << "threshold(" << threshold << ")";
  return ss.str();
}

std::size_t AnomalyReport::total() const { return std::accumulate(counts.begin(), counts.end(), std::size_t{0}); }

AnomalyReport anomalous_matches(const Matrix& prototypes, const ClassBank& samples_by_class, const AnomalyMode& mode) {
  const auto n = static_cast<std::size_t>(prototypes.rows());
  if (samples_by_class.size() != n) throw DataError("anomalous_matches: class count mismatch");
  AnomalyReport report{mode, std::vector<std::size_t>(n, 0), std::vector<std::size_t>(n, 0)};
  const std::size_t all = total_rows(samples_by_class);
  for (std::size_t i = 0; i < n; ++i) report.foreign[i] = all - static_cast<std::size_t>(samples_by_class[i].rows());

  for (std::size_t j = 0; j < n; ++j) {
    const Matrix sims = samples_by_class[j] * prototypes.transpose();  // samples x N
    for (Eigen::Index s = 0; s < sims.rows(); ++s) {
      const double own = sims(s, static_cast<Eigen::Index>(j));
      for (std::size_t i = 0; i < n; ++i) {
        if (i == j) continue;
        const double other = sims(s, static_cast<Eigen::Index>(i));
        const bool hit = mode.kind == AnomalyMode::Kind::relative ? other > own : other > mode.threshold;
        if (hit) ++report.counts[i];
      }
    }
  }
  return report;
}

PromptQuality prompt_quality(const TextFeatureBank& text, const Matrix& image_prototypes) {
  const auto weights = prompt_image_similarity(text, image_prototypes);
  PromptQuality q;
  q.ranked.resize(text.classes());
  for (std::size_t i = 0; i < text.classes(); ++i) {
    for (std::size_t p : weights.order[i])
      q.ranked[i].push_back({p, weights.sims(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(p))});
  }
  return q;
}

PromptHalf parse_prompt_half(const std::string& s) {
  if (s == "best") return PromptHalf::best;
  if (s == "worst") return PromptHalf::worst;
  if (s == "all") return PromptHalf::all;
  throw ConfigError("invalid prompt half '" + s + "'");
}

PrototypeSet split_prototypes(const TextFeatureBank& text, const PromptQuality& quality, PromptHalf half) {
  if (half == PromptHalf::all) return text_prototypes(text);
  const std::size_t p = text.prompts_per_class();
  const std::size_t best_count = (p + 1) / 2;
  if (half == PromptHalf::worst && best_count == p) throw DataError("split_prototypes: P = 1 has no worst half");
  ClassBank selected(text.classes());
  for (std::size_t i = 0; i < text.classes(); ++i) {
    const auto& ranked = quality.ranked[i];
    const std::size_t begin = half == PromptHalf::best ? 0 : best_count;
    const std::size_t end = half == PromptHalf::best ? best_count : p;
    std::vector<std::size_t> prompts;
    for (std::size_t r = begin; r < end; ++r) prompts.push_back(ranked[r].prompt);
    std::sort(prompts.begin(), prompts.end());
    selected[i].resize(static_cast<Eigen::Index>(prompts.size()), static_cast<Eigen::Index>(text.dim()));
    for (std::size_t r = 0; r < prompts.size(); ++r)
      selected[i].row(static_cast<Eigen::Index>(r)) = text.prompts[i].row(static_cast<Eigen::Index>(prompts[r]));
  }
  return class_mean_prototypes(selected);
}

QStatistic q_statistic(const std::vector<int>& preds_a, const std::vector<int>& preds_b, const std::vector<int>& labels) {
  if (preds_a.size() != preds_b.size() || preds_a.size() != labels.size())
    throw DataError("q_statistic: prediction and label lengths differ");
  QStatistic q;
  for (std::size_t s = 0; s < labels.size(); ++s) {
    const bool a = preds_a[s] == labels[s];
    const bool b = preds_b[s] == labels[s];
    if (a && b) ++q.both_correct;
    else if (!a && !b) ++q.both_wrong;
    else if (a) ++q.only_a;
    else ++q.only_b;
  }
  const double agree = static_cast<double>(q.both_correct) * static_cast<double>(q.both_wrong);
  const double disagree = static_cast<double>(q.only_a) * static_cast<double>(q.only_b);
  if (agree + disagree > 0.0) {
    q.value = (agree - disagree) / (agree + disagree);
    q.defined = true;
  }
  return q;
}

KruskalWallis kruskal_wallis(const std::vector<std::vector<double>>& groups) {
  if (groups.size() < 2) throw DataError("kruskal_wallis: need at least two groups");
  struct Item {
    double value;
    std::size_t group;
  };
  std::vector<Item> items;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    if (groups[g].empty()) throw DataError("kruskal_wallis: group " + std::to_string(g) + " is empty");
    for (double v : groups[g]) items.push_back({v, g});
  }
  std::stable_sort(items.begin(), items.end(), [](const Item& a, const Item& b) { return a.value < b.value; });

  const auto m = static_cast<double>(items.size());
  std::vector<double> rank_sum(groups.size(), 0.0);
  double tie_term = 0.0;
  for (std::size_t i = 0; i < items.size();) {
    std::size_t j = i;
    while (j < items.size() && items[j].value == items[i].value) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1..j
    for (std::size_t k = i; k < j; ++k) rank_sum[items[k].group] += avg_rank;
    const auto t = static_cast<double>(j - i);
    tie_term += t * t * t - t;
    i = j;
  }

  double spread = 0.0;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const auto ng = static_cast<double>(groups[g].size());
    const double mean_rank = rank_sum[g] / ng;
    spread += ng * (mean_rank - 0.5 * (m + 1.0)) * (mean_rank - 0.5 * (m + 1.0));
  }
  KruskalWallis out;
  out.dof = groups.size() - 1;
  const double correction = 1.0 - tie_term / (m * m * m - m);
  if (correction <= 0.0) return out;  // every value identical
  out.h = 12.0 / (m * (m + 1.0)) * spread / correction;
  out.p_value = chi_squared_survival(out.h, static_cast<double>(out.dof));
  return out;
}

namespace {

double gamma_p_series(double a, double x) {
  double term = 1.0 / a;
  double sum = term;
  for (int n = 1; n < 10000; ++n) {
    term *= x / (a + n);
    sum += term;
    if (std::abs(term) < std::abs(sum) * 1e-16) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

double gamma_q_continued_fraction(double a, double x) {
  constexpr double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < 10000; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < 1e-16) break;
  }
  return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

}  // namespace

double regularized_gamma_q(double a, double x) {
  if (!(a > 0.0)) throw std::invalid_argument("regularized_gamma_q: a must be positive");
  if (x <= 0.0) return 1.0;
  if (x < a + 1.0) return 1.0 - gamma_p_series(a, x);
  return gamma_q_continued_fraction(a, x);
}

double chi_squared_survival(double x, double dof) { return regularized_gamma_q(0.5 * dof, 0.5 * x); }

}  // namespace timo
