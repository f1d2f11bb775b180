#pragma once

// Image classifier builders that accept any per-class sample bank: either raw support
// features or the text-augmented bank produced by TGI.

#include <string>
#include <variant>
#include <vector>

#include "timo/types.hpp"

namespace timo {

enum class BackendKind { cache, gda };

BackendKind parse_backend_kind(const std::string& name);
const char* to_string(BackendKind kind);

inline constexpr double kDefaultSharpness = 5.5;
inline constexpr double kDefaultShrinkage = 0.5;
inline constexpr double kCovarianceFloor = 1e-6;

// ---- cache classifier -------------------------------------------------------------------

struct CacheModel {
  Matrix keys;                   // M x D, unit rows, class-major
  std::vector<int> key_labels;   // M, class of each key
  std::size_t classes = 0;
  double sharpness = kDefaultSharpness;
  double mix = 1.0;

  /// M x N one-hot value matrix.
  Matrix values() const;
};

CacheModel fit_cache(const ClassBank& samples, double sharpness = kDefaultSharpness, double mix = 1.0);

/// Per class: sum of exp(-sharpness * (1 - <key, q>)) over that class's keys. No mix applied.
Vector cache_logits(const CacheModel& model, const Vector& query);
Matrix cache_logits(const CacheModel& model, const Matrix& queries);

// ---- Gaussian discriminant ----------------------------------------------------------------

struct GdaModel {
  Matrix means;      // N x D
  Matrix precision;  // D x D
  Vector priors;     // N
  // Derived linear form: logits = weights * q + bias.
  Matrix weights;    // N x D, means * precision
  Vector bias;       // N, -0.5 mu^T P mu + log prior
};

/// Pooled within-class covariance S = (1/M) sum (x - mu_c)(x - mu_c)^T, shrunk as
/// (1 - rho) S + (rho tr(S)/D + 1e-6) I, inverted by Cholesky. Empty `priors` means uniform.
GdaModel fit_gda(const ClassBank& samples, double shrinkage = kDefaultShrinkage, const std::vector<double>& priors = {});

Vector gda_logits(const GdaModel& model, const Vector& query);
Matrix gda_logits(const GdaModel& model, const Matrix& queries);

// ---- builder ---------------------------------------------------------------------------

struct BackendParams {
  double shrinkage = kDefaultShrinkage;
  double sharpness = kDefaultSharpness;
  double mix = 1.0;
  std::vector<double> priors;
};

class ImageClassifier {
 public:
  explicit ImageClassifier(CacheModel m) : model_(std::move(m)) {}
  explicit ImageClassifier(GdaModel m) : model_(std::move(m)) {}

  BackendKind kind() const { return std::holds_alternative<CacheModel>(model_) ? BackendKind::cache : BackendKind::gda; }

  /// Cache logits are scaled by the model's mix weight.
  Vector classify(const Vector& query) const;
  Matrix classify(const Matrix& queries) const;

  const CacheModel* cache() const { return std::get_if<CacheModel>(&model_); }
  const GdaModel* gda() const { return std::get_if<GdaModel>(&model_); }

 private:
  std::variant<CacheModel, GdaModel> model_;
};

ImageClassifier build_image_classifier(BackendKind kind, const ClassBank& samples, const BackendParams& params = {});

}  // namespace timo
