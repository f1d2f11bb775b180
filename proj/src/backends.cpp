#include "timo/backends.hpp"

#include <cmath>
#include <numeric>

#include "timo/errors.hpp"
#include "timo/features.hpp"
#include "timo/kernels.hpp"

namespace timo {

BackendKind parse_backend_kind(const std::string& name) {
  if (name == "cache") return BackendKind::cache;
  if (name == "gda") return BackendKind::gda;
  throw ConfigError("unknown backend kind '" + name + "' (expected cache or gda)");
}

const char* to_string(BackendKind kind) { return kind == BackendKind::cache ? "cache" : "gda"; }

Matrix CacheModel::values() const {
  Matrix v = Matrix::Zero(keys.rows(), static_cast<Eigen::Index>(classes));
  for (std::size_t k = 0; k < key_labels.size(); ++k) v(static_cast<Eigen::Index>(k), key_labels[k]) = 1.0;
  return v;
}

CacheModel fit_cache(const ClassBank& samples, double sharpness, double mix) {
  if (samples.empty()) throw DataError("fit_cache: no classes");
  if (!(sharpness > 0.0)) throw ConfigError("cache sharpness must be positive");
  if (!(mix >= 0.0)) throw ConfigError("cache mix must be non-negative");
  CacheModel m;
  m.classes = samples.size();
  m.sharpness = sharpness;
  m.mix = mix;
  const auto dim = samples[0].cols();
  m.keys.resize(static_cast<Eigen::Index>(total_rows(samples)), dim);
  Eigen::Index row = 0;
  for (std::size_t c = 0; c < samples.size(); ++c) {
    if (samples[c].rows() == 0) throw DataError("fit_cache: class " + std::to_string(c) + " has no samples");
    if (samples[c].cols() != dim) throw DataError("fit_cache: feature dimension mismatch");
    m.keys.middleRows(row, samples[c].rows()) = samples[c];
    row += samples[c].rows();
    m.key_labels.insert(m.key_labels.end(), static_cast<std::size_t>(samples[c].rows()), static_cast<int>(c));
  }
  normalize_rows(m.keys);
  return m;
}

Vector cache_logits(const CacheModel& model, const Vector& query) {
  Matrix q = query.transpose();
  return cache_logits(model, q).row(0).transpose();
}

Matrix cache_logits(const CacheModel& model, const Matrix& queries) {
  return kernels::parallel::cache_scores(queries, model.keys, model.key_labels, model.classes, model.sharpness);
}

GdaModel fit_gda(const ClassBank& samples, double shrinkage, const std::vector<double>& priors) {
  if (samples.empty()) throw DataError("fit_gda: no classes");
  if (!(shrinkage >= 0.0 && shrinkage <= 1.0)) throw ConfigError("GDA shrinkage must lie in [0, 1]");
  const std::size_t total = total_rows(samples);
  if (total < 2) throw DataError("fit_gda: need at least two samples");
  const auto n = static_cast<Eigen::Index>(samples.size());
  const auto dim = samples[0].cols();

  GdaModel m;
  m.means.resize(n, dim);
  for (Eigen::Index c = 0; c < n; ++c) {
    const auto& block = samples[static_cast<std::size_t>(c)];
    if (block.rows() == 0) throw DataError("fit_gda: class " + std::to_string(c) + " has no samples");
    if (block.cols() != dim) throw DataError("fit_gda: feature dimension mismatch");
    Vector sum = Vector::Zero(dim);
    for (Eigen::Index s = 0; s < block.rows(); ++s) sum += block.row(s).transpose();
    m.means.row(c) = (sum / static_cast<double>(block.rows())).transpose();
  }

  Matrix cov = kernels::parallel::pooled_scatter(samples, m.means) / static_cast<double>(total);
  const double floor = shrinkage * cov.trace() / static_cast<double>(dim) + kCovarianceFloor;
  Matrix regularized = (1.0 - shrinkage) * cov;
  regularized.diagonal().array() += floor;

  Eigen::LLT<Matrix> llt(regularized);
  if (llt.info() != Eigen::Success) throw ConfigError("fit_gda: regularized covariance is not positive definite");
  m.precision = llt.solve(Matrix::Identity(dim, dim));
  m.precision = (0.5 * (m.precision + m.precision.transpose())).eval();

  if (priors.empty()) {
    m.priors = Vector::Constant(n, 1.0 / static_cast<double>(n));
  } else {
    if (priors.size() != samples.size()) throw ConfigError("fit_gda: prior count mismatch");
    m.priors = Eigen::Map<const Vector>(priors.data(), n);
    if ((m.priors.array() < 0.0).any()) throw ConfigError("fit_gda: priors must be non-negative");
    if (std::abs(m.priors.sum() - 1.0) > 1e-9) throw ConfigError("fit_gda: priors must sum to 1");
  }

  m.weights = m.means * m.precision;
  m.bias.resize(n);
  for (Eigen::Index c = 0; c < n; ++c) {
    m.bias[c] = -0.5 * m.weights.row(c).dot(m.means.row(c)) + std::log(m.priors[c]);
  }
  return m;
}

Vector gda_logits(const GdaModel& model, const Vector& query) {
  Matrix q = query.transpose();
  return gda_logits(model, q).row(0).transpose();
}

Matrix gda_logits(const GdaModel& model, const Matrix& queries) {
  return kernels::parallel::affine_scores(queries, model.weights, model.bias);
}

Vector ImageClassifier::classify(const Vector& query) const {
  Matrix q = query.transpose();
  return classify(q).row(0).transpose();
}

Matrix ImageClassifier::classify(const Matrix& queries) const {
  if (const auto* c = cache()) return c->mix * cache_logits(*c, queries);
  return gda_logits(*gda(), queries);
}

ImageClassifier build_image_classifier(BackendKind kind, const ClassBank& samples, const BackendParams& params) {
  switch (kind) {
    case BackendKind::cache: return ImageClassifier(fit_cache(samples, params.sharpness, params.mix));
    case BackendKind::gda: return ImageClassifier(fit_gda(samples, params.shrinkage, params.priors));
  }
  throw ConfigError("unknown backend kind");
}

}  // namespace timo
