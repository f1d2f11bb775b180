#include "timo/features.hpp"

#include <string>

#include "timo/errors.hpp"
#include "timo/kernels.hpp"

namespace timo {

Normalized l2_normalize(const Vector& v) {
  const double norm = v.norm();
  if (!(norm > kDegenerateNorm)) return {v, true};
  return {v / norm, false};
}

std::vector<bool> normalize_rows(Matrix& rows) {
  std::vector<bool> degenerate(static_cast<std::size_t>(rows.rows()), false);
  for (Eigen::Index r = 0; r < rows.rows(); ++r) {
    const double norm = rows.row(r).norm();
    if (norm > kDegenerateNorm) {
      rows.row(r) /= norm;
    } else {
      degenerate[static_cast<std::size_t>(r)] = true;
    }
  }
  return degenerate;
}

namespace {

void check_rectangular(const ClassBank& bank, const char* what) {
  if (bank.empty()) throw DataError(std::string(what) + ": no classes");
  const auto rows = bank[0].rows();
  const auto cols = bank[0].cols();
  if (rows < 1 || cols < 1) throw DataError(std::string(what) + ": empty class block");
  for (std::size_t i = 1; i < bank.size(); ++i) {
    if (bank[i].rows() != rows || bank[i].cols() != cols) {
      throw DataError(std::string(what) + ": class " + std::to_string(i) + " has shape " +
                      std::to_string(bank[i].rows()) + "x" + std::to_string(bank[i].cols()) + ", expected " +
                      std::to_string(rows) + "x" + std::to_string(cols));
    }
  }
}

}  // namespace

TextFeatureBank TextFeatureBank::from_raw(ClassBank prompts, std::vector<std::vector<std::string>> texts) {
  check_rectangular(prompts, "text bank");
  for (auto& block : prompts) normalize_rows(block);
  if (!texts.empty()) {
    if (texts.size() != prompts.size()) throw DataError("prompt_texts: class count mismatch");
    for (const auto& row : texts) {
      if (row.size() != static_cast<std::size_t>(prompts[0].rows())) throw DataError("prompt_texts: prompt count mismatch");
    }
  }
  return {std::move(prompts), std::move(texts)};
}

ImageSupportBank ImageSupportBank::from_raw(ClassBank shots) {
  check_rectangular(shots, "support bank");
  for (auto& block : shots) normalize_rows(block);
  auto protos = image_prototypes(shots);
  return {std::move(shots), std::move(protos.weights), std::move(protos.degenerate)};
}

QueryBatch QueryBatch::from_raw(Matrix features, std::vector<int> labels, std::size_t classes) {
  if (!labels.empty() && labels.size() != static_cast<std::size_t>(features.rows())) {
    throw DataError("query batch: " + std::to_string(labels.size()) + " labels for " +
                    std::to_string(features.rows()) + " rows");
  }
  for (int label : labels) {
    if (label < 0 || static_cast<std::size_t>(label) >= classes) {
      throw DataError("query batch: label " + std::to_string(label) + " outside [0, " + std::to_string(classes) + ")");
    }
  }
  normalize_rows(features);
  return {std::move(features), std::move(labels)};
}

PrototypeSet class_mean_prototypes(const ClassBank& bank) {
  PrototypeSet out;
  if (bank.empty()) return out;
  const auto dim = bank[0].cols();
  out.weights.resize(static_cast<Eigen::Index>(bank.size()), dim);
  out.degenerate.assign(bank.size(), false);
  for (std::size_t i = 0; i < bank.size(); ++i) {
    const auto& block = bank[i];
    Vector mean = Vector::Zero(dim);
    for (Eigen::Index r = 0; r < block.rows(); ++r) mean += block.row(r).transpose();
    if (block.rows() > 0) mean /= static_cast<double>(block.rows());
    auto n = l2_normalize(mean);
    out.weights.row(static_cast<Eigen::Index>(i)) = n.value.transpose();
    out.degenerate[i] = n.degenerate;
  }
  return out;
}

Vector cosine_logits(const PrototypeSet& prototypes, const Vector& query, double scale) {
  const Vector q = l2_normalize(query).value;
  Vector out(prototypes.weights.rows());
  for (Eigen::Index i = 0; i < prototypes.weights.rows(); ++i) {
    const Vector w = l2_normalize(prototypes.weights.row(i).transpose()).value;
    double dot = 0.0;
    for (Eigen::Index d = 0; d < q.size(); ++d) dot += w[d] * q[d];
    out[i] = scale * dot;
  }
  return out;
}

Matrix cosine_logits(const PrototypeSet& prototypes, const Matrix& queries, double scale) {
  Matrix w = prototypes.weights;
  normalize_rows(w);
  Matrix q = queries;
  normalize_rows(q);
  return kernels::parallel::dot_scores(q, w, scale);
}

ClassBank group_by_class(const QueryBatch& batch, std::size_t classes) {
  std::vector<std::vector<Eigen::Index>> rows(classes);
  for (std::size_t r = 0; r < batch.labels.size(); ++r) rows[static_cast<std::size_t>(batch.labels[r])].push_back(static_cast<Eigen::Index>(r));
  ClassBank out(classes);
  for (std::size_t c = 0; c < classes; ++c) {
    out[c].resize(static_cast<Eigen::Index>(rows[c].size()), batch.features.cols());
    for (std::size_t k = 0; k < rows[c].size(); ++k) out[c].row(static_cast<Eigen::Index>(k)) = batch.features.row(rows[c][k]);
  }
  return out;
}

}  // namespace timo
