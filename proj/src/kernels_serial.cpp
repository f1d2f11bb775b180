#include <cmath>
#include <stdexcept>

#include "timo/kernels.hpp"

namespace timo::kernels::serial {

Matrix dot_scores(const Matrix& queries, const Matrix& rows, double scale) {
  const Eigen::Index nq = queries.rows(), nr = rows.rows(), dim = queries.cols();
  Matrix out(nq, nr);
  for (Eigen::Index q = 0; q < nq; ++q) {
    const double* qp = queries.row(q).data();
    for (Eigen::Index i = 0; i < nr; ++i) {
      const double* wp = rows.row(i).data();
      double dot = 0.0;
      for (Eigen::Index d = 0; d < dim; ++d) dot += wp[d] * qp[d];
      out(q, i) = scale * dot;
    }
  }
  return out;
}

Matrix affine_scores(const Matrix& queries, const Matrix& weights, const Vector& bias) {
  const Eigen::Index nq = queries.rows(), nr = weights.rows(), dim = queries.cols();
  Matrix out(nq, nr);
  for (Eigen::Index q = 0; q < nq; ++q) {
    const double* qp = queries.row(q).data();
    for (Eigen::Index i = 0; i < nr; ++i) {
      const double* wp = weights.row(i).data();
      double dot = 0.0;
      for (Eigen::Index d = 0; d < dim; ++d) dot += wp[d] * qp[d];
      out(q, i) = dot + bias[i];
    }
  }
  return out;
}

Matrix cache_scores(const Matrix& queries, const Matrix& keys, std::span<const int> key_labels, std::size_t classes,
                    double sharpness) {
  const Eigen::Index nq = queries.rows(), nk = keys.rows(), dim = queries.cols();
  Matrix out = Matrix::Zero(nq, static_cast<Eigen::Index>(classes));
  for (Eigen::Index q = 0; q < nq; ++q) {
    const double* qp = queries.row(q).data();
    for (Eigen::Index k = 0; k < nk; ++k) {
      const double* kp = keys.row(k).data();
      double affinity = 0.0;
      for (Eigen::Index d = 0; d < dim; ++d) affinity += kp[d] * qp[d];
      out(q, key_labels[static_cast<std::size_t>(k)]) += std::exp(-sharpness * (1.0 - affinity));
    }
  }
  return out;
}

Matrix pooled_scatter(const ClassBank& samples, const Matrix& means) {
  const Eigen::Index dim = means.cols();
  Matrix out = Matrix::Zero(dim, dim);
  for (std::size_t c = 0; c < samples.size(); ++c) {
    const auto& block = samples[c];
    for (Eigen::Index s = 0; s < block.rows(); ++s) {
      for (Eigen::Index a = 0; a < dim; ++a) {
        const double xa = block(s, a) - means(static_cast<Eigen::Index>(c), a);
        for (Eigen::Index b = 0; b <= a; ++b) {
          out(a, b) += xa * (block(s, b) - means(static_cast<Eigen::Index>(c), b));
        }
      }
    }
  }
  for (Eigen::Index a = 0; a < dim; ++a)
    for (Eigen::Index b = a + 1; b < dim; ++b) out(a, b) = out(b, a);
  return out;
}

std::vector<int> argmax_rows(const Matrix& scores) {
  std::vector<int> out(static_cast<std::size_t>(scores.rows()), 0);
  for (Eigen::Index q = 0; q < scores.rows(); ++q) {
    Eigen::Index best = 0;
    for (Eigen::Index i = 1; i < scores.cols(); ++i)
      if (scores(q, i) > scores(q, best)) best = i;
    out[static_cast<std::size_t>(q)] = static_cast<int>(best);
  }
  return out;
}

std::size_t count_correct(const Matrix& image, const Matrix& text, double alpha, std::span<const int> labels) {
  if (image.rows() != text.rows() || image.cols() != text.cols())
    throw std::invalid_argument("count_correct: branch shapes differ");
  std::size_t correct = 0;
  for (Eigen::Index q = 0; q < image.rows(); ++q) {
    Eigen::Index best = 0;
    double best_value = image(q, 0) + alpha * text(q, 0);
    for (Eigen::Index i = 1; i < image.cols(); ++i) {
      const double v = image(q, i) + alpha * text(q, i);
      if (v > best_value) {
        best_value = v;
        best = i;
      }
    }
    if (best == labels[static_cast<std::size_t>(q)]) ++correct;
  }
  return correct;
}

}  // namespace timo::kernels::serial
