#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include <omp.h>

#include "timo/kernels.hpp"

namespace timo::kernels {

void set_thread_limit(int threads) {
  omp_set_num_threads(threads > 0 ? threads : omp_get_num_procs());
}

namespace parallel {

Matrix dot_scores(const Matrix& queries, const Matrix& rows, double scale) {
  const Eigen::Index nq = queries.rows(), nr = rows.rows(), dim = queries.cols();
  Matrix out(nq, nr);
#pragma omp parallel for schedule(static)
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
#pragma omp parallel for schedule(static)
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
#pragma omp parallel for schedule(static)
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
  std::vector<Eigen::Index> offsets{0};
  for (const auto& block : samples) offsets.push_back(offsets.back() + block.rows());
  const Eigen::Index total = offsets.back();

  Matrix centered(total, dim);
  const auto classes = static_cast<Eigen::Index>(samples.size());
#pragma omp parallel for schedule(static)
  for (Eigen::Index c = 0; c < classes; ++c)
    centered.middleRows(offsets[static_cast<std::size_t>(c)], samples[static_cast<std::size_t>(c)].rows()) =
        samples[static_cast<std::size_t>(c)].rowwise() - means.row(c);

  // Fixed chunking keeps the summation order, and so the result, independent of the team size.
  constexpr Eigen::Index kChunk = 512;
  const Eigen::Index chunks = (total + kChunk - 1) / kChunk;
  std::vector<Matrix> partial(static_cast<std::size_t>(chunks));
#pragma omp parallel for schedule(dynamic)
  for (Eigen::Index k = 0; k < chunks; ++k) {
    const Eigen::Index begin = k * kChunk, rows = std::min(kChunk, total - begin);
    Matrix s = Matrix::Zero(dim, dim);
    s.selfadjointView<Eigen::Lower>().rankUpdate(centered.middleRows(begin, rows).transpose());
    partial[static_cast<std::size_t>(k)] = std::move(s);
  }
  Matrix out = Matrix::Zero(dim, dim);
  for (const auto& s : partial) out.triangularView<Eigen::Lower>() += s;
  Matrix full = out.selfadjointView<Eigen::Lower>();
  return full;
}

std::vector<int> argmax_rows(const Matrix& scores) {
  std::vector<int> out(static_cast<std::size_t>(scores.rows()), 0);
#pragma omp parallel for schedule(static)
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
  long long correct = 0;
#pragma omp parallel for schedule(static) reduction(+ : correct)
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
  return static_cast<std::size_t>(correct);
}

}  // namespace parallel
}  // namespace timo::kernels
