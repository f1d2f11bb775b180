#pragma once

// Dense scoring kernels in two builds: a plain serial reference and an OpenMP build.
// Both produce every output entry with the same inner loop order, so for the score
// kernels the parallel results are bitwise equal to the serial ones. The scatter kernel
// uses blocked products in the parallel build and agrees with the reference to rounding.

#include <cstddef>
#include <span>
#include <vector>

#include "timo/types.hpp"

namespace timo::kernels {

namespace serial {

/// out(q, i) = scale * <queries[q], rows[i]>.  Q x N.
Matrix dot_scores(const Matrix& queries, const Matrix& rows, double scale);

/// out(q, i) = <queries[q], weights[i]> + bias[i].
Matrix affine_scores(const Matrix& queries, const Matrix& weights, const Vector& bias);

/// out(q, c) = sum over keys k of class c of exp(-sharpness * (1 - <keys[k], queries[q]>)).
Matrix cache_scores(const Matrix& queries, const Matrix& keys, std::span<const int> key_labels, std::size_t classes,
                    double sharpness);

/// Sum over classes and samples of (x - mean_c)(x - mean_c)^T.  D x D.
Matrix pooled_scatter(const ClassBank& samples, const Matrix& means);

/// Index of the row maximum; ties resolve to the lowest index.
std::vector<int> argmax_rows(const Matrix& scores);

/// Number of rows whose argmax of (image + alpha * text) equals the label.
std::size_t count_correct(const Matrix& image, const Matrix& text, double alpha, std::span<const int> labels);

}  // namespace serial

namespace parallel {

Matrix dot_scores(const Matrix& queries, const Matrix& rows, double scale);
Matrix affine_scores(const Matrix& queries, const Matrix& weights, const Vector& bias);
Matrix cache_scores(const Matrix& queries, const Matrix& keys, std::span<const int> key_labels, std::size_t classes,
                    double sharpness);
Matrix pooled_scatter(const ClassBank& samples, const Matrix& means);
std::vector<int> argmax_rows(const Matrix& scores);
std::size_t count_correct(const Matrix& image, const Matrix& text, double alpha, std::span<const int> labels);

}  // namespace parallel

/// Caps the OpenMP team size; 0 restores the runtime default.
void set_thread_limit(int threads);

}  // namespace timo::kernels
