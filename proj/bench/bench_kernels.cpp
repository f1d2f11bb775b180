// Serial reference vs OpenMP kernels at TIMO-S scale (N=100, P=25, K=16, D=512).

#include <chrono>
#include <cstdio>
#include <functional>
#include <omp.h>

#include "timo/kernels.hpp"
#include "timo/rng.hpp"

using namespace timo;
namespace ks = timo::kernels::serial;
namespace kp = timo::kernels::parallel;

namespace {

Matrix random_rows(SplitMix64& rng, Eigen::Index n, Eigen::Index d) {
  Matrix m(n, d);
  for (Eigen::Index r = 0; r < n; ++r) {
    for (Eigen::Index c = 0; c < d; ++c) m(r, c) = rng.normal();
    m.row(r).normalize();
  }
  return m;
}

double best_of(int reps, const std::function<void()>& f) {
  double best = 1e300;
  for (int i = 0; i < reps; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    f();
    best = std::min(best, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  }
  return best;
}

void report(const char* name, double serial, double parallel) {
  std::printf("%-16s serial %9.3f ms   parallel %9.3f ms   speedup %5.2fx\n", name, 1e3 * serial, 1e3 * parallel,
              serial / parallel);
}

}  // namespace

int main() {
  const Eigen::Index n = 100, k = 16 + 25, d = 512, q = 1000;
  SplitMix64 rng(0);
  const Matrix queries = random_rows(rng, q, d);
  const Matrix protos = random_rows(rng, n, d);
  Vector bias(n);
  for (Eigen::Index i = 0; i < n; ++i) bias[i] = rng.normal();
  ClassBank bank;
  Matrix means(n, d), keys(n * k, d);
  std::vector<int> key_labels, labels;
  for (Eigen::Index c = 0; c < n; ++c) {
    bank.push_back(random_rows(rng, k, d));
    means.row(c) = bank.back().colwise().mean();
    keys.middleRows(c * k, k) = bank.back();
    for (Eigen::Index r = 0; r < k; ++r) key_labels.push_back(static_cast<int>(c));
  }
  for (Eigen::Index i = 0; i < q; ++i) labels.push_back(static_cast<int>(rng.below(n)));
  const Matrix image = ks::dot_scores(queries, protos, 1.0);
  const Matrix text = ks::dot_scores(queries, protos, 100.0);

  std::printf("threads: %d\n", omp_get_max_threads());
  const int reps = 3;
  report("dot_scores", best_of(reps, [&] { ks::dot_scores(queries, protos, 100.0); }),
         best_of(reps, [&] { kp::dot_scores(queries, protos, 100.0); }));
  report("affine_scores", best_of(reps, [&] { ks::affine_scores(queries, protos, bias); }),
         best_of(reps, [&] { kp::affine_scores(queries, protos, bias); }));
  report("cache_scores", best_of(reps, [&] { ks::cache_scores(queries, keys, key_labels, n, 5.5); }),
         best_of(reps, [&] { kp::cache_scores(queries, keys, key_labels, n, 5.5); }));
  report("pooled_scatter", best_of(reps, [&] { ks::pooled_scatter(bank, means); }),
         best_of(reps, [&] { kp::pooled_scatter(bank, means); }));
  report("count_correct", best_of(reps, [&] { ks::count_correct(image, text, 0.1, labels); }),
         best_of(reps, [&] { kp::count_correct(image, text, 0.1, labels); }));
  return 0;
}
