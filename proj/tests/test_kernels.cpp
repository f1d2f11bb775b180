#include <doctest.h>

#include "test_util.hpp"
#include "timo/kernels.hpp"

using namespace timo;
namespace ks = timo::kernels::serial;
namespace kp = timo::kernels::parallel;

namespace {

struct Problem {
  Matrix queries, rows, keys;
  Vector bias;
  std::vector<int> key_labels, labels;
  ClassBank samples;
  Matrix means;
  std::size_t classes;
};

Problem make_problem(std::uint64_t seed) {
  SplitMix64 rng(seed);
  Problem p;
  p.classes = 2 + rng.below(12);
  const auto n = static_cast<Eigen::Index>(p.classes);
  const auto d = static_cast<Eigen::Index>(3 + rng.below(40));
  const auto q = static_cast<Eigen::Index>(1 + rng.below(60));
  p.queries = timo::testing::random_unit_rows(rng, q, d);
  p.rows = timo::testing::random_unit_rows(rng, n, d);
  p.bias = Vector(n);
  for (Eigen::Index i = 0; i < n; ++i) p.bias[i] = rng.normal();
  p.means = Matrix(n, d);
  for (std::size_t c = 0; c < p.classes; ++c) {
    const auto k = static_cast<Eigen::Index>(1 + rng.below(6));
    Matrix block = timo::testing::random_unit_rows(rng, k, d);
    p.means.row(static_cast<Eigen::Index>(c)) = block.colwise().mean();
    p.samples.push_back(block);
    for (Eigen::Index r = 0; r < k; ++r) p.key_labels.push_back(static_cast<int>(c));
  }
  p.keys = Matrix(static_cast<Eigen::Index>(p.key_labels.size()), d);
  Eigen::Index r = 0;
  for (const auto& block : p.samples) {
    p.keys.middleRows(r, block.rows()) = block;
    r += block.rows();
  }
  for (Eigen::Index i = 0; i < q; ++i) p.labels.push_back(static_cast<int>(rng.below(p.classes)));
  return p;
}

}  // namespace

TEST_CASE("property: parallel score kernels are bitwise equal to the serial reference") {
  for (int threads : {1, 2, 4}) {
    kernels::set_thread_limit(threads);
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
      const auto p = make_problem(seed);
      CHECK(kp::dot_scores(p.queries, p.rows, 100.0) == ks::dot_scores(p.queries, p.rows, 100.0));
      CHECK(kp::affine_scores(p.queries, p.rows, p.bias) == ks::affine_scores(p.queries, p.rows, p.bias));
      CHECK(kp::cache_scores(p.queries, p.keys, p.key_labels, p.classes, 5.5) ==
            ks::cache_scores(p.queries, p.keys, p.key_labels, p.classes, 5.5));
      const Matrix image = ks::dot_scores(p.queries, p.rows, 1.0);
      const Matrix text = ks::affine_scores(p.queries, p.rows, p.bias);
      CHECK(kp::argmax_rows(image) == ks::argmax_rows(image));
      for (double alpha : {1e-4, 1.0, 1e4})
        CHECK(kp::count_correct(image, text, alpha, p.labels) == ks::count_correct(image, text, alpha, p.labels));
    }
  }
  kernels::set_thread_limit(0);
}

TEST_CASE("property: parallel scatter agrees with the reference to rounding") {
  for (std::uint64_t seed = 100; seed < 140; ++seed) {
    const auto p = make_problem(seed);
    const Matrix a = kp::pooled_scatter(p.samples, p.means);
    const Matrix b = ks::pooled_scatter(p.samples, p.means);
    CHECK((a - b).cwiseAbs().maxCoeff() <= 1e-10 * std::max(1.0, b.cwiseAbs().maxCoeff()));
    CHECK(a == a.transpose());
  }
}

TEST_CASE("argmax ties resolve to the lowest index") {
  Matrix s(2, 3);
  s << 1, 1, 0, 0, 2, 2;
  CHECK(ks::argmax_rows(s) == std::vector<int>{0, 1});
  CHECK(kp::argmax_rows(s) == std::vector<int>{0, 1});
}

TEST_CASE("count_correct fuses with alpha") {
  Matrix image(2, 2), text(2, 2);
  image << 1, 0, 1, 0;
  text << 0, 2, 0, 2;
  const std::vector<int> labels{0, 1};
  CHECK(ks::count_correct(image, text, 0.0, labels) == 1);
  CHECK(ks::count_correct(image, text, 1.0, labels) == 1);
  // alpha = 0.5 gives [1, 1] in both rows, which resolves to class 0.
  CHECK(ks::count_correct(image, text, 0.5, labels) == 1);
  CHECK(kp::count_correct(image, text, 0.5, std::vector<int>{0, 0}) == 2);
}

TEST_CASE("parallel scatter does not depend on the team size") {
  SplitMix64 rng(5);
  ClassBank samples;
  Matrix means(30, 24);
  for (int c = 0; c < 30; ++c) {
    samples.push_back(timo::testing::random_unit_rows(rng, 40, 24));
    means.row(c) = samples.back().colwise().mean();
  }
  kernels::set_thread_limit(1);
  const Matrix one = kp::pooled_scatter(samples, means);
  kernels::set_thread_limit(4);
  const Matrix four = kp::pooled_scatter(samples, means);
  kernels::set_thread_limit(0);
  CHECK(one == four);
}
