#include <doctest.h>

#include "test_util.hpp"
#include "timo/errors.hpp"
#include "timo/igt.hpp"
#include "timo/tgi.hpp"

using namespace timo;
using timo::testing::rows;
using timo::testing::vec;

TEST_CASE("closed-form prompt weights") {
  const Matrix prompts = rows({{1, 0}, {0, 1}});
  auto r = solve_prompt_weights(prompts, vec({0.6, 0.8}), 1.0);
  CHECK_FALSE(r.degenerate);
  CHECK(r.weights[0] == doctest::Approx(0.6));
  CHECK(r.weights[1] == doctest::Approx(0.8));

  auto r2 = solve_prompt_weights(prompts, vec({0.6, 0.8}), 2.0);
  CHECK(r2.weights[0] == doctest::Approx(1.2));
  CHECK(r2.weights[1] == doctest::Approx(1.6));

  auto flat = solve_prompt_weights(rows({{1, 0}, {0, 1}}), vec({0, 0}), 3.0);
  CHECK(flat.degenerate);
  CHECK(flat.weights[0] == doctest::Approx(3.0 / std::sqrt(2.0)));
  CHECK(flat.weights[1] == doctest::Approx(3.0 / std::sqrt(2.0)));

  CHECK_THROWS_AS(solve_prompt_weights(prompts, vec({1, 0}), 0.0), ConfigError);
}

TEST_CASE("softmax") {
  auto a = softmax(vec({0, 0}));
  CHECK(a[0] == doctest::Approx(0.5));
  CHECK(a[1] == doctest::Approx(0.5));
  auto b = softmax(vec({std::log(2.0), 0}));
  CHECK(b[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
  CHECK(b[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
  auto big = softmax(vec({1e4, 0, -1e4}));
  CHECK(std::isfinite(big[0]));
  CHECK(big[0] == 1.0);
}

TEST_CASE("IGT prototypes") {
  auto text = TextFeatureBank::from_raw({rows({{1, 0}, {0, 1}})});
  auto onehot = build_igt_prototypes(text, rows({{0, 1}}));
  CHECK(onehot.weights.row(0) == rows({{0, 1}}).row(0));
  auto uniform = build_igt_prototypes(text, rows({{0.5, 0.5}}));
  CHECK(uniform.weights(0, 0) == doctest::Approx(std::sqrt(0.5)));
  CHECK(uniform.weights(0, 1) == doctest::Approx(std::sqrt(0.5)));

  auto single = TextFeatureBank::from_raw({rows({{0.6, 0.8}}), rows({{0, 1}})});
  for (double gamma : {1e-3, 1.0, 100.0}) {
    auto w = compute_prompt_weights(single, rows({{1, 0}, {0, 1}}), gamma);
    auto proto = build_igt_prototypes(single, w.probs);
    CHECK((proto.weights.row(0) - rows({{0.6, 0.8}}).row(0)).norm() < 1e-15);
  }
}

namespace {

struct Instance {
  TextFeatureBank text;
  Matrix image_protos;
  Matrix queries;
};

Instance random_instance(SplitMix64& rng, Eigen::Index n, Eigen::Index p, Eigen::Index d) {
  Instance inst;
  ClassBank prompts;
  for (Eigen::Index c = 0; c < n; ++c) prompts.push_back(timo::testing::random_unit_rows(rng, p, d));
  inst.text = TextFeatureBank::from_raw(prompts);
  inst.image_protos = timo::testing::random_unit_rows(rng, n, d);
  inst.queries = timo::testing::random_unit_rows(rng, 30, d);
  return inst;
}

}  // namespace

TEST_CASE("igt logits") {
  PrototypeSet w;
  w.weights = Matrix::Identity(5, 5);
  w.degenerate.assign(5, false);
  Matrix q = Matrix::Zero(1, 5);
  q(0, 3) = 1;
  Eigen::Index best;
  igt_logits(w, q).row(0).maxCoeff(&best);
  CHECK(best == 3);
}

TEST_CASE("small gamma reduces to zero-shot prototypes") {
  SplitMix64 rng(5);
  auto inst = random_instance(rng, 10, 6, 16);
  auto w = compute_prompt_weights(inst.text, inst.image_protos, 1e-6);
  const Matrix got = igt_logits(build_igt_prototypes(inst.text, w.probs), inst.queries);

  // Independent zero-shot oracle: plain mean of prompts, normalized, dotted with q times 100.
  for (Eigen::Index c = 0; c < 10; ++c) {
    Vector mean = Vector::Zero(16);
    for (Eigen::Index r = 0; r < 6; ++r) mean += inst.text.prompts[static_cast<std::size_t>(c)].row(r).transpose();
    mean /= mean.norm();
    for (Eigen::Index qi = 0; qi < inst.queries.rows(); ++qi)
      CHECK(std::abs(got(qi, c) - 100.0 * inst.queries.row(qi).dot(mean)) < 1e-4);
  }
}

TEST_CASE("large gamma concentrates on the best prompt") {
  // Similarities for class c are well separated: prompt 0 sits at cosine 0.9 to the prototype,
  // the others at 0.3 or below.
  SplitMix64 rng(8);
  const Eigen::Index n = 4, p = 5, d = 12;
  Matrix protos = Matrix::Zero(n, d);
  ClassBank prompts;
  for (Eigen::Index c = 0; c < n; ++c) {
    protos(c, c) = 1.0;
    Matrix block(p, d);
    for (Eigen::Index r = 0; r < p; ++r) {
      Vector noise = timo::testing::random_unit(rng, d);
      noise -= noise.dot(protos.row(c).transpose()) * protos.row(c).transpose();
      noise /= noise.norm();
      const double cosv = r == 0 ? 0.9 : 0.3 - 0.1 * static_cast<double>(r);
      block.row(r) = (cosv * protos.row(c).transpose() + std::sqrt(1 - cosv * cosv) * noise).transpose();
    }
    prompts.push_back(block);
  }
  auto text = TextFeatureBank::from_raw(prompts);
  Matrix queries = timo::testing::random_unit_rows(rng, 20, d);
  auto w = compute_prompt_weights(text, protos, 1e4);
  const Matrix got = igt_logits(build_igt_prototypes(text, w.probs), queries);
  for (Eigen::Index c = 0; c < n; ++c)
    for (Eigen::Index qi = 0; qi < queries.rows(); ++qi)
      CHECK(std::abs(got(qi, c) - 100.0 * queries.row(qi).dot(text.prompts[static_cast<std::size_t>(c)].row(0))) < 1e-4);
}

TEST_CASE("property: optimality, norm, direction and gamma monotonicity") {
  SplitMix64 rng(21);
  for (int iter = 0; iter < 30; ++iter) {
    const auto p = static_cast<Eigen::Index>(2 + rng.below(15));
    const auto d = static_cast<Eigen::Index>(8 + rng.below(57));
    const Matrix prompts = timo::testing::random_unit_rows(rng, p, d);
    const Vector proto = timo::testing::random_unit(rng, d);
    const Vector v = prompts * proto;
    for (double gamma : {0.1, 1.0, 50.0, 100.0}) {
      auto sol = solve_prompt_weights(prompts, proto, gamma);
      CHECK(std::abs(sol.weights.norm() - gamma) <= 1e-6);
      const double best = sol.weights.dot(v);
      for (int s = 0; s < 500; ++s) {
        const Vector cand = gamma * timo::testing::random_unit(rng, p);
        CHECK(best - cand.dot(v) >= -1e-9);
      }
    }
    auto text = TextFeatureBank::from_raw({prompts});
    Matrix proto_row = proto.transpose();
    auto sims = prompt_image_similarity(text, proto_row);
    auto r = solve_prompt_weights(prompts, proto, 7.0).weights;
    const Vector s = sims.sims.row(0).transpose();
    CHECK(std::abs(r.dot(s) / (r.norm() * s.norm()) - 1.0) <= 1e-9);

    double prev = 0.0;
    for (double gamma : {1e-6, 0.01, 0.5, 1.0, 5.0, 20.0, 100.0, 1e4}) {
      auto w = compute_prompt_weights(text, proto_row, gamma);
      const double peak = w.probs.row(0).maxCoeff();
      CHECK(std::abs(w.probs.row(0).sum() - 1.0) <= 1e-9);
      CHECK(w.probs.minCoeff() >= 0.0);
      CHECK(peak >= prev);
      prev = peak;
    }
    auto tiny = compute_prompt_weights(text, proto_row, 1e-9);
    CHECK(tiny.probs.row(0).maxCoeff() - tiny.probs.row(0).minCoeff() < 1e-8);
  }
}

TEST_CASE("projections path matches the direct path") {
  SplitMix64 rng(3);
  auto inst = random_instance(rng, 6, 4, 10);
  const Matrix proj = prompt_projections(inst.text, inst.image_protos);
  for (double gamma : {5.0, 50.0}) {
    auto a = compute_prompt_weights(inst.text, inst.image_protos, gamma);
    auto b = prompt_weights_from_projections(proj, gamma);
    CHECK(a.probs == b.probs);
    CHECK(a.raw == b.raw);
  }
}
