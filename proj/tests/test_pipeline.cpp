#include <doctest.h>

#include "test_util.hpp"
#include "timo/errors.hpp"
#include "timo/igt.hpp"
#include "timo/pipeline.hpp"
#include "timo/synthetic.hpp"

using namespace timo;
using timo::testing::rows;
using timo::testing::vec;

namespace {

struct Synthetic {
  FewShotBanks banks;
  QueryBatch validation, test;
};

Synthetic make(std::uint64_t seed, std::size_t classes = 10, std::size_t prompts = 4, std::size_t shots = 2) {
  SyntheticSpec spec;
  spec.classes = classes;
  spec.prompts = prompts;
  spec.shots = shots;
  spec.dim = 32;
  spec.validation_per_class = 6;
  spec.test_per_class = 8;
  spec.noise = 0.2;
  spec.seed = seed;
  auto d = generate_synthetic(spec);
  return {FewShotBanks{TextFeatureBank::from_raw(d.text), ImageSupportBank::from_raw(d.support)},
          QueryBatch::from_raw(d.validation, d.validation_labels, classes),
          QueryBatch::from_raw(d.test, d.test_labels, classes)};
}

}  // namespace

TEST_CASE("fuse_logits") {
  CHECK(fuse_logits(vec({1, 0}), vec({5, 7}), 0.0) == vec({1, 0}));
  CHECK(fuse_logits(vec({1, 0}), vec({0, 2}), 0.5) == vec({1, 1}));
  CHECK_THROWS_AS(fuse_logits(vec({1}), vec({1, 2}), 1.0), DataError);

  // alpha = 1e4 lets a clearly separated text branch dominate a bounded image branch.
  const Vector image = vec({3, -2, 1});
  const Vector text = vec({0.1, 0.2, 0.2 + 2 * 3.0 / 1e4 + 1e-3});
  Eigen::Index best;
  fuse_logits(image, text, 1e4).maxCoeff(&best);
  CHECK(best == 2);
}

TEST_CASE("property: fuse_logits is linear") {
  SplitMix64 rng(1);
  for (int i = 0; i < 50; ++i) {
    Vector a1(4), a2(4), b1(4), b2(4);
    for (int j = 0; j < 4; ++j) {
      a1[j] = rng.normal();
      a2[j] = rng.normal();
      b1[j] = rng.normal();
      b2[j] = rng.normal();
    }
    const double alpha = rng.uniform() * 10, c = rng.normal();
    const Vector lhs = fuse_logits(Vector(a1 + c * a2), Vector(b1 + c * b2), alpha);
    const Vector rhs = fuse_logits(a1, b1, alpha) + c * fuse_logits(a2, b2, alpha);
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("evaluate_top1") {
  CHECK(evaluate_top1(Matrix::Identity(3, 3), {0, 1, 2}, 3).accuracy == 1.0);
  Matrix four(4, 2);
  four << 1, 0, 0, 1, 1, 0, 1, 0;
  auto t = evaluate_top1(four, {0, 1, 0, 1}, 2);
  CHECK(t.accuracy == 0.75);
  CHECK(t.per_class[0] == 1.0);
  CHECK(t.per_class[1] == 0.5);
  CHECK(evaluate_top1(rows({{1, 1}}), {1}, 2).accuracy == 0.0);
}

TEST_CASE("grid_search") {
  auto s = make(3);
  MethodConfig cfg;
  HyperGrid grid = HyperGrid::defaults(4);

  SUBCASE("single point") {
    grid.alphas = {0.7};
    auto r = grid_search(s.banks, cfg, grid, s.validation);
    REQUIRE(r.trace.size() == 1);
    CHECK(r.best.alpha == 0.7);
    CHECK(r.best.beta == 4);
    CHECK(r.best.gamma == kDefaultGamma);
    const BranchEvaluator eval(s.banks, cfg);
    CHECK(r.val_accuracy == evaluate_top1(eval.logits(r.best, s.validation.features), s.validation.labels, 10).accuracy);
  }
  SUBCASE("ties go to the smaller alpha") {
    // With only a zero-shot text branch every alpha ranks identically.
    cfg.mode = Mode::base;
    cfg.params.shrinkage = 1.0;
    grid.alphas = {1e3, 1e4, 5e3};
    auto r = grid_search(s.banks, cfg, grid, s.validation);
    CHECK(r.trace[0].correct == r.trace[1].correct);
    CHECK(r.trace[1].correct == r.trace[2].correct);
    CHECK(r.best.alpha == 1e3);
  }
  SUBCASE("timo evaluates the nine alphas, timo-s the full product") {
    auto timo = grid_search(s.banks, cfg, grid, s.validation);
    CHECK(timo.trace.size() == 9);
    cfg.mode = Mode::timo_s;
    auto timo_s = grid_search(s.banks, cfg, grid, s.validation);
    CHECK(timo_s.trace.size() == 9 * 8 * 20);
    CHECK(timo_s.val_accuracy >= timo.val_accuracy);
    for (const auto& e : timo_s.trace) CHECK(e.accuracy <= timo_s.val_accuracy);
    // Trace order: beta-major, then gamma, then alpha.
    CHECK(timo_s.trace[0].point.beta == 1);
    CHECK(timo_s.trace[9].point.gamma == 10.0);
    CHECK(timo_s.trace[9 * 20].point.beta == 2);
  }
  SUBCASE("zero-shot runs a single point without an image branch") {
    cfg.mode = Mode::zero_shot;
    auto r = grid_search(s.banks, cfg, grid, s.validation);
    REQUIRE(r.trace.size() == 1);
    CHECK_FALSE(r.best.beta.has_value());
    CHECK_FALSE(r.best.gamma.has_value());
  }
  SUBCASE("configuration errors") {
    cfg.beta = 9;
    CHECK_THROWS_AS(grid_search(s.banks, cfg, grid, s.validation), ConfigError);
    cfg.beta.reset();
    grid.alphas.clear();
    CHECK_THROWS_AS(grid_search(s.banks, cfg, grid, s.validation), ConfigError);
    grid = HyperGrid::defaults(4);
    CHECK_THROWS_AS(grid_search(s.banks, cfg, grid, QueryBatch{}), DataError);
  }
}

TEST_CASE("tip-mg forces the cache backend and searches sharpness when given") {
  auto s = make(4);
  MethodConfig cfg;
  cfg.mode = Mode::tip_mg;
  HyperGrid grid = HyperGrid::defaults(4);
  grid.sharpness = {1.0, 5.5};
  auto r = grid_search(s.banks, cfg, grid, s.validation);
  CHECK(r.trace.size() == 18);
  CHECK(r.best.sharpness.has_value());
  const BranchEvaluator eval(s.banks, cfg);
  CHECK(eval.image_classifier(4, std::nullopt).kind() == BackendKind::cache);
}

TEST_CASE("limit reduction: beta 0 and tiny gamma reproduce base plus zero-shot") {
  for (BackendKind kind : {BackendKind::cache, BackendKind::gda}) {
    auto s = make(5);
    MethodConfig cfg;
    cfg.backend = kind;
    const BranchEvaluator eval(s.banks, cfg);
    const Matrix got = eval.logits({1.0, 0, 1e-6, std::nullopt}, s.test.features);

    // Oracle: backend fitted directly on the support shots plus uniform prompt means.
    const auto clf = build_image_classifier(kind, s.banks.support.shots);
    const Matrix want = clf.classify(s.test.features) + cosine_logits(text_prototypes(s.banks.text), s.test.features);
    CHECK((got - want).cwiseAbs().maxCoeff() < 1e-4);
  }
}

TEST_CASE("branch evaluator exposes the image bank and IGT prototypes") {
  auto s = make(6);
  MethodConfig cfg;
  const BranchEvaluator eval(s.banks, cfg);
  CHECK(eval.image_bank(0) == s.banks.support.shots);
  CHECK(eval.image_bank(3)[0].rows() == 2 + 3);
  auto w = compute_prompt_weights(s.banks.text, s.banks.support.prototypes, 20.0);
  CHECK((eval.text_prototypes(20.0).weights - build_igt_prototypes(s.banks.text, w.probs).weights).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("trace csv format") {
  SearchResult r;
  r.trace.push_back({{0.0001, 2, 5.0, std::nullopt}, 3, 4, 0.75});
  r.trace.push_back({{10.0, std::nullopt, std::nullopt, 5.5}, 1, 4, 0.25});
  CHECK(trace_csv(r) ==
        "alpha,beta,gamma,sharpness,correct,total,accuracy\n"
        "1e-04,2,5,,3,4,0.75\n"
        "10,,,5.5,1,4,0.25\n");
}

TEST_CASE("run config parsing") {
  using nlohmann::json;
  auto c = run_config_from_json(json{{"support_manifest", "s.json"},
                                     {"test_manifest", "/abs/t.json"},
                                     {"mode", "timo-s"},
                                     {"backend", {{"kind", "cache"}, {"sharpness", 3.0}}},
                                     {"grid", {{"alphas", {1.0, 2.0}}}},
                                     {"seed", 9}},
                                "/base");
  CHECK(c.support_manifest == std::filesystem::path("/base/s.json"));
  CHECK(c.test_manifest == std::filesystem::path("/abs/t.json"));
  CHECK(c.method.mode == Mode::timo_s);
  CHECK(c.method.backend == BackendKind::cache);
  CHECK(c.method.params.sharpness == 3.0);
  CHECK(c.grid(3).alphas == std::vector<double>{1.0, 2.0});
  CHECK(c.grid(3).betas.size() == 6);
  CHECK(c.seed == 9);
  CHECK(run_config_from_json(json{{"support_manifest", "s.json"}, {"backend", "cache"}}).method.backend == BackendKind::cache);

  CHECK_THROWS_AS(run_config_from_json(json{{"support_manifest", "s"}, {"colour", 1}}), ConfigError);
  CHECK_THROWS_AS(run_config_from_json(json{{"support_manifest", "s"}, {"grid", {{"deltas", {1}}}}}), ConfigError);
  CHECK_THROWS_AS(run_config_from_json(json{{"support_manifest", "s"}, {"mode", "fast"}}), ConfigError);
  CHECK_THROWS_AS(run_config_from_json(json{{"support_manifest", "s"}, {"gamma", -1}}), ConfigError);
  CHECK_THROWS_AS(run_config_from_json(json{{"support_manifest", "s"}, {"seed", "x"}}), ConfigError);
  CHECK_THROWS_AS(run_config_from_json(json{{"mode", "timo"}}), ConfigError);

  auto a = run_config_from_json(json{{"support_manifest", "s"}, {"seed", 1}});
  auto b = run_config_from_json(json{{"seed", 1}, {"support_manifest", "s"}});
  CHECK(config_fingerprint(a) == config_fingerprint(b));
  b.seed = 2;
  CHECK(config_fingerprint(a) != config_fingerprint(b));
}

TEST_CASE("end-to-end run on written synthetic data") {
  timo::testing::TempDir dir;
  SyntheticSpec spec;
  spec.classes = 6;
  spec.prompts = 3;
  spec.shots = 4;
  spec.dim = 16;
  spec.seed = 2;
  auto paths = write_synthetic(generate_synthetic(spec), spec, dir.path());

  RunConfig cfg;
  cfg.support_manifest = paths.support_manifest;
  cfg.validation_manifest = paths.validation_manifest;
  cfg.test_manifest = paths.test_manifest;
  cfg.method.mode = Mode::timo_s;
  cfg.seed = 5;
  cfg.shots = 2;
  cfg.val_fraction = 0.5;

  SearchResult search;
  auto report = run(cfg, &search);
  CHECK(report.search_points == 9 * 6 * 20);
  CHECK(search.trace.size() == 9 * 6 * 20);
  CHECK(search.trace.front().total == 30);
  CHECK(report.test.total == 120);
  CHECK(report.branch_q.has_value());

  // Same config, same bytes.
  CHECK(run(cfg).to_json().dump() == report.to_json().dump());
  CHECK(trace_csv(run_search(cfg)) == trace_csv(search));

  auto loaded = load_run(cfg);
  CHECK(loaded.banks.support.shots_per_class() == 2);
  cfg.shots = 5;
  CHECK_THROWS_AS(load_run(cfg), ConfigError);
  cfg.shots.reset();

  cfg.validation_manifest.reset();
  CHECK_THROWS_AS(run(cfg), ConfigError);
  cfg.method.mode = Mode::timo;
  cfg.method.alpha = 2.0;
  auto fixed = run(cfg);
  CHECK(fixed.chosen.alpha == 2.0);
  CHECK(fixed.chosen.beta == 3);
  CHECK_FALSE(fixed.val_accuracy.has_value());
}

TEST_CASE("load_run rejects manifests that disagree on classes") {
  timo::testing::TempDir dir;
  SyntheticSpec a;
  a.classes = 3;
  a.dim = 8;
  auto pa = write_synthetic(generate_synthetic(a), a, dir / "a");
  SyntheticSpec b = a;
  b.classes = 4;
  auto pb = write_synthetic(generate_synthetic(b), b, dir / "b");
  RunConfig cfg;
  cfg.support_manifest = pa.support_manifest;
  cfg.test_manifest = pb.test_manifest;
  CHECK_THROWS_AS(load_run(cfg), DataError);
}
