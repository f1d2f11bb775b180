#include "timo/pipeline.hpp"

#include <charconv>
#include <cstdio>
#include <cmath>
#include <sstream>

#include "parallel_for.hpp"
#include "timo/errors.hpp"
#include "timo/igt.hpp"
#include "timo/kernels.hpp"
#include "timo/rng.hpp"
#include "timo/tensor_store.hpp"

namespace timo {

namespace fs = std::filesystem;
using nlohmann::json;

Mode parse_mode(const std::string& s) {
  if (s == "zero-shot") return Mode::zero_shot;
  if (s == "base") return Mode::base;
  if (s == "tip-mg") return Mode::tip_mg;
  if (s == "timo") return Mode::timo;
  if (s == "timo-s") return Mode::timo_s;
  throw ConfigError("unknown mode '" + s + "' (expected zero-shot, base, tip-mg, timo or timo-s)");
}

const char* to_string(Mode m) {
  switch (m) {
    case Mode::zero_shot: return "zero-shot";
    case Mode::base: return "base";
    case Mode::tip_mg: return "tip-mg";
    case Mode::timo: return "timo";
    case Mode::timo_s: return "timo-s";
  }
  return "timo";
}

std::vector<double> default_alphas() {
  std::vector<double> a;
  for (int e = -4; e <= 4; ++e) a.push_back(std::pow(10.0, e));
  return a;
}

HyperGrid HyperGrid::defaults(std::size_t prompts) {
  HyperGrid g;
  g.alphas = default_alphas();
  for (int b = 1; b <= static_cast<int>(2 * prompts); ++b) g.betas.push_back(b);
  for (int k = 1; k <= 20; ++k) g.gammas.push_back(5.0 * k);
  return g;
}

Vector fuse_logits(const Vector& image, const Vector& text, double alpha) {
  if (image.size() != text.size()) throw DataError("fuse_logits: branch lengths differ");
  return image + alpha * text;
}

Matrix fuse_logits(const Matrix& image, const Matrix& text, double alpha) {
  if (image.rows() != text.rows() || image.cols() != text.cols()) throw DataError("fuse_logits: branch shapes differ");
  return image + alpha * text;
}

Top1 evaluate_top1(const Matrix& logits, const std::vector<int>& labels, std::size_t classes) {
  if (static_cast<std::size_t>(logits.rows()) != labels.size()) throw DataError("evaluate_top1: label count mismatch");
  const auto preds = kernels::parallel::argmax_rows(logits);
  Top1 out;
  out.total = labels.size();
  std::vector<std::size_t> hits(classes, 0);
  out.per_class_count.assign(classes, 0);
  for (std::size_t q = 0; q < labels.size(); ++q) {
    const auto label = static_cast<std::size_t>(labels[q]);
    if (label >= classes) throw DataError("evaluate_top1: label out of range");
    ++out.per_class_count[label];
    if (preds[q] == labels[q]) {
      ++hits[label];
      ++out.correct;
    }
  }
  out.accuracy = out.total ? static_cast<double>(out.correct) / static_cast<double>(out.total) : 0.0;
  out.per_class.resize(classes);
  for (std::size_t c = 0; c < classes; ++c)
    out.per_class[c] = out.per_class_count[c] ? static_cast<double>(hits[c]) / static_cast<double>(out.per_class_count[c]) : 0.0;
  return out;
}

// ---- branches -------------------------------------------------------------------------------

BranchEvaluator::BranchEvaluator(const FewShotBanks& banks, const MethodConfig& config)
    : banks_(banks),
      config_(config),
      sims_(prompt_image_similarity(banks.text, banks.support.prototypes)),
      projections_(prompt_projections(banks.text, banks.support.prototypes)),
      zero_shot_(timo::text_prototypes(banks.text)) {}

ClassBank BranchEvaluator::image_bank(int beta) const {
  if (beta == 0) return banks_.support.shots;
  return build_tgi_features(banks_.support.shots, banks_.text, select_top_beta(sims_, beta));
}

ImageClassifier BranchEvaluator::image_classifier(int beta, std::optional<double> sharpness) const {
  BackendParams params = config_.params;
  if (sharpness) params.sharpness = *sharpness;
  return build_image_classifier(config_.effective_backend(), image_bank(beta), params);
}

PrototypeSet BranchEvaluator::text_prototypes(std::optional<double> gamma) const {
  if (!gamma) return zero_shot_;
  return build_igt_prototypes(banks_.text, prompt_weights_from_projections(projections_, *gamma).probs);
}

Matrix BranchEvaluator::image_logits(int beta, std::optional<double> sharpness, const Matrix& queries) const {
  return image_classifier(beta, sharpness).classify(queries);
}

Matrix BranchEvaluator::text_logits(std::optional<double> gamma, const Matrix& queries) const {
  return cosine_logits(text_prototypes(gamma), queries, config_.logit_scale);
}

Matrix BranchEvaluator::logits(const HyperPoint& point, const Matrix& queries) const {
  Matrix text = text_logits(point.gamma, queries);
  if (!point.beta) return point.alpha * text;
  return fuse_logits(image_logits(*point.beta, point.sharpness, queries), text, point.alpha);
}

// ---- search ---------------------------------------------------------------------------------

SearchPlan plan_search(const MethodConfig& config, const HyperGrid& grid, std::size_t prompts) {
  const int max_beta = static_cast<int>(2 * prompts);
  auto check_beta = [&](int b) {
    if (b < 0 || b > max_beta)
      throw ConfigError("beta " + std::to_string(b) + " outside [0, " + std::to_string(max_beta) + "]");
  };
  if (!(config.logit_scale > 0.0)) throw ConfigError("logit_scale must be positive");

  SearchPlan plan;
  plan.gammas = {std::nullopt};
  plan.sharpness = {std::nullopt};
  if (config.effective_backend() == BackendKind::cache && config.mode != Mode::zero_shot)
    for (double s : grid.sharpness) {
      if (!(s > 0.0)) throw ConfigError("grid sharpness values must be positive");
      if (plan.sharpness.front() == std::nullopt) plan.sharpness.clear();
      plan.sharpness.push_back(s);
    }

  switch (config.mode) {
    case Mode::zero_shot:
      plan.alphas = {1.0};
      plan.betas = {std::nullopt};
      return plan;
    case Mode::base:
      plan.betas = {0};
      break;
    case Mode::tip_mg:
    case Mode::timo: {
      const int beta = config.beta.value_or(static_cast<int>(prompts));
      check_beta(beta);
      if (!(config.gamma > 0.0)) throw ConfigError("gamma must be positive");
      plan.betas = {beta};
      plan.gammas = {config.gamma};
      break;
    }
    case Mode::timo_s:
      if (grid.betas.empty() || grid.gammas.empty()) throw ConfigError("empty grid: timo-s needs betas and gammas");
      plan.betas.clear();
      for (int b : grid.betas) {
        check_beta(b);
        plan.betas.push_back(b);
      }
      plan.gammas.clear();
      for (double g : grid.gammas) {
        if (!(g > 0.0)) throw ConfigError("grid gammas must be positive");
        plan.gammas.push_back(g);
      }
      break;
  }
  if (grid.alphas.empty()) throw ConfigError("empty grid: no alpha values");
  for (double a : grid.alphas)
    if (!(a >= 0.0) || !std::isfinite(a)) throw ConfigError("grid alphas must be finite and non-negative");
  plan.alphas = grid.alphas;
  return plan;
}

bool better_point(const TraceEntry& a, const TraceEntry& b) {
  if (a.correct != b.correct) return a.correct > b.correct;
  if (a.point.alpha != b.point.alpha) return a.point.alpha < b.point.alpha;
  if (a.point.beta != b.point.beta) return a.point.beta < b.point.beta;
  if (a.point.gamma != b.point.gamma) return a.point.gamma < b.point.gamma;
  return a.point.sharpness < b.point.sharpness;
}

SearchResult grid_search(const FewShotBanks& banks, const MethodConfig& config, const HyperGrid& grid,
                         const QueryBatch& validation) {
  if (validation.size() == 0) throw DataError("validation split is empty");
  if (validation.labels.size() != validation.size()) throw DataError("validation split is unlabeled");
  const SearchPlan plan = plan_search(config, grid, banks.text.prompts_per_class());
  const BranchEvaluator eval(banks, config);
  const Matrix& queries = validation.features;
  const Eigen::Index nq = queries.rows();
  const auto n = static_cast<Eigen::Index>(banks.classes());

  struct ImageKey {
    std::optional<int> beta;
    std::optional<double> sharpness;
  };
  std::vector<ImageKey> image_keys;
  for (const auto& b : plan.betas)
    for (const auto& s : plan.sharpness) image_keys.push_back({b, s});

  std::vector<Matrix> image(image_keys.size());
  detail::parallel_for(image_keys.size(), [&](std::size_t k) {
    const auto& key = image_keys[k];
    image[k] = key.beta ? eval.image_logits(*key.beta, key.sharpness, queries) : Matrix(Matrix::Zero(nq, n));
  });
  std::vector<Matrix> text(plan.gammas.size());
  detail::parallel_for(plan.gammas.size(), [&](std::size_t g) { text[g] = eval.text_logits(plan.gammas[g], queries); });

  SearchResult result;
  const std::size_t na = plan.alphas.size();
  result.trace.resize(image_keys.size() * text.size() * na);
  detail::parallel_for(image_keys.size() * text.size(), [&](std::size_t cell) {
    const std::size_t k = cell / text.size(), g = cell % text.size();
    for (std::size_t a = 0; a < na; ++a) {
      auto& entry = result.trace[cell * na + a];
      entry.point = {plan.alphas[a], image_keys[k].beta, plan.gammas[g], image_keys[k].sharpness};
      entry.correct = kernels::serial::count_correct(image[k], text[g], plan.alphas[a], validation.labels);
      entry.total = validation.size();
      entry.accuracy = static_cast<double>(entry.correct) / static_cast<double>(entry.total);
    }
  });

  const TraceEntry* best = &result.trace.front();
  for (const auto& e : result.trace)
    if (better_point(e, *best)) best = &e;
  result.best = best->point;
  result.val_accuracy = best->accuracy;
  return result;
}

namespace {

std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

template <class T>
json optional_json(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

}  // namespace

std::string trace_csv(const SearchResult& result) {
  std::ostringstream out;
  out << "alpha,beta,gamma,sharpness,correct,total,accuracy\n";
  for (const auto& e : result.trace) {
    out << format_double(e.point.alpha) << ',';
    if (e.point.beta) out << *e.point.beta;
    out << ',';
    if (e.point.gamma) out << format_double(*e.point.gamma);
    out << ',';
    if (e.point.sharpness) out << format_double(*e.point.sharpness);
    out << ',' << e.correct << ',' << e.total << ',' << format_double(e.accuracy) << '\n';
  }
  return out.str();
}

json to_json(const HyperPoint& p) {
  return json{{"alpha", p.alpha}, {"beta", optional_json(p.beta)}, {"gamma", optional_json(p.gamma)},
              {"sharpness", optional_json(p.sharpness)}};
}

json to_json(const SearchResult& r) {
  return json{{"best", to_json(r.best)}, {"val_accuracy", r.val_accuracy}, {"points", r.trace.size()}};
}

// ---- config ---------------------------------------------------------------------------------

HyperGrid RunConfig::grid(std::size_t prompts) const {
  HyperGrid g = HyperGrid::defaults(prompts);
  if (alphas) g.alphas = *alphas;
  if (betas) g.betas = *betas;
  if (gammas) g.gammas = *gammas;
  if (sharpness) g.sharpness = *sharpness;
  return g;
}

namespace {

void reject_unknown(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw ConfigError("unknown key '" + key + "' in " + where);
  }
}

template <class T>
std::optional<T> get_optional(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config key '") + key + "': " + e.what());
  }
}

fs::path resolve_path(const std::string& p, const fs::path& base) {
  fs::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

}  // namespace

RunConfig run_config_from_json(const json& j, const fs::path& base_dir) {
  reject_unknown(j,
                 {"support_manifest", "validation_manifest", "test_manifest", "mode", "backend", "logit_scale", "alpha",
                  "beta", "gamma", "grid", "shots", "val_fraction", "seed", "anomaly_mode", "output", "trace_output",
                  "threads"},
                 "run config");
  RunConfig c;
  auto support = get_optional<std::string>(j, "support_manifest");
  if (!support) throw ConfigError("run config needs support_manifest");
  c.support_manifest = resolve_path(*support, base_dir);
  if (auto v = get_optional<std::string>(j, "validation_manifest")) c.validation_manifest = resolve_path(*v, base_dir);
  if (auto v = get_optional<std::string>(j, "test_manifest")) c.test_manifest = resolve_path(*v, base_dir);
  if (auto v = get_optional<std::string>(j, "mode")) c.method.mode = parse_mode(*v);
  if (j.contains("backend")) {
    const json& b = j.at("backend");
    if (b.is_string()) {
      c.method.backend = parse_backend_kind(b.get<std::string>());
    } else {
      reject_unknown(b, {"kind", "shrinkage", "sharpness", "mix", "priors"}, "backend");
      if (auto v = get_optional<std::string>(b, "kind")) c.method.backend = parse_backend_kind(*v);
      if (auto v = get_optional<double>(b, "shrinkage")) c.method.params.shrinkage = *v;
      if (auto v = get_optional<double>(b, "sharpness")) c.method.params.sharpness = *v;
      if (auto v = get_optional<double>(b, "mix")) c.method.params.mix = *v;
      if (auto v = get_optional<std::vector<double>>(b, "priors")) c.method.params.priors = *v;
    }
  }
  if (auto v = get_optional<double>(j, "logit_scale")) c.method.logit_scale = *v;
  if (auto v = get_optional<double>(j, "alpha")) c.method.alpha = *v;
  if (auto v = get_optional<int>(j, "beta")) c.method.beta = *v;
  if (auto v = get_optional<double>(j, "gamma")) c.method.gamma = *v;
  if (j.contains("grid")) {
    const json& g = j.at("grid");
    reject_unknown(g, {"alphas", "betas", "gammas", "sharpness"}, "grid");
    c.alphas = get_optional<std::vector<double>>(g, "alphas");
    c.betas = get_optional<std::vector<int>>(g, "betas");
    c.gammas = get_optional<std::vector<double>>(g, "gammas");
    c.sharpness = get_optional<std::vector<double>>(g, "sharpness");
  }
  if (auto v = get_optional<long long>(j, "shots")) {
    if (*v < 1) throw ConfigError("shots must be >= 1");
    c.shots = static_cast<std::size_t>(*v);
  }
  if (auto v = get_optional<double>(j, "val_fraction")) c.val_fraction = *v;
  if (auto v = get_optional<std::uint64_t>(j, "seed")) c.seed = *v;
  if (auto v = get_optional<std::string>(j, "anomaly_mode")) c.anomaly_mode = AnomalyMode::parse(*v);
  if (auto v = get_optional<std::string>(j, "output")) c.output = resolve_path(*v, base_dir);
  if (auto v = get_optional<std::string>(j, "trace_output")) c.trace_output = resolve_path(*v, base_dir);
  if (auto v = get_optional<int>(j, "threads")) c.threads = *v;

  if (!(c.val_fraction > 0.0 && c.val_fraction <= 1.0)) throw ConfigError("val_fraction must lie in (0, 1]");
  if (!(c.method.logit_scale > 0.0)) throw ConfigError("logit_scale must be positive");
  if (!(c.method.gamma > 0.0)) throw ConfigError("gamma must be positive");
  if (!(c.method.alpha >= 0.0) || !std::isfinite(c.method.alpha)) throw ConfigError("alpha must be finite and >= 0");
  if (c.method.beta && *c.method.beta < 0) throw ConfigError("beta must be >= 0");
  if (!(c.method.params.shrinkage >= 0.0 && c.method.params.shrinkage <= 1.0))
    throw ConfigError("backend shrinkage must lie in [0, 1]");
  if (!(c.method.params.sharpness > 0.0)) throw ConfigError("backend sharpness must be positive");
  if (!(c.method.params.mix >= 0.0)) throw ConfigError("backend mix must be >= 0");
  if (c.threads < 0) throw ConfigError("threads must be >= 0");
  return c;
}

json to_json(const RunConfig& c) {
  auto path_json = [](const std::optional<fs::path>& p) { return p ? json(p->generic_string()) : json(nullptr); };
  json backend{{"kind", to_string(c.method.backend)},
               {"shrinkage", c.method.params.shrinkage},
               {"sharpness", c.method.params.sharpness},
               {"mix", c.method.params.mix},
               {"priors", c.method.params.priors}};
  json grid{{"alphas", optional_json(c.alphas)},
            {"betas", optional_json(c.betas)},
            {"gammas", optional_json(c.gammas)},
            {"sharpness", optional_json(c.sharpness)}};
  return json{{"support_manifest", c.support_manifest.generic_string()},
              {"validation_manifest", path_json(c.validation_manifest)},
              {"test_manifest", path_json(c.test_manifest)},
              {"mode", to_string(c.method.mode)},
              {"backend", backend},
              {"logit_scale", c.method.logit_scale},
              {"alpha", c.method.alpha},
              {"beta", optional_json(c.method.beta)},
              {"gamma", c.method.gamma},
              {"grid", grid},
              {"shots", optional_json(c.shots)},
              {"val_fraction", c.val_fraction},
              {"seed", c.seed},
              {"anomaly_mode", c.anomaly_mode.label()}};
}

std::string config_fingerprint(const RunConfig& c) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(to_json(c).dump())));
  return buf;
}

// ---- run ------------------------------------------------------------------------------------

namespace {

QueryBatch load_queries(const fs::path& path, const Manifest& reference, const char* role) {
  auto split = load_dataset(path);
  if (split.manifest.split == Split::support) throw DataError(std::string(role) + " manifest describes a support split");
  if (split.manifest.class_names != reference.class_names)
    throw DataError(std::string(role) + " manifest lists different classes than the support manifest");
  if (split.manifest.feature_dim != reference.feature_dim)
    throw DataError(std::string(role) + " manifest feature_dim disagrees with the support manifest");
  return std::move(*split.queries);
}

QueryBatch subsample(const QueryBatch& batch, double fraction, SplitMix64 rng) {
  if (fraction >= 1.0) return batch;
  const auto keep = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(batch.size())));
  const auto rows = sample_without_replacement(rng, batch.size(), keep);
  QueryBatch out;
  out.features.resize(static_cast<Eigen::Index>(keep), batch.features.cols());
  for (std::size_t r = 0; r < keep; ++r) {
    out.features.row(static_cast<Eigen::Index>(r)) = batch.features.row(static_cast<Eigen::Index>(rows[r]));
    out.labels.push_back(batch.labels[rows[r]]);
  }
  return out;
}

}  // namespace

LoadedRun load_run(const RunConfig& config) {
  auto support = load_dataset(config.support_manifest);
  if (support.manifest.split != Split::support) throw DataError("support_manifest does not describe a support split");
  const SplitMix64 root(config.seed);

  ClassBank shots = support.support->shots;
  if (config.shots) {
    const std::size_t k = support.support->shots_per_class();
    if (*config.shots > k)
      throw ConfigError("shots " + std::to_string(*config.shots) + " exceeds the " + std::to_string(k) + " available");
    if (*config.shots < k) {
      auto rng = root.stream("support_shots");
      for (auto& block : shots) {
        const auto picked = sample_without_replacement(rng, k, *config.shots);
        Matrix sub(static_cast<Eigen::Index>(picked.size()), block.cols());
        for (std::size_t r = 0; r < picked.size(); ++r) sub.row(static_cast<Eigen::Index>(r)) = block.row(static_cast<Eigen::Index>(picked[r]));
        block = std::move(sub);
      }
    }
  }

  LoadedRun out{FewShotBanks{std::move(*support.text), ImageSupportBank::from_raw(std::move(shots))},
                support.manifest.class_names, support.manifest.dataset_name, std::nullopt, std::nullopt};
  if (config.validation_manifest) {
    auto val = load_queries(*config.validation_manifest, support.manifest, "validation");
    out.validation = subsample(val, config.val_fraction, root.stream("validation_subset"));
  }
  if (config.test_manifest) out.test = load_queries(*config.test_manifest, support.manifest, "test");
  return out;
}

namespace {

HyperPoint fixed_point(const MethodConfig& method, const HyperGrid& grid, std::size_t prompts) {
  if (method.mode == Mode::timo_s) throw ConfigError("timo-s needs a validation_manifest to search on");
  HyperGrid single = grid;
  single.alphas = {method.alpha};
  single.sharpness.clear();
  const auto plan = plan_search(method, single, prompts);
  return {plan.alphas.front(), plan.betas.front(), plan.gammas.front(), plan.sharpness.front()};
}

}  // namespace

SearchResult run_search(const RunConfig& config) {
  if (!config.validation_manifest) throw ConfigError("search needs a validation_manifest");
  const auto loaded = load_run(config);
  return grid_search(loaded.banks, config.method, config.grid(loaded.banks.text.prompts_per_class()), *loaded.validation);
}

EvalReport run(const RunConfig& config, SearchResult* search) {
  if (!config.test_manifest) throw ConfigError("eval needs a test_manifest");
  const auto loaded = load_run(config);
  const auto& banks = loaded.banks;
  const std::size_t prompts = banks.text.prompts_per_class();
  const HyperGrid grid = config.grid(prompts);

  EvalReport report;
  report.dataset = loaded.dataset_name;
  report.class_names = loaded.class_names;
  report.mode = config.method.mode;
  report.backend = config.method.effective_backend();
  report.seed = config.seed;
  report.fingerprint = config_fingerprint(config);

  if (loaded.validation) {
    SearchResult result = grid_search(banks, config.method, grid, *loaded.validation);
    report.chosen = result.best;
    report.val_accuracy = result.val_accuracy;
    report.search_points = result.trace.size();
    if (search) *search = std::move(result);
  } else {
    report.chosen = fixed_point(config.method, grid, prompts);
  }

  const QueryBatch& test = *loaded.test;
  if (test.size() == 0) throw DataError("test split is empty");
  const BranchEvaluator eval(banks, config.method);
  report.test = evaluate_top1(eval.logits(report.chosen, test.features), test.labels, banks.classes());

  const ClassBank by_class = group_by_class(test, banks.classes());
  report.anomalies_raw = anomalous_matches(banks.support.prototypes, by_class, config.anomaly_mode);
  const int beta = report.chosen.beta.value_or(0);
  report.anomalies_refined =
      anomalous_matches(class_mean_prototypes(eval.image_bank(beta)).weights, by_class, config.anomaly_mode);
  if (report.chosen.beta) {
    const auto image_preds = kernels::parallel::argmax_rows(eval.image_logits(beta, report.chosen.sharpness, test.features));
    const auto text_preds = kernels::parallel::argmax_rows(eval.text_logits(report.chosen.gamma, test.features));
    report.branch_q = q_statistic(image_preds, text_preds, test.labels);
  }
  return report;
}

json EvalReport::to_json() const {
  json per_class = json::array();
  for (std::size_t c = 0; c < test.per_class.size(); ++c) {
    per_class.push_back({{"class", c},
                         {"name", c < class_names.size() ? class_names[c] : ""},
                         {"top1", test.per_class[c]},
                         {"queries", test.per_class_count[c]}});
  }
  json anomalies{{"mode", anomalies_raw.mode.label()},
                 {"raw_prototypes_total", anomalies_raw.total()},
                 {"refined_prototypes_total", anomalies_refined.total()},
                 {"raw_per_class", anomalies_raw.counts},
                 {"refined_per_class", anomalies_refined.counts}};
  json q = nullptr;
  if (branch_q) {
    q = {{"pair", "image_branch,text_branch"},
         {"defined", branch_q->defined},
         {"value", branch_q->defined ? json(branch_q->value) : json(nullptr)},
         {"both_correct", branch_q->both_correct},
         {"both_wrong", branch_q->both_wrong},
         {"only_image", branch_q->only_a},
         {"only_text", branch_q->only_b}};
  }
  return json{{"dataset", dataset},
              {"mode", timo::to_string(mode)},
              {"backend", timo::to_string(backend)},
              {"seed", seed},
              {"config_fingerprint", fingerprint},
              {"chosen", timo::to_json(chosen)},
              {"val_accuracy", val_accuracy ? json(*val_accuracy) : json(nullptr)},
              {"search_points", search_points},
              {"test", {{"top1", test.accuracy}, {"correct", test.correct}, {"total", test.total}, {"per_class", per_class}}},
              {"diagnostics", {{"anomalous_matches", anomalies}, {"q_statistic", q}}}};
}

}  // namespace timo
