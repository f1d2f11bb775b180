#pragma once

// Fusion of the image and text branches, top-1 evaluation, the validation grid search and
// the end-to-end run.
//
// Modes:
//   zero-shot  text branch only: cosine classifier over mean prompt prototypes
//   base       backend over raw support features + alpha * zero-shot
//   tip-mg     TIMO with the cache backend
//   timo       backend over TGI features (beta = P) + alpha * IGT classifier (fixed gamma)
//   timo-s     timo with beta and gamma also searched

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "timo/backends.hpp"
#include "timo/diagnostics.hpp"
#include "timo/features.hpp"
#include "timo/tgi.hpp"
#include "timo/types.hpp"

namespace timo {

enum class Mode { zero_shot, base, tip_mg, timo, timo_s };
Mode parse_mode(const std::string& s);
const char* to_string(Mode m);

inline constexpr double kDefaultGamma = 50.0;

struct HyperPoint {
  double alpha = 1.0;
  std::optional<int> beta;          // none: no image branch (zero-shot mode)
  std::optional<double> gamma;      // none: plain zero-shot text branch
  std::optional<double> sharpness;  // cache backend only

  friend bool operator==(const HyperPoint&, const HyperPoint&) = default;
};

struct HyperGrid {
  std::vector<double> alphas;
  std::vector<int> betas;
  std::vector<double> gammas;
  std::vector<double> sharpness;  // empty: backend parameter is used as-is

  /// alpha in {1e-4..1e4}, beta in {1..2P}, gamma in {5, 10, ..., 100}.
  static HyperGrid defaults(std::size_t prompts);
};

std::vector<double> default_alphas();

struct MethodConfig {
  Mode mode = Mode::timo;
  BackendKind backend = BackendKind::gda;
  BackendParams params;
  double logit_scale = kDefaultLogitScale;
  std::optional<int> beta;  // fixed-mode beta; P when unset
  double gamma = kDefaultGamma;
  double alpha = 1.0;       // used when no validation search runs

  BackendKind effective_backend() const { return mode == Mode::tip_mg ? BackendKind::cache : backend; }
};

struct FewShotBanks {
  TextFeatureBank text;
  ImageSupportBank support;

  std::size_t classes() const { return text.classes(); }
};

Vector fuse_logits(const Vector& image, const Vector& text, double alpha);
Matrix fuse_logits(const Matrix& image, const Matrix& text, double alpha);

struct Top1 {
  double accuracy = 0.0;
  std::vector<double> per_class;  // NaN-free: classes without queries report 0
  std::vector<std::size_t> per_class_count;
  std::size_t correct = 0;
  std::size_t total = 0;
};

/// argmax ties break toward the lowest class index.
Top1 evaluate_top1(const Matrix& logits, const std::vector<int>& labels, std::size_t classes);

/// Builds the two branches for any hyper point, caching the gamma-independent pieces.
class BranchEvaluator {
 public:
  BranchEvaluator(const FewShotBanks& banks, const MethodConfig& config);

  const SimilarityWeights& similarities() const { return sims_; }
  ClassBank image_bank(int beta) const;
  ImageClassifier image_classifier(int beta, std::optional<double> sharpness) const;
  PrototypeSet text_prototypes(std::optional<double> gamma) const;

  Matrix image_logits(int beta, std::optional<double> sharpness, const Matrix& queries) const;
  Matrix text_logits(std::optional<double> gamma, const Matrix& queries) const;
  Matrix logits(const HyperPoint& point, const Matrix& queries) const;

 private:
  const FewShotBanks& banks_;
  MethodConfig config_;
  SimilarityWeights sims_;
  Matrix projections_;
  PrototypeSet zero_shot_;
};

/// The hyper points a mode evaluates, as per-axis lists (none = axis unused).
struct SearchPlan {
  std::vector<double> alphas;
  std::vector<std::optional<int>> betas;
  std::vector<std::optional<double>> gammas;
  std::vector<std::optional<double>> sharpness;

  std::size_t size() const { return alphas.size() * betas.size() * gammas.size() * sharpness.size(); }
};

SearchPlan plan_search(const MethodConfig& config, const HyperGrid& grid, std::size_t prompts);

struct TraceEntry {
  HyperPoint point;
  std::size_t correct = 0;
  std::size_t total = 0;
  double accuracy = 0.0;
};

struct SearchResult {
  HyperPoint best;
  double val_accuracy = 0.0;
  std::vector<TraceEntry> trace;  // beta-major, then sharpness, gamma, alpha
};

/// True when a should be preferred over b: higher accuracy, then smaller alpha, beta,
/// gamma and sharpness.
bool better_point(const TraceEntry& a, const TraceEntry& b);

/// Exhaustive search on the validation batch. Branch logits are computed once per beta
/// (and sharpness) and once per gamma; alpha only re-fuses cached logits.
SearchResult grid_search(const FewShotBanks& banks, const MethodConfig& config, const HyperGrid& grid,
                         const QueryBatch& validation);

/// Header: alpha,beta,gamma,sharpness,correct,total,accuracy. Unused axes are empty fields.
std::string trace_csv(const SearchResult& result);
nlohmann::json to_json(const HyperPoint& p);
nlohmann::json to_json(const SearchResult& r);

// ---- end-to-end run ------------------------------------------------------------------------

struct RunConfig {
  std::filesystem::path support_manifest;
  std::optional<std::filesystem::path> validation_manifest;
  std::optional<std::filesystem::path> test_manifest;
  MethodConfig method;
  // Unset grid axes take HyperGrid::defaults once P is known.
  std::optional<std::vector<double>> alphas;
  std::optional<std::vector<int>> betas;
  std::optional<std::vector<double>> gammas;
  std::optional<std::vector<double>> sharpness;
  std::optional<std::size_t> shots;  // subsample the support set to this many shots per class
  double val_fraction = 1.0;
  std::uint64_t seed = 0;
  AnomalyMode anomaly_mode;
  std::optional<std::filesystem::path> output;
  std::optional<std::filesystem::path> trace_output;
  int threads = 0;

  HyperGrid grid(std::size_t prompts) const;
};

/// Strict parse: unknown keys and wrong types raise ConfigError. Relative paths are taken
/// relative to `base_dir`.
RunConfig run_config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
nlohmann::json to_json(const RunConfig& c);
/// FNV-1a of the canonical JSON form of the config.
std::string config_fingerprint(const RunConfig& c);

struct LoadedRun {
  FewShotBanks banks;
  std::vector<std::string> class_names;
  std::string dataset_name;
  std::optional<QueryBatch> validation;
  std::optional<QueryBatch> test;
};

/// Loads the manifests, checks that splits agree on classes and D, applies the seeded
/// support-shot and validation subsampling.
LoadedRun load_run(const RunConfig& config);

struct EvalReport {
  std::string dataset;
  std::vector<std::string> class_names;
  Mode mode = Mode::timo;
  BackendKind backend = BackendKind::gda;
  std::uint64_t seed = 0;
  std::string fingerprint;
  HyperPoint chosen;
  std::optional<double> val_accuracy;
  std::size_t search_points = 0;
  Top1 test;
  AnomalyReport anomalies_raw;
  AnomalyReport anomalies_refined;
  std::optional<QStatistic> branch_q;

  nlohmann::json to_json() const;
};

/// load -> prototypes -> weights -> refined features -> backend -> optional search -> test.
EvalReport run(const RunConfig& config, SearchResult* search = nullptr);

/// Search only (no test evaluation).
SearchResult run_search(const RunConfig& config);

}  // namespace timo
