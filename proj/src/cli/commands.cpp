#include "commands.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "timo/diagnostics.hpp"
#include "timo/errors.hpp"
#include "timo/igt.hpp"
#include "timo/kernels.hpp"
#include "timo/pipeline.hpp"
#include "timo/synthetic.hpp"
#include "timo/tensor_store.hpp"

namespace timo::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<std::string> output;
  std::optional<std::string> trace_output;
  std::optional<std::string> mode;
  std::optional<std::string> output_dir;
  bool verbose = false;
};

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": invalid JSON: " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot create " + path.string());
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

fs::path config_dir(const Overrides& o) { return fs::path(o.config).parent_path(); }

/// Flags override keys from the file; file values override defaults.
json apply_common(json j, const Overrides& o) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  if (o.seed) j["seed"] = *o.seed;
  if (o.threads) j["threads"] = *o.threads;
  if (o.output) j["output"] = fs::absolute(*o.output).string();
  if (o.trace_output) j["trace_output"] = fs::absolute(*o.trace_output).string();
  if (o.mode) j["mode"] = *o.mode;
  return j;
}

RunConfig load_run_config(const Overrides& o) {
  auto config = run_config_from_json(apply_common(read_json_file(o.config), o), config_dir(o));
  kernels::set_thread_limit(config.threads);
  return config;
}

void log(const Overrides& o, std::ostream& err, const std::string& msg) {
  if (o.verbose) err << "[timo] " << msg << '\n';
}

int cmd_synth(const Overrides& o, std::ostream& out, std::ostream& err) {
  json j = o.config.empty() ? json::object() : read_json_file(o.config);
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  if (o.seed) j["seed"] = *o.seed;
  if (o.output_dir) j["output_dir"] = fs::absolute(*o.output_dir).string();
  for (const auto& [key, _] : j.items()) {
    static const std::vector<std::string> allowed{"dataset_name", "classes", "prompts", "shots", "dim",
                                                  "validation_per_class", "test_per_class", "noise", "text_noise",
                                                  "corrupt_fraction", "seed", "output_dir"};
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw ConfigError("unknown key '" + key + "' in synth config");
  }
  SyntheticSpec spec;
  fs::path dir;
  try {
    spec.dataset_name = j.value("dataset_name", spec.dataset_name);
    spec.classes = j.value("classes", spec.classes);
    spec.prompts = j.value("prompts", spec.prompts);
    spec.shots = j.value("shots", spec.shots);
    spec.dim = j.value("dim", spec.dim);
    spec.validation_per_class = j.value("validation_per_class", spec.validation_per_class);
    spec.test_per_class = j.value("test_per_class", spec.test_per_class);
    spec.noise = j.value("noise", spec.noise);
    if (j.contains("text_noise") && !j["text_noise"].is_null()) spec.text_noise = j["text_noise"].get<double>();
    spec.corrupt_fraction = j.value("corrupt_fraction", spec.corrupt_fraction);
    spec.seed = j.value("seed", spec.seed);
    if (!j.contains("output_dir")) throw ConfigError("synth needs output_dir");
    dir = fs::path(j["output_dir"].get<std::string>());
    if (dir.is_relative() && !o.config.empty()) dir = config_dir(o) / dir;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("synth config: ") + e.what());
  }
  if (spec.dim < spec.classes)
    err << "warning: dim " << spec.dim << " < classes " << spec.classes
        << "; class directions are random unit vectors, not orthogonal\n";
  const auto data = generate_synthetic(spec);
  const auto paths = write_synthetic(data, spec, dir);
  out << json{{"support_manifest", paths.support_manifest.string()},
              {"validation_manifest", paths.validation_manifest.string()},
              {"test_manifest", paths.test_manifest.string()}}
             .dump(2)
      << '\n';
  return 0;
}

int cmd_eval(const Overrides& o, std::ostream& out, std::ostream& err) {
  const auto config = load_run_config(o);
  if (!config.output) throw ConfigError("eval needs an output path (config 'output' or --output)");
  log(o, err, std::string("running mode ") + to_string(config.method.mode));
  SearchResult search;
  const auto report = run(config, &search);
  write_text(*config.output, report.to_json().dump(2) + "\n");
  if (config.trace_output) write_text(*config.trace_output, trace_csv(search));
  log(o, err, "test top-1 " + std::to_string(report.test.accuracy));
  out << json{{"report", config.output->string()}, {"top1", report.test.accuracy}}.dump() << '\n';
  return 0;
}

int cmd_search(const Overrides& o, std::ostream& out, std::ostream& err) {
  const auto config = load_run_config(o);
  if (!config.output && !config.trace_output)
    throw ConfigError("search needs an output path (config 'output'/'trace_output' or --output)");
  const fs::path trace_path = config.trace_output ? *config.trace_output : fs::path(*config.output).replace_extension(".csv");
  log(o, err, std::string("searching mode ") + to_string(config.method.mode));
  const auto result = run_search(config);
  if (config.output) {
    json j = to_json(result);
    j["mode"] = to_string(config.method.mode);
    j["config_fingerprint"] = config_fingerprint(config);
    j["trace"] = trace_path.string();
    write_text(*config.output, j.dump(2) + "\n");
  }
  write_text(trace_path, trace_csv(result));
  out << json{{"trace", trace_path.string()}, {"points", result.trace.size()}, {"val_accuracy", result.val_accuracy}}.dump()
      << '\n';
  return 0;
}

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
  return out + "\"";
}

int cmd_diagnose(const Overrides& o, std::ostream& out, std::ostream& err) {
  json j = apply_common(read_json_file(o.config), o);
  if (o.output_dir) j["output_dir"] = fs::absolute(*o.output_dir).string();
  if (!j.contains("output_dir")) throw ConfigError("diagnose needs output_dir");
  fs::path dir = j["output_dir"].get<std::string>();
  if (dir.is_relative()) dir = config_dir(o) / dir;
  json groups = j.contains("accuracy_groups") ? j["accuracy_groups"] : json(nullptr);
  j.erase("output_dir");
  j.erase("accuracy_groups");
  const auto config = run_config_from_json(j, config_dir(o));
  kernels::set_thread_limit(config.threads);
  if (!config.test_manifest) throw ConfigError("diagnose needs a test_manifest");

  const auto loaded = load_run(config);
  const auto& banks = loaded.banks;
  const QueryBatch& test = *loaded.test;
  if (test.size() == 0) throw DataError("test split is empty");
  const std::size_t n = banks.classes();
  const int beta = config.method.beta.value_or(static_cast<int>(banks.text.prompts_per_class()));
  if (beta < 0 || beta > static_cast<int>(2 * banks.text.prompts_per_class()))
    throw ConfigError("beta " + std::to_string(beta) + " outside [0, 2P]");
  log(o, err, "diagnosing " + std::to_string(n) + " classes");

  const BranchEvaluator eval(banks, config.method);
  const ClassBank by_class = group_by_class(test, n);
  const auto raw = anomalous_matches(banks.support.prototypes, by_class, config.anomaly_mode);
  const auto refined = anomalous_matches(class_mean_prototypes(eval.image_bank(beta)).weights, by_class, config.anomaly_mode);

  std::ostringstream anomalies;
  anomalies << "class,name,raw_count,refined_count,foreign_samples\n";
  for (std::size_t c = 0; c < n; ++c)
    anomalies << c << ',' << csv_escape(loaded.class_names[c]) << ',' << raw.counts[c] << ',' << refined.counts[c] << ','
              << raw.foreign[c] << '\n';

  const auto quality = prompt_quality(banks.text, banks.support.prototypes);
  std::ostringstream prompts;
  prompts << "class,rank,prompt,similarity,text\n";
  for (std::size_t c = 0; c < n; ++c) {
    for (std::size_t r = 0; r < quality.ranked[c].size(); ++r) {
      const auto& rp = quality.ranked[c][r];
      std::ostringstream sim;
      sim.precision(17);
      sim << rp.similarity;
      const std::string text = banks.text.prompt_texts.empty() ? "" : banks.text.prompt_texts[c][rp.prompt];
      prompts << c << ',' << r << ',' << rp.prompt << ',' << sim.str() << ',' << csv_escape(text) << '\n';
    }
  }

  auto accuracy_of = [&](const PrototypeSet& protos) {
    return evaluate_top1(cosine_logits(protos, test.features, config.method.logit_scale), test.labels, n).accuracy;
  };
  json halves{{"all", accuracy_of(split_prototypes(banks.text, quality, PromptHalf::all))},
              {"best", accuracy_of(split_prototypes(banks.text, quality, PromptHalf::best))},
              {"igt", accuracy_of(eval.text_prototypes(config.method.gamma))}};
  if (banks.text.prompts_per_class() > 1)
    halves["worst"] = accuracy_of(split_prototypes(banks.text, quality, PromptHalf::worst));

  const auto image_preds = kernels::parallel::argmax_rows(eval.image_logits(beta, std::nullopt, test.features));
  const auto text_preds = kernels::parallel::argmax_rows(eval.text_logits(config.method.gamma, test.features));
  const auto q = q_statistic(image_preds, text_preds, test.labels);

  json summary{{"anomaly_mode", raw.mode.label()},
               {"beta", beta},
               {"gamma", config.method.gamma},
               {"anomalous_matches", {{"raw_prototypes_total", raw.total()}, {"refined_prototypes_total", refined.total()}}},
               {"prompt_half_top1", halves},
               {"q_statistic",
                {{"pair", "image_branch,text_branch"},
                 {"defined", q.defined},
                 {"value", q.defined ? json(q.value) : json(nullptr)},
                 {"both_correct", q.both_correct},
                 {"both_wrong", q.both_wrong},
                 {"only_image", q.only_a},
                 {"only_text", q.only_b}}}};
  if (!groups.is_null()) {
    if (!groups.is_object()) throw ConfigError("accuracy_groups must map names to lists of accuracies");
    std::vector<std::vector<double>> values;
    std::vector<std::string> names;
    try {
      for (const auto& [name, list] : groups.items()) {
        names.push_back(name);
        values.push_back(list.get<std::vector<double>>());
      }
    } catch (const json::exception& e) {
      throw ConfigError(std::string("accuracy_groups: ") + e.what());
    }
    const auto kw = kruskal_wallis(values);
    summary["kruskal_wallis"] = {{"groups", names}, {"h", kw.h}, {"p_value", kw.p_value}, {"dof", kw.dof}};
  }

  write_text(dir / "anomalies.csv", anomalies.str());
  write_text(dir / "prompt_quality.csv", prompts.str());
  write_text(dir / "diagnostics.json", summary.dump(2) + "\n");
  out << json{{"output_dir", dir.string()}}.dump() << '\n';
  return 0;
}

void print_error(std::ostream& err, int code, const std::string& kind, const std::string& message) {
  err << json{{"error", {{"code", code}, {"kind", kind}, {"message", message}}}}.dump() << '\n';
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Training-free few-shot classification with image-text mutual guidance", "timo"};
  app.require_subcommand(1);
  Overrides o;

  auto add_common = [&](CLI::App* sub, bool config_required) {
    auto* opt = sub->add_option("-c,--config", o.config, "JSON config file");
    if (config_required) opt->required();
    sub->add_option("--seed", o.seed, "Override the config seed");
    sub->add_flag("-v,--verbose", o.verbose, "Progress messages on stderr");
  };

  auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset (tensors + manifests)");
  add_common(synth, false);
  synth->add_option("--output-dir", o.output_dir, "Directory for the generated files");

  auto* eval = app.add_subcommand("eval", "Search on validation (per mode) and report test top-1");
  auto* search = app.add_subcommand("search", "Grid search on validation; writes the trace CSV");
  for (auto* sub : {eval, search}) {
    add_common(sub, true);
    sub->add_option("--threads", o.threads, "Cap on OpenMP threads (0 = all)");
    sub->add_option("-o,--output", o.output, "Report/result JSON path");
    sub->add_option("--trace-output", o.trace_output, "Search trace CSV path");
    sub->add_option("--mode", o.mode, "zero-shot | base | tip-mg | timo | timo-s");
  }

  auto* diagnose = app.add_subcommand("diagnose", "Anomalous matches, prompt quality, Q-statistic");
  add_common(diagnose, true);
  diagnose->add_option("--threads", o.threads, "Cap on OpenMP threads (0 = all)");
  diagnose->add_option("--output-dir", o.output_dir, "Directory for CSV/JSON outputs");

  std::vector<std::string> reversed(args.rbegin(), args.rend() - (args.empty() ? 0 : 1));
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    print_error(err, 1, "config", e.what());
    return 1;
  }

  try {
    if (synth->parsed()) return cmd_synth(o, out, err);
    if (eval->parsed()) return cmd_eval(o, out, err);
    if (search->parsed()) return cmd_search(o, out, err);
    if (diagnose->parsed()) return cmd_diagnose(o, out, err);
  } catch (const Error& e) {
    const int code = static_cast<int>(e.kind());
    print_error(err, code, to_string(e.kind()), e.what());
    return code;
  } catch (const std::exception& e) {
    print_error(err, 3, "data", e.what());
    return 3;
  }
  return 1;
}

}  // namespace timo::cli
