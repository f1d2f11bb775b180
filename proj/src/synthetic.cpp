#include "timo/synthetic.hpp"

#include <cmath>

#include "timo/errors.hpp"
#include "timo/rng.hpp"
#include "timo/tensor_store.hpp"

namespace timo {

namespace fs = std::filesystem;

std::size_t corrupted_prompt_count(const SyntheticSpec& spec) {
  return static_cast<std::size_t>(std::llround(spec.corrupt_fraction * static_cast<double>(spec.prompts)));
}

namespace {

Vector gaussian(SplitMix64& rng, Eigen::Index dim) {
  Vector v(dim);
  for (Eigen::Index d = 0; d < dim; ++d) v[d] = rng.normal();
  return v;
}

Vector unit(const Vector& v) {
  const double n = v.norm();
  return n > 0.0 ? Vector(v / n) : v;
}

Vector round_to_float(const Vector& v) { return v.cast<float>().cast<double>(); }

Vector perturbed(SplitMix64& rng, const Vector& direction, double noise) {
  const auto dim = direction.size();
  if (noise == 0.0) return direction;
  return unit(direction + noise * gaussian(rng, dim));
}

Matrix queries(SplitMix64& rng, const Matrix& directions, std::size_t per_class, double noise, std::vector<int>& labels) {
  const auto n = static_cast<std::size_t>(directions.rows());
  Matrix out(static_cast<Eigen::Index>(n * per_class), directions.cols());
  labels.resize(n * per_class);
  for (std::size_t r = 0; r < n * per_class; ++r) {
    const auto c = static_cast<Eigen::Index>(r % n);
    labels[r] = static_cast<int>(c);
    out.row(static_cast<Eigen::Index>(r)) = round_to_float(perturbed(rng, directions.row(c).transpose(), noise)).transpose();
  }
  return out;
}

}  // namespace

SyntheticDataset generate_synthetic(const SyntheticSpec& spec) {
  if (spec.classes < 1 || spec.prompts < 1 || spec.shots < 1 || spec.dim < 1)
    throw ConfigError("synthetic: classes, prompts, shots and dim must be >= 1");
  if (!(spec.noise >= 0.0) || (spec.text_noise && !(*spec.text_noise >= 0.0)))
    throw ConfigError("synthetic: noise must be non-negative");
  if (!(spec.corrupt_fraction >= 0.0 && spec.corrupt_fraction <= 1.0))
    throw ConfigError("synthetic: corrupt_fraction must lie in [0, 1]");

  const auto n = static_cast<Eigen::Index>(spec.classes);
  const auto dim = static_cast<Eigen::Index>(spec.dim);
  const SplitMix64 root(spec.seed);
  SyntheticDataset out;

  auto dir_rng = root.stream("directions");
  out.directions.resize(n, dim);
  out.directions_orthogonal = spec.dim >= spec.classes;
  for (Eigen::Index c = 0; c < n; ++c) {
    Vector v = gaussian(dir_rng, dim);
    if (out.directions_orthogonal) {
      for (int pass = 0; pass < 2; ++pass)  // re-orthogonalization pass for stability
        for (Eigen::Index prev = 0; prev < c; ++prev) v -= out.directions.row(prev).dot(v) * out.directions.row(prev).transpose();
    }
    out.directions.row(c) = unit(v).transpose();
  }

  const double text_noise = spec.text_noise.value_or(spec.noise);
  const std::size_t n_corrupt = corrupted_prompt_count(spec);
  auto text_rng = root.stream("text");
  auto corrupt_rng = root.stream("corrupt");
  out.text.resize(spec.classes);
  out.corrupted.resize(spec.classes);
  for (std::size_t c = 0; c < spec.classes; ++c) {
    const Vector direction = out.directions.row(static_cast<Eigen::Index>(c)).transpose();
    Matrix block(static_cast<Eigen::Index>(spec.prompts), dim);
    for (std::size_t p = 0; p < spec.prompts; ++p)
      block.row(static_cast<Eigen::Index>(p)) = round_to_float(perturbed(text_rng, direction, text_noise)).transpose();
    out.corrupted[c] = sample_without_replacement(corrupt_rng, spec.prompts, n_corrupt);
    for (std::size_t p : out.corrupted[c])
      block.row(static_cast<Eigen::Index>(p)) = round_to_float(unit(gaussian(corrupt_rng, dim))).transpose();
    out.text[c] = std::move(block);
  }

  auto support_rng = root.stream("support");
  out.support.resize(spec.classes);
  for (std::size_t c = 0; c < spec.classes; ++c) {
    const Vector direction = out.directions.row(static_cast<Eigen::Index>(c)).transpose();
    Matrix block(static_cast<Eigen::Index>(spec.shots), dim);
    for (std::size_t k = 0; k < spec.shots; ++k)
      block.row(static_cast<Eigen::Index>(k)) = round_to_float(perturbed(support_rng, direction, spec.noise)).transpose();
    out.support[c] = std::move(block);
  }

  auto val_rng = root.stream("validation");
  out.validation = queries(val_rng, out.directions, spec.validation_per_class, spec.noise, out.validation_labels);
  auto test_rng = root.stream("test");
  out.test = queries(test_rng, out.directions, spec.test_per_class, spec.noise, out.test_labels);
  return out;
}

SyntheticPaths write_synthetic(const SyntheticDataset& data, const SyntheticSpec& spec, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());

  Manifest base;
  base.dataset_name = spec.dataset_name;
  for (std::size_t c = 0; c < spec.classes; ++c) base.class_names.push_back("class_" + std::to_string(c));
  base.prompts_per_class = spec.prompts;
  base.feature_dim = spec.dim;

  SyntheticPaths paths{dir / "support.json", dir / "validation.json", dir / "test.json"};

  write_tensor(Tensor::from_bank(data.text), dir / "text.timo");
  write_tensor(Tensor::from_bank(data.support), dir / "support.timo");
  Manifest support = base;
  support.split = Split::support;
  support.shots = spec.shots;
  support.tensor_paths = {{"text", "text.timo"}, {"support", "support.timo"}};
  write_manifest(support, paths.support_manifest);

  auto write_queries = [&](const Matrix& rows, const std::vector<int>& labels, Split split, const fs::path& manifest_path) {
    const std::string stem = to_string(split);
    if (rows.rows() > 0) write_tensor(Tensor::from_matrix(rows), dir / (stem + ".timo"));
    write_labels(labels, dir / (stem + "_labels.txt"));
    Manifest m = base;
    m.split = split;
    m.shots = 0;
    if (rows.rows() > 0) m.tensor_paths = {{"queries", stem + ".timo"}};
    m.label_path = stem + "_labels.txt";
    write_manifest(m, manifest_path);
  };
  write_queries(data.validation, data.validation_labels, Split::validation, paths.validation_manifest);
  write_queries(data.test, data.test_labels, Split::test, paths.test_manifest);
  return paths;
}

}  // namespace timo
