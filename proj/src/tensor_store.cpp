#include "timo/tensor_store.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "timo/errors.hpp"

namespace timo {

namespace fs = std::filesystem;
using nlohmann::json;

std::size_t Tensor::element_count() const {
  std::size_t n = 1;
  for (auto d : dims) n *= d;
  return dims.empty() ? 0 : n;
}

Tensor Tensor::from_matrix(const Matrix& m) {
  Tensor t;
  t.dims = {static_cast<std::uint32_t>(m.rows()), static_cast<std::uint32_t>(m.cols())};
  t.data.resize(static_cast<std::size_t>(m.size()));
  for (Eigen::Index i = 0; i < m.size(); ++i) t.data[static_cast<std::size_t>(i)] = static_cast<float>(m.data()[i]);
  return t;
}

Tensor Tensor::from_bank(const ClassBank& bank) {
  if (bank.empty()) throw DataError("from_bank: no classes");
  const auto rows = bank[0].rows(), cols = bank[0].cols();
  Tensor t;
  t.dims = {static_cast<std::uint32_t>(bank.size()), static_cast<std::uint32_t>(rows), static_cast<std::uint32_t>(cols)};
  t.data.reserve(bank.size() * static_cast<std::size_t>(rows * cols));
  for (const auto& block : bank) {
    if (block.rows() != rows || block.cols() != cols) throw DataError("from_bank: ragged class blocks");
    for (Eigen::Index i = 0; i < block.size(); ++i) t.data.push_back(static_cast<float>(block.data()[i]));
  }
  return t;
}

Matrix Tensor::to_matrix() const {
  if (dims.size() != 1 && dims.size() != 2) throw DataError("to_matrix: tensor rank " + std::to_string(dims.size()));
  const Eigen::Index rows = dims.size() == 1 ? 1 : dims[0];
  const Eigen::Index cols = dims.back();
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = data[static_cast<std::size_t>(i)];
  return m;
}

ClassBank Tensor::to_bank() const {
  if (dims.size() != 3) throw DataError("to_bank: tensor rank " + std::to_string(dims.size()));
  ClassBank bank(dims[0]);
  const std::size_t block = static_cast<std::size_t>(dims[1]) * dims[2];
  for (std::size_t c = 0; c < bank.size(); ++c) {
    bank[c].resize(dims[1], dims[2]);
    for (std::size_t i = 0; i < block; ++i) bank[c].data()[i] = data[c * block + i];
  }
  return bank;
}

namespace {

constexpr std::array<char, 4> kMagic{'T', 'I', 'M', 'O'};

void validate_shape(const Tensor& t) {
  if (t.dims.empty() || t.dims.size() > kMaxRank)
    throw DataError("tensor rank " + std::to_string(t.dims.size()) + " outside [1, 3]");
  for (auto d : t.dims)
    if (d < 1) throw DataError("tensor dimension must be >= 1");
  if (t.data.size() != t.element_count())
    throw DataError("tensor payload holds " + std::to_string(t.data.size()) + " values, dims require " +
                    std::to_string(t.element_count()));
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xffu));
}

std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("read failed: " + path.string());
  return std::move(ss).str();
}

}  // namespace

std::size_t encoded_size(const Tensor& t) { return 4 + 4 + 1 + 1 + 4 * t.dims.size() + 4 * t.element_count(); }

void write_tensor(const Tensor& t, const fs::path& path) {
  validate_shape(t);
  std::string bytes;
  bytes.reserve(encoded_size(t));
  bytes.append(kMagic.data(), kMagic.size());
  put_u32(bytes, kTensorVersion);
  bytes.push_back(static_cast<char>(kDtypeFloat32));
  bytes.push_back(static_cast<char>(t.dims.size()));
  for (auto d : t.dims) put_u32(bytes, d);
  for (float f : t.data) put_u32(bytes, std::bit_cast<std::uint32_t>(f));

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot create " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

Tensor read_tensor(const fs::path& path) {
  const std::string bytes = read_file(path);
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  const std::string name = path.string();
  if (bytes.size() < 10) throw DataError(name + ": truncated header");
  if (std::memcmp(p, kMagic.data(), 4) != 0) throw DataError(name + ": bad magic");
  if (const auto version = get_u32(p + 4); version != kTensorVersion)
    throw DataError(name + ": unsupported version " + std::to_string(version));
  if (p[8] != kDtypeFloat32) throw DataError(name + ": unsupported dtype " + std::to_string(p[8]));
  const std::size_t rank = p[9];
  if (rank < 1 || rank > kMaxRank) throw DataError(name + ": rank " + std::to_string(rank) + " outside [1, 3]");
  if (bytes.size() < 10 + 4 * rank) throw DataError(name + ": truncated header");

  Tensor t;
  for (std::size_t r = 0; r < rank; ++r) {
    t.dims.push_back(get_u32(p + 10 + 4 * r));
    if (t.dims.back() < 1) throw DataError(name + ": zero dimension");
  }
  const std::size_t offset = 10 + 4 * rank;
  const std::size_t count = t.element_count();
  if (bytes.size() - offset < 4 * count) throw DataError(name + ": truncated payload");
  if (bytes.size() - offset > 4 * count) throw DataError(name + ": trailing bytes after payload");
  t.data.resize(count);
  for (std::size_t i = 0; i < count; ++i) t.data[i] = std::bit_cast<float>(get_u32(p + offset + 4 * i));
  return t;
}

const char* to_string(Split s) {
  switch (s) {
    case Split::support: return "support";
    case Split::validation: return "validation";
    case Split::test: return "test";
  }
  return "support";
}

Split parse_split(const std::string& s) {
  if (s == "support") return Split::support;
  if (s == "validation") return Split::validation;
  if (s == "test") return Split::test;
  throw DataError("unknown split '" + s + "'");
}

fs::path Manifest::resolve(const fs::path& p) const { return p.is_absolute() ? p : base_dir / p; }

Manifest read_manifest(const fs::path& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw DataError(path.string() + ": invalid JSON: " + e.what());
  }
  Manifest m;
  m.base_dir = path.parent_path();
  try {
    m.dataset_name = j.at("dataset_name").get<std::string>();
    m.class_names = j.at("class_names").get<std::vector<std::string>>();
    m.split = parse_split(j.at("split").get<std::string>());
    m.shots = j.at("shots").get<std::size_t>();
    m.prompts_per_class = j.at("prompts_per_class").get<std::size_t>();
    m.feature_dim = j.at("feature_dim").get<std::size_t>();
    for (const auto& [role, p] : j.at("tensor_paths").items()) m.tensor_paths[role] = p.get<std::string>();
    if (j.contains("label_path") && !j["label_path"].is_null()) m.label_path = j["label_path"].get<std::string>();
    if (j.contains("prompt_texts")) m.prompt_texts = j["prompt_texts"].get<std::vector<std::vector<std::string>>>();
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": malformed manifest: " + e.what());
  }
  if (m.class_names.empty()) throw DataError(path.string() + ": class_names is empty");
  if (m.split == Split::support && m.shots == 0) throw DataError(path.string() + ": support split needs shots >= 1");
  return m;
}

void write_manifest(const Manifest& m, const fs::path& path) {
  json j;
  j["dataset_name"] = m.dataset_name;
  j["class_names"] = m.class_names;
  j["split"] = to_string(m.split);
  j["shots"] = m.shots;
  j["prompts_per_class"] = m.prompts_per_class;
  j["feature_dim"] = m.feature_dim;
  json paths = json::object();
  for (const auto& [role, p] : m.tensor_paths) paths[role] = p.generic_string();
  j["tensor_paths"] = paths;
  if (m.label_path) j["label_path"] = m.label_path->generic_string();
  if (!m.prompt_texts.empty()) j["prompt_texts"] = m.prompt_texts;
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot create " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

std::vector<int> read_labels(const fs::path& path) {
  std::istringstream in(read_file(path));
  std::vector<int> labels;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      std::size_t used = 0;
      labels.push_back(std::stoi(line, &used));
      if (line.find_first_not_of(" \t\r", used) != std::string::npos) throw std::invalid_argument(line);
    } catch (const std::exception&) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": not an integer label");
    }
  }
  return labels;
}

void write_labels(const std::vector<int>& labels, const fs::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot create " + path.string());
  for (int l : labels) out << l << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

namespace {

Tensor read_role(const Manifest& m, const std::string& role) {
  auto it = m.tensor_paths.find(role);
  if (it == m.tensor_paths.end()) throw DataError("manifest has no '" + role + "' tensor");
  return read_tensor(m.resolve(it->second));
}

std::string shape_string(const std::vector<std::uint32_t>& dims) {
  std::string s;
  for (std::size_t i = 0; i < dims.size(); ++i) s += (i ? "x" : "") + std::to_string(dims[i]);
  return s;
}

void expect_shape(const Tensor& t, const std::vector<std::uint32_t>& want, const std::string& role) {
  if (t.dims != want)
    throw DataError(role + " tensor has shape " + shape_string(t.dims) + ", manifest implies " + shape_string(want));
}

}  // namespace

LoadedSplit load_dataset(const fs::path& manifest_path) {
  LoadedSplit out;
  out.manifest = read_manifest(manifest_path);
  const auto& m = out.manifest;
  const auto n = static_cast<std::uint32_t>(m.class_names.size());
  const auto p = static_cast<std::uint32_t>(m.prompts_per_class);
  const auto k = static_cast<std::uint32_t>(m.shots);
  const auto d = static_cast<std::uint32_t>(m.feature_dim);

  if (m.split == Split::support) {
    auto text = read_role(m, "text");
    expect_shape(text, {n, p, d}, "text");
    out.text = TextFeatureBank::from_raw(text.to_bank(), m.prompt_texts);
    auto support = read_role(m, "support");
    expect_shape(support, {n, k, d}, "support");
    out.support = ImageSupportBank::from_raw(support.to_bank());
  } else {
    if (!m.label_path) throw DataError("query manifest has no label_path");
    auto labels = read_labels(m.resolve(*m.label_path));
    // A split without a queries tensor is an empty split (containers cannot hold zero rows).
    if (!m.tensor_paths.contains("queries")) {
      if (!labels.empty()) throw DataError("manifest has labels but no 'queries' tensor");
      out.queries = QueryBatch{Matrix(0, static_cast<Eigen::Index>(d)), {}};
      return out;
    }
    auto queries = read_role(m, "queries");
    if (queries.dims.size() != 2 || queries.dims[1] != d)
      throw DataError("queries tensor has shape " + shape_string(queries.dims) + ", expected Qx" + std::to_string(d));
    out.queries = QueryBatch::from_raw(queries.to_matrix(), std::move(labels), n);
  }
  return out;
}

}  // namespace timo
