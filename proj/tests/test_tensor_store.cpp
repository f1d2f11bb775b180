#include <doctest.h>

#include <fstream>

#include "test_util.hpp"
#include "timo/errors.hpp"
#include "timo/tensor_store.hpp"

using namespace timo;
using timo::testing::TempDir;

namespace {

void write_bytes(const std::filesystem::path& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

Tensor filled(std::vector<std::uint32_t> dims, float value) {
  Tensor t;
  t.dims = std::move(dims);
  t.data.assign(t.element_count(), value);
  return t;
}

}  // namespace

TEST_CASE("write then read reproduces a 2x3 tensor") {
  TempDir dir;
  const auto t = filled({2, 3}, 0.5f);
  write_tensor(t, dir / "a.timo");
  CHECK(read_tensor(dir / "a.timo") == t);
}

TEST_CASE("single element tensor encodes to 18 bytes with the documented layout") {
  TempDir dir;
  write_tensor(filled({1}, 1.0f), dir / "one.timo");
  const std::string bytes = timo::testing::slurp(dir / "one.timo");
  REQUIRE(bytes.size() == 18);
  const std::string expected("TIMO\x01\x00\x00\x00\x00\x01\x01\x00\x00\x00\x00\x00\x80\x3f", 18);
  CHECK(bytes == expected);
}

TEST_CASE("rank 4 and zero dimensions are rejected on write") {
  TempDir dir;
  CHECK_THROWS_AS(write_tensor(filled({1, 1, 1, 1}, 0.f), dir / "r4.timo"), DataError);
  Tensor zero;
  zero.dims = {2, 0};
  CHECK_THROWS_AS(write_tensor(zero, dir / "z.timo"), DataError);
}

TEST_CASE("reader rejects bad magic, truncation, dtype and version") {
  TempDir dir;
  write_tensor(filled({2, 2}, 1.f), dir / "ok.timo");
  std::string good = timo::testing::slurp(dir / "ok.timo");

  std::string bad_magic = good;
  bad_magic.replace(0, 4, "XXXX");
  write_bytes(dir / "magic.timo", bad_magic);
  CHECK_THROWS_WITH_AS(read_tensor(dir / "magic.timo"), doctest::Contains("bad magic"), DataError);

  write_bytes(dir / "short.timo", good.substr(0, good.size() - 3));
  CHECK_THROWS_WITH_AS(read_tensor(dir / "short.timo"), doctest::Contains("truncated"), DataError);

  std::string dtype = good;
  dtype[8] = 1;
  write_bytes(dir / "dtype.timo", dtype);
  CHECK_THROWS_WITH_AS(read_tensor(dir / "dtype.timo"), doctest::Contains("dtype"), DataError);

  std::string version = good;
  version[4] = 2;
  write_bytes(dir / "version.timo", version);
  CHECK_THROWS_WITH_AS(read_tensor(dir / "version.timo"), doctest::Contains("version"), DataError);

  CHECK_THROWS_AS(read_tensor(dir / "missing.timo"), IoError);
}

TEST_CASE("property: read(write(t)) == t over random shapes and values") {
  TempDir dir;
  SplitMix64 rng(7);
  for (int iter = 0; iter < 200; ++iter) {
    Tensor t;
    const auto rank = 1 + rng.below(3);
    for (std::uint64_t r = 0; r < rank; ++r) t.dims.push_back(static_cast<std::uint32_t>(1 + rng.below(6)));
    t.data.resize(t.element_count());
    for (auto& v : t.data) v = static_cast<float>(rng.normal() * std::pow(10.0, static_cast<double>(rng.below(9)) - 4.0));
    const auto path = dir / "p.timo";
    write_tensor(t, path);
    REQUIRE(std::filesystem::file_size(path) == encoded_size(t));
    REQUIRE(read_tensor(path) == t);
  }
}

namespace {

struct Fixture {
  TempDir dir;
  std::size_t n = 3, p = 2, k = 1, d = 4;

  void write_support(std::uint32_t text_prompts) {
    Tensor text = filled({static_cast<std::uint32_t>(n), text_prompts, static_cast<std::uint32_t>(d)}, 0.f);
    Tensor support = filled({static_cast<std::uint32_t>(n), static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(d)}, 0.f);
    // Class c gets basis direction c so ordering is observable after load.
    for (std::size_t c = 0; c < n; ++c) {
      for (std::size_t q = 0; q < text_prompts; ++q) text.data[(c * text_prompts + q) * d + c] = 2.f;
      support.data[c * k * d + c] = 3.f;
    }
    write_tensor(text, dir / "text.timo");
    write_tensor(support, dir / "support.timo");
    Manifest m;
    m.dataset_name = "toy";
    m.class_names = {"a", "b", "c"};
    m.split = Split::support;
    m.shots = k;
    m.prompts_per_class = p;
    m.feature_dim = d;
    m.tensor_paths = {{"text", "text.timo"}, {"support", "support.timo"}};
    write_manifest(m, dir / "support.json");
  }

  void write_queries(const std::vector<int>& labels) {
    write_tensor(filled({static_cast<std::uint32_t>(labels.size()), static_cast<std::uint32_t>(d)}, 1.f), dir / "q.timo");
    write_labels(labels, dir / "q_labels.txt");
    Manifest m;
    m.dataset_name = "toy";
    m.class_names = {"a", "b", "c"};
    m.split = Split::test;
    m.prompts_per_class = p;
    m.feature_dim = d;
    m.tensor_paths = {{"queries", "q.timo"}};
    m.label_path = "q_labels.txt";
    write_manifest(m, dir / "test.json");
  }
};

}  // namespace

TEST_CASE_FIXTURE(Fixture, "load_dataset accepts consistent shapes and keeps class order") {
  write_support(2);
  const auto split = load_dataset(dir / "support.json");
  REQUIRE(split.text);
  REQUIRE(split.support);
  CHECK(split.text->classes() == 3);
  CHECK(split.text->prompts_per_class() == 2);
  CHECK(split.support->shots_per_class() == 1);
  for (Eigen::Index c = 0; c < 3; ++c) {
    CHECK(split.text->prompts[static_cast<std::size_t>(c)](0, c) == doctest::Approx(1.0));
    CHECK(split.support->prototypes(c, c) == doctest::Approx(1.0));
  }
}

TEST_CASE_FIXTURE(Fixture, "load_dataset rejects a text tensor with P+1 prompts") {
  write_support(3);
  CHECK_THROWS_WITH_AS(load_dataset(dir / "support.json"), doctest::Contains("shape"), DataError);
}

TEST_CASE_FIXTURE(Fixture, "load_dataset range-checks labels") {
  write_support(2);
  write_queries({0, 1, 2});
  CHECK(load_dataset(dir / "test.json").queries->size() == 3);
  write_queries({0, 3});
  CHECK_THROWS_WITH_AS(load_dataset(dir / "test.json"), doctest::Contains("label 3"), DataError);
}

TEST_CASE_FIXTURE(Fixture, "load_dataset reports a missing role and a missing tensor file") {
  write_support(2);
  Manifest m = read_manifest(dir / "support.json");
  m.tensor_paths.erase("support");
  write_manifest(m, dir / "norole.json");
  CHECK_THROWS_WITH_AS(load_dataset(dir / "norole.json"), doctest::Contains("'support'"), DataError);

  m = read_manifest(dir / "support.json");
  m.tensor_paths["support"] = "nowhere.timo";
  write_manifest(m, dir / "nofile.json");
  CHECK_THROWS_AS(load_dataset(dir / "nofile.json"), IoError);
  CHECK_THROWS_AS(load_dataset(dir / "absent.json"), IoError);
}

TEST_CASE("manifest round trip") {
  TempDir dir;
  Manifest m;
  m.dataset_name = "toy";
  m.class_names = {"x", "y"};
  m.split = Split::validation;
  m.prompts_per_class = 1;
  m.feature_dim = 2;
  m.tensor_paths = {{"queries", "v.timo"}};
  m.label_path = "v.txt";
  m.prompt_texts = {{"a photo of x"}, {"a photo of y"}};
  write_manifest(m, dir / "m.json");
  const auto back = read_manifest(dir / "m.json");
  CHECK(back.dataset_name == m.dataset_name);
  CHECK(back.class_names == m.class_names);
  CHECK(back.split == Split::validation);
  CHECK(back.tensor_paths == m.tensor_paths);
  CHECK(back.label_path == m.label_path);
  CHECK(back.prompt_texts == m.prompt_texts);
  CHECK(back.resolve("v.timo") == dir.path() / "v.timo");
}
