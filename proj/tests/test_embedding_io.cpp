#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <fstream>

#include "mca/embedding.hpp"
#include "test_helpers.hpp"

using namespace mca;

namespace {

std::vector<char> slurp(const std::filesystem::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("load returns the declared shape with default ids") {
  const auto dir = test::temp_dir("io_basic");
  EmbeddingMatrix m;
  m.n = 2;
  m.d = 3;
  m.data = {1.0f, 2.0f, 3.0f, 4.0f, 5.0f, 6.0f};
  m.ids = {"0", "1"};
  save_embeddings(m, dir / "a.mcae");

  const EmbeddingMatrix back = load_embeddings(dir / "a.mcae");
  REQUIRE(back.n == 2);
  REQUIRE(back.d == 3);
  REQUIRE(back.data == m.data);
  REQUIRE(back.ids == std::vector<std::string>{"0", "1"});
}

TEST_CASE("save after load is byte-identical") {
  const auto dir = test::temp_dir("io_roundtrip");
  const EmbeddingMatrix m = test::random_unit_embeddings(7, 5, 42);
  save_embeddings(m, dir / "a.mcae");
  save_embeddings(load_embeddings(dir / "a.mcae"), dir / "b.mcae");
  REQUIRE(slurp(dir / "a.mcae") == slurp(dir / "b.mcae"));
}

TEST_CASE("clip-scale dimension is accepted") {
  const auto dir = test::temp_dir("io_d512");
  EmbeddingMatrix m;
  m.n = 2;
  m.d = 512;
  m.data.assign(2 * 512, 0.0f);
  m.data[0] = 1.0f;
  m.data[512] = 1.0f;
  m.ids = {"0", "1"};
  save_embeddings(m, dir / "a.mcae");
  REQUIRE(load_embeddings(dir / "a.mcae").d == 512);
}

TEST_CASE("malformed files are rejected") {
  const auto dir = test::temp_dir("io_bad");

  SECTION("bad magic") {
    std::ofstream os(dir / "bad.mcae", std::ios::binary);
    os << "NOPE";
    os.close();
    REQUIRE_THROWS_AS(load_embeddings(dir / "bad.mcae"), DataError);
  }

  SECTION("truncated payload") {
    EmbeddingMatrix m;
    m.n = 4;
    m.d = 4;
    m.data.assign(16, 1.0f);
    m.ids = default_ids(4);
    save_embeddings(m, dir / "t.mcae");
    std::filesystem::resize_file(dir / "t.mcae", 30);
    REQUIRE_THROWS_AS(load_embeddings(dir / "t.mcae"), DataError);
  }

  SECTION("zero dimension") {
    std::ofstream os(dir / "z.mcae", std::ios::binary);
    os.write("MCAE", 4);
    const std::uint32_t version = 1, n = 1, d = 0;
    os.write(reinterpret_cast<const char*>(&version), 4);
    os.write(reinterpret_cast<const char*>(&n), 4);
    os.write(reinterpret_cast<const char*>(&d), 4);
    os.close();
    REQUIRE_THROWS_AS(load_embeddings(dir / "z.mcae"), DataError);
  }

  SECTION("overflow guard") {
    std::ofstream os(dir / "o.mcae", std::ios::binary);
    os.write("MCAE", 4);
    const std::uint32_t version = 1, n = 0xffffffff, d = 0xffff;
    os.write(reinterpret_cast<const char*>(&version), 4);
    os.write(reinterpret_cast<const char*>(&n), 4);
    os.write(reinterpret_cast<const char*>(&d), 4);
    os.close();
    REQUIRE_THROWS_AS(load_embeddings(dir / "o.mcae"), DataError);
  }
}

TEST_CASE("normalization scales rows to unit norm") {
  EmbeddingMatrix m;
  m.n = 1;
  m.d = 2;
  m.data = {3.0f, 4.0f};
  m.ids = {"0"};
  const EmbeddingMatrix out = l2_normalize(m);
  REQUIRE(out.data[0] == Catch::Approx(0.6).margin(1e-7));
  REQUIRE(out.data[1] == Catch::Approx(0.8).margin(1e-7));
}

TEST_CASE("unit rows pass through normalization unchanged within tolerance") {
  EmbeddingMatrix m;
  m.n = 1;
  m.d = 3;
  m.data = {0.0f, 1.0f, 0.0f};
  m.ids = {"0"};
  const EmbeddingMatrix out = l2_normalize(m);
  REQUIRE(out.data[1] == Catch::Approx(1.0).epsilon(1e-7));
}

TEST_CASE("normalized rows have unit norm by independent recomputation") {
  const EmbeddingMatrix m = test::random_unit_embeddings(5, 4, 7);
  for (std::size_t i = 0; i < m.n; ++i) {
    double norm2 = 0.0;
    for (std::size_t j = 0; j < m.d; ++j)
      norm2 += static_cast<double>(m.data[i * m.d + j]) * m.data[i * m.d + j];
    REQUIRE(std::sqrt(norm2) == Catch::Approx(1.0).margin(1e-6));
  }
}

TEST_CASE("normalization is idempotent") {
  const EmbeddingMatrix once = test::random_unit_embeddings(6, 8, 11);
  const EmbeddingMatrix twice = l2_normalize(once);
  for (std::size_t i = 0; i < once.data.size(); ++i)
    REQUIRE(std::abs(once.data[i] - twice.data[i]) < 1e-6f);
}

TEST_CASE("zero rows cannot be normalized") {
  EmbeddingMatrix m;
  m.n = 2;
  m.d = 2;
  m.data = {1.0f, 0.0f, 0.0f, 0.0f};
  m.ids = {"0", "1"};
  REQUIRE_THROWS_WITH(l2_normalize(m), Catch::Matchers::ContainsSubstring("index 1"));
}

TEST_CASE("metadata sidecar carries ids and labels") {
  const auto dir = test::temp_dir("io_meta");
  EmbeddingMatrix m = test::random_unit_embeddings(3, 4, 5);
  m.ids = {"a", "b", "c"};
  save_embeddings(m, dir / "x.mcae");
  save_meta(dir / "x.mcae", m.ids, std::vector<int>{0, 1, 0}, 2);

  const DatasetBundle bundle = load_dataset(dir / "x.mcae");
  REQUIRE(bundle.images.ids == m.ids);
  REQUIRE(bundle.c == 2);
  REQUIRE(bundle.labels.has_value());
  REQUIRE(bundle.labels->at(1) == 1);
}

TEST_CASE("out-of-range labels are rejected") {
  const auto dir = test::temp_dir("io_meta_bad");
  EmbeddingMatrix m = test::random_unit_embeddings(2, 4, 5);
  save_embeddings(m, dir / "x.mcae");
  save_meta(dir / "x.mcae", m.ids, std::vector<int>{0, 5}, 2);
  REQUIRE_THROWS_AS(load_dataset(dir / "x.mcae"), DataError);
}

TEST_CASE("duplicate ids are rejected") {
  const auto dir = test::temp_dir("io_dup");
  EmbeddingMatrix m = test::random_unit_embeddings(2, 4, 5);
  save_embeddings(m, dir / "x.mcae");
  save_meta(dir / "x.mcae", {"same", "same"}, std::nullopt, 0);
  REQUIRE_THROWS_AS(load_embeddings(dir / "x.mcae"), DataError);
}
