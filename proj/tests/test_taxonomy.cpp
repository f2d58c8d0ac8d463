#include <catch2/catch_amalgamated.hpp>

#include <fstream>

#include "mca/taxonomy.hpp"
#include "test_helpers.hpp"

using namespace mca;

TEST_CASE("depths follow the parent chain from the root") {
  const std::vector<std::string> words = {"dog", "cat", "mammal"};
  const TaxonomyTree t = build_taxonomy(
      {{"dog", "mammal"}, {"cat", "mammal"}, {"mammal", "ROOT"}}, words);
  REQUIRE(t.depth[t.word_index.at("mammal")] == 1);
  REQUIRE(t.depth[t.word_index.at("dog")] == 2);
  REQUIRE(t.depth[t.word_index.at("cat")] == 2);
}

TEST_CASE("cycles are rejected") {
  REQUIRE_THROWS_WITH(build_taxonomy({{"a", "b"}, {"b", "a"}}, {"a", "b"}),
                      Catch::Matchers::ContainsSubstring("cycle"));
}

TEST_CASE("duplicate parents are rejected") {
  REQUIRE_THROWS_WITH(
      build_taxonomy({{"a", "ROOT"}, {"b", "ROOT"}, {"a", "b"}}, {"a", "b"}),
      Catch::Matchers::ContainsSubstring("duplicate parent"));
}

TEST_CASE("chains deeper than ten levels resolve") {
  std::vector<std::string> words;
  std::vector<std::pair<std::string, std::string>> edges;
  for (int i = 1; i <= 12; ++i) {
    words.push_back("w" + std::to_string(i));
    edges.emplace_back("w" + std::to_string(i),
                       i == 1 ? "ROOT" : "w" + std::to_string(i - 1));
  }
  const TaxonomyTree t = build_taxonomy(edges, words);
  REQUIRE(t.max_depth() == 12);
  REQUIRE(t.depth[t.word_index.at("w12")] == 12);
}

TEST_CASE("every rooted node sits one level under its parent") {
  std::vector<std::string> words = {"a", "b", "c", "d", "lone"};
  const TaxonomyTree t = build_taxonomy(
      {{"a", "ROOT"}, {"b", "a"}, {"c", "b"}, {"d", "a"}}, words);
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (t.is_orphan(i)) continue;
    if (t.parent[i] == -1)
      REQUIRE(t.depth[i] == 1);
    else
      REQUIRE(t.depth[i] == t.depth[t.parent[i]] + 1);
  }
  REQUIRE(t.is_orphan(t.word_index.at("lone")));
}

TEST_CASE("taxonomy file parsing handles the tab format") {
  const auto dir = test::temp_dir("tax_file");
  {
    std::ofstream os(dir / "t.tsv");
    os << "# comment line\n";
    os << "mammal\tROOT\n";
    os << "dog\tmammal\n";
  }
  const TaxonomyTree t = load_taxonomy(dir / "t.tsv", {"dog", "mammal"});
  REQUIRE(t.depth[t.word_index.at("dog")] == 2);

  {
    std::ofstream os(dir / "bad.tsv");
    os << "no-tab-here\n";
  }
  REQUIRE_THROWS_AS(load_taxonomy(dir / "bad.tsv", {"dog"}), DataError);
}

TEST_CASE("edges naming unknown words are rejected") {
  REQUIRE_THROWS_AS(build_taxonomy({{"dog", "mammal"}}, {"dog"}), DataError);
}
