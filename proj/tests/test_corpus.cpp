#include <catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include "moree/corpus.hpp"

using namespace moree;
namespace fs = std::filesystem;

namespace {

std::string temp_file(const std::string& name, const std::string& content) {
  const auto dir = fs::temp_directory_path() / "moree-test-corpus";
  fs::create_directories(dir);
  const auto p = dir / name;
  std::ofstream(p) << content;
  return p.string();
}

Corpus make_corpus(const std::vector<std::string>& lines) {
  Corpus c;
  for (const auto& l : lines) c.add(tokenize(l));
  return c;
}

}  // namespace

TEST_CASE("ingest plain and jsonl files") {
  CHECK(ingest(temp_file("three.txt", "a dog\na cat\nthe sheep\n"), CorpusFormat::kPlain).size() == 3);
  const auto c = ingest(temp_file("blank.txt", "a dog\n\nthe sheep\n"), CorpusFormat::kPlain);
  REQUIRE(c.size() == 2);
  CHECK(c.sentences[1] == TokenSeq{"the", "sheep"});
  CHECK(ingest(temp_file("empty.txt", ""), CorpusFormat::kPlain).size() == 0);

  const auto j = ingest(temp_file("ok.jsonl", "{\"text\": \"A dog.\", \"source\": \"v\"}\n{\"text\": \"b\"}\n"),
                        CorpusFormat::kJsonl);
  REQUIRE(j.size() == 2);
  CHECK(j.sources[0] == "v");
  try {
    ingest(temp_file("bad.jsonl", "{\"text\": \"ok\"}\n{\"txt\": \"oops\"}\n"), CorpusFormat::kJsonl);
    FAIL("expected a data error");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find(":2:") != std::string::npos);
  }
  CHECK_THROWS_AS(ingest("/nonexistent/corpus.txt", CorpusFormat::kPlain), DataError);
  CHECK_THROWS_AS(parse_corpus_format("xml"), UsageError);
}

TEST_CASE("build_index postings") {
  const auto c = make_corpus({"a dog", "a cat"});
  const auto idx = build_index(c);
  CHECK(idx.lookup("a") == std::vector<SentenceId>{0, 1});
  CHECK(idx.lookup("dog") == std::vector<SentenceId>{0});
  CHECK(build_index(Corpus{}).postings().empty());
  CHECK(build_index(make_corpus({"dog dog dog"})).lookup("dog") == std::vector<SentenceId>{0});
}

TEST_CASE("build_index matches a brute-force scan and ignores the worker count") {
  std::mt19937 rng(11);
  const std::vector<std::string> vocab{"a", "b", "c", "dog", "dogs", "sheep", "herd", "herding", "the", "."};
  for (int trial = 0; trial < 20; ++trial) {
    Corpus c;
    const int n = 1 + static_cast<int>(rng() % 25);
    for (int i = 0; i < n; ++i) {
      TokenSeq s;
      const int len = 1 + static_cast<int>(rng() % 8);
      for (int j = 0; j < len; ++j) s.push_back(vocab[rng() % vocab.size()]);
      c.add(s);
    }
    const auto idx = build_index(c);
    for (const auto& t : vocab) {
      std::vector<SentenceId> expect;
      for (SentenceId id = 0; id < c.size(); ++id)
        if (std::find(c.sentences[id].begin(), c.sentences[id].end(), t) != c.sentences[id].end()) expect.push_back(id);
      CHECK(idx.lookup(t) == expect);
      std::vector<SentenceId> stem_expect;
      for (SentenceId id = 0; id < c.size(); ++id)
        if (contains_concept(c.sentences[id], t)) stem_expect.push_back(id);
      CHECK(idx.matching(t) == stem_expect);
    }
    for (unsigned w : {2u, 3u, 8u}) CHECK(build_index(c, w).postings() == idx.postings());
  }
}

TEST_CASE("cosine") {
  CHECK(cosine(std::vector<double>{1, 0}, std::vector<double>{1, 0}) == Catch::Approx(1.0));
  CHECK(cosine(std::vector<double>{1, 0}, std::vector<double>{0, 1}) == Catch::Approx(0.0));
  CHECK(std::fabs(cosine(std::vector<double>{1, 1}, std::vector<double>{1, 0}) - 0.70710678) < 1e-6);
  CHECK_THROWS_AS(cosine(std::vector<double>{0, 0}, std::vector<double>{1, 0}), UsageError);
  CHECK_THROWS_AS(cosine(std::vector<double>{1}, std::vector<double>{1, 0}), UsageError);
}

TEST_CASE("WordVectors load with and without a header") {
  const auto with = WordVectors::load(temp_file("wv1.txt", "2 3\ndog 1 0 0\nsheep 0 1 0\n"));
  CHECK(with.size() == 2);
  CHECK(with.dim() == 3);
  const auto without = WordVectors::load(temp_file("wv2.txt", "dog 1 0\nsheep 0 1\n"));
  CHECK(without.dim() == 2);
  CHECK_THROWS_AS(WordVectors::load(temp_file("wv3.txt", "dog 1 0\nsheep 0 1 2\n")), DataError);
  CHECK_THROWS_AS(WordVectors::load(temp_file("wv4.txt", "dog 1 nan\n")), DataError);
  CHECK_THROWS_AS(WordVectors::load(temp_file("wv5.txt", "dog 1 x\n")), DataError);
}

namespace {

WordVectors fixture_vectors() {
  WordVectors wv(3);
  wv.add("dog", {1, 0, 0});
  wv.add("sheep", {0, 1, 0});
  wv.add("wolf", {0.1, 0.9, 0.1});
  wv.add("chases", {0.3, 0.2, 0.9});
  wv.add("a", {0.5, 0.5, 0.5});
  wv.add("cat", {0.2, 0.6, 0.1});
  return wv;
}

}  // namespace

TEST_CASE("substitute_fallback replaces the nearest token") {
  const auto c = make_corpus({"a dog chases a wolf"});
  const auto wv = fixture_vectors();
  const auto pair = ConceptPair::make("dog", "sheep");
  // Brute-force nearest token to "sheep" among the non-concept tokens.
  std::string nearest;
  double best = -2;
  for (const auto& t : c.sentences[0]) {
    if (t == "dog" || !wv.contains(t)) continue;
    const double s = cosine(*wv.find(t), *wv.find("sheep"));
    if (s > best) {
      best = s;
      nearest = t;
    }
  }
  REQUIRE(nearest == "wolf");
  const auto r = substitute_fallback(c, pair, 1, wv);
  REQUIRE(r.rewrites.size() == 1);
  CHECK(r.rewrites[0].tokens == tokenize("a dog chases a sheep"));
  CHECK(substitute_fallback(c, pair, 0, wv).rewrites.empty());
  CHECK(substitute_fallback(make_corpus({"nothing here"}), pair, 3, wv).rewrites.empty());

  WordVectors partial(3);
  partial.add("dog", {1, 0, 0});
  const auto missing = substitute_fallback(c, pair, 1, partial);
  CHECK(missing.rewrites.empty());
  CHECK_FALSE(missing.warnings.empty());
}

TEST_CASE("substitute_fallback ranks by similarity then id") {
  const auto c = make_corpus({"a dog chases a cat", "a dog chases a wolf", "a sheep", "a dog chases a wolf"});
  const auto r = substitute_fallback(c, ConceptPair::make("dog", "sheep"), 5, fixture_vectors());
  REQUIRE(r.rewrites.size() == 4);
  CHECK(r.rewrites[0].id == 1);
  CHECK(r.rewrites[1].id == 3);
  for (std::size_t i = 1; i < r.rewrites.size(); ++i)
    CHECK(r.rewrites[i - 1].similarity >= r.rewrites[i].similarity);
}

TEST_CASE("candidate_pool") {
  const auto wv = fixture_vectors();
  const auto pair = ConceptPair::make("dog", "sheep");
  {
    const auto c = make_corpus({"the dog herds sheep", "a cat", "dogs and sheep", "a dog sleeps"});
    const auto pool = candidate_pool(build_index(c), c, pair, 2, wv);
    REQUIRE(pool.members.size() == 2);
    CHECK(pool.members[0].id == 0);
    CHECK(pool.members[1].id == 2);
    CHECK_FALSE(pool.members[0].substituted);
  }
  {
    const auto c = make_corpus({"a cat", "the bird"});
    CHECK(candidate_pool(build_index(c), c, pair, 3, wv).members.empty());
  }
  {
    const auto c = make_corpus({"a dog chases a wolf", "the dog herds sheep", "a sheep chases a cat", "a bird"});
    const auto pool = candidate_pool(build_index(c), c, pair, 3, wv);
    REQUIRE(pool.members.size() == 3);
    CHECK(pool.members[0].id == 1);
    CHECK_FALSE(pool.members[0].substituted);
    CHECK(pool.members[1].substituted);
    CHECK(pool.members[2].substituted);
    for (const auto& m : pool.members) CHECK(pair.covered_by(m.tokens));
    // deterministic
    const auto again = candidate_pool(build_index(c), c, pair, 3, wv);
    for (std::size_t i = 0; i < 3; ++i) CHECK(again.members[i].tokens == pool.members[i].tokens);
  }
  CHECK_THROWS_AS(candidate_pool(InvertedIndex{}, Corpus{}, pair, 0, wv), UsageError);
}
