#include <doctest.h>

#include <cmath>
#include <string>
#include <vector>

#include "acr/errors.hpp"
#include "acr/textsearch.hpp"

using namespace acr;

TEST_CASE("stopword list is the fixed 127-word set") {
  const auto& sw = stopwords();
  CHECK(sw.size() == 127);
  CHECK(sw.count("the") == 1);
  CHECK(sw.count("and") == 1);
  CHECK(sw.count("rain") == 0);
}

TEST_CASE("tokenizer lowercases, strips punctuation, drops stopwords") {
  auto toks = tokenize("The RAIN, falls; on the Roof!");
  REQUIRE(toks.size() == 3);
  CHECK(toks[0] == "rain");
  CHECK(toks[1] == "falls");
  CHECK(toks[2] == "roof");

  auto kept = tokenize("The rain", /*remove_stopwords=*/false);
  REQUIRE(kept.size() == 2);
  CHECK(kept[0] == "the");

  CHECK(tokenize("...!!!").empty());
  auto doc = make_doc(4, "A dog barks");
  CHECK(doc.id == 4);
  CHECK(doc.stopwords_removed);
  CHECK(doc.tokens == std::vector<std::string>{"dog", "barks"});
}

TEST_CASE("lexical search counts distinct query tokens") {
  std::vector<TextDoc> corpus = {
      make_doc(1, "rain hits the window"),
      make_doc(2, "rain sounds on a tent"),
      make_doc(3, "a dog barks loudly"),
  };
  auto q = make_doc(0, "rain sounds");
  auto hits = lexical_search(q, corpus, 3);
  REQUIRE(hits.size() == 3);
  CHECK(hits[0].id == 2);  // both tokens
  CHECK(hits[0].score == doctest::Approx(2.0));
  CHECK(hits[1].id == 1);  // rain only
  CHECK(hits[1].score == doctest::Approx(1.0));
  CHECK(hits[2].score == doctest::Approx(0.0));

  // caption containing all query tokens scores |query tokens|
  auto full = make_doc(0, "rain sounds tent");
  CHECK(lexical_search(full, corpus, 1)[0].score == doctest::Approx(3.0));

  // duplicated query token still counts once
  auto dup = make_doc(0, "rain rain");
  CHECK(lexical_search(dup, corpus, 1)[0].score == doctest::Approx(1.0));

  auto empty = make_doc(0, "the of and");
  CHECK_THROWS_AS(lexical_search(empty, corpus, 3), EmptyQuery);
}

TEST_CASE("bm25 matches hand arithmetic on a 3-doc corpus") {
  // lengths after stopword removal: d1=2, d2=3, d3=4; "rain" in d1 (tf 1)
  // and d3 (tf 2); df = 2.
  std::vector<TextDoc> corpus = {
      make_doc(1, "rain window"),
      make_doc(2, "dog barks loudly"),
      make_doc(3, "rain rain tent night"),
  };
  auto idx = build_bm25(corpus);
  CHECK(idx.avg_len == doctest::Approx(3.0));
  CHECK(idx.doc_freq.at("rain") == 2);

  auto q = make_doc(0, "rain");
  const double idf = std::log((3.0 - 2.0 + 0.5) / (2.0 + 0.5) + 1.0);
  const double k1 = 1.2, b = 0.75;
  auto score = [&](double tf, double len) {
    return idf * tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * len / 3.0));
  };
  CHECK(bm25_score(q, idx, 0) == doctest::Approx(score(1.0, 2.0)).epsilon(1e-9));
  CHECK(bm25_score(q, idx, 1) == doctest::Approx(0.0));
  CHECK(bm25_score(q, idx, 2) == doctest::Approx(score(2.0, 4.0)).epsilon(1e-9));

  auto hits = bm25_search(q, idx, 3);
  CHECK(hits[0].id == 3);  // higher tf wins here
  CHECK(hits[0].score == doctest::Approx(score(2.0, 4.0)).epsilon(1e-9));
  CHECK(hits[2].score == doctest::Approx(0.0));
}

TEST_CASE("bm25 trivial cases") {
  std::vector<TextDoc> corpus = {make_doc(1, "wind chimes ring")};
  auto idx = build_bm25(corpus);
  auto present = bm25_search(make_doc(0, "wind"), idx, 1);
  CHECK(present[0].score > 0.0);
  auto absent = bm25_search(make_doc(0, "thunder"), idx, 1);
  CHECK(absent[0].score == doctest::Approx(0.0));
  CHECK_THROWS_AS(bm25_search(make_doc(0, "the"), idx, 1), EmptyQuery);
}

TEST_CASE("semantic search ranks an identical caption first") {
  auto embed = make_toy_text_embedder(3, 32);
  std::vector<TextDoc> corpus = {
      make_doc(10, "birds chirping in the forest"),
      make_doc(11, "heavy rain and thunder"),
      make_doc(12, "a car engine idles"),
  };
  auto hits = semantic_search("heavy rain and thunder", corpus, embed, 3);
  CHECK(hits[0].id == 11);
  CHECK(hits[0].score == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("semantic search equals search() on the induced index") {
  auto embed = make_toy_text_embedder(9, 24);
  std::vector<TextDoc> corpus;
  const char* texts[] = {"dog barking", "cat meowing softly", "rain on metal",
                         "wind through trees", "crowd cheering", "glass breaking",
                         "engine revving", "birds singing", "waves crashing",
                         "door slamming"};
  for (int i = 0; i < 10; ++i) corpus.push_back(make_doc(50 + i, texts[i]));
  auto hits = semantic_search("rain hitting metal roof", corpus, embed, 10);

  Tensor2D vecs(10, 24);
  std::vector<std::uint64_t> ids;
  for (int i = 0; i < 10; ++i) {
    auto v = embed(corpus[i].raw);
    for (int j = 0; j < 24; ++j) vecs.at(i, j) = v[j];
    ids.push_back(corpus[i].id);
  }
  auto idx = build_index(ids, vecs, "text");
  auto ref = search(idx, embed("rain hitting metal roof"), 10);
  REQUIRE(hits.size() == ref.size());
  for (std::size_t i = 0; i < ref.size(); ++i) {
    CHECK(hits[i].id == ref[i].id);
    CHECK(hits[i].score == doctest::Approx(ref[i].score).epsilon(1e-12));
  }
}

namespace {

CaptionCandidate cand(const std::string& text, double cos) {
  // 2-d vectors with a chosen cosine
  CaptionCandidate c;
  c.text = text;
  c.audio_vec = {1.0, 0.0};
  c.text_vec = {cos, std::sqrt(std::max(0.0, 1.0 - cos * cos))};
  return c;
}

}  // namespace

TEST_CASE("caption filtering keeps high-similarity captions in rank order") {
  std::vector<CaptionCandidate> caps = {cand("low", 0.2), cand("best", 0.9),
                                        cand("mid", 0.5)};
  auto f = filter_captions(caps);
  REQUIRE(f.kept.size() == 2);
  CHECK(f.kept[0] == "best");
  CHECK(f.kept[1] == "mid");
  CHECK(f.joined == "best mid");
}

TEST_CASE("caption filtering truncates to top_k") {
  std::vector<CaptionCandidate> caps;
  for (int i = 0; i < 7; ++i)
    caps.push_back(cand("c" + std::to_string(i), 0.4 + 0.05 * i));
  auto f = filter_captions(caps, 5, 0.35);
  REQUIRE(f.kept.size() == 5);
  CHECK(f.kept[0] == "c6");
  CHECK(f.kept[4] == "c2");
}

TEST_CASE("caption filtering with nothing above threshold fails loudly") {
  std::vector<CaptionCandidate> caps = {cand("a", 0.1), cand("b", 0.3)};
  CHECK_THROWS_AS(filter_captions(caps), EmptyCaptionSet);
  CHECK_THROWS_AS(filter_captions({}), EmptyCaptionSet);
  // boundary: exactly at the threshold is kept
  std::vector<CaptionCandidate> edge = {cand("edge", 0.35)};
  CHECK(filter_captions(edge).kept.size() == 1);
}
