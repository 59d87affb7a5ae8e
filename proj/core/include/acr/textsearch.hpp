#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "acr/retrieval.hpp"

namespace acr {

struct TextDoc {
  std::uint64_t id = 0;
  std::string raw;
  std::vector<std::string> tokens;  // lowercased, punctuation-stripped
  bool stopwords_removed = false;
};

// The fixed 127-word English stopword list used by all text baselines.
const std::set<std::string>& stopwords();

// Lowercase, strip punctuation, split on whitespace; no stemming.
std::vector<std::string> tokenize(const std::string& text,
                                  bool remove_stopwords = true);

TextDoc make_doc(std::uint64_t id, const std::string& text,
                 bool remove_stopwords = true);

// Score = number of distinct query tokens present in the caption.
std::vector<ScoredId> lexical_search(const TextDoc& query,
                                     const std::vector<TextDoc>& corpus, int k);

struct Bm25Index {
  std::vector<TextDoc> docs;
  double avg_len = 0.0;
  std::map<std::string, int> doc_freq;
  double k1 = 1.2, b = 0.75;
};

Bm25Index build_bm25(std::vector<TextDoc> corpus, double k1 = 1.2,
                     double b = 0.75);
// Okapi BM25 with IDF = ln((N - df + 0.5)/(df + 0.5) + 1).
std::vector<ScoredId> bm25_search(const TextDoc& query, const Bm25Index& index,
                                  int k);
double bm25_score(const TextDoc& query, const Bm25Index& index, int doc_pos);

using TextEmbedFn = std::function<std::vector<double>(const std::string&)>;

// Cosine ranking over embedded captions; same tie-break as search().
std::vector<ScoredId> semantic_search(const std::string& query,
                                      const std::vector<TextDoc>& corpus,
                                      const TextEmbedFn& embed, int k);

// Deterministic hashed bag-of-words embedding (the pluggable text path's toy
// stand-in); L2-normalized.
TextEmbedFn make_toy_text_embedder(std::uint64_t seed, int dim);

struct CaptionCandidate {
  std::string text;
  std::vector<double> audio_vec, text_vec;
};

struct FilteredCaptions {
  std::vector<std::string> kept;  // similarity-descending
  std::string joined;             // single-space concatenation
};

// Keep the top_k most audio-similar captions, drop those under min_cos.
FilteredCaptions filter_captions(const std::vector<CaptionCandidate>& captions,
                                 int top_k = 5, double min_cos = 0.35);

}  // namespace acr
