#include "acr/textsearch.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "acr/errors.hpp"
#include "acr/rng.hpp"

namespace acr {

const std::set<std::string>& stopwords() {
  // 127 common English stopwords.
  static const std::set<std::string> kList = {
      "a", "about", "above", "after", "again", "against", "all", "am", "an",
      "and", "any", "are", "as", "at", "be", "because", "been", "before",
      "being", "below", "between", "both", "but", "by", "can", "did", "do",
      "does", "doing", "down", "during", "each", "few", "for", "from",
      "further", "had", "has", "have", "having", "he", "her", "here", "hers",
      "herself", "him", "himself", "his", "how", "i", "if", "in", "into", "is",
      "it", "its", "itself", "just", "me", "more", "most", "my", "myself",
      "no", "nor", "not", "now", "of", "off", "on", "once", "only", "or",
      "other", "our", "ours", "ourselves", "out", "over", "own", "same",
      "she", "should", "so", "some", "such", "than", "that", "the", "their",
      "theirs", "them", "themselves", "then", "there", "these", "they",
      "this", "those", "through", "to", "too", "under", "until", "up", "very",
      "was", "we", "were", "what", "when", "where", "which", "while", "who",
      "whom", "why", "will", "with", "you", "your", "yours", "yourself",
      "yourselves", "s", "t", "don"};
  return kList;
}

std::vector<std::string> tokenize(const std::string& text,
                                  bool remove_stopwords) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : text) {
    const unsigned char c = static_cast<unsigned char>(ch);
    if (std::isalnum(c)) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      if (!remove_stopwords || !stopwords().count(cur)) out.push_back(cur);
      cur.clear();
    }
  }
  if (!cur.empty() && (!remove_stopwords || !stopwords().count(cur)))
    out.push_back(cur);
  return out;
}

TextDoc make_doc(std::uint64_t id, const std::string& text,
                 bool remove_stopwords) {
  return TextDoc{id, text, tokenize(text, remove_stopwords), remove_stopwords};
}

namespace {

std::vector<ScoredId> rank_top_k(std::vector<ScoredId> scored, int k) {
  std::sort(scored.begin(), scored.end(), [](const ScoredId& a, const ScoredId& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.id < b.id;
  });
  if (k < static_cast<int>(scored.size())) scored.resize(k);
  return scored;
}

}  // namespace

std::vector<ScoredId> lexical_search(const TextDoc& query,
                                     const std::vector<TextDoc>& corpus, int k) {
  std::set<std::string> qtokens(query.tokens.begin(), query.tokens.end());
  if (qtokens.empty()) throw EmptyQuery("lexical_search: no query tokens left");
  std::vector<ScoredId> scored;
  scored.reserve(corpus.size());
  for (const auto& doc : corpus) {
    const std::set<std::string> dtokens(doc.tokens.begin(), doc.tokens.end());
    int hits = 0;
    for (const auto& t : qtokens) hits += dtokens.count(t) ? 1 : 0;
    scored.push_back({doc.id, static_cast<double>(hits)});
  }
  return rank_top_k(std::move(scored), k);
}

Bm25Index build_bm25(std::vector<TextDoc> corpus, double k1, double b) {
  Bm25Index index;
  index.k1 = k1;
  index.b = b;
  double total_len = 0.0;
  for (const auto& doc : corpus) {
    total_len += static_cast<double>(doc.tokens.size());
    std::set<std::string> uniq(doc.tokens.begin(), doc.tokens.end());
    for (const auto& t : uniq) ++index.doc_freq[t];
  }
  index.avg_len = corpus.empty() ? 0.0 : total_len / corpus.size();
  index.docs = std::move(corpus);
  return index;
}

double bm25_score(const TextDoc& query, const Bm25Index& index, int doc_pos) {
  const auto& doc = index.docs[doc_pos];
  const double n_docs = static_cast<double>(index.docs.size());
  const double dl = static_cast<double>(doc.tokens.size());
  std::set<std::string> qtokens(query.tokens.begin(), query.tokens.end());
  double score = 0.0;
  for (const auto& term : qtokens) {
    auto it = index.doc_freq.find(term);
    if (it == index.doc_freq.end()) continue;
    const double df = it->second;
    int tf = 0;
    for (const auto& t : doc.tokens) tf += t == term ? 1 : 0;
    if (tf == 0) continue;
    const double idf = std::log((n_docs - df + 0.5) / (df + 0.5) + 1.0);
    const double norm = tf + index.k1 * (1.0 - index.b + index.b * dl / index.avg_len);
    score += idf * (tf * (index.k1 + 1.0)) / norm;
  }
  return score;
}

std::vector<ScoredId> bm25_search(const TextDoc& query, const Bm25Index& index,
                                  int k) {
  if (query.tokens.empty()) throw EmptyQuery("bm25_search: no query tokens left");
  std::vector<ScoredId> scored;
  scored.reserve(index.docs.size());
  for (int i = 0; i < static_cast<int>(index.docs.size()); ++i)
    scored.push_back({index.docs[i].id, bm25_score(query, index, i)});
  return rank_top_k(std::move(scored), k);
}

std::vector<ScoredId> semantic_search(const std::string& query,
                                      const std::vector<TextDoc>& corpus,
                                      const TextEmbedFn& embed, int k) {
  const auto q = embed(query);
  std::vector<ScoredId> scored;
  scored.reserve(corpus.size());
  for (const auto& doc : corpus) {
    const auto d = embed(doc.raw);
    double s = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i) s += q[i] * d[i];
    scored.push_back({doc.id, s});
  }
  return rank_top_k(std::move(scored), k);
}

TextEmbedFn make_toy_text_embedder(std::uint64_t seed, int dim) {
  return [seed, dim](const std::string& text) {
    std::vector<double> v(dim, 0.0);
    for (const auto& tok : tokenize(text, /*remove_stopwords=*/true)) {
      CounterRng rng(seed ^ fnv1a(tok), 0x7E87);
      for (int i = 0; i < dim; ++i) v[i] += rng.normal();
    }
    double norm = 0.0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    if (norm > 0.0)
      for (double& x : v) x /= norm;
    return v;
  };
}

FilteredCaptions filter_captions(const std::vector<CaptionCandidate>& captions,
                                 int top_k, double min_cos) {
  struct Scored {
    double sim;
    int pos;
  };
  std::vector<Scored> scored;
  for (int i = 0; i < static_cast<int>(captions.size()); ++i) {
    const auto& c = captions[i];
    double dot = 0.0, na = 0.0, nt = 0.0;
    for (std::size_t j = 0; j < c.audio_vec.size(); ++j) {
      dot += c.audio_vec[j] * c.text_vec[j];
      na += c.audio_vec[j] * c.audio_vec[j];
      nt += c.text_vec[j] * c.text_vec[j];
    }
    const double denom = std::sqrt(na) * std::sqrt(nt);
    const double sim = denom > 0.0 ? dot / denom : 0.0;
    if (sim >= min_cos) scored.push_back({sim, i});
  }
  std::sort(scored.begin(), scored.end(), [](const Scored& a, const Scored& b) {
    if (a.sim != b.sim) return a.sim > b.sim;
    return a.pos < b.pos;
  });
  if (top_k < static_cast<int>(scored.size())) scored.resize(top_k);
  if (scored.empty())
    throw EmptyCaptionSet("filter_captions: no caption passed the threshold");
  FilteredCaptions out;
  for (const auto& s : scored) {
    if (!out.joined.empty()) out.joined.push_back(' ');
    out.joined += captions[s.pos].text;
    out.kept.push_back(captions[s.pos].text);
  }
  return out;
}

}  // namespace acr
