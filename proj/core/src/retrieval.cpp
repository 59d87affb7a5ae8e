#include "acr/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <set>

#include "acr/errors.hpp"

namespace acr {

EmbeddingIndex build_index(std::vector<std::uint64_t> ids, Tensor2D vectors,
                           std::string modality) {
  if (static_cast<int>(ids.size()) != vectors.rows)
    throw ConfigError("build_index: id/vector count mismatch");
  std::set<std::uint64_t> seen(ids.begin(), ids.end());
  if (seen.size() != ids.size()) throw DataError("build_index: duplicate ids");
  for (int i = 0; i < vectors.rows; ++i) {
    double s = 0.0;
    for (int j = 0; j < vectors.cols; ++j) s += vectors.at(i, j) * vectors.at(i, j);
    if (std::abs(std::sqrt(s) - 1.0) > 1e-6)
      throw DataError("build_index: row " + std::to_string(i) + " is not unit-norm");
  }
  return EmbeddingIndex{std::move(ids), std::move(vectors), std::move(modality)};
}

std::vector<ScoredId> search(const EmbeddingIndex& index,
                             const std::vector<double>& query_vec, int k) {
  if (static_cast<int>(query_vec.size()) != index.vectors.cols)
    throw ConfigError("search: query dimension mismatch");
  if (k > index.size()) {
    std::cerr << "search: k=" << k << " clamped to index size " << index.size()
              << "\n";
    k = index.size();
  }
  std::vector<ScoredId> scored(index.size());
  for (int i = 0; i < index.size(); ++i) {
    double s = 0.0;
    for (int j = 0; j < index.vectors.cols; ++j)
      s += index.vectors.at(i, j) * query_vec[j];
    scored[i] = {index.ids[i], s};
  }
  std::sort(scored.begin(), scored.end(), [](const ScoredId& a, const ScoredId& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.id < b.id;
  });
  scored.resize(k);
  return scored;
}

namespace {

const std::set<std::uint64_t>& relevant_for(const RelevanceMap& relevance,
                                            std::uint64_t query) {
  auto it = relevance.find(query);
  if (it == relevance.end() || it->second.empty())
    throw DataError("relevance: query " + std::to_string(query) +
                    " has no relevant documents");
  return it->second;
}

}  // namespace

double recall_at_k(const std::vector<Ranking>& rankings,
                   const RelevanceMap& relevance, int k) {
  if (rankings.empty()) throw UsageError("recall_at_k: no rankings");
  int hits = 0;
  for (const auto& r : rankings) {
    const auto& rel = relevant_for(relevance, r.query_id);
    const int lim = std::min<int>(k, static_cast<int>(r.docs.size()));
    for (int i = 0; i < lim; ++i)
      if (rel.count(r.docs[i])) {
        ++hits;
        break;
      }
  }
  return static_cast<double>(hits) / rankings.size();
}

MapResult map_at_k(const std::vector<Ranking>& rankings,
                   const RelevanceMap& relevance, int k, bool r_normalizer) {
  if (rankings.empty()) throw UsageError("map_at_k: no rankings");
  MapResult out;
  for (const auto& r : rankings) {
    const auto& rel = relevant_for(relevance, r.query_id);
    const int lim = std::min<int>(k, static_cast<int>(r.docs.size()));
    int found = 0;
    double ap = 0.0;
    for (int i = 0; i < lim; ++i) {
      if (rel.count(r.docs[i])) {
        ++found;
        ap += static_cast<double>(found) / (i + 1);
      }
    }
    const double norm = r_normalizer
                            ? static_cast<double>(rel.size())
                            : std::min<double>(static_cast<double>(rel.size()), k);
    out.per_query_ap.push_back(ap / norm);
  }
  double sum = 0.0;
  for (double ap : out.per_query_ap) sum += ap;
  out.map = sum / out.per_query_ap.size();
  return out;
}

MetricReport compute_metrics(const std::vector<Ranking>& rankings,
                             const RelevanceMap& relevance) {
  MetricReport rep;
  rep.recall1 = recall_at_k(rankings, relevance, 1);
  rep.recall5 = recall_at_k(rankings, relevance, 5);
  rep.recall10 = recall_at_k(rankings, relevance, 10);
  auto m = map_at_k(rankings, relevance, 10);
  rep.map10 = m.map;
  rep.per_query_ap = std::move(m.per_query_ap);
  return rep;
}

namespace {

double normal_sf(double z) { return 0.5 * std::erfc(z / std::numbers::sqrt2); }

}  // namespace

WilcoxonResult wilcoxon_signed_rank(const std::vector<double>& x,
                                    const std::vector<double>& y) {
  if (x.size() != y.size())
    throw UsageError("wilcoxon: paired lists must have equal length");
  std::vector<double> diffs;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - y[i];
    if (d != 0.0) diffs.push_back(d);
  }
  const int n = static_cast<int>(diffs.size());
  if (n < 5)
    throw InsufficientData("wilcoxon: fewer than 5 nonzero differences");

  // Average ranks over ties of |d|.
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    return std::abs(diffs[a]) < std::abs(diffs[b]);
  });
  std::vector<double> ranks(n);
  double tie_correction = 0.0;
  int i = 0;
  while (i < n) {
    int j = i;
    while (j < n && std::abs(diffs[order[j]]) == std::abs(diffs[order[i]])) ++j;
    const double avg_rank = (i + 1 + j) / 2.0;  // mean of ranks i+1 .. j
    for (int p = i; p < j; ++p) ranks[order[p]] = avg_rank;
    const double t = j - i;
    tie_correction += t * t * t - t;
    i = j;
  }

  double w_plus = 0.0, w_minus = 0.0;
  for (int p = 0; p < n; ++p)
    (diffs[p] > 0 ? w_plus : w_minus) += ranks[p];

  WilcoxonResult res;
  res.n_effective = n;
  res.statistic = std::min(w_plus, w_minus);

  if (n <= 25) {
    res.method = "exact";
    // Null distribution of W+ via DP over doubled ranks (integers even with
    // .5 tie averages).
    std::vector<long long> doubled(n);
    long long total = 0;
    for (int p = 0; p < n; ++p) {
      doubled[p] = llround(2.0 * ranks[p]);
      total += doubled[p];
    }
    std::vector<double> count(total + 1, 0.0);
    count[0] = 1.0;
    for (int p = 0; p < n; ++p)
      for (long long s = total; s >= doubled[p]; --s)
        count[s] += count[s - doubled[p]];
    const double denom = std::pow(2.0, n);
    const long long w2 = llround(2.0 * w_plus);
    double p_le = 0.0, p_ge = 0.0;
    for (long long s = 0; s <= total; ++s) {
      if (s <= w2) p_le += count[s];
      if (s >= w2) p_ge += count[s];
    }
    res.p_value = std::min(1.0, 2.0 * std::min(p_le, p_ge) / denom);
  } else {
    res.method = "normal-approx";
    const double mu = n * (n + 1) / 4.0;
    const double var = n * (n + 1) * (2.0 * n + 1) / 24.0 - tie_correction / 48.0;
    const double sd = std::sqrt(var);
    // Continuity correction toward the mean.
    const double z = (std::abs(w_plus - mu) - 0.5) / sd;
    res.p_value = std::min(1.0, 2.0 * normal_sf(std::max(z, 0.0)));
  }
  if (res.p_value <= 0.0) res.p_value = std::nextafter(0.0, 1.0);
  return res;
}

}  // namespace acr
