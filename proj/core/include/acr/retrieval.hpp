#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "acr/tensor.hpp"

namespace acr {

struct EmbeddingIndex {
  std::vector<std::uint64_t> ids;  // unique, parallel to vector rows
  Tensor2D vectors;                // N x d, unit rows
  std::string modality;

  int size() const { return vectors.rows; }
};

// Validates uniqueness and unit norms (1e-6).
EmbeddingIndex build_index(std::vector<std::uint64_t> ids, Tensor2D vectors,
                           std::string modality);

struct ScoredId {
  std::uint64_t id;
  double score;
};

// Top-k by cosine descending; ties broken by ascending id. k > N clamps to N.
std::vector<ScoredId> search(const EmbeddingIndex& index,
                             const std::vector<double>& query_vec, int k);

using RelevanceMap = std::map<std::uint64_t, std::set<std::uint64_t>>;

struct Ranking {
  std::uint64_t query_id;
  std::vector<std::uint64_t> docs;  // ranked, best first
};

double recall_at_k(const std::vector<Ranking>& rankings,
                   const RelevanceMap& relevance, int k);

struct MapResult {
  double map = 0.0;
  std::vector<double> per_query_ap;  // parallel to rankings
};

// AP@k with normalizer min(R, k); set r_normalizer to use 1/R instead.
MapResult map_at_k(const std::vector<Ranking>& rankings,
                   const RelevanceMap& relevance, int k = 10,
                   bool r_normalizer = false);

struct MetricReport {
  double recall1 = 0.0, recall5 = 0.0, recall10 = 0.0, map10 = 0.0;
  std::vector<double> per_query_ap;
};

MetricReport compute_metrics(const std::vector<Ranking>& rankings,
                             const RelevanceMap& relevance);

struct WilcoxonResult {
  double statistic = 0.0;  // min(W+, W-)
  double p_value = 1.0;
  int n_effective = 0;
  std::string method;  // "exact" or "normal-approx"
};

// Two-sided paired test. Zero differences dropped, tied ranks averaged.
// Exact null distribution for n <= 25, normal approximation with continuity
// and tie correction beyond.
WilcoxonResult wilcoxon_signed_rank(const std::vector<double>& x,
                                    const std::vector<double>& y);

}  // namespace acr
