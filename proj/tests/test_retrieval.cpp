#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "acr/errors.hpp"
#include "acr/retrieval.hpp"
#include "acr/rng.hpp"

using namespace acr;

namespace {

Tensor2D unit_matrix(int rows, int cols, CounterRng& rng) {
  Tensor2D m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    double n = 0.0;
    for (int j = 0; j < cols; ++j) {
      m.at(i, j) = rng.normal();
      n += m.at(i, j) * m.at(i, j);
    }
    n = std::sqrt(n);
    for (int j = 0; j < cols; ++j) m.at(i, j) /= n;
  }
  return m;
}

// Exact two-sided p for the signed-rank test by enumerating all 2^n sign
// patterns over the actual (possibly tied, averaged) ranks.
double enum_p_value(const std::vector<double>& diffs) {
  std::vector<double> mags;
  for (double d : diffs)
    if (d != 0.0) mags.push_back(std::abs(d));
  const int n = static_cast<int>(mags.size());
  std::vector<double> ranks(n);
  for (int i = 0; i < n; ++i) {
    int less = 0, equal = 0;
    for (int j = 0; j < n; ++j) {
      if (mags[j] < mags[i]) ++less;
      if (mags[j] == mags[i]) ++equal;
    }
    ranks[i] = less + (equal + 1) / 2.0;
  }
  double w_plus = 0.0;
  {
    int idx = 0;
    for (double d : diffs) {
      if (d == 0.0) continue;
      if (d > 0.0) w_plus += ranks[idx];
      ++idx;
    }
  }
  long long le = 0, ge = 0;
  const long long total = 1LL << n;
  for (long long mask = 0; mask < total; ++mask) {
    double w = 0.0;
    for (int i = 0; i < n; ++i)
      if (mask & (1LL << i)) w += ranks[i];
    if (w <= w_plus + 1e-12) ++le;
    if (w >= w_plus - 1e-12) ++ge;
  }
  const double p = 2.0 * std::min(double(le), double(ge)) / double(total);
  return std::min(1.0, p);
}

}  // namespace

TEST_CASE("index construction validates unit rows and unique ids") {
  CounterRng rng(1);
  auto m = unit_matrix(3, 4, rng);
  auto idx = build_index({10, 20, 30}, m, "audio");
  CHECK(idx.size() == 3);
  CHECK(idx.modality == "audio");

  Tensor2D bad(1, 2);
  bad.at(0, 0) = 2.0;
  CHECK_THROWS_AS(build_index({1}, bad, "a"), DataError);
  auto dup = unit_matrix(2, 4, rng);
  CHECK_THROWS_AS(build_index({7, 7}, dup, "a"), DataError);
  Tensor2D mism = unit_matrix(2, 4, rng);
  CHECK_THROWS_AS(build_index({1, 2, 3}, mism, "a"), ConfigError);
}

TEST_CASE("search trivial cases: exact match and orthogonal ties") {
  Tensor2D m(3, 3);
  m.at(0, 0) = 1.0;
  m.at(1, 1) = 1.0;
  m.at(2, 2) = 1.0;
  auto idx = build_index({5, 3, 9}, m, "t");
  auto hits = search(idx, {0.0, 1.0, 0.0}, 1);
  REQUIRE(hits.size() == 1);
  CHECK(hits[0].id == 3);
  CHECK(hits[0].score == doctest::Approx(1.0));

  // query orthogonal to everything: all scores 0, ascending-id order
  Tensor2D m2(3, 4);
  m2.at(0, 0) = 1.0;
  m2.at(1, 1) = 1.0;
  m2.at(2, 2) = 1.0;
  auto idx2 = build_index({5, 3, 9}, m2, "t");
  auto all = search(idx2, {0.0, 0.0, 0.0, 1.0}, 3);
  REQUIRE(all.size() == 3);
  CHECK(all[0].id == 3);
  CHECK(all[1].id == 5);
  CHECK(all[2].id == 9);
  for (const auto& h : all) CHECK(h.score == doctest::Approx(0.0));

  // k beyond the index clamps
  CHECK(search(idx2, {1.0, 0.0, 0.0, 0.0}, 10).size() == 3);
}

TEST_CASE("search matches a brute-force sort on random vectors") {
  CounterRng rng(7);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 5;
    auto m = unit_matrix(n, 6, rng);
    std::vector<std::uint64_t> ids;
    for (int i = 0; i < n; ++i) ids.push_back(100 + i * 3);
    auto idx = build_index(ids, m, "a");
    std::vector<double> q(6);
    double qn = 0.0;
    for (auto& x : q) {
      x = rng.normal();
      qn += x * x;
    }
    qn = std::sqrt(qn);
    for (auto& x : q) x /= qn;

    auto hits = search(idx, q, n);
    std::vector<std::pair<double, std::uint64_t>> ref;
    for (int i = 0; i < n; ++i) {
      double s = 0.0;
      for (int j = 0; j < 6; ++j) s += q[j] * m.at(i, j);
      ref.push_back({s, ids[i]});
    }
    std::sort(ref.begin(), ref.end(), [](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first > b.first;
      return a.second < b.second;
    });
    for (int i = 0; i < n; ++i) {
      CHECK(hits[i].id == ref[i].second);
      CHECK(hits[i].score == doctest::Approx(ref[i].first).epsilon(1e-12));
    }
  }
}

TEST_CASE("recall@k hand cases") {
  RelevanceMap rel;
  rel[1] = {101};
  rel[2] = {102};
  rel[3] = {103};
  auto ranked = [](std::uint64_t q, int rank_of_rel, std::uint64_t rel_id) {
    Ranking r{q, {}};
    for (int i = 1; i <= 12; ++i)
      r.docs.push_back(i == rank_of_rel ? rel_id : 1000 + i);
    return r;
  };
  std::vector<Ranking> rankings = {ranked(1, 1, 101), ranked(2, 6, 102),
                                   ranked(3, 11, 103)};
  CHECK(recall_at_k(rankings, rel, 5) == doctest::Approx(1.0 / 3.0));
  CHECK(recall_at_k(rankings, rel, 10) == doctest::Approx(2.0 / 3.0));

  std::vector<Ranking> first = {ranked(1, 1, 101)};
  CHECK(recall_at_k(first, rel, 1) == doctest::Approx(1.0));
  CHECK(recall_at_k(first, rel, 10) == doctest::Approx(1.0));

  std::vector<Ranking> missing = {ranked(99, 1, 101)};
  CHECK_THROWS_AS(recall_at_k(missing, rel, 5), DataError);
}

TEST_CASE("ap@10 hand cases") {
  RelevanceMap rel;
  rel[1] = {7};
  std::vector<Ranking> at1 = {{1, {7, 8, 9}}};
  CHECK(map_at_k(at1, rel, 10).map == doctest::Approx(1.0));
  std::vector<Ranking> at2 = {{1, {8, 7, 9}}};
  CHECK(map_at_k(at2, rel, 10).map == doctest::Approx(0.5));

  RelevanceMap rel2;
  rel2[1] = {7, 9};
  std::vector<Ranking> two = {{1, {7, 8, 6, 9, 5}}};
  CHECK(map_at_k(two, rel2, 10).map == doctest::Approx(0.75));
  // 1/R normalizer variant matches here because both relevant docs appear
  CHECK(map_at_k(two, rel2, 10, true).map == doctest::Approx(0.75));
}

TEST_CASE("map@10 matches a brute-force oracle on random rankings") {
  CounterRng rng(13);
  for (int trial = 0; trial < 1000; ++trial) {
    const int n_docs = 3 + int(rng.uniform() * 15);
    std::vector<std::uint64_t> docs(n_docs);
    for (int i = 0; i < n_docs; ++i) docs[i] = i;
    // seeded shuffle
    for (int i = n_docs - 1; i > 0; --i)
      std::swap(docs[i], docs[int(rng.uniform() * (i + 1))]);
    RelevanceMap rel;
    for (int i = 0; i < n_docs; ++i)
      if (rng.uniform() < 0.4) rel[0].insert(i);
    if (rel[0].empty()) rel[0].insert(docs[0]);
    std::vector<Ranking> rankings = {{0, docs}};
    auto got = map_at_k(rankings, rel, 10);

    double acc = 0.0;
    int hits = 0;
    for (int r = 1; r <= std::min(10, n_docs); ++r) {
      if (rel[0].count(docs[r - 1])) {
        ++hits;
        acc += double(hits) / r;
      }
    }
    const double ap = acc / std::min<double>(rel[0].size(), 10.0);
    CHECK(got.map == doctest::Approx(ap).epsilon(1e-12));
    REQUIRE(got.per_query_ap.size() == 1);
    CHECK(got.per_query_ap[0] == doctest::Approx(ap).epsilon(1e-12));
  }
}

TEST_CASE("compute_metrics aggregates recall and map") {
  RelevanceMap rel;
  rel[1] = {101};
  rel[2] = {102};
  std::vector<Ranking> rankings = {
      {1, {101, 1, 2, 3, 4, 5, 6, 7, 8, 9}},
      {2, {1, 2, 3, 4, 5, 102, 7, 8, 9, 10}},
  };
  auto rep = compute_metrics(rankings, rel);
  CHECK(rep.recall1 == doctest::Approx(0.5));
  CHECK(rep.recall5 == doctest::Approx(0.5));
  CHECK(rep.recall10 == doctest::Approx(1.0));
  CHECK(rep.map10 == doctest::Approx(0.5 * (1.0 + 1.0 / 6.0)));
}

TEST_CASE("wilcoxon: all-positive n=5 gives exact p = 0.0625") {
  std::vector<double> x = {1.0, 2.0, 3.0, 4.0, 5.0};
  std::vector<double> y = {0.5, 1.0, 2.0, 3.0, 4.0};
  auto res = wilcoxon_signed_rank(x, y);
  CHECK(res.method == "exact");
  CHECK(res.n_effective == 5);
  CHECK(res.statistic == doctest::Approx(0.0));
  CHECK(res.p_value == doctest::Approx(0.0625).epsilon(1e-12));
}

TEST_CASE("wilcoxon degenerate inputs") {
  std::vector<double> x = {1.0, 2.0, 3.0, 4.0, 5.0, 6.0};
  CHECK_THROWS_AS(wilcoxon_signed_rank(x, x), InsufficientData);
  std::vector<double> shorty = {1.0, 2.0};
  std::vector<double> shorty2 = {0.0, 0.0};
  CHECK_THROWS_AS(wilcoxon_signed_rank(shorty, shorty2), InsufficientData);
  std::vector<double> uneven = {1.0, 2.0, 3.0};
  CHECK_THROWS_AS(wilcoxon_signed_rank(x, uneven), UsageError);
}

TEST_CASE("wilcoxon exact p matches full sign-pattern enumeration") {
  // hand-constructed n = 8 with ties among magnitudes
  std::vector<double> x = {2.0, -1.0, 3.0, 1.0, -2.0, 4.0, 1.0, 5.0};
  std::vector<double> zeros(8, 0.0);
  auto res = wilcoxon_signed_rank(x, zeros);
  CHECK(res.method == "exact");
  CHECK(res.p_value == doctest::Approx(enum_p_value(x)).epsilon(1e-9));

  CounterRng rng(23);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 5 + int(rng.uniform() * 8);  // 5..12
    std::vector<double> diffs(n);
    for (auto& d : diffs) {
      // small integer grid to force magnitude ties
      d = double(int(rng.uniform() * 9) - 4);
      if (d == 0.0) d = 1.0;
    }
    std::vector<double> z(n, 0.0);
    auto got = wilcoxon_signed_rank(diffs, z);
    CHECK(got.p_value == doctest::Approx(enum_p_value(diffs)).epsilon(1e-9));
  }
}

TEST_CASE("wilcoxon normal approximation is close to exact near the boundary") {
  // n = 25 uses the exact path; compare a 26-point normal approximation
  // against the exact answer for its first 25 points as a sanity band.
  CounterRng rng(31);
  std::vector<double> x(26), y(26);
  for (int i = 0; i < 26; ++i) {
    x[i] = rng.normal();
    y[i] = x[i] - 0.8 - 0.3 * rng.normal();
  }
  auto res = wilcoxon_signed_rank(x, y);
  CHECK(res.method == "normal-approx");
  CHECK(res.n_effective == 26);
  CHECK(res.p_value > 0.0);
  CHECK(res.p_value < 0.05);  // strongly shifted sample

  std::vector<double> x25(x.begin(), x.begin() + 25);
  std::vector<double> y25(y.begin(), y.begin() + 25);
  auto exact = wilcoxon_signed_rank(x25, y25);
  CHECK(exact.method == "exact");
}
