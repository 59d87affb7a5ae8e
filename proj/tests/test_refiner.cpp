#include <doctest.h>

#include <cmath>
#include <numeric>
#include <vector>

#include "acr/errors.hpp"
#include "acr/refiner.hpp"
#include "acr/rng.hpp"
#include "acr/tensor.hpp"

using namespace acr;

namespace {

double gelu_ref(double x) {
  return x * 0.5 * std::erfc(-x / std::sqrt(2.0));
}

// Plain-loop reference for one transformer block in infer mode with joint
// self-attention. Matrices are row-major vectors.
std::vector<double> block_ref(const std::vector<double>& x, int n, int d,
                              const TransformerBlockParams& p) {
  const int nh = p.n_heads;
  const int dh = d / nh;
  std::vector<double> mha(n * d, 0.0);
  std::vector<double> concat(n * d, 0.0);
  for (int h = 0; h < nh; ++h) {
    std::vector<double> q(n * dh, 0.0), k(n * dh, 0.0), v(n * dh, 0.0);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < dh; ++j)
        for (int c = 0; c < d; ++c) {
          q[i * dh + j] += x[i * d + c] * p.wq[h]->at(c, j);
          k[i * dh + j] += x[i * d + c] * p.wk[h]->at(c, j);
          v[i * dh + j] += x[i * d + c] * p.wv[h]->at(c, j);
        }
    for (int i = 0; i < n; ++i) {
      std::vector<double> s(n, 0.0);
      for (int j = 0; j < n; ++j)
        for (int c = 0; c < dh; ++c)
          s[j] += q[i * dh + c] * k[j * dh + c] / std::sqrt(double(dh));
      double mx = *std::max_element(s.begin(), s.end());
      double z = 0.0;
      for (double& e : s) {
        e = std::exp(e - mx);
        z += e;
      }
      for (int j = 0; j < n; ++j)
        for (int c = 0; c < dh; ++c)
          concat[i * d + h * dh + c] += s[j] / z * v[j * dh + c];
    }
  }
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j)
      for (int c = 0; c < d; ++c)
        mha[i * d + j] += concat[i * d + c] * p.wo->at(c, j);
  std::vector<double> hcur(n * d);
  for (int i = 0; i < n * d; ++i) hcur[i] = mha[i] + x[i];
  const int dff = 4 * d;
  std::vector<double> out(n * d);
  for (int i = 0; i < n; ++i) {
    std::vector<double> hid(dff, 0.0);
    for (int j = 0; j < dff; ++j) {
      double acc = p.b1->data[j];
      for (int c = 0; c < d; ++c) acc += hcur[i * d + c] * p.w1->at(c, j);
      hid[j] = gelu_ref(acc);
    }
    for (int j = 0; j < d; ++j) {
      double acc = p.b2->data[j];
      for (int c = 0; c < dff; ++c) acc += hid[c] * p.w2->at(c, j);
      out[i * d + j] = acc + hcur[i * d + j];
    }
  }
  return out;
}

TensorPtr random_tensor(int rows, int cols, CounterRng& rng, double scale = 1.0) {
  auto t = tensor(rows, cols);
  for (auto& x : t->data) x = rng.uniform(-scale, scale);
  return t;
}

void zero(const TensorPtr& t) { std::fill(t->data.begin(), t->data.end(), 0.0); }

}  // namespace

TEST_CASE("transformer block with zero value and FFN weights is the identity") {
  RefinerConfig cfg;
  cfg.d_model = 8;
  cfg.n_heads = 2;
  cfg.dropout_rate = 0.0;
  auto params = init_refiner(cfg, 3);
  auto& blk = params.audio_blocks[0];
  for (auto& t : blk.wv) zero(t);
  zero(blk.w2);
  CounterRng rng(9);
  auto x = random_tensor(5, 8, rng);
  for (bool row_indep : {false, true}) {
    auto y = transformer_project(nullptr, x, blk, Mode::kInfer, rng, false, row_indep);
    for (size_t i = 0; i < x->data.size(); ++i)
      CHECK(y->data[i] == doctest::Approx(x->data[i]).epsilon(1e-12));
  }
}

TEST_CASE("joint and row-independent attention agree for single-row input") {
  RefinerConfig cfg;
  cfg.d_model = 16;
  cfg.n_heads = 4;
  cfg.dropout_rate = 0.0;
  auto params = init_refiner(cfg, 11);
  CounterRng rng(2);
  auto x = random_tensor(1, 16, rng);
  auto joint = transformer_project(nullptr, x, params.audio_blocks[0], Mode::kInfer,
                                   rng, false, false);
  auto indep = transformer_project(nullptr, x, params.audio_blocks[0], Mode::kInfer,
                                   rng, false, true);
  for (size_t i = 0; i < joint->data.size(); ++i)
    CHECK(joint->data[i] == doctest::Approx(indep->data[i]).epsilon(1e-12));
}

TEST_CASE("transformer block matches a plain-loop reference") {
  RefinerConfig cfg;
  cfg.d_model = 4;
  cfg.n_heads = 2;
  cfg.dropout_rate = 0.0;
  auto params = init_refiner(cfg, 21);
  const auto& blk = params.text_blocks[0];
  CounterRng rng(5);
  auto x = random_tensor(3, 4, rng);
  auto y = transformer_project(nullptr, x, blk, Mode::kInfer, rng, false, false);
  auto ref = block_ref(x->data, 3, 4, blk);
  for (int i = 0; i < 12; ++i)
    CHECK(y->data[i] == doctest::Approx(ref[i]).epsilon(1e-10));
}

TEST_CASE("pre-norm standardizes sublayer inputs but keeps residual stream") {
  RefinerConfig cfg;
  cfg.d_model = 8;
  cfg.n_heads = 2;
  cfg.dropout_rate = 0.0;
  auto params = init_refiner(cfg, 4);
  auto& blk = params.audio_blocks[0];
  for (auto& t : blk.wv) zero(t);
  zero(blk.w2);
  CounterRng rng(1);
  auto x = random_tensor(3, 8, rng);
  // With zeroed value/FFN paths the pre-norm block is still the identity.
  auto y = transformer_project(nullptr, x, blk, Mode::kInfer, rng, true, false);
  for (size_t i = 0; i < x->data.size(); ++i)
    CHECK(y->data[i] == doctest::Approx(x->data[i]).epsilon(1e-12));
}

TEST_CASE("linear projection computes z w + b") {
  SharedProjectionParams proj;
  proj.w = tensor(2, 2);
  proj.w->data = {1.0, 2.0, 3.0, 4.0};
  proj.b = tensor(1, 2);
  proj.b->data = {0.5, -0.5};
  auto z = tensor(1, 2);
  z->data = {1.0, 1.0};
  auto e = linear_project(nullptr, z, proj);
  CHECK(e->at(0, 0) == doctest::Approx(4.5));
  CHECK(e->at(0, 1) == doctest::Approx(5.5));
}

TEST_CASE("cross-attention with zero value maps reduces to the identity") {
  RefinerConfig cfg;
  cfg.d_model = 8;
  cfg.d_shared = 4;
  cfg.n_heads = 2;
  auto params = init_refiner(cfg, 6);
  zero(params.cross.wv_t);
  zero(params.cross.wv_a);
  CounterRng rng(3);
  auto ea = random_tensor(4, 4, rng);
  auto et = random_tensor(2, 4, rng);
  auto res = cross_attend(nullptr, ea, et, params.cross);
  for (size_t i = 0; i < ea->data.size(); ++i)
    CHECK(res.audio_refined->data[i] == doctest::Approx(ea->data[i]).epsilon(1e-12));
  for (size_t i = 0; i < et->data.size(); ++i)
    CHECK(res.text_refined->data[i] == doctest::Approx(et->data[i]).epsilon(1e-12));
}

TEST_CASE("cross-attention matches a plain-loop reference") {
  RefinerConfig cfg;
  cfg.d_model = 8;
  cfg.d_shared = 3;
  cfg.n_heads = 2;
  auto params = init_refiner(cfg, 13);
  CounterRng rng(7);
  const int na = 3, nt = 2, d = 3;
  auto ea = random_tensor(na, d, rng);
  auto et = random_tensor(nt, d, rng);
  auto res = cross_attend(nullptr, ea, et, params.cross);

  auto matvec = [&](const TensorPtr& m, const TensorPtr& w, int row, int j) {
    double acc = 0.0;
    for (int c = 0; c < d; ++c) acc += m->at(row, c) * w->at(c, j);
    return acc;
  };
  // Audio queries over text keys/values.
  for (int i = 0; i < na; ++i) {
    std::vector<double> s(nt, 0.0);
    for (int j = 0; j < nt; ++j)
      for (int c = 0; c < d; ++c)
        s[j] += matvec(ea, params.cross.wq_a, i, c) *
                matvec(et, params.cross.wk_t, j, c) / std::sqrt(double(d));
    double mx = *std::max_element(s.begin(), s.end());
    double z = 0.0;
    for (double& e : s) {
      e = std::exp(e - mx);
      z += e;
    }
    for (int c = 0; c < d; ++c) {
      double attn = 0.0;
      for (int j = 0; j < nt; ++j)
        attn += s[j] / z * matvec(et, params.cross.wv_t, j, c);
      CHECK(res.audio_refined->at(i, c) ==
            doctest::Approx(ea->at(i, c) + attn).epsilon(1e-10));
    }
  }
}

TEST_CASE("refine_pair produces unit-norm vectors and full alpha") {
  RefinerConfig cfg;
  cfg.d_model = 8;
  cfg.d_shared = 4;
  cfg.n_heads = 2;
  auto params = init_refiner(cfg, 31);
  CounterRng data_rng(8);
  auto a = random_tensor(5, 8, data_rng);
  auto t = random_tensor(3, 8, data_rng);
  Tape tape;
  CounterRng rng(100);
  auto res = refine_pair(&tape, a, t, params, rng);
  REQUIRE(res.audio_vec->cols == 4);
  REQUIRE(res.alpha.size() == 5);
  double na = 0.0, nt = 0.0, asum = 0.0;
  for (int j = 0; j < 4; ++j) {
    na += res.audio_vec->data[j] * res.audio_vec->data[j];
    nt += res.text_vec->data[j] * res.text_vec->data[j];
  }
  for (double w : res.alpha) {
    CHECK(w >= 0.0);
    asum += w;
  }
  CHECK(na == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(nt == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(asum == doctest::Approx(1.0).epsilon(1e-10));

  Tape tape2;
  CounterRng rng2(100);
  auto res2 = refine_pair(&tape2, a, t, params, rng2);
  for (int j = 0; j < 4; ++j)
    CHECK(res.audio_vec->data[j] == res2.audio_vec->data[j]);
}

TEST_CASE("train path with disabled stochastic parts matches inference") {
  RefinerConfig cfg;
  cfg.d_model = 8;
  cfg.d_shared = 4;
  cfg.n_heads = 2;
  cfg.dropout_rate = 0.0;
  cfg.replace_prob = 1.0;  // always use the learned pooling query
  auto params = init_refiner(cfg, 41);
  zero(params.cross.wv_t);
  zero(params.cross.wv_a);
  CounterRng data_rng(12);
  auto a = random_tensor(4, 8, data_rng);
  auto t = random_tensor(2, 8, data_rng);
  Tape tape;
  CounterRng rng(55);
  auto train_res = refine_pair(&tape, a, t, params, rng);
  CHECK(train_res.query_mode == PoolQueryMode::kLearned);
  auto ea = embed_single(a, Modality::kAudio, params);
  auto et = embed_single(t, Modality::kText, params);
  for (int j = 0; j < 4; ++j) {
    CHECK(train_res.audio_vec->data[j] == doctest::Approx(ea.vec->data[j]).epsilon(1e-12));
    CHECK(train_res.text_vec->data[j] == doctest::Approx(et.vec->data[j]).epsilon(1e-12));
  }
}

TEST_CASE("audio embedding is invariant to chunk order") {
  RefinerConfig cfg;
  cfg.d_model = 8;
  cfg.d_shared = 4;
  cfg.n_heads = 2;
  auto params = init_refiner(cfg, 51);
  CounterRng rng(19);
  auto a = random_tensor(6, 8, rng);
  auto perm = tensor(6, 8);
  const int order[6] = {3, 0, 5, 1, 4, 2};
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 8; ++j) perm->at(i, j) = a->at(order[i], j);
  auto v1 = embed_single(a, Modality::kAudio, params);
  auto v2 = embed_single(perm, Modality::kAudio, params);
  for (int j = 0; j < 4; ++j)
    CHECK(v1.vec->data[j] == doctest::Approx(v2.vec->data[j]).epsilon(1e-10));
  // alpha travels with its chunk
  for (int i = 0; i < 6; ++i)
    CHECK(v2.alpha[i] == doctest::Approx(v1.alpha[order[i]]).epsilon(1e-10));
}

TEST_CASE("embed_single rejects empty input and init validates head split") {
  RefinerConfig cfg;
  auto params = init_refiner(cfg, 1);
  auto empty = tensor(0, cfg.d_model);
  CHECK_THROWS_AS(embed_single(empty, Modality::kAudio, params), UsageError);
  RefinerConfig bad;
  bad.d_model = 10;
  bad.n_heads = 8;
  CHECK_THROWS_AS(init_refiner(bad, 1), ConfigError);
}

TEST_CASE("parameter collection order is fixed and complete") {
  RefinerConfig cfg;  // depth 1, 8 heads
  auto params = init_refiner(cfg, 2);
  auto ts = params.tensors();
  // per block: 24 head matrices + wo + w1 + b1 + w2 + b2 = 29
  CHECK(ts.size() == 29 * 2 + 2 + 2 + 6 + 1);
  auto again = params.tensors();
  for (size_t i = 0; i < ts.size(); ++i) CHECK(ts[i].get() == again[i].get());
  CHECK(ts.back().get() == params.pool.q_pool.get());
}

TEST_CASE("linear projection type skips the transformer stack") {
  RefinerConfig cfg;
  cfg.d_model = 8;
  cfg.d_shared = 4;
  cfg.n_heads = 2;
  cfg.projection = ProjectionType::kLinear;
  auto params = init_refiner(cfg, 61);
  CounterRng rng(23);
  auto a = random_tensor(3, 8, rng);
  auto res = embed_single(a, Modality::kAudio, params);
  // reference: rows through linear projection, pooled, normalized
  auto e = linear_project(nullptr, a, params.audio_proj);
  PoolQuery q{PoolQueryMode::kLearned, params.pool.q_pool};
  auto pooled = attention_pool(nullptr, e, q);
  auto norm = l2_normalize_rows(nullptr, pooled.pooled);
  for (int j = 0; j < 4; ++j)
    CHECK(res.vec->data[j] == doctest::Approx(norm->data[j]).epsilon(1e-12));
}
