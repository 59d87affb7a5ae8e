#include "acr/refiner.hpp"

#include <cmath>

#include "acr/errors.hpp"

namespace acr {

namespace {

TensorPtr init_matrix(int rows, int cols, CounterRng& rng) {
  // Scaled uniform fan-in init, biases stay zero.
  auto t = tensor(rows, cols);
  const double bound = 1.0 / std::sqrt(static_cast<double>(rows));
  for (auto& x : t->data) x = rng.uniform(-bound, bound);
  return t;
}

}  // namespace

void TransformerBlockParams::collect(std::vector<TensorPtr>& out) const {
  for (const auto& t : wq) out.push_back(t);
  for (const auto& t : wk) out.push_back(t);
  for (const auto& t : wv) out.push_back(t);
  out.push_back(wo);
  out.push_back(w1);
  out.push_back(b1);
  out.push_back(w2);
  out.push_back(b2);
}

void SharedProjectionParams::collect(std::vector<TensorPtr>& out) const {
  out.push_back(w);
  out.push_back(b);
}

void CrossAttentionParams::collect(std::vector<TensorPtr>& out) const {
  out.push_back(wq_a);
  out.push_back(wk_t);
  out.push_back(wv_t);
  out.push_back(wq_t);
  out.push_back(wk_a);
  out.push_back(wv_a);
}

std::vector<TensorPtr> RefinerParams::tensors() const {
  std::vector<TensorPtr> out;
  for (const auto& b : audio_blocks) b.collect(out);
  for (const auto& b : text_blocks) b.collect(out);
  audio_proj.collect(out);
  text_proj.collect(out);
  cross.collect(out);
  out.push_back(pool.q_pool);
  if (pool.bilinear) out.push_back(pool.w_g);
  return out;
}

static TransformerBlockParams init_block(const RefinerConfig& cfg,
                                         CounterRng& rng) {
  if (cfg.d_model % cfg.n_heads != 0)
    throw ConfigError("refiner: d_model must be divisible by n_heads");
  TransformerBlockParams p;
  p.d_model = cfg.d_model;
  p.n_heads = cfg.n_heads;
  p.dropout_rate = cfg.dropout_rate;
  const int dh = p.d_head();
  for (int h = 0; h < cfg.n_heads; ++h) {
    p.wq.push_back(init_matrix(cfg.d_model, dh, rng));
    p.wk.push_back(init_matrix(cfg.d_model, dh, rng));
    p.wv.push_back(init_matrix(cfg.d_model, dh, rng));
  }
  p.wo = init_matrix(cfg.d_model, cfg.d_model, rng);
  p.w1 = init_matrix(cfg.d_model, 4 * cfg.d_model, rng);
  p.b1 = tensor(1, 4 * cfg.d_model);
  p.w2 = init_matrix(4 * cfg.d_model, cfg.d_model, rng);
  p.b2 = tensor(1, cfg.d_model);
  return p;
}

RefinerParams init_refiner(const RefinerConfig& cfg, std::uint64_t seed) {
  CounterRng rng(seed, /*stream=*/0xA11C);
  RefinerParams p;
  p.cfg = cfg;
  for (int i = 0; i < cfg.depth; ++i) p.audio_blocks.push_back(init_block(cfg, rng));
  for (int i = 0; i < cfg.depth; ++i) p.text_blocks.push_back(init_block(cfg, rng));
  p.audio_proj = {init_matrix(cfg.d_model, cfg.d_shared, rng), tensor(1, cfg.d_shared)};
  p.text_proj = {init_matrix(cfg.d_model, cfg.d_shared, rng), tensor(1, cfg.d_shared)};
  p.cross.wq_a = init_matrix(cfg.d_shared, cfg.d_shared, rng);
  p.cross.wk_t = init_matrix(cfg.d_shared, cfg.d_shared, rng);
  // Zero-init the value maps: the residual cross-attention starts as the
  // identity, so early training drives the shared dual-encoder path instead
  // of leaking one modality into the other.
  p.cross.wv_t = tensor(cfg.d_shared, cfg.d_shared);
  p.cross.wq_t = init_matrix(cfg.d_shared, cfg.d_shared, rng);
  p.cross.wk_a = init_matrix(cfg.d_shared, cfg.d_shared, rng);
  p.cross.wv_a = tensor(cfg.d_shared, cfg.d_shared);
  p.pool = init_pool_params(cfg.d_shared);
  p.pool.replace_prob = cfg.replace_prob;
  return p;
}

namespace {

TensorPtr multi_head_attention(Tape* tape, const TensorPtr& x,
                               const TransformerBlockParams& p,
                               bool row_independent) {
  std::vector<TensorPtr> heads;
  heads.reserve(p.n_heads);
  const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(p.d_head()));
  for (int h = 0; h < p.n_heads; ++h) {
    auto v = matmul(tape, x, p.wv[h]);
    if (row_independent) {
      // Each row attends only to itself; the single-logit softmax is 1.
      heads.push_back(v);
      continue;
    }
    auto q = matmul(tape, x, p.wq[h]);
    auto k = matmul(tape, x, p.wk[h]);
    auto scores = affine(tape, matmul_nt(tape, q, k), inv_sqrt_dh, 0.0);
    auto weights = softmax_rows(tape, scores);
    heads.push_back(matmul(tape, weights, v));
  }
  return matmul(tape, concat_cols(tape, heads), p.wo);
}

}  // namespace

TensorPtr transformer_project(Tape* tape, const TensorPtr& x,
                              const TransformerBlockParams& params, Mode mode,
                              CounterRng& rng, bool pre_norm,
                              bool row_independent) {
  if (x->rows < 1) throw UsageError("transformer_project: empty sequence");
  if (x->cols != params.d_model)
    throw ConfigError("transformer_project: d_model mismatch");
  auto attn_in = pre_norm ? standardize_rows(tape, x) : x;
  auto mha = multi_head_attention(tape, attn_in, params, row_independent);
  auto h = add(tape, dropout(tape, mha, params.dropout_rate, mode, rng), x);
  auto ffn_in = pre_norm ? standardize_rows(tape, h) : h;
  auto hidden = gelu(tape, add_rowvec(tape, matmul(tape, ffn_in, params.w1), params.b1));
  auto ffn = add_rowvec(tape, matmul(tape, hidden, params.w2), params.b2);
  return add(tape, dropout(tape, ffn, params.dropout_rate, mode, rng), h);
}

TensorPtr linear_project(Tape* tape, const TensorPtr& z,
                         const SharedProjectionParams& params) {
  if (z->cols != params.w->rows)
    throw ConfigError("linear_project: d_model mismatch");
  return add_rowvec(tape, matmul(tape, z, params.w), params.b);
}

namespace {

TensorPtr one_direction_attn(Tape* tape, const TensorPtr& queries,
                             const TensorPtr& keys, const TensorPtr& values_src,
                             const TensorPtr& wq, const TensorPtr& wk,
                             const TensorPtr& wv) {
  const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(wq->cols));
  auto q = matmul(tape, queries, wq);
  auto k = matmul(tape, keys, wk);
  auto v = matmul(tape, values_src, wv);
  auto weights = softmax_rows(tape, affine(tape, matmul_nt(tape, q, k), inv_sqrt_dk, 0.0));
  return matmul(tape, weights, v);
}

}  // namespace

CrossAttendResult cross_attend(Tape* tape, const TensorPtr& e_audio,
                               const TensorPtr& e_text,
                               const CrossAttentionParams& params) {
  if (e_audio->rows < 1 || e_text->rows < 1)
    throw UsageError("cross_attend: empty sequence");
  auto a2t = one_direction_attn(tape, e_audio, e_text, e_text, params.wq_a,
                                params.wk_t, params.wv_t);
  auto t2a = one_direction_attn(tape, e_text, e_audio, e_audio, params.wq_t,
                                params.wk_a, params.wv_a);
  // Residual integration so zero attention recovers the dual-encoder path.
  return CrossAttendResult{add(tape, e_audio, a2t), add(tape, e_text, t2a)};
}

namespace {

TensorPtr project_modality(Tape* tape, const TensorPtr& seq, Modality modality,
                           const RefinerParams& params, Mode mode,
                           CounterRng& rng) {
  auto z = seq;
  if (params.cfg.projection == ProjectionType::kTransformer) {
    const auto& blocks =
        modality == Modality::kAudio ? params.audio_blocks : params.text_blocks;
    const bool row_indep = modality == Modality::kAudio;
    for (const auto& b : blocks)
      z = transformer_project(tape, z, b, mode, rng, params.cfg.pre_norm, row_indep);
  }
  const auto& proj =
      modality == Modality::kAudio ? params.audio_proj : params.text_proj;
  return linear_project(tape, z, proj);
}

TensorPtr pool_audio(Tape* tape, const TensorPtr& chunks, const PoolQuery& query,
                     const RefinerParams& params, std::vector<double>* alpha_out) {
  if (params.cfg.audio_pooling == AudioPooling::kMean) {
    if (alpha_out)
      alpha_out->assign(chunks->rows, 1.0 / chunks->rows);
    return mean_rows(tape, chunks);
  }
  auto res = attention_pool(tape, chunks, query, &params.pool);
  if (alpha_out) *alpha_out = res.alpha;
  return res.pooled;
}

}  // namespace

RefinePairResult refine_pair(Tape* tape, const TensorPtr& audio_seq,
                             const TensorPtr& text_seq,
                             const RefinerParams& params, CounterRng& rng) {
  auto e_a = project_modality(tape, audio_seq, Modality::kAudio, params,
                              Mode::kTrain, rng);
  auto e_t = project_modality(tape, text_seq, Modality::kText, params,
                              Mode::kTrain, rng);
  // Pooling query is the pre-cross-attention text mean.
  auto q_text = mean_rows(tape, e_t);
  auto crossed = cross_attend(tape, e_a, e_t, params.cross);
  auto query = select_train_query(q_text, params.pool, rng);
  RefinePairResult out;
  out.query_mode = query.mode;
  auto audio_pooled = pool_audio(tape, crossed.audio_refined, query, params, &out.alpha);
  auto text_pooled = mean_rows(tape, crossed.text_refined);
  out.audio_vec = l2_normalize_rows(tape, audio_pooled);
  out.text_vec = l2_normalize_rows(tape, text_pooled);
  return out;
}

EmbedResult embed_single(const TensorPtr& seq, Modality modality,
                         const RefinerParams& params) {
  if (seq->rows < 1) throw UsageError("embed_single: empty sequence");
  CounterRng rng(0);  // unused: inference disables dropout
  auto e = project_modality(nullptr, seq, modality, params, Mode::kInfer, rng);
  EmbedResult out;
  if (modality == Modality::kAudio) {
    PoolQuery query{PoolQueryMode::kLearned, params.pool.q_pool};
    auto pooled = pool_audio(nullptr, e, query, params, &out.alpha);
    out.vec = l2_normalize_rows(nullptr, pooled);
  } else {
    out.vec = l2_normalize_rows(nullptr, mean_rows(nullptr, e));
  }
  return out;
}

}  // namespace acr
