#include "acr/pooling.hpp"

#include <cmath>

#include "acr/errors.hpp"

namespace acr {

PoolParams init_pool_params(int d_shared, bool bilinear) {
  // Zero query gives uniform pooling at step 0, i.e. mean pooling.
  PoolParams p{tensor(1, d_shared), 0.1, bilinear, tensor(d_shared, d_shared)};
  for (int i = 0; i < d_shared; ++i) p.w_g->at(i, i) = 1.0;
  return p;
}

PoolResult attention_pool(Tape* tape, const TensorPtr& chunks,
                          const PoolQuery& query, const PoolParams* params) {
  if (chunks->rows < 1) throw UsageError("attention_pool: no chunks");
  if (query.vector->rows != 1 || query.vector->cols != chunks->cols)
    throw ConfigError("attention_pool: query shape mismatch");
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(chunks->cols));
  auto q = query.vector;
  if (params && params->bilinear) q = matmul_nt(tape, q, params->w_g);
  auto scores = matmul_nt(tape, q, chunks);                   // 1 x m
  auto alpha = softmax_rows(tape, affine(tape, scores, inv_sqrt_d, 0.0));
  auto pooled = matmul(tape, alpha, chunks);                  // 1 x d
  return PoolResult{pooled, alpha->data};
}

PoolQuery select_train_query(const TensorPtr& text_vec, const PoolParams& params,
                             CounterRng& rng) {
  if (params.replace_prob < 0.0 || params.replace_prob > 1.0)
    throw ConfigError("select_train_query: replace_prob out of range");
  if (rng.uniform() < params.replace_prob)
    return PoolQuery{PoolQueryMode::kLearned, params.q_pool};
  return PoolQuery{PoolQueryMode::kTextConditioned, text_vec};
}

}  // namespace acr
