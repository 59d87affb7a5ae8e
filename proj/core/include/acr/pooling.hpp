#pragma once

#include "acr/tensor.hpp"

namespace acr {

struct PoolParams {
  TensorPtr q_pool;          // learnable 1 x d_shared query
  double replace_prob = 0.1; // training-time chance of using q_pool
  bool bilinear = false;     // score h . (W q) instead of h . q
  TensorPtr w_g;             // d_shared x d_shared, identity-initialized
};

PoolParams init_pool_params(int d_shared, bool bilinear = false);

enum class PoolQueryMode { kTextConditioned, kLearned };

struct PoolQuery {
  PoolQueryMode mode;
  TensorPtr vector;  // 1 x d_shared
};

struct PoolResult {
  TensorPtr pooled;           // 1 x d_shared
  std::vector<double> alpha;  // attention weights, one per chunk
};

// z = sum_i alpha_i h_i with alpha = softmax_i( h_i . q / sqrt(d) ); the
// optional bilinear form scores h_i . (W q) / sqrt(d).
PoolResult attention_pool(Tape* tape, const TensorPtr& chunks,
                          const PoolQuery& query,
                          const PoolParams* params = nullptr);

// With probability replace_prob the learned q_pool replaces the
// text-conditioned query. Consumes one rng draw either way.
PoolQuery select_train_query(const TensorPtr& text_vec, const PoolParams& params,
                             CounterRng& rng);

}  // namespace acr
