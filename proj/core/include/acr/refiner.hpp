#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "acr/pooling.hpp"
#include "acr/tensor.hpp"

namespace acr {

enum class Modality { kAudio, kText };
enum class ProjectionType { kTransformer, kLinear };
enum class AudioPooling { kAttention, kMean };

struct RefinerConfig {
  int d_model = 64;
  int d_shared = 32;
  int n_heads = 8;
  int depth = 1;  // transformer blocks per modality
  double dropout_rate = 0.1;
  bool pre_norm = false;  // optional pre-sublayer standardization
  ProjectionType projection = ProjectionType::kTransformer;
  AudioPooling audio_pooling = AudioPooling::kAttention;
  double replace_prob = 0.1;
};

struct TransformerBlockParams {
  int d_model = 0;
  int n_heads = 8;
  std::vector<TensorPtr> wq, wk, wv;  // per head, d_model x d_head
  TensorPtr wo;                       // d_model x d_model
  TensorPtr w1, b1, w2, b2;           // FFN, hidden 4*d_model
  double dropout_rate = 0.1;

  int d_head() const { return d_model / n_heads; }
  void collect(std::vector<TensorPtr>& out) const;
};

struct SharedProjectionParams {
  TensorPtr w;  // d_model x d_shared
  TensorPtr b;  // 1 x d_shared
  void collect(std::vector<TensorPtr>& out) const;
};

struct CrossAttentionParams {
  // audio attending to text, then text attending to audio.
  TensorPtr wq_a, wk_t, wv_t;
  TensorPtr wq_t, wk_a, wv_a;
  void collect(std::vector<TensorPtr>& out) const;
};

struct RefinerParams {
  RefinerConfig cfg;
  std::vector<TransformerBlockParams> audio_blocks, text_blocks;
  SharedProjectionParams audio_proj, text_proj;
  CrossAttentionParams cross;
  PoolParams pool;

  // All learnable tensors in a fixed, documented order (checkpointing and
  // optimizer state rely on it).
  std::vector<TensorPtr> tensors() const;
};

RefinerParams init_refiner(const RefinerConfig& cfg, std::uint64_t seed);

// Eqs: H = MHA(X) + X, Z = FFN(H) + H; dropout after each sublayer in train
// mode. row_independent restricts self-attention to each row alone (length-1
// sequence semantics); used for the audio branch so inference stays linear in
// the chunk count.
TensorPtr transformer_project(Tape* tape, const TensorPtr& x,
                              const TransformerBlockParams& params, Mode mode,
                              CounterRng& rng, bool pre_norm = false,
                              bool row_independent = false);

// E = Z W_proj + b_proj.
TensorPtr linear_project(Tape* tape, const TensorPtr& z,
                         const SharedProjectionParams& params);

struct CrossAttendResult {
  TensorPtr audio_refined, text_refined;
};

// Residual bidirectional cross-attention over projected embeddings.
CrossAttendResult cross_attend(Tape* tape, const TensorPtr& e_audio,
                               const TensorPtr& e_text,
                               const CrossAttentionParams& params);

struct RefinePairResult {
  TensorPtr audio_vec, text_vec;  // 1 x d_shared, unit rows
  std::vector<double> alpha;      // audio pooling weights
  PoolQueryMode query_mode;
};

// Training path: per-modality projection, cross-attention, pooling,
// normalization. rng drives dropout and the pooling-query choice.
RefinePairResult refine_pair(Tape* tape, const TensorPtr& audio_seq,
                             const TensorPtr& text_seq,
                             const RefinerParams& params, CounterRng& rng);

struct EmbedResult {
  TensorPtr vec;              // 1 x d_shared, unit row
  std::vector<double> alpha;  // audio only; empty for text
};

// Inference path: no cross-attention, no dropout, learned pooling query.
EmbedResult embed_single(const TensorPtr& seq, Modality modality,
                         const RefinerParams& params);

}  // namespace acr
