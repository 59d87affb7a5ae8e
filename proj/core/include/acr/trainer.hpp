#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "acr/audio.hpp"
#include "acr/io.hpp"
#include "acr/refiner.hpp"
#include "acr/retrieval.hpp"

namespace acr {

// Seed of the fixed toy audio encoder; frozen so only the refinement
// parameters ever train.
constexpr std::uint64_t kEncoderSeed = 17;

struct AdamState {
  std::vector<Tensor2D> m, v;
  std::int64_t step = 0;
};

AdamState init_adam(const std::vector<TensorPtr>& params);

// Bias-corrected Adam over the fixed parameter order. Throws NumericError on
// non-finite gradients. Tensors with no grad slot are treated as zero-grad.
void adam_step(const std::vector<TensorPtr>& params, AdamState& state,
               double lr, double beta1 = 0.9, double beta2 = 0.999,
               double eps = 1e-8);

struct SyntheticDatasetSpec {
  int num_classes = 32;
  int pairs_per_class = 8;
  int latent_dim = 8;
  double audio_sigma = 0.1;
  double text_sigma = 0.1;
  int sample_rate = 8000;
  double chunk_len_s = 10.0;
  std::uint64_t seed = 7;
};

SyntheticDatasetSpec parse_synthetic_spec(const std::string& spec);  // "classes=32,pairs=8,..."

struct PairExample {
  std::uint64_t audio_id = 0, text_id = 0;
  int class_id = -1;           // -1: only the paired item is relevant
  Waveform audio;              // empty when only precomputed embeddings exist
  TensorPtr audio_seq;         // chunk embeddings, n_a x d_model
  TensorPtr text_seq;          // token embeddings, n_t x d_model
};

struct Dataset {
  std::vector<PairExample> train, val, test;
  int d_model = 64;
};

// Class latents on the unit sphere; audio is an amplitude-modulated carrier
// whose toy-encoded chunks cluster near a linear image of the latent, plus
// class-independent low-level background chunks; text rows are noisy linear
// images of the same latent.
Dataset generate_synthetic(const SyntheticDatasetSpec& spec, int d_model);

Dataset load_manifest_dataset(const std::string& manifest_path, int d_model,
                              std::uint64_t split_seed);

enum class Direction { kA2T, kT2A };

struct EvalOptions {
  Direction direction = Direction::kA2T;
  std::optional<SnrSpec> noise;  // applied to audio before encoding
};

MetricReport evaluate(const RefinerParams& params,
                      const std::vector<PairExample>& pairs,
                      const EvalOptions& opts);

// Per-clip pooling attention weights on the inference path.
struct AttentionDump {
  std::uint64_t clip_id;
  std::vector<double> alpha;
};
std::vector<AttentionDump> dump_attention(const RefinerParams& params,
                                          const std::vector<PairExample>& pairs);

struct TrainResult {
  Checkpoint best;
  std::string log_csv;  // step,directional,l1,contrastive,total
  std::vector<double> val_map_history;
  double best_val_map = 0.0;
  int best_epoch = -1;
};

TrainResult train(const TrainConfig& config, const Dataset& data);

struct AblationRow {
  std::string axis, value;
  MetricReport a2t, t2a;
  bool failed = false;
  std::string error;
};

struct AblationTable {
  std::vector<AblationRow> rows;
  std::string csv() const;  // axis,value,a2t_r1,a2t_map10,t2a_r1,t2a_map10,status
};

// One full train+evaluate per grid point, shared seed; failures isolate.
AblationTable ablate(const TrainConfig& base, const Dataset& data,
                     const std::string& axis,
                     const std::vector<std::string>& grid);
std::vector<std::string> default_grid(const std::string& axis);

}  // namespace acr
