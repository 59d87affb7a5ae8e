#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "acr/loss.hpp"
#include "acr/refiner.hpp"
#include "acr/tensor.hpp"

namespace acr {

// Binary embedding container. Layout, all little-endian:
//   magic "AEMB", u32 version = 1, u32 count, u32 dim,
//   count x u64 ids, count x dim f32 values.
struct EmbeddingStore {
  std::vector<std::uint64_t> ids;
  int dim = 0;
  std::vector<float> values;  // row-major, count x dim
};

void write_embeddings(const std::string& path, const EmbeddingStore& store);
EmbeddingStore read_embeddings(const std::string& path);

EmbeddingStore to_store(const std::vector<std::uint64_t>& ids,
                        const Tensor2D& vectors);
Tensor2D store_matrix(const EmbeddingStore& store);

// Flat key=value training configuration. Unknown keys are errors.
struct TrainConfig {
  double learning_rate = 3e-3;
  int batch_size = 16;
  int max_epochs = 200;
  int early_stop_patience = 10;
  LossWeights weights;      // default 0.3 / 0.3 / 0.4
  double temperature = 0.07;
  double replace_prob = 0.1;
  std::uint64_t seed = 1;
  int d_model = 64;
  int d_shared = 32;
  int n_heads = 8;
  int depth = 1;
  double dropout_rate = 0.1;
  bool pre_norm = false;
  std::string projection = "transformer";  // or "linear"
  std::string audio_pooling = "attention"; // or "mean"

  RefinerConfig refiner() const;
};

TrainConfig parse_config_text(const std::string& text);
TrainConfig read_config(const std::string& path);
std::string serialize_config(const TrainConfig& cfg);
std::uint64_t config_hash(const TrainConfig& cfg);

// Checkpoint: magic "ACKP", u32 version = 1, u64 config hash, u64 step,
// length-prefixed config text, then refiner tensors followed by Adam first
// and second moments, each as u32 rows, u32 cols, f32 payload, in the fixed
// RefinerParams::tensors() order.
struct Checkpoint {
  TrainConfig config;
  RefinerParams params;
  std::vector<Tensor2D> adam_m, adam_v;
  std::int64_t step = 0;
};

void write_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::string& path);

// Line-delimited JSON manifest: {"id": ..., "audio": wav path or
// {"embedding": key}, "captions": [...]}.
struct ManifestEntry {
  std::uint64_t id = 0;
  std::string audio_path;     // empty when precomputed
  std::string embedding_key;  // empty when raw audio
  std::vector<std::string> captions;
};

std::vector<ManifestEntry> read_manifest(const std::string& path);

// Manifest/caption ids: numeric strings parse as-is, anything else hashes via
// FNV-1a.
std::uint64_t parse_id(const std::string& s);

}  // namespace acr
