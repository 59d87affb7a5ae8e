#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "acr/tensor.hpp"

namespace acr {

struct Waveform {
  std::vector<double> samples;  // in [-1, 1]
  int sample_rate = 16000;

  double duration_s() const {
    return static_cast<double>(samples.size()) / sample_rate;
  }
};

// Single-channel WAV, PCM 16-bit or 32-bit float, little-endian.
Waveform read_wav(const std::string& path);
void write_wav(const std::string& path, const Waveform& w);

struct SilenceConfig {
  double frame_ms = 20.0;
  double hop_ms = 10.0;
  double threshold_db = -40.0;  // dBFS, absolute
  double min_gap_s = 1.0;       // silent runs strictly longer than this go
};

// Excises maximal silent runs longer than min_gap_s; shorter silences stay.
// Throws EmptyAudio when nothing remains.
Waveform remove_silence(const Waveform& w, const SilenceConfig& cfg = {});

struct ChunkSet {
  std::vector<Waveform> chunks;  // each exactly chunk_len_s seconds
  std::string source_id;
};

// Fixed-length non-overlapping windows. Tail >= 1 s is zero-padded to full
// length, shorter tails are dropped; a clip under 1 s still yields one padded
// chunk.
ChunkSet chunk(const Waveform& w, double chunk_len_s = 10.0,
               const std::string& source_id = "");

struct SnrSpec {
  double snr_db = 10.0;
  std::uint64_t seed = 0;
};

// Scales noise so 10*log10(P_signal / P_noise) = snr_db, adds, then clamps to
// [-1, 1]. Short noise is tiled with a seed-chosen circular offset.
Waveform mix_noise(const Waveform& signal, const Waveform& noise,
                   const SnrSpec& spec);

// Seeded white Gaussian noise, peak-normalized to 0.5.
Waveform white_noise(std::size_t n_samples, int sample_rate, std::uint64_t seed);

struct EncoderPlugin {
  std::string name;
  int d_model = 0;
  bool deterministic = true;
  std::function<std::vector<double>(const Waveform&)> encode;
};

// Toy chunk encoder: 64 triangular-band log energies over the frame-energy
// sequence (25 ms frames, 10 ms hop, log floor 1e-10), then a seed-determined
// fixed random projection to d_model.
constexpr int kToyEncoderBands = 64;
constexpr double kToyEncoderLogFloor = 1e-10;
std::vector<double> toy_encode(const Waveform& chunk, std::uint64_t seed,
                               int d_model);
std::vector<double> toy_band_features(const Waveform& chunk);  // pre-projection
EncoderPlugin make_toy_encoder(std::uint64_t seed, int d_model);

struct PreprocessConfig {
  SilenceConfig silence;
  double chunk_len_s = 10.0;
};

// remove_silence -> chunk -> per-chunk encode; rows ordered by chunk index.
TensorPtr encode_clip(const Waveform& w, const EncoderPlugin& plugin,
                      const PreprocessConfig& cfg = {});

}  // namespace acr
