#include "acr/audio.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "acr/errors.hpp"

namespace acr {

namespace {

std::uint32_t read_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw TruncatedFile("wav: unexpected end of file");
  return b[0] | (b[1] << 8) | (b[2] << 16) | (std::uint32_t(b[3]) << 24);
}

std::uint16_t read_u16(std::istream& in) {
  unsigned char b[2];
  in.read(reinterpret_cast<char*>(b), 2);
  if (!in) throw TruncatedFile("wav: unexpected end of file");
  return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

void write_u32(std::ostream& out, std::uint32_t v) {
  char b[4] = {char(v & 0xFF), char((v >> 8) & 0xFF), char((v >> 16) & 0xFF),
               char((v >> 24) & 0xFF)};
  out.write(b, 4);
}

void write_u16(std::ostream& out, std::uint16_t v) {
  char b[2] = {char(v & 0xFF), char((v >> 8) & 0xFF)};
  out.write(b, 2);
}

}  // namespace

Waveform read_wav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("wav: cannot open " + path);
  char tag[4];
  in.read(tag, 4);
  if (!in || std::memcmp(tag, "RIFF", 4) != 0)
    throw DataError("wav: missing RIFF header in " + path);
  read_u32(in);  // riff size
  in.read(tag, 4);
  if (!in || std::memcmp(tag, "WAVE", 4) != 0)
    throw DataError("wav: not a WAVE file: " + path);

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  bool got_fmt = false;
  Waveform w;
  while (in.read(tag, 4)) {
    const std::uint32_t size = read_u32(in);
    if (std::memcmp(tag, "fmt ", 4) == 0) {
      format = read_u16(in);
      channels = read_u16(in);
      rate = read_u32(in);
      read_u32(in);  // byte rate
      read_u16(in);  // block align
      bits = read_u16(in);
      if (size > 16) in.seekg(size - 16, std::ios::cur);
      got_fmt = true;
    } else if (std::memcmp(tag, "data", 4) == 0) {
      if (!got_fmt) throw DataError("wav: data chunk before fmt in " + path);
      if (channels != 1) throw DataError("wav: only mono supported: " + path);
      std::vector<char> raw(size);
      in.read(raw.data(), size);
      if (!in) throw TruncatedFile("wav: truncated data chunk in " + path);
      w.sample_rate = static_cast<int>(rate);
      if (format == 1 && bits == 16) {
        const std::size_t n = size / 2;
        w.samples.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
          std::int16_t s;
          std::memcpy(&s, raw.data() + 2 * i, 2);
          w.samples[i] = s / 32768.0;
        }
      } else if (format == 3 && bits == 32) {
        const std::size_t n = size / 4;
        w.samples.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
          float f;
          std::memcpy(&f, raw.data() + 4 * i, 4);
          w.samples[i] = f;
        }
      } else {
        throw DataError("wav: unsupported format (need PCM16 or float32): " + path);
      }
      return w;
    } else {
      in.seekg(size + (size & 1), std::ios::cur);
    }
  }
  throw DataError("wav: no data chunk in " + path);
}

void write_wav(const std::string& path, const Waveform& w) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("wav: cannot write " + path);
  const std::uint32_t data_size = static_cast<std::uint32_t>(w.samples.size() * 2);
  out.write("RIFF", 4);
  write_u32(out, 36 + data_size);
  out.write("WAVE", 4);
  out.write("fmt ", 4);
  write_u32(out, 16);
  write_u16(out, 1);  // PCM
  write_u16(out, 1);  // mono
  write_u32(out, static_cast<std::uint32_t>(w.sample_rate));
  write_u32(out, static_cast<std::uint32_t>(w.sample_rate) * 2);
  write_u16(out, 2);
  write_u16(out, 16);
  out.write("data", 4);
  write_u32(out, data_size);
  for (double x : w.samples) {
    const double c = std::clamp(x, -1.0, 1.0);
    const std::int16_t s = static_cast<std::int16_t>(std::lround(c * 32767.0));
    write_u16(out, static_cast<std::uint16_t>(s));
  }
}

Waveform remove_silence(const Waveform& w, const SilenceConfig& cfg) {
  if (w.samples.empty()) throw EmptyAudio("remove_silence: empty waveform");
  const std::size_t frame = std::max<std::size_t>(
      1, static_cast<std::size_t>(cfg.frame_ms * 1e-3 * w.sample_rate));
  const std::size_t hop = std::max<std::size_t>(
      1, static_cast<std::size_t>(cfg.hop_ms * 1e-3 * w.sample_rate));
  const double threshold_rms = std::pow(10.0, cfg.threshold_db / 20.0);

  // Per-sample silence mask: a sample is silent when every frame covering it
  // is below threshold.
  std::vector<char> loud(w.samples.size(), 0);
  bool any_frame = false;
  for (std::size_t start = 0; start < w.samples.size(); start += hop) {
    const std::size_t end = std::min(start + frame, w.samples.size());
    double energy = 0.0;
    for (std::size_t i = start; i < end; ++i)
      energy += w.samples[i] * w.samples[i];
    const double rms = std::sqrt(energy / static_cast<double>(end - start));
    if (rms >= threshold_rms)
      for (std::size_t i = start; i < end; ++i) loud[i] = 1;
    any_frame = true;
    if (end == w.samples.size()) break;
  }
  (void)any_frame;

  const std::size_t max_gap =
      static_cast<std::size_t>(cfg.min_gap_s * w.sample_rate);
  Waveform out;
  out.sample_rate = w.sample_rate;
  out.samples.reserve(w.samples.size());
  std::size_t i = 0;
  while (i < w.samples.size()) {
    if (loud[i]) {
      out.samples.push_back(w.samples[i]);
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < w.samples.size() && !loud[j]) ++j;
    if (j - i <= max_gap)  // keep silences up to min_gap_s verbatim
      out.samples.insert(out.samples.end(), w.samples.begin() + i,
                         w.samples.begin() + j);
    i = j;
  }
  if (out.samples.empty())
    throw EmptyAudio("remove_silence: clip is entirely silent");
  return out;
}

ChunkSet chunk(const Waveform& w, double chunk_len_s,
               const std::string& source_id) {
  if (w.samples.empty()) throw EmptyAudio("chunk: empty waveform");
  const std::size_t chunk_len =
      static_cast<std::size_t>(chunk_len_s * w.sample_rate);
  const std::size_t min_tail = static_cast<std::size_t>(w.sample_rate);  // 1 s
  ChunkSet out;
  out.source_id = source_id;
  std::size_t pos = 0;
  while (pos + chunk_len <= w.samples.size()) {
    Waveform c;
    c.sample_rate = w.sample_rate;
    c.samples.assign(w.samples.begin() + pos, w.samples.begin() + pos + chunk_len);
    out.chunks.push_back(std::move(c));
    pos += chunk_len;
  }
  const std::size_t tail = w.samples.size() - pos;
  if (tail >= min_tail || out.chunks.empty()) {
    Waveform c;
    c.sample_rate = w.sample_rate;
    c.samples.assign(w.samples.begin() + pos, w.samples.end());
    c.samples.resize(chunk_len, 0.0);  // zero-pad to full length
    out.chunks.push_back(std::move(c));
  }
  return out;
}

namespace {

double mean_power(const std::vector<double>& v) {
  double p = 0.0;
  for (double x : v) p += x * x;
  return p / static_cast<double>(v.size());
}

}  // namespace

Waveform mix_noise(const Waveform& signal, const Waveform& noise,
                   const SnrSpec& spec) {
  if (signal.samples.empty() || noise.samples.empty())
    throw DegenerateAudio("mix_noise: empty input");
  const double p_signal = mean_power(signal.samples);
  if (p_signal <= 0.0) throw DegenerateAudio("mix_noise: zero-power signal");

  // Long-enough noise is cropped as-is; short noise is tiled with a
  // seed-chosen circular offset.
  std::vector<double> n(signal.samples.size());
  std::size_t offset = 0;
  if (noise.samples.size() < signal.samples.size()) {
    CounterRng rng(spec.seed, 0x501E);
    offset = rng.next_u64() % noise.samples.size();
  }
  for (std::size_t i = 0; i < n.size(); ++i)
    n[i] = noise.samples[(offset + i) % noise.samples.size()];
  const double p_noise = mean_power(n);
  if (p_noise <= 0.0) throw DegenerateAudio("mix_noise: zero-power noise");

  const double target_ratio = std::pow(10.0, spec.snr_db / 10.0);
  const double gain = std::sqrt(p_signal / (p_noise * target_ratio));
  Waveform out;
  out.sample_rate = signal.sample_rate;
  out.samples.resize(n.size());
  for (std::size_t i = 0; i < n.size(); ++i)
    out.samples[i] = std::clamp(signal.samples[i] + gain * n[i], -1.0, 1.0);
  return out;
}

Waveform white_noise(std::size_t n_samples, int sample_rate, std::uint64_t seed) {
  CounterRng rng(seed, 0x7715E);
  Waveform w;
  w.sample_rate = sample_rate;
  w.samples.resize(n_samples);
  double peak = 0.0;
  for (auto& x : w.samples) {
    x = rng.normal();
    peak = std::max(peak, std::abs(x));
  }
  if (peak > 0.0)
    for (auto& x : w.samples) x *= 0.5 / peak;
  return w;
}

std::vector<double> toy_band_features(const Waveform& chunk) {
  const std::size_t frame = std::max<std::size_t>(
      1, static_cast<std::size_t>(0.025 * chunk.sample_rate));
  const std::size_t hop = std::max<std::size_t>(
      1, static_cast<std::size_t>(0.010 * chunk.sample_rate));
  std::vector<double> energies;
  for (std::size_t start = 0; start < chunk.samples.size(); start += hop) {
    const std::size_t end = std::min(start + frame, chunk.samples.size());
    double e = 0.0;
    for (std::size_t i = start; i < end; ++i)
      e += chunk.samples[i] * chunk.samples[i];
    energies.push_back(e / static_cast<double>(end - start));
    if (end == chunk.samples.size()) break;
  }
  const int f = static_cast<int>(energies.size());
  std::vector<double> bands(kToyEncoderBands);
  for (int b = 0; b < kToyEncoderBands; ++b) {
    // Triangular window centered on an evenly spaced frame position.
    const double center = (b + 0.5) * f / kToyEncoderBands;
    const double width = std::max(1.0, static_cast<double>(f) / kToyEncoderBands);
    double acc = 0.0, wsum = 0.0;
    for (int i = 0; i < f; ++i) {
      const double wgt = std::max(0.0, 1.0 - std::abs(i + 0.5 - center) / width);
      acc += wgt * energies[i];
      wsum += wgt;
    }
    const double band_energy = wsum > 0.0 ? acc / wsum : 0.0;
    bands[b] = std::log(std::max(band_energy, kToyEncoderLogFloor));
  }
  return bands;
}

std::vector<double> toy_encode(const Waveform& chunk, std::uint64_t seed,
                               int d_model) {
  auto bands = toy_band_features(chunk);
  // Standardize the band profile so downstream layers see O(1) inputs; the
  // class-bearing information is the profile shape, not its offset.
  double mean = 0.0;
  for (double b : bands) mean += b;
  mean /= bands.size();
  double var = 0.0;
  for (double b : bands) var += (b - mean) * (b - mean);
  const double inv_std = 1.0 / std::max(std::sqrt(var / bands.size()), 1e-6);
  for (auto& b : bands) b = (b - mean) * inv_std;
  // Fixed random projection, fully determined by (seed, d_model).
  CounterRng rng(seed, 0x70E);
  std::vector<double> out(d_model, 0.0);
  const double scale = 1.0 / std::sqrt(static_cast<double>(kToyEncoderBands));
  for (int i = 0; i < d_model; ++i)
    for (int b = 0; b < kToyEncoderBands; ++b)
      out[i] += scale * rng.normal() * bands[b];
  return out;
}

EncoderPlugin make_toy_encoder(std::uint64_t seed, int d_model) {
  EncoderPlugin p;
  p.name = "toy";
  p.d_model = d_model;
  p.deterministic = true;
  p.encode = [seed, d_model](const Waveform& w) {
    return toy_encode(w, seed, d_model);
  };
  return p;
}

TensorPtr encode_clip(const Waveform& w, const EncoderPlugin& plugin,
                      const PreprocessConfig& cfg) {
  const auto cleaned = remove_silence(w, cfg.silence);
  const auto chunks = chunk(cleaned, cfg.chunk_len_s);
  auto out = tensor(static_cast<int>(chunks.chunks.size()), plugin.d_model);
  for (int i = 0; i < out->rows; ++i) {
    const auto v = plugin.encode(chunks.chunks[i]);
    if (static_cast<int>(v.size()) != plugin.d_model)
      throw ConfigError("encode_clip: plugin output dim mismatch");
    for (int j = 0; j < plugin.d_model; ++j) out->at(i, j) = v[j];
  }
  return out;
}

}  // namespace acr
