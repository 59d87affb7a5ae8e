#include "acr/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "acr/errors.hpp"
#include "acr/loss.hpp"
#include "acr/textsearch.hpp"

namespace acr {

AdamState init_adam(const std::vector<TensorPtr>& params) {
  AdamState s;
  for (const auto& p : params) {
    s.m.emplace_back(p->rows, p->cols);
    s.v.emplace_back(p->rows, p->cols);
  }
  return s;
}

void adam_step(const std::vector<TensorPtr>& params, AdamState& state,
               double lr, double beta1, double beta2, double eps) {
  if (params.size() != state.m.size())
    throw ConfigError("adam_step: state size mismatch");
  for (const auto& p : params)
    for (double g : p->grad)
      if (!std::isfinite(g))
        throw NumericError("adam_step: non-finite gradient, step aborted");
  ++state.step;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
  for (std::size_t t = 0; t < params.size(); ++t) {
    auto& p = *params[t];
    for (std::size_t i = 0; i < p.data.size(); ++i) {
      const double g = p.grad.empty() ? 0.0 : p.grad[i];
      state.m[t].data[i] = beta1 * state.m[t].data[i] + (1.0 - beta1) * g;
      state.v[t].data[i] = beta2 * state.v[t].data[i] + (1.0 - beta2) * g * g;
      const double mhat = state.m[t].data[i] / bc1;
      const double vhat = state.v[t].data[i] / bc2;
      p.data[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
  }
}

SyntheticDatasetSpec parse_synthetic_spec(const std::string& spec) {
  SyntheticDatasetSpec s;
  std::istringstream in(spec);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (item.empty()) continue;
    const auto eq = item.find('=');
    if (eq == std::string::npos)
      throw UsageError("synthetic spec: expected key=value, got '" + item + "'");
    const std::string key = item.substr(0, eq);
    const std::string val = item.substr(eq + 1);
    if (key == "classes") s.num_classes = std::stoi(val);
    else if (key == "pairs") s.pairs_per_class = std::stoi(val);
    else if (key == "latent") s.latent_dim = std::stoi(val);
    else if (key == "sigma") s.audio_sigma = s.text_sigma = std::stod(val);
    else if (key == "audio_sigma") s.audio_sigma = std::stod(val);
    else if (key == "text_sigma") s.text_sigma = std::stod(val);
    else if (key == "sample_rate") s.sample_rate = std::stoi(val);
    else if (key == "seed") s.seed = std::stoull(val);
    else throw UsageError("synthetic spec: unknown key '" + key + "'");
  }
  if (s.num_classes < 2 || s.pairs_per_class < 1)
    throw UsageError("synthetic spec: need >= 2 classes and >= 1 pair");
  return s;
}

namespace {

std::vector<double> unit_latent(int dim, CounterRng& rng) {
  std::vector<double> z(dim);
  double norm = 0.0;
  for (auto& x : z) {
    x = rng.normal();
    norm += x * x;
  }
  norm = std::max(std::sqrt(norm), 1e-12);
  for (auto& x : z) x /= norm;
  return z;
}

// latent -> per-band log-amplitude profile, entries roughly N(0,1).
std::vector<double> band_profile(const std::vector<double>& z,
                                 CounterRng& map_rng, int bands) {
  std::vector<double> out(bands, 0.0);
  const double scale = 1.0 / std::sqrt(static_cast<double>(z.size()));
  for (int b = 0; b < bands; ++b)
    for (double zi : z) out[b] += scale * map_rng.normal() * zi;
  return out;
}

Waveform modulated_chunk(const std::vector<double>& log_amp, double base_amp,
                         double carrier_hz, int sample_rate, double len_s) {
  Waveform w;
  w.sample_rate = sample_rate;
  const std::size_t n = static_cast<std::size_t>(len_s * sample_rate);
  w.samples.resize(n);
  const int segments = static_cast<int>(log_amp.size());
  for (std::size_t i = 0; i < n; ++i) {
    const int seg = std::min<int>(segments - 1,
                                  static_cast<int>(i * segments / n));
    const double amp = base_amp * std::exp(0.5 * log_amp[seg]);
    w.samples[i] = std::clamp(
        amp * std::sin(2.0 * std::numbers::pi * carrier_hz * i / sample_rate),
        -1.0, 1.0);
  }
  return w;
}

}  // namespace

Dataset generate_synthetic(const SyntheticDatasetSpec& spec, int d_model) {
  Dataset data;
  data.d_model = d_model;
  const auto encoder = make_toy_encoder(kEncoderSeed, d_model);
  CounterRng class_rng(spec.seed, 0xC1A5);

  // Fixed maps: latent -> band profile and latent -> text feature, plus one
  // shared background latent.
  std::vector<std::vector<double>> class_latents;
  for (int c = 0; c < spec.num_classes; ++c)
    class_latents.push_back(unit_latent(spec.latent_dim, class_rng));
  const auto background = unit_latent(spec.latent_dim, class_rng);

  CounterRng bg_map_rng(spec.seed, 0xB6);
  const auto bg_profile = band_profile(background, bg_map_rng, kToyEncoderBands);

  // Text map rows, fixed per dataset.
  CounterRng text_map_rng(spec.seed, 0x7E);
  std::vector<std::vector<double>> text_map(d_model);
  const double tscale = 1.0 / std::sqrt(static_cast<double>(spec.latent_dim));
  for (auto& row : text_map) {
    row.resize(spec.latent_dim);
    for (auto& x : row) x = tscale * text_map_rng.normal();
  }

  int pair_idx = 0;
  for (int c = 0; c < spec.num_classes; ++c) {
    // Band map for this dataset is shared; profile is per class.
    CounterRng class_map_rng(spec.seed, 0xA9);
    const auto profile =
        band_profile(class_latents[c], class_map_rng, kToyEncoderBands);

    for (int p = 0; p < spec.pairs_per_class; ++p, ++pair_idx) {
      CounterRng rng(spec.seed, 0x9A1200ull + pair_idx);
      PairExample ex;
      ex.audio_id = static_cast<std::uint64_t>(pair_idx);
      ex.text_id = static_cast<std::uint64_t>(pair_idx);
      ex.class_id = c;

      // Event chunk: class profile with per-pair log-domain jitter.
      auto jittered = profile;
      for (auto& x : jittered) x += spec.audio_sigma * rng.normal();
      std::vector<Waveform> chunks;
      chunks.push_back(modulated_chunk(jittered, 0.25, 440.0, spec.sample_rate,
                                       spec.chunk_len_s));
      // One or two quiet background chunks shared across classes.
      const int n_bg = 1 + static_cast<int>(rng.next_u64() % 2);
      for (int b = 0; b < n_bg; ++b) {
        auto bg = bg_profile;
        for (auto& x : bg) x = 0.4 * x + spec.audio_sigma * rng.normal();
        chunks.push_back(modulated_chunk(bg, 0.05, 220.0, spec.sample_rate,
                                         spec.chunk_len_s));
      }
      // Seeded event position.
      const std::size_t event_pos = rng.next_u64() % chunks.size();
      std::swap(chunks[0], chunks[event_pos]);

      ex.audio.sample_rate = spec.sample_rate;
      for (const auto& ch : chunks)
        ex.audio.samples.insert(ex.audio.samples.end(), ch.samples.begin(),
                                ch.samples.end());
      ex.audio_seq = encode_clip(ex.audio, encoder,
                                 PreprocessConfig{{}, spec.chunk_len_s});

      // Text: a few token rows near the linear image of the class latent.
      const int n_tokens = 2 + static_cast<int>(rng.next_u64() % 3);
      ex.text_seq = tensor(n_tokens, d_model);
      for (int t = 0; t < n_tokens; ++t)
        for (int j = 0; j < d_model; ++j) {
          double base = 0.0;
          for (int l = 0; l < spec.latent_dim; ++l)
            base += text_map[j][l] * class_latents[c][l];
          ex.text_seq->at(t, j) = base + spec.text_sigma * rng.normal();
        }

      // Split within each class: 1/4 test, 1/8 val (at least one each when
      // possible), remainder train.
      const int n_test = std::max(1, spec.pairs_per_class / 4);
      const int n_val = spec.pairs_per_class >= 4 ? std::max(1, spec.pairs_per_class / 8) : 0;
      if (p < n_test) data.test.push_back(std::move(ex));
      else if (p < n_test + n_val) data.val.push_back(std::move(ex));
      else data.train.push_back(std::move(ex));
    }
  }
  if (data.train.empty()) throw DataError("generate_synthetic: empty train split");
  return data;
}

Dataset load_manifest_dataset(const std::string& manifest_path, int d_model,
                              std::uint64_t split_seed) {
  const auto entries = read_manifest(manifest_path);
  if (entries.empty()) throw DataError("manifest: no entries");
  const auto encoder = make_toy_encoder(kEncoderSeed, d_model);
  const auto token_embed = [d_model](const std::string& caption) {
    const auto tokens = tokenize(caption, /*remove_stopwords=*/false);
    auto t = tensor(std::max<int>(1, static_cast<int>(tokens.size())), d_model);
    if (tokens.empty()) return t;
    for (int i = 0; i < static_cast<int>(tokens.size()); ++i) {
      CounterRng rng(kEncoderSeed ^ fnv1a(tokens[i]), 0x7013);
      for (int j = 0; j < d_model; ++j) t->at(i, j) = rng.normal();
    }
    return t;
  };

  std::vector<PairExample> all;
  for (const auto& e : entries) {
    PairExample ex;
    ex.audio_id = e.id;
    ex.text_id = e.id;
    if (!e.audio_path.empty()) {
      ex.audio = read_wav(e.audio_path);
      ex.audio_seq = encode_clip(ex.audio, encoder, {});
    } else {
      throw DataError("manifest entry " + std::to_string(e.id) +
                      ": no audio reference");
    }
    if (e.captions.empty())
      throw DataError("manifest entry " + std::to_string(e.id) + ": no captions");
    ex.text_seq = token_embed(e.captions.front());
    all.push_back(std::move(ex));
  }

  // Deterministic 80/10/10 split.
  std::vector<std::size_t> order(all.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  CounterRng rng(split_seed, 0x5137);
  for (std::size_t i = order.size(); i > 1; --i)
    std::swap(order[i - 1], order[rng.next_u64() % i]);
  Dataset data;
  data.d_model = d_model;
  for (std::size_t r = 0; r < order.size(); ++r) {
    auto& ex = all[order[r]];
    const double frac = static_cast<double>(r) / order.size();
    if (frac < 0.8 || order.size() < 3) data.train.push_back(std::move(ex));
    else if (frac < 0.9) data.val.push_back(std::move(ex));
    else data.test.push_back(std::move(ex));
  }
  if (data.val.empty()) data.val = data.train;
  if (data.test.empty()) data.test = data.val;
  return data;
}

namespace {

TensorPtr noisy_audio_seq(const PairExample& ex, const SnrSpec& spec,
                          int d_model) {
  if (ex.audio.samples.empty())
    throw DataError("evaluate: noise requested but no raw audio available");
  SnrSpec per_clip = spec;
  per_clip.seed = spec.seed ^ (ex.audio_id * 0x9E3779B97F4A7C15ull);
  const auto noise = white_noise(ex.audio.samples.size(), ex.audio.sample_rate,
                                 per_clip.seed);
  const auto mixed = mix_noise(ex.audio, noise, per_clip);
  return encode_clip(mixed, make_toy_encoder(kEncoderSeed, d_model), {});
}

struct BuiltIndices {
  EmbeddingIndex audio, text;
};

BuiltIndices build_indices(const RefinerParams& params,
                           const std::vector<PairExample>& pairs,
                           const std::optional<SnrSpec>& noise) {
  const int d_model = params.cfg.d_model;
  Tensor2D audio_mat(static_cast<int>(pairs.size()), params.cfg.d_shared);
  Tensor2D text_mat(static_cast<int>(pairs.size()), params.cfg.d_shared);
  std::vector<std::uint64_t> audio_ids, text_ids;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& ex = pairs[i];
    auto seq = noise ? noisy_audio_seq(ex, *noise, d_model) : ex.audio_seq;
    const auto a = embed_single(seq, Modality::kAudio, params);
    const auto t = embed_single(ex.text_seq, Modality::kText, params);
    for (int j = 0; j < params.cfg.d_shared; ++j) {
      audio_mat.at(static_cast<int>(i), j) = a.vec->at(0, j);
      text_mat.at(static_cast<int>(i), j) = t.vec->at(0, j);
    }
    audio_ids.push_back(ex.audio_id);
    text_ids.push_back(ex.text_id);
  }
  return BuiltIndices{build_index(std::move(audio_ids), std::move(audio_mat), "audio"),
                      build_index(std::move(text_ids), std::move(text_mat), "text")};
}

RelevanceMap class_relevance(const std::vector<PairExample>& pairs,
                             bool audio_queries) {
  RelevanceMap rel;
  for (const auto& q : pairs) {
    const std::uint64_t qid = audio_queries ? q.audio_id : q.text_id;
    auto& set = rel[qid];
    for (const auto& d : pairs) {
      const bool match = q.class_id >= 0 ? d.class_id == q.class_id
                                         : d.audio_id == q.audio_id;
      if (match) set.insert(audio_queries ? d.text_id : d.audio_id);
    }
  }
  return rel;
}

}  // namespace

MetricReport evaluate(const RefinerParams& params,
                      const std::vector<PairExample>& pairs,
                      const EvalOptions& opts) {
  if (pairs.empty()) throw DataError("evaluate: empty pair list");
  const auto built = build_indices(params, pairs, opts.noise);
  const bool a2t = opts.direction == Direction::kA2T;
  const auto& query_index = a2t ? built.audio : built.text;
  const auto& doc_index = a2t ? built.text : built.audio;
  std::vector<Ranking> rankings;
  const int k = std::min<int>(10, doc_index.size());
  for (int i = 0; i < query_index.size(); ++i) {
    std::vector<double> q(query_index.vectors.cols);
    for (int j = 0; j < query_index.vectors.cols; ++j)
      q[j] = query_index.vectors.at(i, j);
    Ranking r;
    r.query_id = query_index.ids[i];
    for (const auto& s : search(doc_index, q, k)) r.docs.push_back(s.id);
    rankings.push_back(std::move(r));
  }
  return compute_metrics(rankings, class_relevance(pairs, a2t));
}

std::vector<AttentionDump> dump_attention(const RefinerParams& params,
                                          const std::vector<PairExample>& pairs) {
  std::vector<AttentionDump> out;
  for (const auto& ex : pairs) {
    const auto res = embed_single(ex.audio_seq, Modality::kAudio, params);
    out.push_back({ex.audio_id, res.alpha});
  }
  return out;
}

namespace {

RefinerParams clone_params(const RefinerParams& src) {
  RefinerParams copy = init_refiner(src.cfg, 0);
  auto dst_t = copy.tensors();
  auto src_t = src.tensors();
  for (std::size_t i = 0; i < src_t.size(); ++i) dst_t[i]->data = src_t[i]->data;
  copy.pool.replace_prob = src.pool.replace_prob;
  return copy;
}

double validation_map(const RefinerParams& params,
                      const std::vector<PairExample>& val) {
  const auto a2t = evaluate(params, val, {Direction::kA2T, std::nullopt});
  const auto t2a = evaluate(params, val, {Direction::kT2A, std::nullopt});
  return 0.5 * (a2t.map10 + t2a.map10);
}

}  // namespace

TrainResult train(const TrainConfig& config, const Dataset& data) {
  if (data.train.empty()) throw DataError("train: empty dataset");
  if (data.d_model != config.d_model)
    throw ConfigError("train: dataset d_model differs from config");
  auto params = init_refiner(config.refiner(), config.seed);
  auto tensors = params.tensors();
  auto adam = init_adam(tensors);

  std::ostringstream log;
  log.precision(9);
  log << std::fixed << "step,directional,l1,contrastive,total\n";

  TrainResult result;
  result.best_val_map = -1.0;
  std::int64_t step = 0;
  int epochs_since_best = 0;

  for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
    // Seeded shuffle.
    std::vector<std::size_t> order(data.train.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    CounterRng shuffle_rng(config.seed, 0x5F0FFull + epoch);
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[shuffle_rng.next_u64() % i]);

    const std::size_t b = static_cast<std::size_t>(config.batch_size);
    for (std::size_t start = 0; start < order.size(); start += b) {
      const std::size_t end = std::min(start + b, order.size());
      if (end - start < 2) break;  // contrastive needs at least 2 pairs
      Tape tape;
      CounterRng batch_rng(config.seed,
                           0xBA7C0000ull + static_cast<std::uint64_t>(step));
      std::vector<TensorPtr> audio_rows, text_rows;
      for (std::size_t i = start; i < end; ++i) {
        const auto& ex = data.train[order[i]];
        auto res = refine_pair(&tape, ex.audio_seq, ex.text_seq, params, batch_rng);
        audio_rows.push_back(res.audio_vec);
        text_rows.push_back(res.text_vec);
      }
      auto a = concat_rows(&tape, audio_rows);
      auto t = concat_rows(&tape, text_rows);
      auto loss = hybrid_loss(&tape, a, t, config.weights, config.temperature);
      for (const auto& p : tensors) p->zero_grad();
      tape.backward(loss.total);
      adam_step(tensors, adam, config.learning_rate);
      ++step;
      log << step << "," << loss.report.directional << "," << loss.report.l1
          << "," << loss.report.contrastive << "," << loss.report.total << "\n";
    }

    const auto& val = data.val.empty() ? data.train : data.val;
    const double val_map = validation_map(params, val);
    result.val_map_history.push_back(val_map);
    if (val_map > result.best_val_map) {
      result.best_val_map = val_map;
      result.best_epoch = epoch;
      result.best.config = config;
      result.best.params = clone_params(params);
      result.best.adam_m = adam.m;
      result.best.adam_v = adam.v;
      result.best.step = step;
      epochs_since_best = 0;
    } else if (++epochs_since_best >= config.early_stop_patience) {
      break;
    }
  }
  result.log_csv = log.str();
  return result;
}

std::vector<std::string> default_grid(const std::string& axis) {
  if (axis == "loss-weights")
    return {"0/0/1",       "0.1/0.2/0.7", "0.2/0.3/0.5",
            "0.2/0.1/0.7", "0.3/0.3/0.4", "0.4/0.4/0.2"};
  if (axis == "batch-size") return {"4", "8", "16", "32", "64"};
  if (axis == "projection-type") return {"linear", "transformer"};
  if (axis == "loss-type") return {"contrastive", "hybrid"};
  throw UsageError("ablate: unknown axis '" + axis + "'");
}

namespace {

TrainConfig apply_axis(const TrainConfig& base, const std::string& axis,
                       const std::string& value) {
  TrainConfig cfg = base;
  if (axis == "loss-weights") {
    double w[3];
    std::istringstream in(value);
    std::string part;
    for (double& x : w) {
      if (!std::getline(in, part, '/'))
        throw UsageError("ablate: weight entry must be l1/l2/l3");
      x = std::stod(part);
    }
    cfg.weights = validate_weights(w[0], w[1], w[2]);
  } else if (axis == "batch-size") {
    cfg.batch_size = std::stoi(value);
  } else if (axis == "projection-type") {
    cfg.projection = value;
  } else if (axis == "loss-type") {
    if (value == "contrastive") cfg.weights = validate_weights(0, 0, 1);
    else if (value == "hybrid") cfg.weights = base.weights;
    else throw UsageError("ablate: loss-type must be contrastive|hybrid");
  } else {
    throw UsageError("ablate: unknown axis '" + axis + "'");
  }
  return cfg;
}

}  // namespace

AblationTable ablate(const TrainConfig& base, const Dataset& data,
                     const std::string& axis,
                     const std::vector<std::string>& grid) {
  if (grid.empty()) throw UsageError("ablate: empty grid");
  AblationTable table;
  for (const auto& value : grid) {
    AblationRow row;
    row.axis = axis;
    row.value = value;
    try {
      const TrainConfig cfg = apply_axis(base, axis, value);
      const auto trained = train(cfg, data);
      const auto& pairs = data.test.empty() ? data.val : data.test;
      row.a2t = evaluate(trained.best.params, pairs, {Direction::kA2T, std::nullopt});
      row.t2a = evaluate(trained.best.params, pairs, {Direction::kT2A, std::nullopt});
    } catch (const std::exception& e) {
      row.failed = true;
      row.error = e.what();
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

std::string AblationTable::csv() const {
  std::ostringstream out;
  out.precision(6);
  out << std::fixed
      << "axis,value,a2t_r1,a2t_map10,t2a_r1,t2a_map10,status\n";
  for (const auto& r : rows) {
    if (r.failed)
      out << r.axis << "," << r.value << ",,,,,failed\n";
    else
      out << r.axis << "," << r.value << "," << r.a2t.recall1 << ","
          << r.a2t.map10 << "," << r.t2a.recall1 << "," << r.t2a.map10
          << ",ok\n";
  }
  return out.str();
}

}  // namespace acr
