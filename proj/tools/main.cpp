// Command-line surface for the audio-text retrieval toolkit.
// Exit codes: 0 success, 1 usage, 2 data error, 3 numeric failure.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "acr/audio.hpp"
#include "acr/errors.hpp"
#include "acr/io.hpp"
#include "acr/retrieval.hpp"
#include "acr/textsearch.hpp"
#include "acr/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

acr::Dataset load_dataset(const std::string& data, int d_model,
                          std::uint64_t seed) {
  if (data.rfind("synthetic:", 0) == 0)
    return acr::generate_synthetic(
        acr::parse_synthetic_spec(data.substr(10)), d_model);
  return acr::load_manifest_dataset(data, d_model, seed);
}

void print_metric_table(const std::string& model, const std::string& dataset,
                        const std::string& modality, const acr::MetricReport& m,
                        bool csv) {
  if (csv) {
    std::printf("model,dataset,modality,r1,r5,r10,map10\n");
    std::printf("%s,%s,%s,%.6f,%.6f,%.6f,%.6f\n", model.c_str(),
                dataset.c_str(), modality.c_str(), m.recall1, m.recall5,
                m.recall10, m.map10);
    return;
  }
  std::printf("%-12s %-16s %-8s %6s %6s %6s %8s\n", "Model", "Dataset",
              "Modality", "R@1", "R@5", "R@10", "mAP@10");
  std::printf("%-12s %-16s %-8s %6.3f %6.3f %6.3f %8.3f\n", model.c_str(),
              dataset.c_str(), modality.c_str(), m.recall1, m.recall5,
              m.recall10, m.map10);
}

std::vector<acr::TextDoc> read_jsonl_docs(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw acr::DataError("cannot open " + path);
  std::vector<acr::TextDoc> docs;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw acr::DataError(path + " line " + std::to_string(lineno) + ": " +
                           e.what());
    }
    const std::uint64_t id =
        j["id"].is_number() ? j["id"].get<std::uint64_t>()
                            : acr::parse_id(j["id"].get<std::string>());
    // Accept either a flat {"text": ...} record or a manifest-style
    // {"captions": [...]} entry (joined in order).
    std::string text;
    if (j.contains("text") && j["text"].is_string()) {
      text = j["text"].get<std::string>();
    } else if (j.contains("captions") && j["captions"].is_array()) {
      for (const auto& c : j["captions"]) {
        if (!text.empty()) text += ' ';
        text += c.get<std::string>();
      }
    } else {
      throw acr::DataError(path + " line " + std::to_string(lineno) +
                           ": expected a text or captions field");
    }
    docs.push_back(acr::make_doc(id, text));
  }
  return docs;
}

int run(int argc, char** argv) {
  CLI::App app{"Audio-text retrieval toolkit"};
  app.require_subcommand(1);

  // preprocess
  auto* preprocess = app.add_subcommand(
      "preprocess", "Silence-remove, chunk, and encode WAV files");
  std::string pp_in, pp_out;
  double pp_chunk_len = 10.0, pp_gap = 1.0;
  std::optional<double> pp_snr;
  int pp_dmodel = 64;
  std::uint64_t pp_seed = 0;
  preprocess->add_option("--in", pp_in, "WAV file or directory")->required();
  preprocess->add_option("--out", pp_out, "Output embedding container")->required();
  preprocess->add_option("--chunk-len", pp_chunk_len, "Chunk length (s)");
  preprocess->add_option("--silence-gap", pp_gap, "Silence gap threshold (s)");
  preprocess->add_option("--snr", pp_snr, "Mix white noise at this SNR (dB)");
  preprocess->add_option("--d-model", pp_dmodel, "Encoder output dimension");
  preprocess->add_option("--seed", pp_seed, "Noise seed");

  // train
  auto* train_cmd = app.add_subcommand("train", "Train the refinement module");
  std::string tr_config, tr_data, tr_out, tr_log;
  train_cmd->add_option("--config", tr_config, "Config file (key=value)")->required();
  train_cmd->add_option("--data", tr_data, "Manifest path or synthetic:spec")->required();
  train_cmd->add_option("--out", tr_out, "Checkpoint output path")->required();
  train_cmd->add_option("--log", tr_log, "Training log CSV path");

  // index
  auto* index_cmd = app.add_subcommand("index", "Embed a manifest into a container");
  std::string ix_ckpt, ix_data, ix_modality, ix_out;
  index_cmd->add_option("--ckpt", ix_ckpt)->required();
  index_cmd->add_option("--data", ix_data)->required();
  index_cmd->add_option("--modality", ix_modality, "a or t")->required();
  index_cmd->add_option("--out", ix_out)->required();

  // search
  auto* search_cmd = app.add_subcommand("search", "Query an embedding index");
  std::string se_index, se_query, se_ckpt;
  int se_k = 10;
  search_cmd->add_option("--index", se_index)->required();
  search_cmd->add_option("--query", se_query, "Text, or a .wav path")->required();
  search_cmd->add_option("--ckpt", se_ckpt, "Checkpoint for embedding the query")->required();
  search_cmd->add_option("--k", se_k);

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate retrieval metrics");
  std::string ev_ckpt, ev_data, ev_direction = "a2t", ev_significance,
              ev_report_out;
  std::optional<double> ev_snr;
  bool ev_dump_attention = false, ev_csv = false;
  std::uint64_t ev_seed = 0;
  eval_cmd->add_option("--ckpt", ev_ckpt)->required();
  eval_cmd->add_option("--data", ev_data)->required();
  eval_cmd->add_option("--direction", ev_direction, "a2t or t2a");
  eval_cmd->add_option("--snr", ev_snr, "Noisy evaluation SNR (dB)");
  eval_cmd->add_option("--seed", ev_seed, "Noise seed");
  eval_cmd->add_flag("--dump-attention", ev_dump_attention,
                     "Print per-clip pooling weights CSV");
  eval_cmd->add_option("--significance", ev_significance,
                       "Baseline per-query AP report for a Wilcoxon test");
  eval_cmd->add_option("--report-out", ev_report_out,
                       "Write per-query AP report CSV");
  eval_cmd->add_flag("--csv", ev_csv, "Emit the metric table as CSV");

  // ablate
  auto* ablate_cmd = app.add_subcommand("ablate", "Grid ablation runs");
  std::string ab_config, ab_axis, ab_grid, ab_data, ab_out;
  ablate_cmd->add_option("--config", ab_config)->required();
  ablate_cmd->add_option("--axis", ab_axis,
                         "loss-weights|batch-size|projection-type|loss-type")
      ->required();
  ablate_cmd->add_option("--grid", ab_grid, "Comma-separated grid values");
  ablate_cmd->add_option("--data", ab_data)->required();
  ablate_cmd->add_option("--out", ab_out, "CSV output path");

  // baseline
  auto* baseline_cmd = app.add_subcommand("baseline", "Caption retrieval baselines");
  std::string bl_method, bl_captions, bl_queries;
  int bl_k = 10;
  baseline_cmd->add_option("--method", bl_method, "lexical|bm25|semantic")->required();
  baseline_cmd->add_option("--captions", bl_captions, "Caption corpus JSONL")->required();
  baseline_cmd->add_option("--queries", bl_queries, "Query JSONL")->required();
  baseline_cmd->add_option("--k", bl_k);

  CLI11_PARSE(app, argc, argv);

  if (*preprocess) {
    std::vector<fs::path> files;
    if (fs::is_directory(pp_in)) {
      for (const auto& e : fs::directory_iterator(pp_in))
        if (e.path().extension() == ".wav") files.push_back(e.path());
      std::sort(files.begin(), files.end());
    } else {
      files.push_back(pp_in);
    }
    if (files.empty()) throw acr::DataError("preprocess: no WAV files in " + pp_in);
    const auto encoder = acr::make_toy_encoder(acr::kEncoderSeed, pp_dmodel);
    acr::PreprocessConfig cfg;
    cfg.chunk_len_s = pp_chunk_len;
    cfg.silence.min_gap_s = pp_gap;
    acr::EmbeddingStore store;
    store.dim = pp_dmodel;
    for (const auto& f : files) {
      auto w = acr::read_wav(f.string());
      if (pp_snr) {
        const auto noise =
            acr::white_noise(w.samples.size(), w.sample_rate, pp_seed);
        w = acr::mix_noise(w, noise, {*pp_snr, pp_seed});
      }
      const auto seq = acr::encode_clip(w, encoder, cfg);
      const std::uint64_t base = acr::fnv1a(f.filename().string());
      for (int i = 0; i < seq->rows; ++i) {
        store.ids.push_back(base + static_cast<std::uint64_t>(i));
        for (int j = 0; j < seq->cols; ++j)
          store.values.push_back(static_cast<float>(seq->at(i, j)));
      }
      std::cerr << f.filename().string() << ": " << seq->rows << " chunks\n";
    }
    acr::write_embeddings(pp_out, store);
    return 0;
  }

  if (*train_cmd) {
    const auto config = acr::read_config(tr_config);
    const auto data = load_dataset(tr_data, config.d_model, config.seed);
    const auto result = acr::train(config, data);
    acr::write_checkpoint(tr_out, result.best);
    if (!tr_log.empty()) {
      std::ofstream log(tr_log);
      log << result.log_csv;
    }
    std::printf("best_epoch=%d best_val_map10=%.6f steps=%lld\n",
                result.best_epoch, result.best_val_map,
                static_cast<long long>(result.best.step));
    return 0;
  }

  if (*index_cmd) {
    const auto ckpt = acr::read_checkpoint(ix_ckpt);
    const auto data = load_dataset(ix_data, ckpt.config.d_model, ckpt.config.seed);
    // Tiny manifests alias splits; index each example once.
    std::vector<const acr::PairExample*> all;
    std::set<std::uint64_t> seen;
    for (const auto* split : {&data.train, &data.val, &data.test})
      for (const auto& ex : *split)
        if (seen.insert(ex.audio_id).second) all.push_back(&ex);
    const bool audio = ix_modality == "a";
    if (!audio && ix_modality != "t")
      throw acr::UsageError("index: --modality must be a or t");
    acr::EmbeddingStore store;
    store.dim = ckpt.config.d_shared;
    for (const auto* ex : all) {
      const auto r = acr::embed_single(audio ? ex->audio_seq : ex->text_seq,
                                       audio ? acr::Modality::kAudio
                                             : acr::Modality::kText,
                                       ckpt.params);
      store.ids.push_back(audio ? ex->audio_id : ex->text_id);
      for (int j = 0; j < ckpt.config.d_shared; ++j)
        store.values.push_back(static_cast<float>(r.vec->at(0, j)));
    }
    acr::write_embeddings(ix_out, store);
    return 0;
  }

  if (*search_cmd) {
    const auto ckpt = acr::read_checkpoint(se_ckpt);
    const auto store = acr::read_embeddings(se_index);
    auto index = acr::build_index(store.ids, acr::store_matrix(store), "");
    acr::TensorPtr seq;
    acr::Modality modality;
    if (se_query.size() > 4 &&
        se_query.compare(se_query.size() - 4, 4, ".wav") == 0) {
      const auto w = acr::read_wav(se_query);
      seq = acr::encode_clip(
          w, acr::make_toy_encoder(acr::kEncoderSeed, ckpt.config.d_model), {});
      modality = acr::Modality::kAudio;
    } else {
      const auto tokens = acr::tokenize(se_query, false);
      if (tokens.empty()) throw acr::EmptyQuery("search: empty query");
      seq = acr::tensor(static_cast<int>(tokens.size()), ckpt.config.d_model);
      for (int i = 0; i < seq->rows; ++i) {
        acr::CounterRng rng(acr::kEncoderSeed ^ acr::fnv1a(tokens[i]), 0x7013);
        for (int j = 0; j < seq->cols; ++j) seq->at(i, j) = rng.normal();
      }
      modality = acr::Modality::kText;
    }
    const auto vec = acr::embed_single(seq, modality, ckpt.params);
    std::vector<double> q(vec.vec->data);
    std::printf("rank,id,score\n");
    int rank = 1;
    for (const auto& s : acr::search(index, q, se_k))
      std::printf("%d,%llu,%.6f\n", rank++,
                  static_cast<unsigned long long>(s.id), s.score);
    return 0;
  }

  if (*eval_cmd) {
    const auto ckpt = acr::read_checkpoint(ev_ckpt);
    const auto data = load_dataset(ev_data, ckpt.config.d_model, ckpt.config.seed);
    const auto& pairs = data.test.empty() ? data.train : data.test;
    acr::EvalOptions opts;
    if (ev_direction == "a2t") opts.direction = acr::Direction::kA2T;
    else if (ev_direction == "t2a") opts.direction = acr::Direction::kT2A;
    else throw acr::UsageError("eval: --direction must be a2t or t2a");
    if (ev_snr) opts.noise = acr::SnrSpec{*ev_snr, ev_seed};
    const auto report = acr::evaluate(ckpt.params, pairs, opts);
    print_metric_table("ours", ev_data, ev_direction, report, ev_csv);
    if (ev_dump_attention) {
      std::printf("clip_id,chunk_index,weight\n");
      for (const auto& d : acr::dump_attention(ckpt.params, pairs))
        for (std::size_t i = 0; i < d.alpha.size(); ++i)
          std::printf("%llu,%zu,%.6f\n",
                      static_cast<unsigned long long>(d.clip_id), i, d.alpha[i]);
    }
    if (!ev_report_out.empty()) {
      std::ofstream out(ev_report_out);
      out << "query_index,ap10\n";
      for (std::size_t i = 0; i < report.per_query_ap.size(); ++i)
        out << i << "," << report.per_query_ap[i] << "\n";
    }
    if (!ev_significance.empty()) {
      std::ifstream in(ev_significance);
      if (!in) throw acr::DataError("eval: cannot open " + ev_significance);
      std::vector<double> baseline;
      std::string line;
      std::getline(in, line);  // header
      while (std::getline(in, line)) {
        const auto comma = line.find(',');
        if (comma == std::string::npos) continue;
        baseline.push_back(std::stod(line.substr(comma + 1)));
      }
      if (baseline.size() != report.per_query_ap.size())
        throw acr::DataError("eval: baseline report has a different query count");
      const auto w = acr::wilcoxon_signed_rank(report.per_query_ap, baseline);
      std::printf("wilcoxon: W=%.2f p=%.6f n=%d method=%s\n", w.statistic,
                  w.p_value, w.n_effective, w.method.c_str());
    }
    return 0;
  }

  if (*ablate_cmd) {
    const auto config = acr::read_config(ab_config);
    const auto data = load_dataset(ab_data, config.d_model, config.seed);
    std::vector<std::string> grid;
    if (ab_grid.empty()) {
      grid = acr::default_grid(ab_axis);
    } else {
      std::istringstream in(ab_grid);
      std::string item;
      while (std::getline(in, item, ',')) grid.push_back(item);
    }
    const auto table = acr::ablate(config, data, ab_axis, grid);
    if (ab_out.empty()) {
      std::fputs(table.csv().c_str(), stdout);
    } else {
      std::ofstream out(ab_out);
      out << table.csv();
    }
    return 0;
  }

  if (*baseline_cmd) {
    const auto corpus = read_jsonl_docs(bl_captions);
    const auto queries = read_jsonl_docs(bl_queries);
    std::printf("query_id,rank,doc_id,score\n");
    if (bl_method == "lexical") {
      for (const auto& q : queries) {
        int rank = 1;
        for (const auto& s : acr::lexical_search(q, corpus, bl_k))
          std::printf("%llu,%d,%llu,%.6f\n",
                      static_cast<unsigned long long>(q.id), rank++,
                      static_cast<unsigned long long>(s.id), s.score);
      }
    } else if (bl_method == "bm25") {
      const auto index = acr::build_bm25(corpus);
      for (const auto& q : queries) {
        int rank = 1;
        for (const auto& s : acr::bm25_search(q, index, bl_k))
          std::printf("%llu,%d,%llu,%.6f\n",
                      static_cast<unsigned long long>(q.id), rank++,
                      static_cast<unsigned long long>(s.id), s.score);
      }
    } else if (bl_method == "semantic") {
      const auto embed = acr::make_toy_text_embedder(acr::kEncoderSeed, 64);
      for (const auto& q : queries) {
        int rank = 1;
        for (const auto& s : acr::semantic_search(q.raw, corpus, embed, bl_k))
          std::printf("%llu,%d,%llu,%.6f\n",
                      static_cast<unsigned long long>(q.id), rank++,
                      static_cast<unsigned long long>(s.id), s.score);
      }
    } else {
      throw acr::UsageError("baseline: --method must be lexical|bm25|semantic");
    }
    return 0;
  }

  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const acr::UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const acr::NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 3;
  } catch (const acr::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
