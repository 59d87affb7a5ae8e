#include "acr/io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "acr/errors.hpp"
#include "acr/rng.hpp"

namespace acr {

namespace {

void put_u32(std::ostream& out, std::uint32_t v) {
  char b[4] = {char(v & 0xFF), char((v >> 8) & 0xFF), char((v >> 16) & 0xFF),
               char((v >> 24) & 0xFF)};
  out.write(b, 4);
}

void put_u64(std::ostream& out, std::uint64_t v) {
  put_u32(out, static_cast<std::uint32_t>(v & 0xFFFFFFFFull));
  put_u32(out, static_cast<std::uint32_t>(v >> 32));
}

void put_f32(std::ostream& out, float f) {
  std::uint32_t bits;
  std::memcpy(&bits, &f, 4);
  put_u32(out, bits);
}

std::uint32_t get_u32(std::istream& in, const char* what) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw TruncatedFile(std::string("truncated while reading ") + what);
  return b[0] | (b[1] << 8) | (b[2] << 16) | (std::uint32_t(b[3]) << 24);
}

std::uint64_t get_u64(std::istream& in, const char* what) {
  const std::uint64_t lo = get_u32(in, what);
  const std::uint64_t hi = get_u32(in, what);
  return lo | (hi << 32);
}

float get_f32(std::istream& in, const char* what) {
  const std::uint32_t bits = get_u32(in, what);
  float f;
  std::memcpy(&f, &bits, 4);
  return f;
}

}  // namespace

void write_embeddings(const std::string& path, const EmbeddingStore& store) {
  if (store.values.size() != store.ids.size() * static_cast<std::size_t>(store.dim))
    throw ConfigError("write_embeddings: value count mismatch");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("write_embeddings: cannot open " + path);
  out.write("AEMB", 4);
  put_u32(out, 1);
  put_u32(out, static_cast<std::uint32_t>(store.ids.size()));
  put_u32(out, static_cast<std::uint32_t>(store.dim));
  for (auto id : store.ids) put_u64(out, id);
  for (float v : store.values) put_f32(out, v);
}

EmbeddingStore read_embeddings(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("read_embeddings: cannot open " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "AEMB", 4) != 0)
    throw DataError("read_embeddings: bad magic in " + path);
  const std::uint32_t version = get_u32(in, "version");
  if (version != 1)
    throw DataError("read_embeddings: unsupported version " +
                    std::to_string(version));
  EmbeddingStore store;
  const std::uint32_t count = get_u32(in, "count");
  store.dim = static_cast<int>(get_u32(in, "dim"));
  store.ids.resize(count);
  for (auto& id : store.ids) id = get_u64(in, "ids");
  store.values.resize(static_cast<std::size_t>(count) * store.dim);
  for (auto& v : store.values) v = get_f32(in, "payload");
  return store;
}

EmbeddingStore to_store(const std::vector<std::uint64_t>& ids,
                        const Tensor2D& vectors) {
  EmbeddingStore s;
  s.ids = ids;
  s.dim = vectors.cols;
  s.values.reserve(vectors.data.size());
  for (double x : vectors.data) s.values.push_back(static_cast<float>(x));
  return s;
}

Tensor2D store_matrix(const EmbeddingStore& store) {
  Tensor2D m(static_cast<int>(store.ids.size()), store.dim);
  for (std::size_t i = 0; i < store.values.size(); ++i)
    m.data[i] = store.values[i];
  return m;
}

RefinerConfig TrainConfig::refiner() const {
  RefinerConfig cfg;
  cfg.d_model = d_model;
  cfg.d_shared = d_shared;
  cfg.n_heads = n_heads;
  cfg.depth = depth;
  cfg.dropout_rate = dropout_rate;
  cfg.pre_norm = pre_norm;
  if (projection == "linear") cfg.projection = ProjectionType::kLinear;
  else if (projection == "transformer") cfg.projection = ProjectionType::kTransformer;
  else throw ConfigError("projection must be transformer|linear");
  if (audio_pooling == "mean") cfg.audio_pooling = AudioPooling::kMean;
  else if (audio_pooling == "attention") cfg.audio_pooling = AudioPooling::kAttention;
  else throw ConfigError("audio_pooling must be attention|mean");
  cfg.replace_prob = replace_prob;
  return cfg;
}

TrainConfig parse_config_text(const std::string& text) {
  TrainConfig cfg;
  double w1 = cfg.weights.directional, w2 = cfg.weights.l1,
         w3 = cfg.weights.contrastive;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    auto trim = [](std::string s) {
      const auto a = s.find_first_not_of(" \t\r");
      if (a == std::string::npos) return std::string();
      const auto b = s.find_last_not_of(" \t\r");
      return s.substr(a, b - a + 1);
    };
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) +
                        ": expected key=value");
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    try {
      if (key == "learning_rate") cfg.learning_rate = std::stod(val);
      else if (key == "batch_size") cfg.batch_size = std::stoi(val);
      else if (key == "max_epochs") cfg.max_epochs = std::stoi(val);
      else if (key == "early_stop_patience") cfg.early_stop_patience = std::stoi(val);
      else if (key == "lambda_directional") w1 = std::stod(val);
      else if (key == "lambda_l1") w2 = std::stod(val);
      else if (key == "lambda_contrastive") w3 = std::stod(val);
      else if (key == "temperature") cfg.temperature = std::stod(val);
      else if (key == "replace_prob") cfg.replace_prob = std::stod(val);
      else if (key == "seed") cfg.seed = std::stoull(val);
      else if (key == "d_model") cfg.d_model = std::stoi(val);
      else if (key == "d_shared") cfg.d_shared = std::stoi(val);
      else if (key == "n_heads") cfg.n_heads = std::stoi(val);
      else if (key == "depth") cfg.depth = std::stoi(val);
      else if (key == "dropout_rate") cfg.dropout_rate = std::stod(val);
      else if (key == "pre_norm") cfg.pre_norm = val == "true" || val == "1";
      else if (key == "projection") cfg.projection = val;
      else if (key == "audio_pooling") cfg.audio_pooling = val;
      else
        throw ConfigError("config line " + std::to_string(lineno) +
                          ": unknown key '" + key + "'");
    } catch (const std::invalid_argument&) {
      throw ConfigError("config line " + std::to_string(lineno) +
                        ": bad value for '" + key + "'");
    }
  }
  cfg.weights = validate_weights(w1, w2, w3);
  if (cfg.learning_rate < 0.0) throw ConfigError("learning_rate must be >= 0");
  if (cfg.batch_size < 4 || cfg.batch_size > 128)
    throw ConfigError("batch_size must be in [4, 128]");
  if (cfg.max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
  if (cfg.temperature <= 0.0) throw ConfigError("temperature must be > 0");
  if (cfg.replace_prob < 0.0 || cfg.replace_prob > 1.0)
    throw ConfigError("replace_prob must be in [0, 1]");
  if (cfg.dropout_rate < 0.0 || cfg.dropout_rate >= 1.0)
    throw ConfigError("dropout_rate must be in [0, 1)");
  if (cfg.projection != "transformer" && cfg.projection != "linear")
    throw ConfigError("projection must be transformer|linear");
  if (cfg.audio_pooling != "attention" && cfg.audio_pooling != "mean")
    throw ConfigError("audio_pooling must be attention|mean");
  return cfg;
}

TrainConfig read_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("read_config: cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

std::string serialize_config(const TrainConfig& cfg) {
  std::ostringstream out;
  out.precision(17);
  out << "learning_rate = " << cfg.learning_rate << "\n"
      << "batch_size = " << cfg.batch_size << "\n"
      << "max_epochs = " << cfg.max_epochs << "\n"
      << "early_stop_patience = " << cfg.early_stop_patience << "\n"
      << "lambda_directional = " << cfg.weights.directional << "\n"
      << "lambda_l1 = " << cfg.weights.l1 << "\n"
      << "lambda_contrastive = " << cfg.weights.contrastive << "\n"
      << "temperature = " << cfg.temperature << "\n"
      << "replace_prob = " << cfg.replace_prob << "\n"
      << "seed = " << cfg.seed << "\n"
      << "d_model = " << cfg.d_model << "\n"
      << "d_shared = " << cfg.d_shared << "\n"
      << "n_heads = " << cfg.n_heads << "\n"
      << "depth = " << cfg.depth << "\n"
      << "dropout_rate = " << cfg.dropout_rate << "\n"
      << "pre_norm = " << (cfg.pre_norm ? "true" : "false") << "\n"
      << "projection = " << cfg.projection << "\n"
      << "audio_pooling = " << cfg.audio_pooling << "\n";
  return out.str();
}

std::uint64_t config_hash(const TrainConfig& cfg) {
  return fnv1a(serialize_config(cfg));
}

namespace {

void put_tensor(std::ostream& out, const Tensor2D& t) {
  put_u32(out, static_cast<std::uint32_t>(t.rows));
  put_u32(out, static_cast<std::uint32_t>(t.cols));
  for (double x : t.data) put_f32(out, static_cast<float>(x));
}

Tensor2D get_tensor(std::istream& in) {
  const int rows = static_cast<int>(get_u32(in, "tensor rows"));
  const int cols = static_cast<int>(get_u32(in, "tensor cols"));
  Tensor2D t(rows, cols);
  for (auto& x : t.data) x = get_f32(in, "tensor payload");
  return t;
}

}  // namespace

void write_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("write_checkpoint: cannot open " + path);
  out.write("ACKP", 4);
  put_u32(out, 1);
  put_u64(out, config_hash(ckpt.config));
  put_u64(out, static_cast<std::uint64_t>(ckpt.step));
  const std::string cfg = serialize_config(ckpt.config);
  put_u32(out, static_cast<std::uint32_t>(cfg.size()));
  out.write(cfg.data(), static_cast<std::streamsize>(cfg.size()));
  const auto tensors = ckpt.params.tensors();
  put_u32(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& t : tensors) put_tensor(out, *t);
  for (const auto& t : ckpt.adam_m) put_tensor(out, t);
  for (const auto& t : ckpt.adam_v) put_tensor(out, t);
}

Checkpoint read_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("read_checkpoint: cannot open " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "ACKP", 4) != 0)
    throw DataError("read_checkpoint: bad magic in " + path);
  if (get_u32(in, "version") != 1)
    throw DataError("read_checkpoint: unsupported version");
  const std::uint64_t stored_hash = get_u64(in, "config hash");
  Checkpoint ckpt;
  ckpt.step = static_cast<std::int64_t>(get_u64(in, "step"));
  const std::uint32_t cfg_len = get_u32(in, "config length");
  std::string cfg_text(cfg_len, '\0');
  in.read(cfg_text.data(), cfg_len);
  if (!in) throw TruncatedFile("read_checkpoint: truncated config");
  ckpt.config = parse_config_text(cfg_text);
  if (config_hash(ckpt.config) != stored_hash)
    throw DataError("read_checkpoint: config hash mismatch");
  ckpt.params = init_refiner(ckpt.config.refiner(), ckpt.config.seed);
  auto tensors = ckpt.params.tensors();
  const std::uint32_t count = get_u32(in, "tensor count");
  if (count != tensors.size())
    throw DataError("read_checkpoint: tensor count mismatch");
  for (auto& t : tensors) {
    Tensor2D loaded = get_tensor(in);
    if (loaded.rows != t->rows || loaded.cols != t->cols)
      throw DataError("read_checkpoint: tensor shape mismatch");
    t->data = std::move(loaded.data);
  }
  for (std::uint32_t i = 0; i < count; ++i) ckpt.adam_m.push_back(get_tensor(in));
  for (std::uint32_t i = 0; i < count; ++i) ckpt.adam_v.push_back(get_tensor(in));
  return ckpt;
}

std::uint64_t parse_id(const std::string& s) {
  if (!s.empty() && std::all_of(s.begin(), s.end(), [](unsigned char c) {
        return std::isdigit(c);
      }))
    return std::stoull(s);
  return fnv1a(s);
}

std::vector<ManifestEntry> read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("read_manifest: cannot open " + path);
  std::vector<ManifestEntry> entries;
  std::set<std::uint64_t> seen;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw DataError("manifest line " + std::to_string(lineno) + ": " + e.what());
    }
    ManifestEntry e;
    if (!j.contains("id")) throw DataError("manifest line " + std::to_string(lineno) + ": missing id");
    e.id = j["id"].is_number() ? j["id"].get<std::uint64_t>()
                               : parse_id(j["id"].get<std::string>());
    if (!seen.insert(e.id).second)
      throw DataError("manifest line " + std::to_string(lineno) + ": duplicate id");
    if (!j.contains("audio"))
      throw DataError("manifest line " + std::to_string(lineno) + ": missing audio");
    if (j["audio"].is_string()) e.audio_path = j["audio"].get<std::string>();
    else if (j["audio"].is_object() && j["audio"].contains("embedding"))
      e.embedding_key = j["audio"]["embedding"].get<std::string>();
    else
      throw DataError("manifest line " + std::to_string(lineno) + ": bad audio field");
    if (j.contains("captions"))
      for (const auto& c : j["captions"]) e.captions.push_back(c.get<std::string>());
    if (e.captions.empty())
      throw DataError("manifest line " + std::to_string(lineno) + ": no captions");
    entries.push_back(std::move(e));
  }
  return entries;
}

}  // namespace acr
