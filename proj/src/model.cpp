#include "blockcirc/model.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "blockcirc/error.hpp"
#include "blockcirc/rng.hpp"

namespace blockcirc::model {

using nlohmann::json;

json config_to_json(const nn::TransformerConfig& cfg) {
  return {{"num_layers", cfg.num_layers},
          {"d_model", cfg.d_model},
          {"num_heads", cfg.num_heads},
          {"d_k", cfg.d_k},
          {"d_v", cfg.d_v},
          {"d_ffn", cfg.d_ffn},
          {"vocab_size", cfg.vocab_size},
          {"structure", nn::to_string(cfg.structure)},
          {"max_seq_len", cfg.max_seq_len},
          {"positional_encoding", cfg.positional_encoding},
          {"layer_norm_eps", cfg.layer_norm_eps}};
}

nn::TransformerConfig config_from_json(const json& j) {
  nn::TransformerConfig cfg;
  try {
    cfg.num_layers = j.at("num_layers").get<std::size_t>();
    cfg.d_model = j.at("d_model").get<std::size_t>();
    cfg.num_heads = j.at("num_heads").get<std::size_t>();
    cfg.d_k = j.value("d_k", cfg.num_heads ? cfg.d_model / cfg.num_heads : 0);
    cfg.d_v = j.value("d_v", cfg.d_k);
    cfg.d_ffn = j.at("d_ffn").get<std::size_t>();
    cfg.vocab_size = j.at("vocab_size").get<std::size_t>();
    cfg.structure = nn::structure_from_string(j.at("structure").get<std::string>());
    cfg.max_seq_len = j.at("max_seq_len").get<std::size_t>();
    cfg.positional_encoding = j.value("positional_encoding", true);
    cfg.layer_norm_eps = j.value("layer_norm_eps", nn::kLayerNormEps);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed model config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

nn::TransformerConfig read_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

nn::TransformerConfig preset(const std::string& name) {
  nn::TransformerConfig cfg;
  if (name == "micro") {
    cfg.num_layers = 2;
    cfg.d_model = 16;
    cfg.num_heads = 2;
    cfg.d_ffn = 64;
    cfg.vocab_size = 32;
    cfg.max_seq_len = 16;
  } else if (name == "shallow") {
    cfg.num_layers = 2;
    cfg.d_model = 200;
    cfg.num_heads = 4;
    cfg.d_ffn = 800;
    cfg.vocab_size = 33278;  // WikiText-2 vocabulary
    cfg.max_seq_len = 256;
  } else {
    throw UsageError("unknown preset '" + name + "' (expected micro or shallow)");
  }
  cfg.structure = nn::Structure::kEncoderDecoder;
  cfg.d_k = cfg.d_v = cfg.d_model / cfg.num_heads;
  return cfg;
}

namespace {

void append_attention(std::vector<LinearShape>& out, const std::string& p,
                      const nn::TransformerConfig& cfg) {
  const std::size_t qk = cfg.num_heads * cfg.d_k;
  const std::size_t v = cfg.num_heads * cfg.d_v;
  out.push_back({p + ".q", qk, cfg.d_model});
  out.push_back({p + ".k", qk, cfg.d_model});
  out.push_back({p + ".v", v, cfg.d_model});
  out.push_back({p + ".o", cfg.d_model, v});
}

void append_ffn(std::vector<LinearShape>& out, const std::string& p,
                const nn::TransformerConfig& cfg) {
  out.push_back({p + ".w1", cfg.d_ffn, cfg.d_model});
  out.push_back({p + ".w2", cfg.d_model, cfg.d_ffn});
}

std::vector<std::string> norm_names(const nn::TransformerConfig& cfg) {
  std::vector<std::string> out;
  for (std::size_t l = 0; l < cfg.num_layers; ++l) {
    for (int n = 1; n <= 2; ++n) out.push_back("encoder." + std::to_string(l) + ".norm" + std::to_string(n));
  }
  if (cfg.structure == nn::Structure::kEncoderDecoder) {
    for (std::size_t l = 0; l < cfg.num_layers; ++l) {
      for (int n = 1; n <= 3; ++n) out.push_back("decoder." + std::to_string(l) + ".norm" + std::to_string(n));
    }
  }
  return out;
}

Tensor vector_record(const io::WeightContainer& w, const std::string& name, std::size_t len) {
  const auto& rec = w.at(name);
  const Tensor* t = std::get_if<Tensor>(&rec.data);
  if (!t || t->rank() != 2 || t->rows() != 1 || t->cols() != len) {
    throw ValidationError("record '" + name + "' must be a dense 1x" + std::to_string(len) +
                          " vector");
  }
  return Tensor::vector(t->values());
}

std::pair<std::size_t, std::size_t> logical_shape(const LinearWeight::Storage& s) {
  if (const auto* t = std::get_if<Tensor>(&s)) return {t->rows(), t->cols()};
  if (const auto* m = std::get_if<BlockCirculantMatrix>(&s)) return {m->rows(), m->cols()};
  if (const auto* q = std::get_if<QuantizedTensor>(&s)) return {q->shape.at(0), q->shape.at(1)};
  const auto& qb = std::get<QuantizedBcm>(s);
  return {qb.rows, qb.cols};
}

Tensor random_matrix(Rng& rng, std::size_t m, std::size_t n, double scale) {
  Tensor t({m, n});
  for (double& v : t.values()) v = static_cast<float>(rng.uniform(-scale, scale));
  return t;
}

Tensor row_vector(Rng& rng, std::size_t n, double center, double spread) {
  Tensor t({1, n});
  for (double& v : t.values()) v = static_cast<float>(center + rng.uniform(-spread, spread));
  return t;
}

}  // namespace

std::vector<LinearShape> linear_layers(const nn::TransformerConfig& cfg) {
  std::vector<LinearShape> out;
  for (std::size_t l = 0; l < cfg.num_layers; ++l) {
    const std::string p = "encoder." + std::to_string(l);
    append_attention(out, p + ".self_attn", cfg);
    append_ffn(out, p + ".ffn", cfg);
  }
  if (cfg.structure == nn::Structure::kEncoderDecoder) {
    for (std::size_t l = 0; l < cfg.num_layers; ++l) {
      const std::string p = "decoder." + std::to_string(l);
      append_attention(out, p + ".self_attn", cfg);
      append_attention(out, p + ".cross_attn", cfg);
      append_ffn(out, p + ".ffn", cfg);
    }
  }
  return out;
}

io::WeightContainer generate(const nn::TransformerConfig& cfg, std::uint64_t seed,
                             const GenerateOptions& opts) {
  cfg.validate();
  Rng rng(seed);
  io::WeightContainer w;
  w.put(kEmbeddingRecord, random_matrix(rng, cfg.vocab_size, cfg.d_model, 1.0));
  for (const auto& layer : linear_layers(cfg)) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(layer.in));
    if (opts.circulant_block > 0) {
      const std::size_t b = opts.circulant_block;
      const std::size_t count = ((layer.out + b - 1) / b) * ((layer.in + b - 1) / b) * b;
      std::vector<double> index(count);
      for (double& v : index) v = static_cast<float>(rng.uniform(-scale, scale));
      w.put(layer.name, BlockCirculantMatrix(layer.out, layer.in, b, std::move(index)).expand());
    } else {
      w.put(layer.name, random_matrix(rng, layer.out, layer.in, scale));
    }
    w.put(layer.name + ".bias", row_vector(rng, layer.out, 0.0, 0.1));
  }
  for (const auto& norm : norm_names(cfg)) {
    w.put(norm + ".gain", row_vector(rng, cfg.d_model, 1.0, 0.1));
    w.put(norm + ".bias", row_vector(rng, cfg.d_model, 0.0, 0.1));
  }
  return w;
}

void validate_bundle(const nn::TransformerConfig& cfg, const io::WeightContainer& weights) {
  cfg.validate();
  const auto& emb = weights.at(kEmbeddingRecord);
  const Tensor* table = std::get_if<Tensor>(&emb.data);
  if (!table || table->rows() != cfg.vocab_size || table->cols() != cfg.d_model) {
    throw ValidationError("embedding must be a dense " + std::to_string(cfg.vocab_size) + "x" +
                          std::to_string(cfg.d_model) + " record");
  }
  for (const auto& layer : linear_layers(cfg)) {
    const auto [m, n] = logical_shape(weights.at(layer.name).data);
    if (m != layer.out || n != layer.in) {
      throw ValidationError("record '" + layer.name + "' is " + std::to_string(m) + "x" +
                            std::to_string(n) + ", config expects " + std::to_string(layer.out) +
                            "x" + std::to_string(layer.in));
    }
    if (weights.find(layer.name + ".bias")) vector_record(weights, layer.name + ".bias", layer.out);
  }
  for (const auto& norm : norm_names(cfg)) {
    vector_record(weights, norm + ".gain", cfg.d_model);
    vector_record(weights, norm + ".bias", cfg.d_model);
  }
}

LinearWeight::Storage quantize_storage(const LinearWeight::Storage& s) {
  if (const auto* t = std::get_if<Tensor>(&s)) return quantize(*t, choose_format(*t));
  if (const auto* m = std::get_if<BlockCirculantMatrix>(&s)) return quantize(*m);
  return s;
}

namespace {

LinearWeight load_linear(const io::WeightContainer& w, const std::string& name,
                         std::size_t out, const BuildOptions& opts) {
  LinearWeight::Storage storage = w.at(name).data;
  if (opts.quantize_weights) storage = quantize_storage(storage);
  std::optional<Tensor> bias;
  if (w.find(name + ".bias")) bias = vector_record(w, name + ".bias", out);
  return LinearWeight(std::move(storage), std::move(bias));
}

nn::AttentionWeights load_attention(const io::WeightContainer& w, const std::string& p,
                                    const nn::TransformerConfig& cfg, const BuildOptions& opts) {
  const std::size_t qk = cfg.num_heads * cfg.d_k;
  const std::size_t v = cfg.num_heads * cfg.d_v;
  return {load_linear(w, p + ".q", qk, opts), load_linear(w, p + ".k", qk, opts),
          load_linear(w, p + ".v", v, opts), load_linear(w, p + ".o", cfg.d_model, opts)};
}

nn::LayerNormWeights load_norm(const io::WeightContainer& w, const std::string& p,
                               std::size_t d) {
  return {vector_record(w, p + ".gain", d), vector_record(w, p + ".bias", d)};
}

}  // namespace

nn::TransformerModel build_model(const nn::TransformerConfig& cfg,
                                 const io::WeightContainer& weights,
                                 std::shared_ptr<const nn::EmbeddingTable> embedding,
                                 const BuildOptions& opts) {
  validate_bundle(cfg, weights);
  nn::TransformerModel model;
  model.config = cfg;
  if (!embedding) {
    embedding = std::make_shared<nn::DenseEmbedding>(
        std::get<Tensor>(weights.at(kEmbeddingRecord).data));
  }
  model.embedding = std::move(embedding);
  const std::size_t d = cfg.d_model;
  for (std::size_t l = 0; l < cfg.num_layers; ++l) {
    const std::string p = "encoder." + std::to_string(l);
    model.encoder.push_back({load_attention(weights, p + ".self_attn", cfg, opts),
                             load_norm(weights, p + ".norm1", d),
                             load_linear(weights, p + ".ffn.w1", cfg.d_ffn, opts),
                             load_linear(weights, p + ".ffn.w2", d, opts),
                             load_norm(weights, p + ".norm2", d)});
  }
  if (cfg.structure == nn::Structure::kEncoderDecoder) {
    for (std::size_t l = 0; l < cfg.num_layers; ++l) {
      const std::string p = "decoder." + std::to_string(l);
      model.decoder.push_back({load_attention(weights, p + ".self_attn", cfg, opts),
                               load_norm(weights, p + ".norm1", d),
                               load_attention(weights, p + ".cross_attn", cfg, opts),
                               load_norm(weights, p + ".norm2", d),
                               load_linear(weights, p + ".ffn.w1", cfg.d_ffn, opts),
                               load_linear(weights, p + ".ffn.w2", d, opts),
                               load_norm(weights, p + ".norm3", d)});
    }
  }
  if (weights.find(kOutputProjectionRecord)) {
    model.output_projection = load_linear(weights, kOutputProjectionRecord, cfg.vocab_size, opts);
    if (model.output_projection->in_features() != d) {
      throw ValidationError("output_projection must have d_model input features");
    }
  }
  return model;
}

bool glob_match(std::string_view pattern, std::string_view text) {
  std::size_t p = 0, t = 0, star = std::string_view::npos, mark = 0;
  while (t < text.size()) {
    if (p < pattern.size() && (pattern[p] == '?' || pattern[p] == text[t])) {
      ++p;
      ++t;
    } else if (p < pattern.size() && pattern[p] == '*') {
      star = p++;
      mark = t;
    } else if (star != std::string_view::npos) {
      p = star + 1;
      t = ++mark;
    } else {
      return false;
    }
  }
  while (p < pattern.size() && pattern[p] == '*') ++p;
  return p == pattern.size();
}

std::vector<std::string> select_layers(const nn::TransformerConfig& cfg,
                                       const std::string& selector) {
  const auto layers = linear_layers(cfg);
  auto valid_names = [&] {
    std::string s;
    for (const auto& l : layers) s += "\n  " + l.name;
    return s;
  };
  if (selector == "all") {
    std::vector<std::string> out;
    for (const auto& l : layers) out.push_back(l.name);
    return out;
  }
  std::set<std::string> chosen;
  std::stringstream ss(selector);
  std::string pattern;
  while (std::getline(ss, pattern, ',')) {
    if (pattern.empty()) continue;
    if (glob_match(pattern, kEmbeddingRecord)) {
      throw UsageError("the embedding table is never compressed; valid layers:" + valid_names());
    }
    bool matched = false;
    for (const auto& l : layers) {
      if (glob_match(pattern, l.name)) {
        chosen.insert(l.name);
        matched = true;
      }
    }
    if (!matched) {
      throw UsageError("layer selector '" + pattern + "' matches no layer; valid layers:" +
                       valid_names());
    }
  }
  if (chosen.empty()) throw UsageError("empty layer selector; valid layers:" + valid_names());
  std::vector<std::string> out;
  for (const auto& l : layers) {
    if (chosen.count(l.name)) out.push_back(l.name);
  }
  return out;
}

CompressSummary compress_weights(const nn::TransformerConfig& cfg, io::WeightContainer& weights,
                                 const CompressOptions& opts) {
  if (opts.block_size == 0) throw UsageError("--block-size must be >= 1");
  validate_bundle(cfg, weights);
  const auto names = select_layers(cfg, opts.selector);
  CompressSummary summary;
  for (const auto& name : names) {
    io::Record* rec = weights.find(name);
    const Tensor* dense = std::get_if<Tensor>(&rec->data);
    if (!dense) {
      throw UsageError("layer '" + name + "' is already stored as " + to_string(rec->kind()) +
                       "; only dense layers can be compressed");
    }
    BlockCirculantMatrix bcm = compress(*dense, opts.block_size, opts.mode);
    const std::size_t dense_params = dense->size();
    const std::size_t stored = bcm.stored_count();
    summary.layers.push_back({name, dense_params, stored,
                              static_cast<double>(dense_params) / static_cast<double>(stored)});
    summary.dense_params += dense_params;
    summary.stored_params += stored;
    if (opts.quantize) {
      rec->data = quantize(bcm);
    } else {
      rec->data = std::move(bcm);
    }
  }
  summary.total_ratio =
      static_cast<double>(summary.dense_params) / static_cast<double>(summary.stored_params);
  return summary;
}

}  // namespace blockcirc::model
