#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "blockcirc/container.hpp"
#include "blockcirc/nn.hpp"
#include "json.hpp"

namespace blockcirc::model {

// Config JSON keys: num_layers, d_model, num_heads, d_k, d_v, d_ffn,
// vocab_size, structure ("encoder_decoder" | "encoder_only"), max_seq_len,
// and optionally positional_encoding (default true) and layer_norm_eps.
nlohmann::json config_to_json(const nn::TransformerConfig& cfg);
nn::TransformerConfig config_from_json(const nlohmann::json& j);
nn::TransformerConfig read_config(const std::filesystem::path& path);

// "micro": 2 layers, d_model 16, 2 heads, d_ffn 64, vocab 32.
// "shallow": 2 layers, d_model 200, 4 heads, d_ffn 800, vocab 33278.
nn::TransformerConfig preset(const std::string& name);

struct LinearShape {
  std::string name;
  std::size_t out;
  std::size_t in;
};

// Every projection and feed-forward weight the config implies, in file order.
std::vector<LinearShape> linear_layers(const nn::TransformerConfig& cfg);

inline constexpr const char* kEmbeddingRecord = "embedding";
inline constexpr const char* kOutputProjectionRecord = "output_projection";

struct GenerateOptions {
  // When > 0, every linear weight is the expansion of a random block-circulant
  // matrix with this block size.
  std::size_t circulant_block = 0;
};

io::WeightContainer generate(const nn::TransformerConfig& cfg, std::uint64_t seed,
                             const GenerateOptions& opts = {});

// Throws ValidationError unless every layer named by the config has exactly
// one record of matching logical shape.
void validate_bundle(const nn::TransformerConfig& cfg, const io::WeightContainer& weights);

struct BuildOptions {
  // Dense and BCM records are converted to 16-bit fixed point.
  bool quantize_weights = false;
};

// Embedding defaults to the in-memory "embedding" record.
nn::TransformerModel build_model(const nn::TransformerConfig& cfg,
                                 const io::WeightContainer& weights,
                                 std::shared_ptr<const nn::EmbeddingTable> embedding = nullptr,
                                 const BuildOptions& opts = {});

// Converts one weight payload to its 16-bit counterpart (no-op when already quantized).
LinearWeight::Storage quantize_storage(const LinearWeight::Storage& s);

// ---------------------------------------------------------------------------
// Compression driver

struct CompressOptions {
  std::size_t block_size = 8;
  CompressionMode mode = CompressionMode::kDiagonalMean;
  std::string selector = "all";  // "all" or comma-separated names / globs
  bool quantize = false;
};

struct LayerCompression {
  std::string name;
  std::size_t dense_params;
  std::size_t stored_params;
  double ratio;
};

struct CompressSummary {
  std::vector<LayerCompression> layers;
  std::size_t dense_params = 0;
  std::size_t stored_params = 0;
  double total_ratio = 0.0;
};

// Resolves a selector against the config's linear layers. Throws UsageError
// listing the valid names when a pattern matches nothing or names the embedding.
std::vector<std::string> select_layers(const nn::TransformerConfig& cfg,
                                       const std::string& selector);

CompressSummary compress_weights(const nn::TransformerConfig& cfg, io::WeightContainer& weights,
                                 const CompressOptions& opts);

bool glob_match(std::string_view pattern, std::string_view text);

}  // namespace blockcirc::model
