#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "blockcirc/container.hpp"
#include "blockcirc/error.hpp"
#include "blockcirc/model.hpp"
#include "blockcirc/rng.hpp"

namespace blockcirc {
namespace {

namespace fs = std::filesystem;

class TempDir : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("blockcirc_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  fs::path dir_;
};

io::WeightContainer every_kind() {
  Rng rng(81);
  io::WeightContainer c;
  Tensor dense({3, 5});
  for (double& v : dense.values()) v = static_cast<float>(rng.uniform(-1, 1));
  std::vector<double> p(2 * 2 * 4);
  for (double& v : p) v = static_cast<float>(rng.uniform(-1, 1));
  BlockCirculantMatrix bcm(7, 6, 4, p, CompressionMode::kFirstRow);
  c.put("dense", dense);
  c.put("bcm", bcm);
  c.put("qdense", quantize(dense, FixedPointFormat(12)));
  c.put("qbcm", quantize(bcm));
  return c;
}

TEST(Container, ByteIdenticalRewrite) {
  const auto bytes = io::serialize(every_kind());
  const auto again = io::serialize(io::parse(bytes));
  EXPECT_EQ(bytes, again);
}

TEST(Container, HeaderLayout) {
  const auto bytes = io::serialize(every_kind());
  ASSERT_GE(bytes.size(), 10u);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "FTRW");
  EXPECT_EQ(bytes[4] | (bytes[5] << 8), 1);
  EXPECT_EQ(bytes[6], 4);
}

TEST(Container, RecordsPreserved) {
  const auto original = every_kind();
  const auto parsed = io::parse(io::serialize(original));
  ASSERT_EQ(parsed.records().size(), 4u);
  EXPECT_EQ(std::get<Tensor>(parsed.at("dense").data), std::get<Tensor>(original.at("dense").data));
  const auto& b = std::get<BlockCirculantMatrix>(parsed.at("bcm").data);
  EXPECT_EQ(b.mode(), CompressionMode::kFirstRow);
  EXPECT_EQ(b.pad_rows(), 1u);
  EXPECT_EQ(parsed.at("qbcm").kind(), WeightKind::kQuantBcm);
  EXPECT_EQ(std::get<QuantizedTensor>(parsed.at("qdense").data),
            std::get<QuantizedTensor>(original.at("qdense").data));
}

TEST(Container, RejectsCorruption) {
  auto bytes = io::serialize(every_kind());
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_THROW(io::parse(bad_magic), ValidationError);
  auto truncated = bytes;
  truncated.pop_back();
  EXPECT_THROW(io::parse(truncated), ValidationError);
  auto trailing = bytes;
  trailing.push_back(0);
  EXPECT_THROW(io::parse(trailing), ValidationError);
}

TEST_F(TempDir, FileRoundTripAndTable) {
  const auto path = dir_ / "w.ftrw";
  io::write_container(path, every_kind());
  const auto table = io::read_table(path);
  ASSERT_EQ(table.size(), 4u);
  EXPECT_EQ(table[1].name, "bcm");
  EXPECT_EQ(table[1].kind, WeightKind::kBcm);
  for (std::size_t i = 1; i < table.size(); ++i) {
    EXPECT_EQ(table[i].offset, table[i - 1].offset + table[i - 1].length);
  }
  const auto bytes = io::read_file(path);
  io::write_container(dir_ / "copy.ftrw", io::read_container(path));
  EXPECT_EQ(io::read_file(dir_ / "copy.ftrw"), bytes);
  EXPECT_THROW(io::read_container(dir_ / "missing.ftrw"), IoError);
}

TEST_F(TempDir, FileEmbeddingMatchesTable) {
  const auto cfg = model::preset("micro");
  const auto w = model::generate(cfg, 5);
  const auto path = dir_ / "m.ftrw";
  io::write_container(path, w);
  io::FileEmbedding emb(path, model::kEmbeddingRecord);
  EXPECT_EQ(emb.vocab_size(), cfg.vocab_size);
  EXPECT_EQ(emb.dim(), cfg.d_model);
  const auto& table = std::get<Tensor>(w.at("embedding").data);
  std::vector<double> row(cfg.d_model);
  emb.lookup(17, row);
  for (std::size_t c = 0; c < cfg.d_model; ++c) EXPECT_EQ(row[c], table.at(17, c));
  EXPECT_THROW(emb.lookup(cfg.vocab_size, row), DomainError);
}

TEST(Model, GenerateIsDeterministic) {
  const auto cfg = model::preset("micro");
  EXPECT_EQ(io::serialize(model::generate(cfg, 3)), io::serialize(model::generate(cfg, 3)));
  EXPECT_NE(io::serialize(model::generate(cfg, 3)), io::serialize(model::generate(cfg, 4)));
}

TEST(Model, ConfigJsonRoundTrip) {
  for (const char* name : {"micro", "shallow"}) {
    const auto cfg = model::preset(name);
    EXPECT_EQ(model::config_from_json(model::config_to_json(cfg)), cfg);
  }
  EXPECT_THROW(model::config_from_json(nlohmann::json::parse(R"({"d_model": 4})")),
               ValidationError);
  EXPECT_THROW(model::preset("deep"), UsageError);
}

TEST(Model, ValidateBundle) {
  const auto cfg = model::preset("micro");
  auto w = model::generate(cfg, 1);
  EXPECT_NO_THROW(model::validate_bundle(cfg, w));
  w.put("encoder.0.ffn.w1", Tensor::zeros({3, 3}));
  EXPECT_THROW(model::validate_bundle(cfg, w), ValidationError);
  auto missing = model::generate(cfg, 1);
  missing.records().erase(missing.records().begin() + 3);
  EXPECT_THROW(model::validate_bundle(cfg, missing), ValidationError);
}

TEST(Model, SelectLayers) {
  const auto cfg = model::preset("micro");
  EXPECT_EQ(model::select_layers(cfg, "all").size(), model::linear_layers(cfg).size());
  EXPECT_EQ(model::select_layers(cfg, "encoder.*.ffn.*").size(), 4u);
  EXPECT_EQ(model::select_layers(cfg, "decoder.0.cross_attn.q,encoder.1.self_attn.o").size(), 2u);
  try {
    model::select_layers(cfg, "encoder.9.*");
    FAIL();
  } catch (const UsageError& e) {
    EXPECT_NE(std::string(e.what()).find("encoder.0.self_attn.q"), std::string::npos);
  }
  EXPECT_THROW(model::select_layers(cfg, "embedding"), UsageError);
}

TEST(Model, GlobMatch) {
  EXPECT_TRUE(model::glob_match("a*c", "abbbc"));
  EXPECT_TRUE(model::glob_match("a?c", "abc"));
  EXPECT_FALSE(model::glob_match("a?c", "ac"));
  EXPECT_TRUE(model::glob_match("*", ""));
}

TEST(Model, CompressBlock16GivesRatio16) {
  nn::TransformerConfig cfg = model::preset("micro");
  cfg.d_model = 32;
  cfg.d_k = cfg.d_v = 16;
  auto w = model::generate(cfg, 2);
  model::CompressOptions opts;
  opts.block_size = 16;
  const auto summary = model::compress_weights(cfg, w, opts);
  EXPECT_EQ(summary.total_ratio, 16.0);
  for (const auto& l : summary.layers) EXPECT_EQ(l.ratio, 16.0);
  EXPECT_EQ(w.at("embedding").kind(), WeightKind::kDense);
  EXPECT_THROW(model::compress_weights(cfg, w, opts), UsageError);  // already compressed
}

TEST(Model, BlockSizeOneIsLossless) {
  const auto cfg = model::preset("micro");
  const auto w = model::generate(cfg, 6);
  auto c = w;
  model::CompressOptions opts;
  opts.block_size = 1;
  EXPECT_EQ(model::compress_weights(cfg, c, opts).total_ratio, 1.0);
  for (const auto& l : model::linear_layers(cfg)) {
    EXPECT_EQ(std::get<BlockCirculantMatrix>(c.at(l.name).data).expand(),
              std::get<Tensor>(w.at(l.name).data));
  }
}

TEST(Model, CompressExpandCompressIdempotent) {
  const auto cfg = model::preset("micro");
  for (auto mode : {CompressionMode::kDiagonalMean, CompressionMode::kFirstRow,
                    CompressionMode::kRowMean}) {
    auto once = model::generate(cfg, 7);
    model::CompressOptions opts;
    opts.block_size = 4;
    opts.mode = mode;
    model::compress_weights(cfg, once, opts);
    auto expanded = once;
    for (const auto& l : model::linear_layers(cfg)) {
      expanded.put(l.name, std::get<BlockCirculantMatrix>(once.at(l.name).data).expand());
    }
    auto twice = expanded;
    model::compress_weights(cfg, twice, opts);
    for (const auto& l : model::linear_layers(cfg)) {
      const auto a = std::get<BlockCirculantMatrix>(once.at(l.name).data).index_data();
      const auto b = std::get<BlockCirculantMatrix>(twice.at(l.name).data).index_data();
      // Row means are not a projection, so the second pass only agrees on
      // the block means for that mode.
      if (mode == CompressionMode::kRowMean) continue;
      for (std::size_t i = 0; i < a.size(); ++i) ASSERT_NEAR(a[i], b[i], 1e-12) << l.name;
    }
  }
}

TEST(Model, QuantizedCompressionBuilds) {
  const auto cfg = model::preset("micro");
  auto w = model::generate(cfg, 8);
  model::CompressOptions opts;
  opts.block_size = 8;
  opts.quantize = true;
  model::compress_weights(cfg, w, opts);
  EXPECT_EQ(w.at("decoder.1.ffn.w2").kind(), WeightKind::kQuantBcm);
  const auto m = model::build_model(cfg, io::parse(io::serialize(w)));
  const std::vector<std::int64_t> tokens = {1, 2, 3};
  EXPECT_EQ(nn::forward(m, tokens).rows(), 3u);
}

}  // namespace
}  // namespace blockcirc
