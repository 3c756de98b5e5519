#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "blockcirc/cli.hpp"
#include "blockcirc/container.hpp"
#include "blockcirc/model.hpp"
#include "blockcirc/report.hpp"
#include "blockcirc/verify.hpp"

namespace blockcirc {
namespace {

namespace fs = std::filesystem;

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("blockcirc_cli_" +
            std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  void write(const std::string& name, const std::string& text) const {
    std::ofstream(dir_ / name) << text;
  }

  std::string gen(const std::string& preset, const std::string& sub,
                  const std::string& circulant = "0") {
    const auto r = run({"gen-toy", "--preset", preset, "--seed", "11", "--out-dir", path(sub),
                        "--circulant-block", circulant});
    EXPECT_EQ(r.code, 0) << r.err;
    return path(sub);
  }

  std::string device(const std::string& name, std::uint64_t dsp) const {
    write(name, R"({"device": {"ff": 4000000, "lut": 2000000, "dsp": )" + std::to_string(dsp) +
                    R"(, "bram": 4000, "clock_mhz": 250}, "misc": {"bram": 16}, "replicas": 2})");
    return path(name);
  }

  fs::path dir_;
};

TEST_F(Cli, GenToyDeterministic) {
  const auto a = gen("micro", "a");
  const auto b = gen("micro", "b");
  EXPECT_EQ(io::read_file(a + "/weights.ftrw"), io::read_file(b + "/weights.ftrw"));
  EXPECT_EQ(io::read_file(a + "/config.json"), io::read_file(b + "/config.json"));
}

TEST_F(Cli, GenToyShallowConfig) {
  const auto dir = gen("shallow", "s");
  const auto cfg = model::read_config(dir + "/config.json");
  EXPECT_EQ(cfg.num_layers, 2u);
  EXPECT_EQ(cfg.d_model, 200u);
  EXPECT_EQ(cfg.num_heads, 4u);
}

TEST_F(Cli, CompressReportsRatio16) {
  nn::TransformerConfig cfg = model::preset("micro");
  cfg.d_model = 32;
  cfg.d_k = cfg.d_v = 16;
  write("cfg.json", model::config_to_json(cfg).dump());
  io::write_container(path("w.ftrw"), model::generate(cfg, 1));
  const auto r = run({"compress", "--in", path("w.ftrw"), "--config", path("cfg.json"), "--out",
                      path("c.ftrw"), "--block-size", "16"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("ratio 16.00"), std::string::npos) << r.out;
  EXPECT_EQ(io::read_container(path("c.ftrw")).at("encoder.0.ffn.w1").kind(), WeightKind::kBcm);
}

TEST_F(Cli, CompressSelectorErrors) {
  const auto dir = gen("micro", "m");
  const auto bad = run({"compress", "--in", dir + "/weights.ftrw", "--config",
                        dir + "/config.json", "--out", path("c.ftrw"), "--layers", "nope.*"});
  EXPECT_EQ(bad.code, cli::kExitUsage);
  EXPECT_NE(bad.err.find("encoder.0.self_attn.q"), std::string::npos);
  const auto zero = run({"compress", "--in", dir + "/weights.ftrw", "--config",
                         dir + "/config.json", "--out", path("c.ftrw"), "--block-size", "0"});
  EXPECT_EQ(zero.code, cli::kExitUsage);
  const auto missing = run({"compress", "--in", path("absent.ftrw"), "--config",
                            dir + "/config.json", "--out", path("c.ftrw")});
  EXPECT_EQ(missing.code, cli::kExitIo);
  EXPECT_FALSE(fs::exists(path("c.ftrw")));
}

TEST_F(Cli, InferDenseMatchesCompressedCirculant) {
  const auto dir = gen("micro", "m", "8");
  ASSERT_EQ(run({"compress", "--in", dir + "/weights.ftrw", "--config", dir + "/config.json",
                 "--out", path("bcm.ftrw"), "--block-size", "8"})
                .code,
            0);
  write("tokens.txt", "3 1 4 1 5 9\n2 6 5\n");
  for (const auto& [weights, out] : {std::pair{dir + "/weights.ftrw", path("dense.out")},
                                     std::pair{path("bcm.ftrw"), path("bcm.out")}}) {
    const auto r = run({"infer", "--config", dir + "/config.json", "--weights", weights,
                        "--input", path("tokens.txt"), "--output", out});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("forward"), std::string::npos);
  }
  const auto a = std::get<Tensor>(io::read_container(path("dense.out")).at("output").data);
  const auto b = std::get<Tensor>(io::read_container(path("bcm.out")).at("output").data);
  EXPECT_EQ(a.shape(), (std::vector<std::size_t>{3, 16}));
  EXPECT_LE(max_abs_diff(a, b), 1e-6);
}

TEST_F(Cli, InferErrors) {
  const auto dir = gen("micro", "m");
  auto infer = [&](const std::string& tokens, std::vector<std::string> extra = {}) {
    write("t.txt", tokens);
    std::vector<std::string> args = {"infer", "--config", dir + "/config.json", "--weights",
                                     dir + "/weights.ftrw", "--input", path("t.txt"),
                                     "--output", path("o.ftrw")};
    args.insert(args.end(), extra.begin(), extra.end());
    return run(args);
  };
  EXPECT_EQ(infer("\n").code, cli::kExitUsage);
  const auto oov = infer("1 2 99\n");
  EXPECT_EQ(oov.code, cli::kExitValidation);
  EXPECT_NE(oov.err.find("99"), std::string::npos);
  EXPECT_EQ(infer("1 x 3\n").code, cli::kExitValidation);
  EXPECT_EQ(infer("1 2\n", {"--softmax", "cubic"}).code, cli::kExitUsage);

  const auto q16 = infer("1 2 3 4\n", {"--precision", "q16", "--compare", "--softmax", "pwl"});
  ASSERT_EQ(q16.code, 0) << q16.err;
  EXPECT_NE(q16.out.find("max |q16 - f64|"), std::string::npos);
  const auto logits = infer("1 2 3 4\n", {"--result", "logits"});
  ASSERT_EQ(logits.code, 0);
  EXPECT_EQ(std::get<Tensor>(io::read_container(path("o.ftrw")).at("output").data).cols(), 32u);
}

TEST_F(Cli, ScheduleShallowSevenStages) {
  const auto dir = gen("micro", "m");
  write("shallow.json", model::config_to_json(model::preset("shallow")).dump());
  const auto r = run({"schedule", "--config", path("shallow.json"), "--device",
                      device("dev.json", 12000), "--seq-len", "32", "--batch", "4", "--out",
                      path("report.json"), "--gantt", path("gantt.txt")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("encoder=7"), std::string::npos);
  std::ifstream in(path("report.json"));
  const auto rep = sched::perf_report_from_json(nlohmann::json::parse(in));
  EXPECT_FALSE(verify::check_report_arithmetic(rep));
  EXPECT_EQ(rep.batch, 4u);
  EXPECT_EQ(rep.clock_hz, 250e6);
  EXPECT_EQ(rep.pipeline_stages.at("encoder"), 7);
  EXPECT_TRUE(fs::exists(path("gantt.txt")));
}

TEST_F(Cli, ScheduleDeterministic) {
  const auto dir = gen("micro", "m");
  const auto dev = device("dev.json", 12000);
  for (const char* out : {"r1.json", "r2.json"}) {
    ASSERT_EQ(run({"schedule", "--config", dir + "/config.json", "--device", dev, "--out",
                   path(out), "--seed", "5"})
                  .code,
              0);
  }
  EXPECT_EQ(io::read_file(path("r1.json")), io::read_file(path("r2.json")));
}

TEST_F(Cli, ScheduleZeroDspIsInfeasible) {
  const auto dir = gen("micro", "m");
  const auto r = run({"schedule", "--config", dir + "/config.json", "--device",
                      device("dev.json", 0)});
  EXPECT_EQ(r.code, cli::kExitFeasibility);
  EXPECT_NE(r.err.find("dsp"), std::string::npos);
}

TEST_F(Cli, VerifySubset) {
  const auto r = run({"verify", "--only", "9,10"});
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("2/2 criteria passed"), std::string::npos);
  EXPECT_EQ(run({"verify", "--only", "42"}).code, cli::kExitUsage);
}

TEST(CliParse, UsageErrors) {
  EXPECT_EQ(run({}).code, cli::kExitUsage);
  EXPECT_EQ(run({"frobnicate"}).code, cli::kExitUsage);
  EXPECT_EQ(run({"compress", "--in", "x"}).code, cli::kExitUsage);
  EXPECT_EQ(run({"--help"}).code, cli::kExitOk);
}

TEST(CliParse, ExitCodeTable) {
  EXPECT_EQ(cli::exit_code(ErrorKind::kUsage), 2);
  EXPECT_EQ(cli::exit_code(ErrorKind::kIo), 3);
  EXPECT_EQ(cli::exit_code(ErrorKind::kValidation), 4);
  EXPECT_EQ(cli::exit_code(ErrorKind::kFeasibility), 5);
}

}  // namespace
}  // namespace blockcirc
