#include "blockcirc/cli.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "blockcirc/container.hpp"
#include "blockcirc/model.hpp"
#include "blockcirc/report.hpp"
#include "blockcirc/verify.hpp"

namespace blockcirc::cli {

namespace fs = std::filesystem;
using nlohmann::json;

int exit_code(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::kUsage:
      return kExitUsage;
    case ErrorKind::kIo:
      return kExitIo;
    case ErrorKind::kFeasibility:
      return kExitFeasibility;
    case ErrorKind::kDomain:
    case ErrorKind::kShape:
    case ErrorKind::kLength:
    case ErrorKind::kCycle:
    case ErrorKind::kUnschedulable:
    case ErrorKind::kValidation:
      return kExitValidation;
  }
  return kExitInternal;
}

namespace {

class PhaseTimer {
 public:
  explicit PhaseTimer(std::ostream& out) : out_(out), start_(Clock::now()) {}

  void lap(const std::string& phase) {
    const auto now = Clock::now();
    out_ << "  " << std::left << std::setw(10) << phase << std::right << std::fixed
         << std::setprecision(3) << std::chrono::duration<double, std::milli>(now - start_).count()
         << " ms\n";
    start_ = now;
  }

 private:
  using Clock = std::chrono::steady_clock;
  std::ostream& out_;
  Clock::time_point start_;
};

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

std::vector<std::int64_t> parse_tokens(const std::string& line, const std::string& what) {
  std::istringstream in(line);
  std::vector<std::int64_t> out;
  std::string word;
  while (in >> word) {
    std::size_t used = 0;
    long long v = 0;
    try {
      v = std::stoll(word, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != word.size()) throw ValidationError(what + ": '" + word + "' is not a token id");
    out.push_back(v);
  }
  return out;
}

// ---------------------------------------------------------------------------

struct GenToyArgs {
  std::string preset = "micro";
  std::uint64_t seed = 0;
  std::string out_dir;
  std::size_t circulant_block = 0;
};

int cmd_gen_toy(const GenToyArgs& a, std::ostream& out) {
  const auto cfg = model::preset(a.preset);
  model::GenerateOptions opts;
  opts.circulant_block = a.circulant_block;
  const auto weights = model::generate(cfg, a.seed, opts);
  std::error_code ec;
  fs::create_directories(a.out_dir, ec);
  if (ec) throw IoError("cannot create " + a.out_dir + ": " + ec.message());
  const fs::path config_path = fs::path(a.out_dir) / "config.json";
  const fs::path weights_path = fs::path(a.out_dir) / "weights.ftrw";
  io::write_text_atomic(config_path, model::config_to_json(cfg).dump(2) + "\n");
  io::write_container(weights_path, weights);
  out << "wrote " << config_path.string() << "\nwrote " << weights_path.string() << " ("
      << weights.records().size() << " records, seed " << a.seed << ")\n";
  return kExitOk;
}

struct CompressArgs {
  std::string in;
  std::string config;
  std::string out;
  std::size_t block_size = 8;
  std::string mode = "diagonal-mean";
  std::string layers = "all";
  bool quantize = false;
};

int cmd_compress(const CompressArgs& a, std::ostream& out) {
  if (a.block_size == 0) throw UsageError("--block-size must be >= 1");
  const auto cfg = model::read_config(a.config);
  auto weights = io::read_container(a.in);
  model::CompressOptions opts;
  opts.block_size = a.block_size;
  opts.mode = compression_mode_from_string(a.mode);
  opts.selector = a.layers;
  opts.quantize = a.quantize;
  const auto summary = model::compress_weights(cfg, weights, opts);
  io::write_container(a.out, weights);

  std::size_t width = 5;
  for (const auto& l : summary.layers) width = std::max(width, l.name.size());
  out << std::left << std::setw(static_cast<int>(width)) << "layer" << std::right
      << std::setw(12) << "dense" << std::setw(12) << "stored" << std::setw(10) << "ratio\n";
  for (const auto& l : summary.layers) {
    out << std::left << std::setw(static_cast<int>(width)) << l.name << std::right
        << std::setw(12) << l.dense_params << std::setw(12) << l.stored_params << std::setw(9)
        << std::fixed << std::setprecision(2) << l.ratio << "\n";
  }
  out << "total: " << summary.dense_params << " -> " << summary.stored_params
      << " parameters, ratio " << std::fixed << std::setprecision(2) << summary.total_ratio
      << " (block " << a.block_size << ", " << a.mode << (a.quantize ? ", q16" : "") << ")\n";
  return kExitOk;
}

struct InferArgs {
  std::string config;
  std::string weights;
  std::string input;
  std::string output;
  std::string softmax = "exact";
  int segments = 32;
  std::string precision = "f64";
  std::string result = "hidden";
  bool compare = false;
};

int cmd_infer(const InferArgs& a, std::ostream& out) {
  if (a.result != "hidden" && a.result != "logits") {
    throw UsageError("--result must be hidden or logits");
  }
  nn::ForwardOptions fopts;
  if (a.softmax == "pwl") {
    fopts.softmax = nn::SoftmaxImpl::piecewise_linear(a.segments);
  } else if (a.softmax != "exact") {
    throw UsageError("--softmax must be exact or pwl");
  }
  fopts.precision = nn::precision_from_string(a.precision);

  std::ifstream tokens_in(a.input);
  if (!tokens_in) throw IoError("cannot open " + a.input);
  std::string line;
  std::vector<std::int64_t> source, target;
  if (std::getline(tokens_in, line)) source = parse_tokens(line, a.input);
  if (std::getline(tokens_in, line)) target = parse_tokens(line, a.input);
  if (source.empty()) throw UsageError("input sequence is empty; at least one token is required");

  out << "timing:\n";
  PhaseTimer timer(out);
  const auto cfg = model::read_config(a.config);
  const auto weights = io::read_container(a.weights);
  auto embedding = std::make_shared<io::FileEmbedding>(a.weights, model::kEmbeddingRecord);
  model::BuildOptions bopts;
  bopts.quantize_weights = fopts.precision == nn::Precision::kQ16;
  const auto m = model::build_model(cfg, weights, embedding, bopts);
  timer.lap("load");

  auto run = [&](const nn::TransformerModel& mdl, const nn::ForwardOptions& o) {
    Tensor h = target.empty() ? nn::forward(mdl, source, o) : nn::forward(mdl, source, target, o);
    return a.result == "logits" ? nn::logits(mdl, h) : h;
  };
  const Tensor result = run(m, fopts);
  timer.lap("forward");

  io::WeightContainer container;
  container.put("output", result);
  io::write_container(a.output, container);
  timer.lap("write");

  out << "output: " << a.result << " " << shape_string(result.shape()) << " -> " << a.output
      << "\n";
  if (a.compare && fopts.precision != nn::Precision::kF64) {
    const auto ref_model = model::build_model(cfg, weights, embedding);
    nn::ForwardOptions ref_opts = fopts;
    ref_opts.precision = nn::Precision::kF64;
    out << "max |" << a.precision << " - f64| = " << std::scientific << std::setprecision(3)
        << max_abs_diff(result, run(ref_model, ref_opts)) << "\n";
  }
  return kExitOk;
}

struct ScheduleArgs {
  std::string config;
  std::string device;
  std::size_t seq_len = 0;
  std::uint64_t batch = 1;
  std::uint64_t granularity = 1;
  std::size_t block_size = 1;
  std::uint64_t seed = 0;
  std::string out;
  std::string gantt;
};

int cmd_schedule(const ScheduleArgs& a, std::ostream& out) {
  if (a.batch == 0) throw UsageError("--batch must be >= 1");
  if (a.granularity == 0) throw UsageError("--granularity must be >= 1");
  if (a.block_size == 0) throw UsageError("--block-size must be >= 1");
  const auto cfg = model::read_config(a.config);
  const auto device = sched::device_config_from_json(read_json(a.device));
  const std::size_t s = a.seq_len ? a.seq_len : cfg.max_seq_len;

  sched::ComputeGraph g = sched::build_model_graph(cfg, s, {a.block_size});
  sched::DevicePlan plan = sched::make_plan(g, device, a.block_size);
  sched::require_feasible(plan);
  plan = sched::allocate(std::move(plan));
  g.nodes() = plan.layers;
  const sched::PePool pool =
      device.pe_pool.empty() ? sched::default_pool(g) : sched::PePool::from_counts(device.pe_pool);
  const auto sch = sched::schedule(g, pool, {a.granularity});
  auto rep = sched::report(plan, sch, a.batch, a.granularity);
  rep.seed = a.seed;
  const std::string gantt = sched::render_gantt(plan.layers, pool, sch);

  if (!a.out.empty()) io::write_text_atomic(a.out, sched::to_json(rep).dump(2) + "\n");
  if (!a.gantt.empty()) io::write_text_atomic(a.gantt, gantt);

  out << gantt << "\n";
  out << "layers " << rep.layer_count << ", max T " << rep.max_time_cycles << " cycles, makespan "
      << rep.makespan_stages << " stages (" << rep.makespan_cycles << " cycles)\n";
  out << "throughput " << std::setprecision(6) << rep.throughput << " inferences/s; batch "
      << rep.batch << " latency " << rep.batch_latency_seconds * 1e3 << " ms, "
      << rep.batch_throughput << " inferences/s\n";
  if (!a.out.empty()) out << "report -> " << a.out << "\n";
  return kExitOk;
}

int cmd_verify(const std::vector<int>& only, std::ostream& out) {
  int failed = 0, ran = 0;
  for (const auto& c : verify::acceptance_criteria()) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
    const auto r = verify::run_criterion(c);
    out << verify::format_result(r) << std::endl;
    ++ran;
    if (!r.passed) ++failed;
  }
  if (ran == 0) throw UsageError("--only selected no criteria (valid ids are 1-10)");
  out << ran - failed << "/" << ran << " criteria passed\n";
  return failed == 0 ? kExitOk : kExitVerifyFailed;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Block-circulant transformer compression, inference and scheduling", "blockcirc"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "0.1.0");

  GenToyArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-toy", "Write a seeded random model (config + weights)");
  gen_cmd->add_option("--preset", gen.preset, "micro or shallow")->capture_default_str();
  gen_cmd->add_option("--seed", gen.seed, "Random seed")->capture_default_str();
  gen_cmd->add_option("--out-dir", gen.out_dir, "Output directory")->required();
  gen_cmd->add_option("--circulant-block", gen.circulant_block,
                      "Make every linear weight exactly block-circulant with this block size");

  CompressArgs comp;
  auto* comp_cmd = app.add_subcommand("compress", "Replace dense layers with circulant blocks");
  comp_cmd->add_option("--in", comp.in, "Input weight file")->required();
  comp_cmd->add_option("--config", comp.config, "Model config JSON")->required();
  comp_cmd->add_option("--out", comp.out, "Output weight file")->required();
  comp_cmd->add_option("--block-size", comp.block_size, "Circulant block size")
      ->capture_default_str();
  comp_cmd->add_option("--mode", comp.mode, "diagonal-mean, row-mean or first-row")
      ->capture_default_str();
  comp_cmd->add_option("--layers", comp.layers, "'all' or comma-separated names/globs")
      ->capture_default_str();
  comp_cmd->add_flag("--quantize", comp.quantize, "Store index vectors as 16-bit fixed point");

  InferArgs inf;
  auto* inf_cmd = app.add_subcommand("infer", "Run one forward pass");
  inf_cmd->add_option("--config", inf.config, "Model config JSON")->required();
  inf_cmd->add_option("--weights", inf.weights, "Weight file")->required();
  inf_cmd->add_option("--input", inf.input,
                      "Token file: source ids on line 1, optional target ids on line 2")
      ->required();
  inf_cmd->add_option("--output", inf.output, "Output weight file (record 'output')")->required();
  inf_cmd->add_option("--softmax", inf.softmax, "exact or pwl")->capture_default_str();
  inf_cmd->add_option("--segments", inf.segments, "Piecewise-linear segments")
      ->capture_default_str()
      ->check(CLI::Range(2, 1 << 20));
  inf_cmd->add_option("--precision", inf.precision, "f64, f32 or q16")->capture_default_str();
  inf_cmd->add_option("--result", inf.result, "hidden or logits")->capture_default_str();
  inf_cmd->add_flag("--compare", inf.compare, "Also report the deviation from an f64 run");

  ScheduleArgs sch;
  auto* sch_cmd = app.add_subcommand("schedule", "Allocate resources and schedule one replica");
  sch_cmd->add_option("--config", sch.config, "Model config JSON")->required();
  sch_cmd->add_option("--device", sch.device, "Device config JSON")->required();
  sch_cmd->add_option("--seq-len", sch.seq_len, "Sequence length (default: max_seq_len)");
  sch_cmd->add_option("--batch", sch.batch, "Batch size")->capture_default_str();
  sch_cmd->add_option("--granularity", sch.granularity, "Stages per slowest layer")
      ->capture_default_str();
  sch_cmd->add_option("--block-size", sch.block_size, "Circulant block size of linear layers")
      ->capture_default_str();
  sch_cmd->add_option("--seed", sch.seed, "Seed recorded in the report")->capture_default_str();
  sch_cmd->add_option("--out", sch.out, "Report JSON path");
  sch_cmd->add_option("--gantt", sch.gantt, "Gantt chart text path");

  std::vector<int> only;
  auto* ver_cmd = app.add_subcommand("verify", "Run the oracle-backed acceptance suite");
  ver_cmd->add_option("--only", only, "Criterion ids to run")->delimiter(',');

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (gen_cmd->parsed()) return cmd_gen_toy(gen, out);
    if (comp_cmd->parsed()) return cmd_compress(comp, out);
    if (inf_cmd->parsed()) return cmd_infer(inf, out);
    if (sch_cmd->parsed()) return cmd_schedule(sch, out);
    if (ver_cmd->parsed()) return cmd_verify(only, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitUsage;
}

}  // namespace blockcirc::cli
