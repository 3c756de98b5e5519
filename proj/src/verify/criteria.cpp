#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "blockcirc/error.hpp"
#include "blockcirc/fft.hpp"
#include "blockcirc/model.hpp"
#include "blockcirc/quant.hpp"
#include "blockcirc/rng.hpp"
#include "blockcirc/verify.hpp"

namespace blockcirc::verify {

namespace {

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::vector<double> random_values(Rng& rng, std::size_t n, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(lo, hi);
  return v;
}

std::string compression_ratio(bool& ok) {
  nn::TransformerConfig cfg;
  cfg.num_layers = 2;
  cfg.d_model = 32;
  cfg.num_heads = 2;
  cfg.d_k = cfg.d_v = 16;
  cfg.d_ffn = 64;
  cfg.vocab_size = 40;
  auto weights = model::generate(cfg, 1);
  model::CompressOptions opts;
  opts.block_size = 16;
  const auto summary = model::compress_weights(cfg, weights, opts);
  ok = summary.total_ratio == 16.0 && !summary.layers.empty();
  for (const auto& l : summary.layers) ok = ok && l.ratio == 16.0;
  return std::to_string(summary.layers.size()) + " layers, total ratio " +
         fmt("%.4f", summary.total_ratio);
}

std::string bcm_equivalence(bool& ok) {
  Rng rng(2);
  const std::size_t blocks[] = {2, 4, 8, 16};
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t m = rng.integer(4, 64);
    const std::size_t n = rng.integer(4, 64);
    const std::size_t b = blocks[rng.integer(0, 3)];
    const std::size_t count = ((m + b - 1) / b) * ((n + b - 1) / b) * b;
    BlockCirculantMatrix bcm(m, n, b, random_values(rng, count));
    const auto x = random_values(rng, n);
    const Tensor dense = expand_by_index(bcm);
    const Tensor y = bcm.matvec(x);
    for (std::size_t r = 0; r < m; ++r) {
      double acc = 0.0;
      for (std::size_t c = 0; c < n; ++c) acc += dense.at(r, c) * x[c];
      worst = std::max(worst, std::abs(acc - y[r]));
    }
  }
  ok = worst <= 1e-9;
  return "1000 cases, max |matvec - dense| = " + fmt("%.3e", worst);
}

std::string fft_oracle(bool& ok) {
  Rng rng(3);
  double worst_fwd = 0.0, worst_inv = 0.0, worst_rt = 0.0;
  for (std::size_t n = 1; n <= 32; n *= 2) {
    for (int trial = 0; trial < 100; ++trial) {
      fft::ComplexVec<double> x(n);
      for (auto& c : x) c = {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
      const auto fx = fft::fft(x);
      const auto ix = fft::ifft(x);
      const auto rt = fft::ifft(fx);
      const auto ref_f = naive_dft(x, false);
      const auto ref_i = naive_dft(x, true);
      for (std::size_t i = 0; i < n; ++i) {
        worst_fwd = std::max(worst_fwd, std::abs(fx[i] - ref_f[i]));
        worst_inv = std::max(worst_inv, std::abs(ix[i] - ref_i[i]));
        worst_rt = std::max(worst_rt, std::abs(rt[i] - x[i]));
      }
    }
  }
  ok = worst_fwd <= 1e-9 && worst_inv <= 1e-9 && worst_rt <= 1e-9;
  return "fft " + fmt("%.3e", worst_fwd) + ", ifft " + fmt("%.3e", worst_inv) + ", roundtrip " +
         fmt("%.3e", worst_rt);
}

std::string circulant_model_identity(bool& ok) {
  const auto cfg = model::preset("micro");
  model::GenerateOptions gen;
  gen.circulant_block = 8;
  const auto dense_weights = model::generate(cfg, 4, gen);
  auto bcm_weights = dense_weights;
  model::CompressOptions copts;
  copts.block_size = 8;
  model::compress_weights(cfg, bcm_weights, copts);
  const auto dense = model::build_model(cfg, dense_weights);
  const auto bcm = model::build_model(cfg, bcm_weights);

  Rng rng(5);
  double worst = 0.0;
  for (int trial = 0; trial < 8; ++trial) {
    const std::size_t s = rng.integer(1, cfg.max_seq_len);
    std::vector<std::int64_t> src(s), tgt(s);
    for (auto& t : src) t = static_cast<std::int64_t>(rng.integer(0, cfg.vocab_size - 1));
    for (auto& t : tgt) t = static_cast<std::int64_t>(rng.integer(0, cfg.vocab_size - 1));
    worst = std::max(worst, max_abs_diff(nn::forward(dense, src, tgt),
                                         nn::forward(bcm, src, tgt)));
  }
  ok = worst <= 1e-6;
  return "8 sequences, max |bcm - dense| = " + fmt("%.3e", worst);
}

std::string pwl_softmax(bool& ok) {
  const double bound = pwl_softmax_bound(32, -8.0, 0.0);
  Rng rng(6);
  std::vector<std::vector<double>> inputs(10000);
  // Inputs span 8 so every shifted score lies inside [-8, 0].
  for (auto& x : inputs) x = random_values(rng, 64, -4.0, 4.0);

  const int segments[] = {4, 8, 16, 32, 64};
  std::vector<double> errors;
  for (int seg : segments) {
    const auto impl = nn::SoftmaxImpl::piecewise_linear(seg, -8.0, 0.0);
    double worst = 0.0;
    for (const auto& x : inputs) {
      const auto exact = nn::softmax(x);
      const auto approx = nn::softmax(x, impl);
      worst = std::max(worst, max_abs_diff(exact, approx));
    }
    errors.push_back(worst);
  }
  const double err32 = errors[3];
  bool monotone = true;
  for (std::size_t i = 1; i < errors.size(); ++i) monotone = monotone && errors[i] <= errors[i - 1];
  const bool frozen = std::abs(bound - kPwlSoftmaxBound32) <= 1e-12;
  ok = err32 <= kPwlSoftmaxBound32 && monotone && frozen;
  std::string detail = "max error " + fmt("%.3e", err32) + " <= bound " +
                       fmt("%.3e", kPwlSoftmaxBound32) + "; by segments";
  for (double e : errors) detail += " " + fmt("%.2e", e);
  if (!frozen) detail += "; oracle bound drifted to " + fmt("%.6e", bound);
  return detail;
}

std::string scheduler_validity(bool& ok) {
  Rng rng(7);
  int valid = 0, within_serial = 0;
  std::string first_failure;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = rng.integer(1, 12);
    sched::ComputeGraph g;
    std::map<sched::PeClass, int> counts;
    for (std::size_t i = 0; i < n; ++i) {
      sched::LayerProfile p;
      p.name = "n" + std::to_string(i);
      p.n_op = rng.integer(0, 400);
      p.base_throughput = static_cast<double>(rng.integer(1, 4));
      p.pe_class = sched::kAllPeClasses[rng.integer(0, 4)];
      counts[p.pe_class] = static_cast<int>(rng.integer(1, 3));
      g.add_node(p);
    }
    for (std::size_t u = 0; u < n; ++u) {
      for (std::size_t v = u + 1; v < n; ++v) {
        if (rng.coin(0.25)) g.add_edge(u, v);
      }
    }
    const auto pool = sched::PePool::from_counts(counts);
    const std::uint64_t granularity = rng.integer(1, 4);
    const auto durations = sched::stage_durations(g.nodes(), granularity);
    const auto s = sched::schedule(g, pool, {granularity});
    const auto problem = check_schedule(g, pool, durations, s);
    if (!problem) ++valid;
    else if (first_failure.empty()) first_failure = *problem;
    if (s.makespan() <= serial_makespan(durations)) ++within_serial;
  }
  ok = valid == 1000 && within_serial == 1000;
  std::string detail = std::to_string(valid) + "/1000 valid, " + std::to_string(within_serial) +
                       "/1000 within serial makespan";
  if (!first_failure.empty()) detail += "; " + first_failure;
  return detail;
}

}  // namespace

std::vector<sched::DevicePlan> random_allocation_instances(std::size_t count, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<sched::DevicePlan> out;
  while (out.size() < count) {
    sched::DevicePlan plan;
    plan.replicas = rng.integer(1, 2);
    const std::size_t n = rng.integer(2, 5);
    sched::ResourceVector base_usage;
    for (std::size_t j = 0; j < n; ++j) {
      sched::LayerProfile l;
      l.name = "L" + std::to_string(j);
      l.n_op = rng.integer(50, 2000);
      l.base_throughput = static_cast<double>(rng.integer(1, 4));
      l.base_resources = {rng.integer(0, 40), rng.integer(0, 40), rng.integer(1, 4),
                          rng.integer(0, 2)};
      base_usage += l.base_resources;
      plan.layers.push_back(l);
    }
    plan.misc = {rng.integer(0, 20), rng.integer(0, 20), 0, 0};
    const sched::ResourceVector floor = plan.replicas * base_usage + plan.misc;
    plan.device_limits = {floor.ff + rng.integer(0, 120), floor.lut + rng.integer(0, 120),
                          floor.dsp + rng.integer(0, 12), floor.bram + rng.integer(0, 4)};
    const auto brute = brute_force_allocation(plan, 200);
    if (!brute || brute->feasible_vectors < 2) continue;
    out.push_back(std::move(plan));
  }
  return out;
}

namespace {

std::uint64_t uniform_allocation_time(const sched::DevicePlan& plan) {
  sched::DevicePlan u = plan;
  std::uint64_t k = 1;
  while (true) {
    for (auto& l : u.layers) l.alloc_factor = k + 1;
    if (!sched::feasible(u)) break;
    ++k;
  }
  for (auto& l : u.layers) l.alloc_factor = k;
  return sched::max_layer_time(u);
}

std::string allocator_quality(bool& ok) {
  const auto instances = random_allocation_instances(100, 8);
  int optimal = 0, never_worse = 0;
  for (const auto& plan : instances) {
    const auto greedy = sched::allocate(plan);
    const std::uint64_t t = sched::max_layer_time(greedy);
    const auto brute = brute_force_allocation(plan, 200);
    if (sched::feasible(greedy) && t == brute->best_max_time) ++optimal;
    if (t <= uniform_allocation_time(plan)) ++never_worse;
  }
  const double rate = optimal / 100.0;
  ok = rate >= 0.90 && rate >= kAllocatorOptimalRate && never_worse == 100;
  return "optimal on " + std::to_string(optimal) + "/100 (fixture " +
         fmt("%.2f", kAllocatorOptimalRate) + "), no worse than uniform on " +
         std::to_string(never_worse) + "/100";
}

sched::DeviceConfig generous_device() {
  sched::DeviceConfig d;
  d.limits = {4'000'000, 2'000'000, 12'000, 4'000};
  d.misc = {20'000, 15'000, 0, 100};
  d.clock_mhz = 200.0;
  return d;
}

std::string report_arithmetic(bool& ok) {
  ok = true;
  std::string detail;
  int checked = 0;
  for (const char* name : {"micro", "shallow"}) {
    for (std::size_t b : {std::size_t{1}, std::size_t{8}}) {
      const auto cfg = model::preset(name);
      const auto g = sched::build_model_graph(cfg, 64, {b});
      const auto plan = sched::allocate(sched::make_plan(g, generous_device(), b));
      const auto pool = sched::default_pool(g);
      sched::ComputeGraph allocated = g;
      allocated.nodes() = plan.layers;
      for (std::uint64_t gran : {1, 4}) {
        const auto s = sched::schedule(allocated, pool, {gran});
        const auto r1 = sched::report(plan, s, 1, gran);
        const auto r16 = sched::report(plan, s, 16, gran);
        for (const auto* r : {&r1, &r16}) {
          if (auto why = check_report_arithmetic(*r)) {
            ok = false;
            detail = std::string(name) + ": " + *why;
          }
          ++checked;
        }
        if (r1.throughput != r16.throughput || !(r16.batch_latency_cycles > r1.batch_latency_cycles)) {
          ok = false;
          detail = "batch scaling broke the steady-state model";
        }
      }
    }
  }
  return detail.empty() ? std::to_string(checked) + " reports recomputed exactly" : detail;
}

std::string quantization_bounds(bool& ok) {
  Rng rng(9);
  ok = true;
  double worst_ratio = 0.0;  // error / bound
  for (int f = 0; f <= 15; ++f) {
    const FixedPointFormat fmt_f(f);
    const double bound = std::ldexp(1.0, -f - 1);
    std::vector<double> xs = random_values(rng, 2000, fmt_f.min_value(), fmt_f.max_value());
    xs.push_back(fmt_f.min_value());
    xs.push_back(fmt_f.max_value());
    xs.push_back(0.0);
    xs.push_back(fmt_f.step() / 2);
    xs.push_back(-fmt_f.step() / 2);
    xs.push_back(fmt_f.max_value() - fmt_f.step() / 2);
    for (double x : xs) {
      const double err = std::abs(x - dequantize_value(quantize_value(x, fmt_f), fmt_f));
      worst_ratio = std::max(worst_ratio, err / bound);
      if (err > bound) ok = false;
    }
    for (double x : {fmt_f.max_value() + fmt_f.step(), 1e6, HUGE_VAL}) {
      if (quantize_value(x, fmt_f) != 32767) ok = false;
      if (quantize_value(-x, fmt_f) != -32768) ok = false;
    }
    if (dequantize_value(32767, fmt_f) != fmt_f.max_value()) ok = false;
    if (dequantize_value(-32768, fmt_f) != fmt_f.min_value()) ok = false;
    // Half-way points round away from zero.
    if (quantize_value(2.5 * fmt_f.step(), fmt_f) != 3) ok = false;
    if (quantize_value(-2.5 * fmt_f.step(), fmt_f) != -3) ok = false;
  }
  return "16 formats, worst error/bound " + fmt("%.4f", worst_ratio) + ", saturation exact";
}

std::string structural_claim(bool& ok) {
  const auto cfg = model::preset("shallow");
  const auto g = sched::build_encoder_graph(cfg, cfg.d_model);
  const int stages = g.pipeline_stages().at("encoder");
  const double ratio = static_cast<double>(g.node(*g.find("enc.q_proj")).n_op) /
                       static_cast<double>(g.node(*g.find("enc.head0.qk")).n_op);
  ok = stages == 7 && ratio >= 3.0 && ratio <= 5.0;
  return std::to_string(stages) + " pipeline stages, projection/head op ratio " +
         fmt("%.3f", ratio);
}

}  // namespace

const std::vector<Criterion>& acceptance_criteria() {
  static const std::vector<Criterion> all = {
      {1, "compression ratio 16 at block size 16", 1.0, compression_ratio},
      {2, "BCM matvec equals dense product", 10.0, bcm_equivalence},
      {3, "FFT matches direct DFT", 5.0, fft_oracle},
      {4, "exact-circulant model: BCM forward equals dense", 5.0, circulant_model_identity},
      {5, "piecewise-linear softmax error bound", 10.0, pwl_softmax},
      {6, "scheduler validity on random DAGs", 10.0, scheduler_validity},
      {7, "greedy allocator against exhaustive search", 30.0, allocator_quality},
      {8, "report throughput and latency arithmetic", 1.0, report_arithmetic},
      {9, "fixed-point roundtrip and saturation", 1.0, quantization_bounds},
      {10, "encoder graph: 7 stages, projection/head ratio in [3, 5]", 1.0, structural_claim},
  };
  return all;
}

CriterionResult run_criterion(const Criterion& c) {
  CriterionResult r{c.id, c.title, false, "", 0.0, c.budget_seconds};
  const auto start = std::chrono::steady_clock::now();
  bool ok = false;
  try {
    r.detail = c.body(ok);
  } catch (const std::exception& e) {
    ok = false;
    r.detail = std::string("threw: ") + e.what();
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (ok && r.seconds > r.budget_seconds) {
    ok = false;
    r.detail += "; over time budget";
  }
  r.passed = ok;
  return r;
}

std::string format_result(const CriterionResult& r) {
  char head[128];
  std::snprintf(head, sizeof head, "[%s] %2d  %-56s %7.3fs / %.0fs  ", r.passed ? "PASS" : "FAIL",
                r.id, r.title.c_str(), r.seconds, r.budget_seconds);
  return head + r.detail;
}

}  // namespace blockcirc::verify
