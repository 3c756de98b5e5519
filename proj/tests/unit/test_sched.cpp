#include <gtest/gtest.h>

#include "blockcirc/error.hpp"
#include "blockcirc/model.hpp"
#include "blockcirc/report.hpp"
#include "blockcirc/rng.hpp"
#include "blockcirc/sched.hpp"
#include "blockcirc/verify.hpp"

namespace blockcirc::sched {
namespace {

LayerProfile layer(const std::string& name, std::uint64_t ops, double f = 1.0,
                   PeClass cls = PeClass::kPeA, ResourceVector r = {0, 0, 1, 0}) {
  LayerProfile l;
  l.name = name;
  l.n_op = ops;
  l.base_throughput = f;
  l.pe_class = cls;
  l.base_resources = r;
  return l;
}

DevicePlan plan_with(std::vector<LayerProfile> layers, std::uint64_t dsp) {
  DevicePlan p;
  p.device_limits = {1000, 1000, dsp, 10};
  p.layers = std::move(layers);
  return p;
}

TEST(LayerTime, Examples) {
  EXPECT_EQ(layer_time(1000, 10, 2), 50u);
  EXPECT_EQ(layer_time(0, 10, 2), 0u);
  EXPECT_EQ(layer_time(7, 2, 1), 4u);
  EXPECT_EQ(layer_time(10, 2.5, 1), 4u);
  EXPECT_EQ(layer_time(11, 2.5, 1), 5u);
  EXPECT_THROW(layer_time(5, 1, 0), DomainError);
  EXPECT_THROW(layer_time(5, 0.0, 1), DomainError);
}

TEST(Throughput, Examples) {
  DevicePlan p = plan_with({layer("a", 50), layer("b", 20)}, 10);
  p.clock_hz = 100;
  EXPECT_DOUBLE_EQ(throughput(p), 1.0);

  DevicePlan q = plan_with({layer("slow", 1000, 10), layer("fast", 100, 10)}, 10);
  const double before = throughput(q);
  q.layers[0].alloc_factor = 2;
  EXPECT_DOUBLE_EQ(throughput(q), 2 * before);
}

TEST(Throughput, InfeasibleRejectedWithDeficit) {
  DevicePlan p = plan_with({layer("a", 50), layer("b", 20)}, 1);
  try {
    throughput(p);
    FAIL();
  } catch (const FeasibilityError& e) {
    EXPECT_NE(std::string(e.what()).find("dsp"), std::string::npos);
  }
}

TEST(Throughput, MonotoneInSlowestFactor) {
  Rng rng(71);
  for (int trial = 0; trial < 200; ++trial) {
    DevicePlan p = plan_with({layer("a", rng.integer(100, 5000), 3), layer("b", rng.integer(1, 99), 3)},
                             1000);
    p.layers[0].alloc_factor = rng.integer(1, 5);
    const std::uint64_t t_before = layer_time(p.layers[0]);
    const double before = throughput(p);
    ++p.layers[0].alloc_factor;
    const double after = throughput(p);
    if (max_layer_time(p) != layer_time(p.layers[0])) continue;
    EXPECT_GE(after, before);
    if (layer_time(p.layers[0]) < t_before) EXPECT_GT(after, before);
  }
}

TEST(Allocate, SingleLayerQuartered) {
  const auto p = allocate(plan_with({layer("only", 1000, 10)}, 4));
  EXPECT_EQ(p.layers[0].alloc_factor, 4u);
  EXPECT_EQ(layer_time(p.layers[0]), 25u);
}

TEST(Allocate, TwoIdenticalLayersTieGoesToLowestIndex) {
  // Budget: one unit each plus one spare. Both layers start at T = 100.
  const auto p = allocate(plan_with({layer("a", 100), layer("b", 100)}, 3));
  EXPECT_EQ(p.layers[0].alloc_factor, 2u);
  EXPECT_EQ(p.layers[1].alloc_factor, 1u);
  // The other layer still bounds the maximum, so it cannot drop.
  EXPECT_EQ(max_layer_time(p), 100u);
}

TEST(Allocate, ReclaimsFromFastLayer) {
  DevicePlan p = plan_with({layer("slow", 1000), layer("fast", 10)}, 4);
  p.layers[1].alloc_factor = 3;
  const auto out = allocate(p);
  EXPECT_EQ(out.layers[1].alloc_factor, 1u);
  EXPECT_EQ(out.layers[0].alloc_factor, 3u);
  EXPECT_TRUE(feasible(out));
}

TEST(Allocate, InfeasibleStart) {
  EXPECT_THROW(allocate(plan_with({layer("a", 10), layer("b", 10)}, 1)), FeasibilityError);
}

TEST(Allocate, NeverWorseAndAlwaysFeasible) {
  for (const auto& plan : verify::random_allocation_instances(300, 72)) {
    const auto out = allocate(plan);
    EXPECT_TRUE(feasible(out));
    EXPECT_LE(max_layer_time(out), max_layer_time(plan));
    const auto brute = verify::brute_force_allocation(plan, 200);
    ASSERT_TRUE(brute);
    EXPECT_GE(max_layer_time(out), brute->best_max_time);
  }
}

TEST(Schedule, SingleNode) {
  ComputeGraph g;
  g.add_node(layer("n", 5));
  const auto s = schedule(g, PePool::from_counts({{PeClass::kPeA, 1}}));
  ASSERT_EQ(s.entries.size(), 1u);
  EXPECT_EQ(s.entries[0], (ScheduleEntry{0, 1, 1, 0, "PE_A1"}));
}

TEST(Schedule, ChainIsSequential) {
  ComputeGraph g;
  g.add_node(layer("A", 5, 1, PeClass::kPeA));
  g.add_node(layer("B", 5, 1, PeClass::kPeB));
  g.add_edge(0, 1);
  const auto s = schedule(g, PePool::from_counts({{PeClass::kPeA, 1}, {PeClass::kPeB, 1}}));
  EXPECT_EQ(s.entries[0].start_stage, 1);
  EXPECT_EQ(s.entries[1].start_stage, 2);
}

TEST(Schedule, Errors) {
  ComputeGraph g;
  g.add_node(layer("A", 5));
  g.add_node(layer("B", 5));
  g.add_edge(0, 1);
  g.add_edge(1, 0);
  try {
    schedule(g, PePool::from_counts({{PeClass::kPeA, 1}}));
    FAIL();
  } catch (const CycleError& e) {
    EXPECT_NE(std::string(e.what()).find("->"), std::string::npos);
  }
  ComputeGraph h;
  h.add_node(layer("S", 5, 1, PeClass::kSoftmax));
  EXPECT_THROW(schedule(h, PePool::from_counts({{PeClass::kPeA, 1}})), UnschedulableError);
}

TEST(Schedule, RandomDagsValidAndDeterministic) {
  Rng rng(73);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = rng.integer(1, 12);
    ComputeGraph g;
    std::map<PeClass, int> counts;
    for (std::size_t i = 0; i < n; ++i) {
      auto l = layer("n" + std::to_string(i), rng.integer(1, 100), 1.0,
                     kAllPeClasses[rng.integer(0, 4)]);
      counts[l.pe_class] = static_cast<int>(rng.integer(1, 3));
      g.add_node(l);
    }
    for (std::size_t u = 0; u < n; ++u) {
      for (std::size_t v = u + 1; v < n; ++v) {
        if (rng.coin(0.3)) g.add_edge(u, v);
      }
    }
    const auto pool = PePool::from_counts(counts);
    const std::uint64_t gran = rng.integer(1, 3);
    const auto s = schedule(g, pool, {gran});
    const auto durations = stage_durations(g.nodes(), gran);
    const auto problem = verify::check_schedule(g, pool, durations, s);
    ASSERT_FALSE(problem) << *problem;
    EXPECT_LE(s.makespan(), verify::serial_makespan(durations));
    EXPECT_EQ(s, schedule(g, pool, {gran}));
  }
}

TEST(Checker, DetectsViolations) {
  ComputeGraph g;
  g.add_node(layer("A", 1));
  g.add_node(layer("B", 1));
  g.add_edge(0, 1);
  const auto pool = PePool::from_counts({{PeClass::kPeA, 2}});
  Schedule bad;
  bad.entries = {{0, 1, 1, 0, "PE_A1"}, {1, 1, 1, 1, "PE_A2"}};
  EXPECT_TRUE(verify::check_schedule(g, pool, {1, 1}, bad));
  Schedule overlap;
  ComputeGraph free;
  free.add_node(layer("A", 1));
  free.add_node(layer("B", 1));
  overlap.entries = {{0, 1, 1, 0, "PE_A1"}, {1, 1, 1, 0, "PE_A1"}};
  EXPECT_TRUE(verify::check_schedule(free, pool, {1, 1}, overlap));
}

TEST(Graph, EncoderStructure) {
  auto cfg = model::preset("shallow");
  cfg.num_heads = 1;
  cfg.d_k = cfg.d_v = 200;
  const auto g = build_encoder_graph(cfg, 10);
  EXPECT_EQ(g.size(), 3u + 3u + 1u + 1u + 3u);
  EXPECT_EQ(g.pipeline_stages().at("encoder"), 7);
  const auto order = g.topological_order();
  EXPECT_EQ(g.node(order.back()).name, "enc.add_norm2");
}

TEST(Graph, ProjectionOpCounts) {
  const auto cfg = model::preset("shallow");
  const auto g = build_encoder_graph(cfg, 1);
  // Fused over the four heads: 4 x (200 x 50) MACs per position.
  EXPECT_EQ(g.node(*g.find("enc.q_proj")).n_op, 4u * 200 * 50);
  EXPECT_EQ(g.node(*g.find("enc.head0.qk")).n_op, 50u);
}

TEST(Graph, ClosedFormOpCounts) {
  const auto cfg = model::preset("micro");
  const std::size_t s = 5, d = cfg.d_model, f = cfg.d_ffn;
  const auto g = build_encoder_graph(cfg, s);
  auto ops = [&](const char* n) { return g.node(*g.find(n)).n_op; };
  EXPECT_EQ(ops("enc.k_proj"), s * d * d);
  EXPECT_EQ(ops("enc.head1.softmax"), s * s);
  EXPECT_EQ(ops("enc.head1.av"), s * s * cfg.d_v);
  EXPECT_EQ(ops("enc.out_proj"), s * d * d);
  EXPECT_EQ(ops("enc.ffn1"), s * f * d);
  EXPECT_EQ(ops("enc.ffn2"), s * d * f);
  EXPECT_EQ(ops("enc.add_norm1"), s * d);

  const auto bg = build_encoder_graph(cfg, s, {8});
  // f*g*b MACs plus (f+g)*b*log2(b) butterflies per position.
  EXPECT_EQ(bg.node(*bg.find("enc.ffn1")).n_op, s * (8 * 2 * 8 + (8 + 2) * 8 * 3));
  EXPECT_EQ(bg.node(*bg.find("enc.ffn1")).pe_class, PeClass::kPeFft);
}

TEST(Graph, ShallowRatioNearFour) {
  const auto cfg = model::preset("shallow");
  const auto g = build_encoder_graph(cfg, cfg.d_model);
  const double ratio = static_cast<double>(g.node(*g.find("enc.q_proj")).n_op) /
                       static_cast<double>(g.node(*g.find("enc.head0.qk")).n_op);
  EXPECT_GE(ratio, 3.0);
  EXPECT_LE(ratio, 5.0);
}

TEST(Graph, Decoder) {
  const auto cfg = model::preset("micro");
  const auto enc = build_encoder_graph(cfg, 6);
  const auto dec = build_decoder_graph(cfg, 6);
  const std::size_t attention_block = 3 + 3 * cfg.num_heads + 2;
  EXPECT_EQ(dec.size(), enc.size() + attention_block);
  EXPECT_GT(dec.total_ops(), enc.total_ops());
  bool any_masked = false;
  for (const auto& n : dec.nodes()) any_masked = any_masked || n.masked;
  EXPECT_TRUE(any_masked);
  EXPECT_TRUE(dec.node(*dec.find("dec.self.head0.qk")).masked);
  EXPECT_FALSE(dec.node(*dec.find("dec.cross.head0.qk")).masked);

  auto enc_only = cfg;
  enc_only.structure = nn::Structure::kEncoderOnly;
  EXPECT_THROW(build_decoder_graph(enc_only, 6), DomainError);
  EXPECT_EQ(build_model_graph(enc_only, 6).size(), enc.size());
  EXPECT_EQ(build_model_graph(cfg, 6).size(), enc.size() + dec.size());
}

DeviceConfig big_device() {
  DeviceConfig d;
  d.limits = {4'000'000, 2'000'000, 12'000, 4'000};
  d.misc = {1000, 1000, 0, 10};
  d.replicas = 2;
  return d;
}

TEST(Report, BatchScaling) {
  const auto cfg = model::preset("micro");
  auto g = build_model_graph(cfg, 8);
  const auto plan = allocate(make_plan(g, big_device(), 1));
  g.nodes() = plan.layers;
  const auto pool = default_pool(g);
  const auto s = schedule(g, pool);
  const auto r1 = report(plan, s, 1);
  const auto r16 = report(plan, s, 16);
  EXPECT_EQ(r1.throughput, r16.throughput);
  EXPECT_GT(r16.batch_latency_seconds, r1.batch_latency_seconds);
  EXPECT_GT(r16.batch_throughput, r1.batch_throughput);
  EXPECT_LT(r16.batch_throughput, r16.throughput);
  EXPECT_EQ(r1.resource_totals, resource_usage(plan));
  EXPECT_FALSE(verify::check_report_arithmetic(r1));
  EXPECT_FALSE(verify::check_report_arithmetic(r16));
}

TEST(Report, JsonRoundTrip) {
  const auto cfg = model::preset("shallow");
  auto g = build_model_graph(cfg, 32, {16});
  const auto plan = allocate(make_plan(g, big_device(), 16));
  g.nodes() = plan.layers;
  const auto pool = default_pool(g);
  auto r = report(plan, schedule(g, pool, {3}), 4, 3);
  r.seed = 1234;
  const auto text = to_json(r).dump();
  EXPECT_EQ(perf_report_from_json(nlohmann::json::parse(text)), r);
}

TEST(Report, GanttShowsSevenEncoderStages) {
  const auto cfg = model::preset("shallow");
  auto g = build_model_graph(cfg, 16);
  const auto plan = make_plan(g, big_device(), 1);
  const auto pool = default_pool(g);
  const auto text = render_gantt(plan.layers, pool, schedule(g, pool));
  EXPECT_NE(text.find("encoder=7"), std::string::npos);
  EXPECT_NE(text.find("PE_A1"), std::string::npos);
}

TEST(DeviceJson, RoundTrip) {
  auto d = big_device();
  d.pe_profiles[PeClass::kPeFft] = {24.0, {1, 2, 3, 4}};
  d.pe_pool[PeClass::kAdder] = 2;
  EXPECT_EQ(device_config_from_json(to_json(d)), d);
  EXPECT_THROW(device_config_from_json(nlohmann::json::parse("{}")), ValidationError);
}

}  // namespace
}  // namespace blockcirc::sched
