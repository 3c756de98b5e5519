#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "blockcirc/error.hpp"
#include "blockcirc/verify.hpp"

namespace blockcirc::verify {

std::vector<std::complex<double>> naive_dft(const std::vector<std::complex<double>>& x,
                                            bool inverse) {
  const std::size_t n = x.size();
  const double sign = inverse ? 1.0 : -1.0;
  std::vector<std::complex<double>> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    std::complex<double> acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      // Reduce jk mod n first so the angle stays small and exact.
      const double angle = sign * 2.0 * std::numbers::pi * static_cast<double>((j * k) % n) /
                           static_cast<double>(n);
      acc += x[j] * std::complex<double>(std::cos(angle), std::sin(angle));
    }
    out[k] = inverse ? acc / static_cast<double>(n) : acc;
  }
  return out;
}

Tensor expand_by_index(const BlockCirculantMatrix& m) {
  const std::size_t b = m.block_size();
  Tensor out({m.rows(), m.cols()});
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) {
      const auto p = m.index_vector(r / b, c / b);
      const std::size_t lr = r % b;
      const std::size_t lc = c % b;
      out.at(r, c) = p[(lr + b - lc) % b];
    }
  }
  return out;
}

Tensor attention_oracle(const Tensor& q, const Tensor& k, const Tensor& v, bool causal) {
  const std::size_t s = q.rows();
  const std::size_t t = k.rows();
  const std::size_t dk = q.cols();
  const std::size_t dv = v.cols();
  Tensor out({s, dv});
  for (std::size_t i = 0; i < s; ++i) {
    std::vector<double> score(t, 0.0);
    double peak = -INFINITY;
    for (std::size_t j = 0; j < t; ++j) {
      if (causal && j > i) continue;
      double dot = 0.0;
      for (std::size_t c = 0; c < dk; ++c) dot += q.at(i, c) * k.at(j, c);
      score[j] = dot / std::sqrt(static_cast<double>(dk));
      peak = std::max(peak, score[j]);
    }
    double total = 0.0;
    std::vector<double> weight(t, 0.0);
    for (std::size_t j = 0; j < t; ++j) {
      if (causal && j > i) continue;
      weight[j] = std::exp(score[j] - peak);
      total += weight[j];
    }
    for (std::size_t c = 0; c < dv; ++c) {
      double acc = 0.0;
      for (std::size_t j = 0; j < t; ++j) acc += weight[j] / total * v.at(j, c);
      out.at(i, c) = acc;
    }
  }
  return out;
}

PwlError pwl_exp_grid_error(int segments, double lo, double hi, std::size_t samples) {
  // Rebuilt from first principles rather than through PiecewiseLinearExp.
  const double width = (hi - lo) / segments;
  PwlError err;
  for (std::size_t i = 0; i < samples; ++i) {
    const double z = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(samples - 1);
    auto seg = static_cast<int>(std::floor((z - lo) / width));
    seg = std::clamp(seg, 0, segments - 1);
    const double a = lo + seg * width;
    const double b = a + width;
    const double t = (z - a) / width;
    const double approx = (1.0 - t) * std::exp(a) + t * std::exp(b);
    const double exact = std::exp(z);
    err.max_abs = std::max(err.max_abs, std::abs(approx - exact));
    err.max_rel = std::max(err.max_rel, std::abs(approx - exact) / exact);
  }
  return err;
}

double pwl_softmax_bound(int segments, double lo, double hi) {
  const double rho = pwl_exp_grid_error(segments, lo, hi).max_rel;
  return 2.0 * rho / (1.0 - rho);
}

std::optional<std::string> check_schedule(const sched::ComputeGraph& g,
                                          const sched::PePool& pool,
                                          const std::vector<std::uint64_t>& durations,
                                          const sched::Schedule& s) {
  std::ostringstream why;
  const std::size_t n = g.size();
  std::vector<int> seen(n, 0);
  std::vector<const sched::ScheduleEntry*> by_node(n, nullptr);
  for (const auto& e : s.entries) {
    if (e.layer >= n) return "entry names unknown layer " + std::to_string(e.layer);
    if (++seen[e.layer] > 1) return "layer " + std::to_string(e.layer) + " scheduled twice";
    if (e.pe >= pool.units().size()) return "entry uses unknown PE " + std::to_string(e.pe);
    if (pool.units()[e.pe].pe_class != g.node(e.layer).pe_class) {
      return "layer " + g.node(e.layer).name + " placed on wrong PE class";
    }
    if (e.start_stage < 1 ||
        e.end_stage - e.start_stage + 1 != static_cast<std::int64_t>(durations[e.layer])) {
      return "layer " + g.node(e.layer).name + " has the wrong stage interval";
    }
    by_node[e.layer] = &e;
  }
  for (std::size_t v = 0; v < n; ++v) {
    if (!by_node[v]) return "layer " + g.node(v).name + " never scheduled";
  }
  for (const auto& [u, v] : g.edges()) {
    if (!(by_node[u]->end_stage < by_node[v]->start_stage)) {
      why << "edge " << g.node(u).name << " -> " << g.node(v).name << " violated: "
          << by_node[u]->end_stage << " >= " << by_node[v]->start_stage;
      return why.str();
    }
  }
  for (std::size_t a = 0; a < s.entries.size(); ++a) {
    for (std::size_t b = a + 1; b < s.entries.size(); ++b) {
      const auto& x = s.entries[a];
      const auto& y = s.entries[b];
      if (x.pe == y.pe && x.start_stage <= y.end_stage && y.start_stage <= x.end_stage) {
        return "PE " + x.pe_name + " double-booked by layers " + std::to_string(x.layer) +
               " and " + std::to_string(y.layer);
      }
    }
  }
  return std::nullopt;
}

std::int64_t serial_makespan(const std::vector<std::uint64_t>& durations) {
  std::int64_t total = 0;
  for (auto d : durations) total += static_cast<std::int64_t>(d);
  return total;
}

namespace {

std::uint64_t oracle_time(const sched::LayerProfile& l, std::uint64_t k) {
  if (l.n_op == 0) return 0;
  const long double denom = static_cast<long double>(l.base_throughput) * k;
  const auto f = static_cast<std::uint64_t>(l.base_throughput);
  if (static_cast<double>(f) == l.base_throughput) return (l.n_op + f * k - 1) / (f * k);
  return static_cast<std::uint64_t>(std::ceil(static_cast<long double>(l.n_op) / denom));
}

}  // namespace

std::optional<BruteForceResult> brute_force_allocation(const sched::DevicePlan& plan,
                                                       std::size_t limit) {
  const std::size_t n = plan.layers.size();
  // Per-replica budget left after misc.
  std::array<std::uint64_t, 4> budget{};
  for (std::size_t i = 0; i < 4; ++i) {
    const std::uint64_t lim = sched::component(plan.device_limits, i);
    const std::uint64_t misc = sched::component(plan.misc, i);
    if (misc > lim) return BruteForceResult{0, 0};
    budget[i] = lim - misc;
  }
  BruteForceResult best{UINT64_MAX, 0};
  std::vector<std::uint64_t> k(n, 1);
  std::array<std::uint64_t, 4> used{};
  bool overflow = false;

  std::function<void(std::size_t, std::uint64_t)> visit = [&](std::size_t j,
                                                             std::uint64_t worst) {
    if (overflow) return;
    if (j == n) {
      if (++best.feasible_vectors > limit) overflow = true;
      best.best_max_time = std::min(best.best_max_time, worst);
      return;
    }
    const auto& l = plan.layers[j];
    // Past this factor the layer cannot get any faster.
    const std::uint64_t cap = std::max<std::uint64_t>(1, oracle_time(l, 1));
    for (std::uint64_t kj = 1; kj <= cap; ++kj) {
      bool fits = true;
      for (std::size_t i = 0; i < 4; ++i) {
        const std::uint64_t add = kj * sched::component(l.base_resources, i);
        if (plan.replicas * (used[i] + add) > budget[i]) fits = false;
      }
      if (!fits) break;
      for (std::size_t i = 0; i < 4; ++i) used[i] += kj * sched::component(l.base_resources, i);
      visit(j + 1, std::max(worst, oracle_time(l, kj)));
      for (std::size_t i = 0; i < 4; ++i) used[i] -= kj * sched::component(l.base_resources, i);
      if (overflow) return;
    }
  };
  visit(0, 0);
  if (overflow) return std::nullopt;
  return best;
}

std::optional<std::string> check_report_arithmetic(const sched::PerfReport& r) {
  auto fail = [](const std::string& field, const auto& got, const auto& want) {
    std::ostringstream os;
    os.precision(17);
    os << field << ": report " << got << ", recomputed " << want;
    return std::optional<std::string>(os.str());
  };
  std::uint64_t worst = 0;
  sched::ResourceVector per_replica;
  for (const auto& l : r.layers) {
    sched::LayerProfile p;
    p.n_op = l.n_op;
    p.base_throughput = l.base_throughput;
    const std::uint64_t t = oracle_time(p, l.alloc_factor);
    if (t != l.time_cycles) return fail(l.name + ".time_cycles", l.time_cycles, t);
    worst = std::max(worst, t);
    per_replica += l.resources;
  }
  const sched::ResourceVector totals = r.replicas * per_replica + r.misc;
  if (!(totals == r.resource_totals)) return std::optional<std::string>("resource_totals mismatch");
  if (r.layer_count != r.layers.size()) return fail("layer_count", r.layer_count, r.layers.size());
  if (worst != r.max_time_cycles) return fail("max_time_cycles", r.max_time_cycles, worst);

  const std::uint64_t cycles_per_inference = r.layer_count * worst;
  const double tp = r.clock_hz / static_cast<double>(cycles_per_inference);
  if (tp != r.throughput) return fail("throughput", r.throughput, tp);

  const std::uint64_t stage = std::max<std::uint64_t>(1, (worst + r.granularity - 1) / r.granularity);
  if (stage != r.stage_cycles) return fail("stage_cycles", r.stage_cycles, stage);
  std::int64_t last = 0;
  for (const auto& e : r.schedule) last = std::max(last, e.end_stage);
  if (last != r.makespan_stages) return fail("makespan_stages", r.makespan_stages, last);
  const std::uint64_t span = static_cast<std::uint64_t>(last) * stage;
  if (span != r.makespan_cycles) return fail("makespan_cycles", r.makespan_cycles, span);
  if (static_cast<double>(span) / r.clock_hz != r.makespan_seconds) {
    return fail("makespan_seconds", r.makespan_seconds, static_cast<double>(span) / r.clock_hz);
  }
  const std::uint64_t latency = span + r.batch * cycles_per_inference;
  if (latency != r.batch_latency_cycles) {
    return fail("batch_latency_cycles", r.batch_latency_cycles, latency);
  }
  if (static_cast<double>(latency) / r.clock_hz != r.batch_latency_seconds) {
    return fail("batch_latency_seconds", r.batch_latency_seconds,
                static_cast<double>(latency) / r.clock_hz);
  }
  const double btp = static_cast<double>(r.batch) * r.clock_hz / static_cast<double>(latency);
  if (btp != r.batch_throughput) return fail("batch_throughput", r.batch_throughput, btp);
  return std::nullopt;
}

}  // namespace blockcirc::verify
