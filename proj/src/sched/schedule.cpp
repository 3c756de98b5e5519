#include <algorithm>
#include <set>

#include "blockcirc/error.hpp"
#include "blockcirc/sched.hpp"

namespace blockcirc::sched {

std::int64_t Schedule::makespan() const noexcept {
  std::int64_t last = 0;
  for (const auto& e : entries) last = std::max(last, e.end_stage);
  return last;
}

std::uint64_t stage_cycles(const std::vector<LayerProfile>& layers, std::uint64_t granularity) {
  if (granularity == 0) throw DomainError("schedule granularity must be >= 1");
  std::uint64_t slowest = 0;
  for (const auto& l : layers) slowest = std::max(slowest, layer_time(l));
  return std::max<std::uint64_t>(1, (slowest + granularity - 1) / granularity);
}

std::vector<std::uint64_t> stage_durations(const std::vector<LayerProfile>& layers,
                                           std::uint64_t granularity) {
  const std::uint64_t bucket = stage_cycles(layers, granularity);
  std::vector<std::uint64_t> out;
  out.reserve(layers.size());
  for (const auto& l : layers) {
    out.push_back(std::max<std::uint64_t>(1, (layer_time(l) + bucket - 1) / bucket));
  }
  return out;
}

Schedule schedule(const ComputeGraph& g, const PePool& pool, const ScheduleOptions& opts) {
  return schedule_with_durations(g, pool, stage_durations(g.nodes(), opts.granularity));
}

// Differences from the published pseudo-code, which this otherwise follows:
//  - the loop runs while the ready queue OR the executing list is non-empty
//    (the printed `Q != {} and E != {}` never starts, since E begins empty);
//  - the unused `P = Q[0]` assignment is dropped;
//  - successors enter the ready queue when their last predecessor retires,
//    not when it is issued, so no layer starts before its inputs exist;
//  - entries record both the issue and the retire stage.
Schedule schedule_with_durations(const ComputeGraph& g, const PePool& pool,
                                 const std::vector<std::uint64_t>& durations) {
  if (durations.size() != g.size()) {
    throw ShapeError("schedule: " + std::to_string(durations.size()) + " durations for " +
                     std::to_string(g.size()) + " nodes");
  }
  const std::vector<std::size_t> order = g.topological_order();
  for (const auto& node : g.nodes()) {
    if (pool.count(node.pe_class) == 0) {
      throw UnschedulableError("no " + to_string(node.pe_class) + " unit available for layer " +
                               node.name);
    }
  }
  for (std::uint64_t d : durations) {
    if (d == 0) throw DomainError("schedule: durations must be >= 1 stage");
  }

  std::vector<std::size_t> priority(g.size());
  for (std::size_t i = 0; i < order.size(); ++i) priority[order[i]] = i;

  std::vector<std::size_t> pending(g.size());
  std::set<std::pair<std::size_t, std::size_t>> ready;  // (priority, node)
  for (std::size_t v = 0; v < g.size(); ++v) {
    pending[v] = g.predecessors(v).size();
    if (pending[v] == 0) ready.emplace(priority[v], v);
  }

  const auto& units = pool.units();
  std::vector<bool> busy(units.size(), false);
  struct Running {
    std::size_t node;
    std::size_t unit;
    std::int64_t end;
  };
  std::vector<Running> running;

  Schedule result;
  std::int64_t stage = 0;
  while (!ready.empty() || !running.empty()) {
    ++stage;
    for (auto it = ready.begin(); it != ready.end();) {
      const std::size_t layer = it->second;
      const PeClass cls = g.node(layer).pe_class;
      std::size_t unit = units.size();
      for (std::size_t u = 0; u < units.size(); ++u) {
        if (!busy[u] && units[u].pe_class == cls) {
          unit = u;
          break;
        }
      }
      if (unit == units.size()) {
        ++it;
        continue;
      }
      busy[unit] = true;
      const auto end = stage + static_cast<std::int64_t>(durations[layer]) - 1;
      running.push_back({layer, unit, end});
      result.entries.push_back({layer, stage, end, unit, units[unit].name()});
      it = ready.erase(it);
    }

    for (auto it = running.begin(); it != running.end();) {
      if (it->end != stage) {
        ++it;
        continue;
      }
      busy[it->unit] = false;
      for (std::size_t succ : g.successors(it->node)) {
        if (--pending[succ] == 0) ready.emplace(priority[succ], succ);
      }
      it = running.erase(it);
    }
  }
  return result;
}

}  // namespace blockcirc::sched
