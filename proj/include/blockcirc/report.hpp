#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "blockcirc/sched.hpp"
#include "json.hpp"

namespace blockcirc::sched {

struct LayerReport {
  std::string name;
  std::string pe_class;
  std::string group;
  int pipeline_stage = 0;
  bool masked = false;
  std::uint64_t n_op = 0;
  double base_throughput = 0.0;
  std::uint64_t alloc_factor = 0;
  std::uint64_t time_cycles = 0;
  ResourceVector resources;  // alloc_factor * base_resources

  bool operator==(const LayerReport&) const = default;
};

// Performance model of one replica under the pipeline assumptions:
//   throughput            = clock_hz / (n * max_time_cycles)
//   makespan_cycles       = makespan_stages * stage_cycles
//   batch_latency_cycles  = makespan_cycles + batch * n * max_time_cycles
//   batch_latency_seconds = batch_latency_cycles / clock_hz
//   batch_throughput      = batch * clock_hz / batch_latency_cycles
// so batch throughput rises with batch size toward the steady-state bound.
struct PerfReport {
  std::uint64_t seed = 0;
  std::vector<LayerReport> layers;
  std::uint64_t layer_count = 0;
  std::uint64_t max_time_cycles = 0;
  double clock_hz = 0.0;
  double throughput = 0.0;

  std::uint64_t replicas = 1;
  ResourceVector resource_totals;
  ResourceVector device_limits;
  ResourceVector misc;

  std::uint64_t granularity = 1;
  std::uint64_t stage_cycles = 1;
  std::int64_t makespan_stages = 0;
  std::uint64_t makespan_cycles = 0;
  double makespan_seconds = 0.0;

  std::uint64_t batch = 1;
  std::uint64_t batch_latency_cycles = 0;
  double batch_latency_seconds = 0.0;
  double batch_throughput = 0.0;

  std::map<std::string, int> pipeline_stages;
  std::vector<ScheduleEntry> schedule;

  bool operator==(const PerfReport&) const = default;
};

PerfReport report(const DevicePlan& plan, const Schedule& schedule, std::uint64_t batch,
                  std::uint64_t granularity = 1);

nlohmann::json to_json(const PerfReport& r);
PerfReport perf_report_from_json(const nlohmann::json& j);

nlohmann::json to_json(const Schedule& s, const std::vector<LayerProfile>& layers);

// One row per PE, one column per stage; cells hold node ids, '.' when idle.
std::string render_gantt(const std::vector<LayerProfile>& layers, const PePool& pool,
                         const Schedule& schedule);

DeviceConfig device_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const DeviceConfig& d);

}  // namespace blockcirc::sched
