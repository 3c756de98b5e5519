#include "blockcirc/report.hpp"

#include <algorithm>
#include <sstream>

#include "blockcirc/error.hpp"

namespace blockcirc::sched {

using nlohmann::json;

PerfReport report(const DevicePlan& plan, const Schedule& schedule, std::uint64_t batch,
                  std::uint64_t granularity) {
  if (batch == 0) throw DomainError("report: batch must be >= 1");
  PerfReport r;
  for (const auto& l : plan.layers) {
    r.layers.push_back({l.name, to_string(l.pe_class), l.group, l.pipeline_stage, l.masked,
                        l.n_op, l.base_throughput, l.alloc_factor, layer_time(l),
                        l.alloc_factor * l.base_resources});
  }
  {
    std::map<std::string, std::vector<int>> labels;
    for (const auto& l : plan.layers) labels[l.group].push_back(l.pipeline_stage);
    for (auto& [group, v] : labels) {
      std::sort(v.begin(), v.end());
      r.pipeline_stages[group] =
          static_cast<int>(std::unique(v.begin(), v.end()) - v.begin());
    }
  }
  r.layer_count = plan.layers.size();
  r.max_time_cycles = max_layer_time(plan);
  r.clock_hz = plan.clock_hz;
  r.throughput = throughput(plan);

  r.replicas = plan.replicas;
  r.resource_totals = resource_usage(plan);
  r.device_limits = plan.device_limits;
  r.misc = plan.misc;

  r.granularity = granularity;
  r.stage_cycles = stage_cycles(plan.layers, granularity);
  r.makespan_stages = schedule.makespan();
  r.makespan_cycles = static_cast<std::uint64_t>(r.makespan_stages) * r.stage_cycles;
  r.makespan_seconds = static_cast<double>(r.makespan_cycles) / r.clock_hz;

  r.batch = batch;
  r.batch_latency_cycles = r.makespan_cycles + batch * r.layer_count * r.max_time_cycles;
  r.batch_latency_seconds = static_cast<double>(r.batch_latency_cycles) / r.clock_hz;
  r.batch_throughput =
      static_cast<double>(batch) * r.clock_hz / static_cast<double>(r.batch_latency_cycles);
  r.schedule = schedule.entries;
  return r;
}

namespace {

json to_json(const ResourceVector& v) {
  return {{"ff", v.ff}, {"lut", v.lut}, {"dsp", v.dsp}, {"bram", v.bram}};
}

ResourceVector resources_from_json(const json& j) {
  ResourceVector v;
  v.ff = j.value("ff", std::uint64_t{0});
  v.lut = j.value("lut", std::uint64_t{0});
  v.dsp = j.value("dsp", std::uint64_t{0});
  v.bram = j.value("bram", std::uint64_t{0});
  return v;
}

json entry_json(const ScheduleEntry& e) {
  return {{"layer", e.layer},
          {"start_stage", e.start_stage},
          {"end_stage", e.end_stage},
          {"pe_index", e.pe},
          {"pe", e.pe_name}};
}

}  // namespace

json to_json(const PerfReport& r) {
  json layers = json::array();
  for (const auto& l : r.layers) {
    layers.push_back({{"name", l.name},
                      {"pe_class", l.pe_class},
                      {"group", l.group},
                      {"pipeline_stage", l.pipeline_stage},
                      {"masked", l.masked},
                      {"n_op", l.n_op},
                      {"base_throughput", l.base_throughput},
                      {"alloc_factor", l.alloc_factor},
                      {"time_cycles", l.time_cycles},
                      {"resources", to_json(l.resources)}});
  }
  json sched = json::array();
  for (const auto& e : r.schedule) sched.push_back(entry_json(e));
  return {{"seed", r.seed},
          {"layers", layers},
          {"layer_count", r.layer_count},
          {"max_time_cycles", r.max_time_cycles},
          {"clock_hz", r.clock_hz},
          {"throughput", r.throughput},
          {"replicas", r.replicas},
          {"resource_totals", to_json(r.resource_totals)},
          {"device_limits", to_json(r.device_limits)},
          {"misc", to_json(r.misc)},
          {"granularity", r.granularity},
          {"stage_cycles", r.stage_cycles},
          {"makespan_stages", r.makespan_stages},
          {"makespan_cycles", r.makespan_cycles},
          {"makespan_seconds", r.makespan_seconds},
          {"batch", r.batch},
          {"batch_latency_cycles", r.batch_latency_cycles},
          {"batch_latency_seconds", r.batch_latency_seconds},
          {"batch_throughput", r.batch_throughput},
          {"pipeline_stages", r.pipeline_stages},
          {"schedule", sched}};
}

PerfReport perf_report_from_json(const json& j) {
  try {
    PerfReport r;
    r.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& l : j.at("layers")) {
      r.layers.push_back({l.at("name").get<std::string>(), l.at("pe_class").get<std::string>(),
                          l.at("group").get<std::string>(), l.at("pipeline_stage").get<int>(),
                          l.at("masked").get<bool>(), l.at("n_op").get<std::uint64_t>(),
                          l.at("base_throughput").get<double>(),
                          l.at("alloc_factor").get<std::uint64_t>(),
                          l.at("time_cycles").get<std::uint64_t>(),
                          resources_from_json(l.at("resources"))});
    }
    r.layer_count = j.at("layer_count").get<std::uint64_t>();
    r.max_time_cycles = j.at("max_time_cycles").get<std::uint64_t>();
    r.clock_hz = j.at("clock_hz").get<double>();
    r.throughput = j.at("throughput").get<double>();
    r.replicas = j.at("replicas").get<std::uint64_t>();
    r.resource_totals = resources_from_json(j.at("resource_totals"));
    r.device_limits = resources_from_json(j.at("device_limits"));
    r.misc = resources_from_json(j.at("misc"));
    r.granularity = j.at("granularity").get<std::uint64_t>();
    r.stage_cycles = j.at("stage_cycles").get<std::uint64_t>();
    r.makespan_stages = j.at("makespan_stages").get<std::int64_t>();
    r.makespan_cycles = j.at("makespan_cycles").get<std::uint64_t>();
    r.makespan_seconds = j.at("makespan_seconds").get<double>();
    r.batch = j.at("batch").get<std::uint64_t>();
    r.batch_latency_cycles = j.at("batch_latency_cycles").get<std::uint64_t>();
    r.batch_latency_seconds = j.at("batch_latency_seconds").get<double>();
    r.batch_throughput = j.at("batch_throughput").get<double>();
    r.pipeline_stages = j.at("pipeline_stages").get<std::map<std::string, int>>();
    for (const auto& e : j.at("schedule")) {
      r.schedule.push_back({e.at("layer").get<std::size_t>(), e.at("start_stage").get<std::int64_t>(),
                            e.at("end_stage").get<std::int64_t>(), e.at("pe_index").get<std::size_t>(),
                            e.at("pe").get<std::string>()});
    }
    return r;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed performance report: ") + e.what());
  }
}

json to_json(const Schedule& s, const std::vector<LayerProfile>& layers) {
  json out = json::array();
  for (const auto& e : s.entries) {
    json row = entry_json(e);
    row["name"] = e.layer < layers.size() ? layers[e.layer].name : "";
    out.push_back(std::move(row));
  }
  return out;
}

std::string render_gantt(const std::vector<LayerProfile>& layers, const PePool& pool,
                         const Schedule& schedule) {
  const std::int64_t stages = schedule.makespan();
  const auto& units = pool.units();
  std::vector<std::vector<std::string>> grid(units.size(),
                                             std::vector<std::string>(stages, "."));
  for (const auto& e : schedule.entries) {
    for (std::int64_t s = e.start_stage; s <= e.end_stage; ++s) {
      grid.at(e.pe).at(s - 1) = std::to_string(e.layer);
    }
  }
  std::size_t label_width = 5;  // "stage"
  for (const auto& u : units) label_width = std::max(label_width, u.name().size());
  std::size_t cell = std::to_string(std::max<std::int64_t>(stages, 1)).size();
  if (!layers.empty()) cell = std::max(cell, std::to_string(layers.size() - 1).size());
  cell += 1;

  std::ostringstream os;
  auto pad = [](std::ostringstream& o, const std::string& s, std::size_t w) {
    o << std::string(w > s.size() ? w - s.size() : 0, ' ') << s;
  };
  os << "stage";
  os << std::string(label_width - 5, ' ');
  for (std::int64_t s = 1; s <= stages; ++s) pad(os, std::to_string(s), cell);
  os << '\n';
  for (std::size_t u = 0; u < units.size(); ++u) {
    const std::string name = units[u].name();
    os << name << std::string(label_width - name.size(), ' ');
    for (const auto& c : grid[u]) pad(os, c, cell);
    os << '\n';
  }
  os << "\nlegend:\n";
  for (std::size_t i = 0; i < layers.size(); ++i) {
    os << "  " << i << "  " << layers[i].name << "  [" << to_string(layers[i].pe_class)
       << ", " << layers[i].group << " stage " << layers[i].pipeline_stage
       << (layers[i].masked ? ", masked" : "") << "]\n";
  }
  std::map<std::string, std::vector<int>> labels;
  for (const auto& l : layers) labels[l.group].push_back(l.pipeline_stage);
  os << "\npipeline stages:";
  for (auto& [group, v] : labels) {
    std::sort(v.begin(), v.end());
    os << ' ' << group << '=' << (std::unique(v.begin(), v.end()) - v.begin());
  }
  os << '\n';
  return os.str();
}

DeviceConfig device_config_from_json(const json& j) {
  try {
    DeviceConfig d;
    const json& dev = j.at("device");
    d.limits = resources_from_json(dev);
    d.clock_mhz = dev.value("clock_mhz", 200.0);
    if (j.contains("misc")) d.misc = resources_from_json(j.at("misc"));
    d.replicas = j.value("replicas", std::uint64_t{1});
    if (j.contains("pe_profiles")) {
      for (const auto& [name, prof] : j.at("pe_profiles").items()) {
        PeProfile p;
        p.base_throughput = prof.value("base_throughput", 1.0);
        if (prof.contains("resources")) p.resources = resources_from_json(prof.at("resources"));
        d.pe_profiles[pe_class_from_string(name)] = p;
      }
    }
    if (j.contains("pe_pool")) {
      for (const auto& [name, count] : j.at("pe_pool").items()) {
        d.pe_pool[pe_class_from_string(name)] = count.get<int>();
      }
    }
    if (!(d.clock_mhz > 0.0)) throw ValidationError("device.clock_mhz must be positive");
    if (d.replicas == 0) throw ValidationError("replicas must be >= 1");
    return d;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed device config: ") + e.what());
  }
}

json to_json(const DeviceConfig& d) {
  json dev = to_json(d.limits);
  dev["clock_mhz"] = d.clock_mhz;
  json profiles = json::object();
  for (const auto& [cls, p] : d.pe_profiles) {
    profiles[to_string(cls)] = {{"base_throughput", p.base_throughput},
                                {"resources", to_json(p.resources)}};
  }
  json pool = json::object();
  for (const auto& [cls, n] : d.pe_pool) pool[to_string(cls)] = n;
  return {{"device", dev},
          {"misc", to_json(d.misc)},
          {"replicas", d.replicas},
          {"pe_profiles", profiles},
          {"pe_pool", pool}};
}

}  // namespace blockcirc::sched
