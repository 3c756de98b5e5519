#include <algorithm>
#include <map>

#include "blockcirc/error.hpp"
#include "blockcirc/sched.hpp"

namespace blockcirc::sched {

PeProfile default_pe_profile(PeClass c, std::size_t block_size) {
  switch (c) {
    case PeClass::kPeA:
    case PeClass::kPeB:
      return {1.0, {120, 90, 1, 0}};
    case PeClass::kPeFft: {
      // One block transform's worth of butterflies per cycle.
      double butterflies = 1.0;
      if (block_size > 1) {
        std::size_t log2b = 0;
        while ((std::size_t{1} << log2b) < block_size) ++log2b;
        butterflies = static_cast<double>(block_size * log2b);
      }
      return {butterflies, {2000, 1500, 8, 1}};
    }
    case PeClass::kAdder:
      return {1.0, {64, 64, 0, 0}};
    case PeClass::kSoftmax:
      return {1.0, {300, 400, 2, 0}};
  }
  throw DomainError("unknown PE class");
}

DevicePlan make_plan(const ComputeGraph& g, const DeviceConfig& device, std::size_t block_size) {
  if (!(device.clock_mhz > 0.0)) throw ValidationError("device clock_mhz must be positive");
  if (device.replicas == 0) throw ValidationError("device replicas must be >= 1");
  DevicePlan plan;
  plan.device_limits = device.limits;
  plan.replicas = device.replicas;
  plan.misc = device.misc;
  plan.clock_hz = device.clock_mhz * 1e6;
  plan.layers = g.nodes();
  for (auto& l : plan.layers) {
    const auto it = device.pe_profiles.find(l.pe_class);
    const PeProfile profile =
        it != device.pe_profiles.end() ? it->second : default_pe_profile(l.pe_class, block_size);
    l.base_throughput = profile.base_throughput;
    l.base_resources = profile.resources;
    l.alloc_factor = 1;
  }
  return plan;
}

PePool default_pool(const ComputeGraph& g) {
  std::map<std::tuple<std::string, int, PeClass>, int> per_stage;
  for (const auto& n : g.nodes()) ++per_stage[{n.group, n.pipeline_stage, n.pe_class}];
  std::map<PeClass, int> counts;
  for (const auto& [key, count] : per_stage) {
    int& c = counts[std::get<2>(key)];
    c = std::max(c, count);
  }
  return PePool::from_counts(counts);
}

}  // namespace blockcirc::sched
