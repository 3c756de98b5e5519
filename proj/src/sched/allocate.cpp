#include <algorithm>
#include <cmath>
#include <numeric>

#include "blockcirc/error.hpp"
#include "blockcirc/sched.hpp"

namespace blockcirc::sched {

ResourceVector resource_usage(const DevicePlan& plan) {
  ResourceVector per_replica;
  for (const auto& l : plan.layers) per_replica += l.alloc_factor * l.base_resources;
  return plan.replicas * per_replica + plan.misc;
}

bool feasible(const DevicePlan& plan) {
  return resource_usage(plan).fits_within(plan.device_limits);
}

std::vector<std::string> resource_deficits(const DevicePlan& plan) {
  const ResourceVector used = resource_usage(plan);
  std::vector<std::string> out;
  for (std::size_t i = 0; i < kResourceNames.size(); ++i) {
    const std::uint64_t need = component(used, i);
    const std::uint64_t have = component(plan.device_limits, i);
    if (need > have) {
      out.push_back(std::string(kResourceNames[i]) + ": needs " + std::to_string(need) +
                    ", limit " + std::to_string(have) + " (short by " +
                    std::to_string(need - have) + ")");
    }
  }
  return out;
}

void require_feasible(const DevicePlan& plan) {
  const auto deficits = resource_deficits(plan);
  if (deficits.empty()) return;
  std::string msg = "device resources exceeded:";
  for (const auto& d : deficits) msg += "\n  " + d;
  throw FeasibilityError(msg);
}

std::uint64_t max_layer_time(const DevicePlan& plan) {
  std::uint64_t worst = 0;
  for (const auto& l : plan.layers) worst = std::max(worst, layer_time(l));
  return worst;
}

double throughput(const DevicePlan& plan) {
  if (plan.layers.empty()) throw DomainError("throughput of a plan without layers");
  require_feasible(plan);
  const std::uint64_t slowest = max_layer_time(plan);
  if (slowest == 0) throw DomainError("throughput undefined: every layer has zero work");
  const double n = static_cast<double>(plan.layers.size());
  return plan.clock_hz / (n * static_cast<double>(slowest));
}

namespace {

std::size_t argmax_time(const std::vector<std::uint64_t>& times) {
  // max_element returns the first maximum, i.e. the lowest index on ties.
  return static_cast<std::size_t>(std::max_element(times.begin(), times.end()) - times.begin());
}

// Smallest allocation factor above l.alloc_factor whose time is <= target.
std::uint64_t factor_for_time(const LayerProfile& l, std::uint64_t target) {
  const std::uint64_t current = l.alloc_factor;
  const double estimate =
      std::ceil(static_cast<double>(l.n_op) / (l.base_throughput * static_cast<double>(target)));
  std::uint64_t k = current + 1;
  if (estimate > static_cast<double>(k) && estimate < 0x1p62) {
    k = static_cast<std::uint64_t>(estimate);
  }
  while (layer_time(l.n_op, l.base_throughput, k) > target) ++k;
  while (k - 1 > current && layer_time(l.n_op, l.base_throughput, k - 1) <= target) --k;
  return k;
}

bool uses_short_resource(const LayerProfile& l, const DevicePlan& plan) {
  const ResourceVector used = resource_usage(plan);
  for (std::size_t i = 0; i < kResourceNames.size(); ++i) {
    if (component(used, i) > component(plan.device_limits, i) &&
        component(l.base_resources, i) > 0) {
      return true;
    }
  }
  return false;
}

}  // namespace

// Each committed move lowers the slowest layer's time below the current
// maximum M while every layer it takes resources from stays strictly below
// M, so (max T, number of layers at max T) decreases lexicographically and
// the loop terminates.
DevicePlan allocate(DevicePlan plan) {
  if (plan.layers.empty()) throw DomainError("allocate: plan has no layers");
  for (const auto& l : plan.layers) layer_time(l);  // validates K and F
  require_feasible(plan);

  const std::size_t n = plan.layers.size();
  while (true) {
    std::vector<std::uint64_t> times(n);
    for (std::size_t j = 0; j < n; ++j) times[j] = layer_time(plan.layers[j]);
    const std::size_t slowest = argmax_time(times);
    const std::uint64_t max_time = times[slowest];
    if (max_time <= 1) break;  // T >= 1 whenever there is work

    // (a) grow the slowest layer just enough to lower its time.
    DevicePlan candidate = plan;
    candidate.layers[slowest].alloc_factor = factor_for_time(plan.layers[slowest], max_time - 1);
    if (feasible(candidate)) {
      plan = std::move(candidate);
      continue;
    }

    // (b) reclaim units from the fastest layers, fastest first, as long as
    // each stays strictly faster than the current slowest layer.
    std::vector<std::size_t> donors(n);
    std::iota(donors.begin(), donors.end(), std::size_t{0});
    std::stable_sort(donors.begin(), donors.end(),
                     [&](std::size_t a, std::size_t b) { return times[a] < times[b]; });
    for (std::size_t d : donors) {
      if (d == slowest) continue;
      LayerProfile& donor = candidate.layers[d];
      while (donor.alloc_factor > 1 && !feasible(candidate) &&
             uses_short_resource(donor, candidate) &&
             layer_time(donor.n_op, donor.base_throughput, donor.alloc_factor - 1) < max_time) {
        --donor.alloc_factor;
      }
      if (feasible(candidate)) break;
    }
    if (!feasible(candidate)) break;
    plan = std::move(candidate);
  }
  return plan;
}

}  // namespace blockcirc::sched
