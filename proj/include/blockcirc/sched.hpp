#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "blockcirc/nn.hpp"

namespace blockcirc::sched {

// On-chip resource counts. Componentwise <= defines feasibility.
struct ResourceVector {
  std::uint64_t ff = 0;
  std::uint64_t lut = 0;
  std::uint64_t dsp = 0;
  std::uint64_t bram = 0;

  ResourceVector& operator+=(const ResourceVector& o);
  friend ResourceVector operator+(ResourceVector a, const ResourceVector& b) { return a += b; }
  friend ResourceVector operator*(std::uint64_t k, const ResourceVector& r);
  bool fits_within(const ResourceVector& limit) const noexcept;
  bool operator==(const ResourceVector&) const = default;
};

inline constexpr std::array<const char*, 4> kResourceNames = {"ff", "lut", "dsp", "bram"};
std::uint64_t component(const ResourceVector& r, std::size_t i);

enum class PeClass : std::uint8_t { kPeA, kPeB, kPeFft, kAdder, kSoftmax };
inline constexpr std::array<PeClass, 5> kAllPeClasses = {
    PeClass::kPeA, PeClass::kPeB, PeClass::kPeFft, PeClass::kAdder, PeClass::kSoftmax};

std::string to_string(PeClass c);
PeClass pe_class_from_string(const std::string& name);

struct LayerProfile {
  std::string name;
  std::uint64_t n_op = 0;               // operations (multiply-accumulates)
  double base_throughput = 1.0;         // ops per cycle with one resource unit
  ResourceVector base_resources;        // cost of one resource unit
  std::uint64_t alloc_factor = 1;       // resource units granted
  PeClass pe_class = PeClass::kPeA;
  std::string group;                    // "encoder" or "decoder"
  int pipeline_stage = 0;               // coarse stage label within the group
  bool masked = false;                  // masked self-attention node

  bool operator==(const LayerProfile&) const = default;
};

// ceil(n_op / (base_throughput * k)) in cycles. Throws DomainError for k == 0
// or a non-positive throughput.
std::uint64_t layer_time(std::uint64_t n_op, double base_throughput, std::uint64_t k);
inline std::uint64_t layer_time(const LayerProfile& l) {
  return layer_time(l.n_op, l.base_throughput, l.alloc_factor);
}

// Directed acyclic graph of layer operations. Node ids are insertion indices.
class ComputeGraph {
 public:
  std::size_t add_node(LayerProfile profile);
  void add_edge(std::size_t from, std::size_t to);

  std::size_t size() const noexcept { return nodes_.size(); }
  const std::vector<LayerProfile>& nodes() const noexcept { return nodes_; }
  std::vector<LayerProfile>& nodes() noexcept { return nodes_; }
  const LayerProfile& node(std::size_t id) const { return nodes_.at(id); }
  const std::vector<std::pair<std::size_t, std::size_t>>& edges() const noexcept { return edges_; }
  const std::vector<std::size_t>& successors(std::size_t id) const { return succ_.at(id); }
  const std::vector<std::size_t>& predecessors(std::size_t id) const { return pred_.at(id); }

  std::optional<std::size_t> find(const std::string& name) const;

  // Kahn's algorithm, lowest ready id first. Throws CycleError naming a back
  // edge when the graph has a cycle.
  std::vector<std::size_t> topological_order() const;

  std::uint64_t total_ops() const;

  // Number of distinct pipeline-stage labels per group.
  std::map<std::string, int> pipeline_stages() const;

 private:
  std::vector<LayerProfile> nodes_;
  std::vector<std::pair<std::size_t, std::size_t>> edges_;
  std::vector<std::vector<std::size_t>> succ_;
  std::vector<std::vector<std::size_t>> pred_;
};

struct PeUnit {
  PeClass pe_class;
  int instance;  // 1-based within its class
  std::string name() const;  // e.g. "PE_A2"
};

class PePool {
 public:
  PePool() = default;
  static PePool from_counts(const std::map<PeClass, int>& counts);

  const std::vector<PeUnit>& units() const noexcept { return units_; }
  int count(PeClass c) const;

 private:
  std::vector<PeUnit> units_;
};

struct ScheduleEntry {
  std::size_t layer = 0;
  std::int64_t start_stage = 0;
  std::int64_t end_stage = 0;
  std::size_t pe = 0;  // index into PePool::units()
  std::string pe_name;

  bool operator==(const ScheduleEntry&) const = default;
};

struct Schedule {
  std::vector<ScheduleEntry> entries;  // in issue order

  std::int64_t makespan() const noexcept;
  bool operator==(const Schedule&) const = default;
};

struct ScheduleOptions {
  // Stages per slowest layer. With 1, every layer occupies exactly one stage.
  std::uint64_t granularity = 1;
};

// Cycles represented by one stage: ceil(max_j T_j / granularity), at least 1.
std::uint64_t stage_cycles(const std::vector<LayerProfile>& layers, std::uint64_t granularity);

// Per-node duration in stages: max(1, ceil(T_j / stage_cycles)).
std::vector<std::uint64_t> stage_durations(const std::vector<LayerProfile>& layers,
                                           std::uint64_t granularity);

// List scheduling onto processing elements. Stages are numbered from 1.
// Throws CycleError for cyclic graphs and UnschedulableError when a node's
// PE class has no unit in the pool.
Schedule schedule(const ComputeGraph& g, const PePool& pool, const ScheduleOptions& opts = {});
Schedule schedule_with_durations(const ComputeGraph& g, const PePool& pool,
                                 const std::vector<std::uint64_t>& durations);

// ---------------------------------------------------------------------------
// Resource allocation

struct DevicePlan {
  ResourceVector device_limits;
  std::uint64_t replicas = 1;  // encoder/decoder copies sharing the device
  ResourceVector misc;
  double clock_hz = 200e6;
  std::vector<LayerProfile> layers;
};

// replicas * sum_j K_j R_j + misc
ResourceVector resource_usage(const DevicePlan& plan);
bool feasible(const DevicePlan& plan);
// One "<resource>: needs X, limit Y (short by Z)" line per violated component.
std::vector<std::string> resource_deficits(const DevicePlan& plan);
void require_feasible(const DevicePlan& plan);

std::uint64_t max_layer_time(const DevicePlan& plan);

// clock_hz / (n * max_j T_j), n = number of layers. Throws FeasibilityError
// for infeasible plans and DomainError when every layer has zero work.
double throughput(const DevicePlan& plan);

// Greedy slowest-layer allocation with fastest-layer reclamation. The result
// is feasible and its max_j T_j never exceeds the input's.
DevicePlan allocate(DevicePlan plan);

// ---------------------------------------------------------------------------
// Graph construction

struct GraphOptions {
  // Block size of circulant weights; > 1 routes linear layers to PE_FFT.
  std::size_t block_size = 1;
};

ComputeGraph build_encoder_graph(const nn::TransformerConfig& cfg, std::size_t seq_len,
                                 const GraphOptions& opts = {});
// One decoder layer: masked self-attention, encoder-decoder attention whose
// K/V projections read the (external) encoder output, then the FFN. Throws
// DomainError for encoder-only configs.
ComputeGraph build_decoder_graph(const nn::TransformerConfig& cfg, std::size_t seq_len,
                                 const GraphOptions& opts = {});
// One replica: the encoder graph, plus the decoder graph wired to the
// encoder output for encoder-decoder configs.
ComputeGraph build_model_graph(const nn::TransformerConfig& cfg, std::size_t seq_len,
                               const GraphOptions& opts = {});

// MAC count of an s-position linear layer with the given shape and block size.
std::uint64_t linear_ops(std::size_t s, std::size_t out, std::size_t in, std::size_t block_size);

// ---------------------------------------------------------------------------
// Device description

struct PeProfile {
  double base_throughput = 1.0;
  ResourceVector resources;

  bool operator==(const PeProfile&) const = default;
};

struct DeviceConfig {
  ResourceVector limits;
  double clock_mhz = 200.0;
  ResourceVector misc;
  std::uint64_t replicas = 1;
  std::map<PeClass, PeProfile> pe_profiles;
  std::map<PeClass, int> pe_pool;  // empty: derived from the graph

  bool operator==(const DeviceConfig&) const = default;
};

// Profile used for classes the device config leaves out.
PeProfile default_pe_profile(PeClass c, std::size_t block_size);

DevicePlan make_plan(const ComputeGraph& g, const DeviceConfig& device, std::size_t block_size);

// Per class, the largest number of same-class nodes sharing one pipeline stage.
PePool default_pool(const ComputeGraph& g);

}  // namespace blockcirc::sched
