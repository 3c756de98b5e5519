#include <algorithm>
#include <cmath>
#include <set>

#include "blockcirc/error.hpp"
#include "blockcirc/sched.hpp"

namespace blockcirc::sched {

ResourceVector& ResourceVector::operator+=(const ResourceVector& o) {
  ff += o.ff;
  lut += o.lut;
  dsp += o.dsp;
  bram += o.bram;
  return *this;
}

ResourceVector operator*(std::uint64_t k, const ResourceVector& r) {
  return {k * r.ff, k * r.lut, k * r.dsp, k * r.bram};
}

bool ResourceVector::fits_within(const ResourceVector& limit) const noexcept {
  return ff <= limit.ff && lut <= limit.lut && dsp <= limit.dsp && bram <= limit.bram;
}

std::uint64_t component(const ResourceVector& r, std::size_t i) {
  switch (i) {
    case 0: return r.ff;
    case 1: return r.lut;
    case 2: return r.dsp;
    case 3: return r.bram;
  }
  throw DomainError("resource component index out of range");
}

std::string to_string(PeClass c) {
  switch (c) {
    case PeClass::kPeA: return "PE_A";
    case PeClass::kPeB: return "PE_B";
    case PeClass::kPeFft: return "PE_FFT";
    case PeClass::kAdder: return "Adder";
    case PeClass::kSoftmax: return "Softmax";
  }
  return "unknown";
}

PeClass pe_class_from_string(const std::string& name) {
  for (PeClass c : kAllPeClasses) {
    if (to_string(c) == name) return c;
  }
  throw ValidationError("unknown PE class '" + name +
                        "' (expected PE_A, PE_B, PE_FFT, Adder or Softmax)");
}

std::uint64_t layer_time(std::uint64_t n_op, double base_throughput, std::uint64_t k) {
  if (k == 0) throw DomainError("allocation factor must be >= 1");
  if (!(base_throughput > 0.0) || !std::isfinite(base_throughput)) {
    throw DomainError("base throughput must be a positive finite number");
  }
  if (n_op == 0) return 0;
  // Integral throughputs take the exact integer path.
  if (base_throughput == std::floor(base_throughput) && base_throughput < 0x1p53) {
    __extension__ typedef unsigned __int128 u128;
    const u128 denom = static_cast<u128>(base_throughput) * k;
    return static_cast<std::uint64_t>((n_op + denom - 1) / denom);
  }
  const long double denom = static_cast<long double>(base_throughput) * k;
  const long double ops = static_cast<long double>(n_op);
  auto t = static_cast<std::uint64_t>(std::ceil(ops / denom));
  while (t > 0 && static_cast<long double>(t - 1) * denom >= ops) --t;
  while (static_cast<long double>(t) * denom < ops) ++t;
  return t;
}

std::size_t ComputeGraph::add_node(LayerProfile profile) {
  nodes_.push_back(std::move(profile));
  succ_.emplace_back();
  pred_.emplace_back();
  return nodes_.size() - 1;
}

void ComputeGraph::add_edge(std::size_t from, std::size_t to) {
  if (from >= nodes_.size() || to >= nodes_.size()) {
    throw ValidationError("edge (" + std::to_string(from) + ", " + std::to_string(to) +
                          ") references a missing node");
  }
  edges_.emplace_back(from, to);
  succ_[from].push_back(to);
  pred_[to].push_back(from);
}

std::optional<std::size_t> ComputeGraph::find(const std::string& name) const {
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].name == name) return i;
  }
  return std::nullopt;
}

namespace {

// Depth-first search for an edge closing a cycle.
std::pair<std::size_t, std::size_t> find_back_edge(const ComputeGraph& g) {
  enum Color : std::uint8_t { kWhite, kGray, kBlack };
  std::vector<Color> color(g.size(), kWhite);
  std::vector<std::pair<std::size_t, std::size_t>> stack;  // (node, next successor index)
  for (std::size_t root = 0; root < g.size(); ++root) {
    if (color[root] != kWhite) continue;
    stack.emplace_back(root, 0);
    color[root] = kGray;
    while (!stack.empty()) {
      auto& [u, next] = stack.back();
      const auto& succ = g.successors(u);
      if (next == succ.size()) {
        color[u] = kBlack;
        stack.pop_back();
        continue;
      }
      const std::size_t v = succ[next++];
      if (color[v] == kGray) return {u, v};
      if (color[v] == kWhite) {
        color[v] = kGray;
        stack.emplace_back(v, 0);
      }
    }
  }
  throw DomainError("find_back_edge called on an acyclic graph");
}

}  // namespace

std::vector<std::size_t> ComputeGraph::topological_order() const {
  std::vector<std::size_t> indegree(nodes_.size());
  for (const auto& [from, to] : edges_) ++indegree[to];
  std::set<std::size_t> ready;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (indegree[i] == 0) ready.insert(i);
  }
  std::vector<std::size_t> order;
  order.reserve(nodes_.size());
  while (!ready.empty()) {
    const std::size_t u = *ready.begin();
    ready.erase(ready.begin());
    order.push_back(u);
    for (std::size_t v : succ_[u]) {
      if (--indegree[v] == 0) ready.insert(v);
    }
  }
  if (order.size() != nodes_.size()) {
    const auto [u, v] = find_back_edge(*this);
    throw CycleError("compute graph has a cycle; back edge " + nodes_[u].name + " -> " +
                     nodes_[v].name + " (" + std::to_string(u) + " -> " + std::to_string(v) +
                     ")");
  }
  return order;
}

std::uint64_t ComputeGraph::total_ops() const {
  std::uint64_t total = 0;
  for (const auto& n : nodes_) total += n.n_op;
  return total;
}

std::map<std::string, int> ComputeGraph::pipeline_stages() const {
  std::map<std::string, std::set<int>> labels;
  for (const auto& n : nodes_) labels[n.group].insert(n.pipeline_stage);
  std::map<std::string, int> out;
  for (const auto& [group, set] : labels) out[group] = static_cast<int>(set.size());
  return out;
}

std::string PeUnit::name() const { return to_string(pe_class) + std::to_string(instance); }

PePool PePool::from_counts(const std::map<PeClass, int>& counts) {
  PePool pool;
  for (PeClass c : kAllPeClasses) {
    const auto it = counts.find(c);
    if (it == counts.end()) continue;
    if (it->second < 0) throw ValidationError("negative PE count for " + to_string(c));
    for (int i = 1; i <= it->second; ++i) pool.units_.push_back({c, i});
  }
  return pool;
}

int PePool::count(PeClass c) const {
  return static_cast<int>(std::count_if(units_.begin(), units_.end(),
                                        [c](const PeUnit& u) { return u.pe_class == c; }));
}

// ---------------------------------------------------------------------------

std::uint64_t linear_ops(std::size_t s, std::size_t out, std::size_t in, std::size_t block_size) {
  if (block_size <= 1) return static_cast<std::uint64_t>(s) * out * in;
  // Per position: one spectral multiply-accumulate per frequency bin per
  // block, plus a b log2 b transform for every block column (input) and
  // block row (output).
  const std::uint64_t b = block_size;
  const std::uint64_t f = (out + b - 1) / b;
  const std::uint64_t g = (in + b - 1) / b;
  std::uint64_t log2b = 0;
  while ((std::uint64_t{1} << log2b) < b) ++log2b;
  return static_cast<std::uint64_t>(s) * (f * g * b + (f + g) * b * log2b);
}

namespace {

struct GraphBuilder {
  ComputeGraph& g;
  const nn::TransformerConfig& cfg;
  std::string group;
  std::string prefix;
  std::size_t block_size;

  std::size_t add(const std::string& name, std::uint64_t ops, PeClass cls, int stage,
                  bool masked = false) {
    LayerProfile p;
    p.name = prefix + name;
    p.n_op = ops;
    p.pe_class = cls;
    p.group = group;
    p.pipeline_stage = stage;
    p.masked = masked;
    return g.add_node(std::move(p));
  }

  PeClass linear_class() const { return block_size > 1 ? PeClass::kPeFft : PeClass::kPeA; }

  // Projections, per-head attention, output projection and add/norm. Returns
  // the add/norm node. kv_source, when set, feeds the K and V projections.
  std::size_t attention_block(const std::string& name, std::size_t s, std::size_t s_kv,
                              int first_stage, bool masked,
                              std::optional<std::size_t> q_source,
                              std::optional<std::size_t> kv_source) {
    const std::size_t d = cfg.d_model;
    const std::size_t h = cfg.num_heads;
    const std::size_t qk_width = h * cfg.d_k;
    const std::size_t v_width = h * cfg.d_v;
    const std::string p = name.empty() ? "" : name + ".";

    const std::size_t q = add(p + "q_proj", linear_ops(s, qk_width, d, block_size),
                              linear_class(), first_stage, masked);
    const std::size_t k = add(p + "k_proj", linear_ops(s_kv, qk_width, d, block_size),
                              linear_class(), first_stage, masked);
    const std::size_t v = add(p + "v_proj", linear_ops(s_kv, v_width, d, block_size),
                              linear_class(), first_stage, masked);
    if (q_source) g.add_edge(*q_source, q);
    if (kv_source) {
      g.add_edge(*kv_source, k);
      g.add_edge(*kv_source, v);
    }

    std::vector<std::size_t> heads;
    for (std::size_t i = 0; i < h; ++i) {
      const std::string hp = p + "head" + std::to_string(i) + ".";
      const std::uint64_t scores = static_cast<std::uint64_t>(s) * s_kv;
      const std::size_t qk = add(hp + "qk", scores * cfg.d_k, PeClass::kPeB, first_stage + 1, masked);
      const std::size_t sm = add(hp + "softmax", scores, PeClass::kSoftmax, first_stage + 1, masked);
      const std::size_t av = add(hp + "av", scores * cfg.d_v, PeClass::kPeB, first_stage + 1, masked);
      g.add_edge(q, qk);
      g.add_edge(k, qk);
      g.add_edge(qk, sm);
      g.add_edge(sm, av);
      g.add_edge(v, av);
      heads.push_back(av);
    }

    const std::size_t o = add(p + "out_proj", linear_ops(s, d, v_width, block_size),
                              linear_class(), first_stage + 2, masked);
    for (std::size_t av : heads) g.add_edge(av, o);
    const std::size_t norm = add(p + "add_norm", static_cast<std::uint64_t>(s) * d,
                                 PeClass::kAdder, first_stage + 3, masked);
    g.add_edge(o, norm);
    return norm;
  }

  std::size_t ffn_block(std::size_t s, int first_stage, std::size_t input,
                        const std::string& norm_name) {
    const std::size_t d = cfg.d_model;
    const std::size_t f1 = add("ffn1", linear_ops(s, cfg.d_ffn, d, block_size), linear_class(),
                               first_stage);
    const std::size_t f2 = add("ffn2", linear_ops(s, d, cfg.d_ffn, block_size), linear_class(),
                               first_stage + 1);
    const std::size_t norm = add(norm_name, static_cast<std::uint64_t>(s) * d, PeClass::kAdder,
                                 first_stage + 2);
    g.add_edge(input, f1);
    g.add_edge(f1, f2);
    g.add_edge(f2, norm);
    return norm;
  }
};

std::size_t append_encoder(ComputeGraph& g, const nn::TransformerConfig& cfg, std::size_t s,
                           const GraphOptions& opts) {
  GraphBuilder b{g, cfg, "encoder", "enc.", opts.block_size};
  const std::size_t attn = b.attention_block("", s, s, 1, false, std::nullopt, std::nullopt);
  // Rename the first add/norm to match the layer's two residual sites.
  g.nodes()[attn].name = "enc.add_norm1";
  return b.ffn_block(s, 5, attn, "add_norm2");
}

std::size_t append_decoder(ComputeGraph& g, const nn::TransformerConfig& cfg, std::size_t s,
                           const GraphOptions& opts, std::optional<std::size_t> memory) {
  GraphBuilder b{g, cfg, "decoder", "dec.", opts.block_size};
  const std::size_t self = b.attention_block("self", s, s, 1, true, std::nullopt, std::nullopt);
  const std::size_t cross = b.attention_block("cross", s, s, 5, false, self, memory);
  return b.ffn_block(s, 9, cross, "add_norm3");
}

void check_graph_args(const nn::TransformerConfig& cfg, std::size_t seq_len) {
  cfg.validate();
  if (seq_len == 0) throw DomainError("sequence length must be >= 1");
}

}  // namespace

ComputeGraph build_encoder_graph(const nn::TransformerConfig& cfg, std::size_t seq_len,
                                 const GraphOptions& opts) {
  check_graph_args(cfg, seq_len);
  ComputeGraph g;
  append_encoder(g, cfg, seq_len, opts);
  return g;
}

ComputeGraph build_decoder_graph(const nn::TransformerConfig& cfg, std::size_t seq_len,
                                 const GraphOptions& opts) {
  check_graph_args(cfg, seq_len);
  if (cfg.structure != nn::Structure::kEncoderDecoder) {
    throw DomainError("decoder graph requested for an encoder-only config");
  }
  ComputeGraph g;
  append_decoder(g, cfg, seq_len, opts, std::nullopt);
  return g;
}

ComputeGraph build_model_graph(const nn::TransformerConfig& cfg, std::size_t seq_len,
                               const GraphOptions& opts) {
  check_graph_args(cfg, seq_len);
  ComputeGraph g;
  const std::size_t memory = append_encoder(g, cfg, seq_len, opts);
  if (cfg.structure == nn::Structure::kEncoderDecoder) {
    append_decoder(g, cfg, seq_len, opts, memory);
  }
  return g;
}

}  // namespace blockcirc::sched
