#pragma once

#include <complex>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "blockcirc/bcm.hpp"
#include "blockcirc/nn.hpp"
#include "blockcirc/report.hpp"
#include "blockcirc/sched.hpp"

// Independent reference implementations and the acceptance suite built on
// them. Oracles deliberately avoid the library code paths they check.
namespace blockcirc::verify {

// O(n^2) direct-summation DFT; `inverse` uses the conjugate kernel and 1/n.
std::vector<std::complex<double>> naive_dft(const std::vector<std::complex<double>>& x,
                                            bool inverse = false);

// Dense matrix rebuilt entry by entry from the index vectors.
Tensor expand_by_index(const BlockCirculantMatrix& m);

// Scalar-loop attention for one head.
Tensor attention_oracle(const Tensor& q, const Tensor& k, const Tensor& v, bool causal);

// Interpolation error of the piecewise-linear exp on [lo, hi] sampled on a
// uniform grid of `samples` points.
struct PwlError {
  double max_abs = 0.0;
  double max_rel = 0.0;
};
PwlError pwl_exp_grid_error(int segments, double lo, double hi, std::size_t samples = 1 << 20);

// Bound on |softmax_pwl - softmax_exact| when every shifted input lies in the
// interpolation range: with per-term relative error at most rho, each
// probability moves by at most 2 rho / (1 - rho).
double pwl_softmax_bound(int segments, double lo, double hi);

// Empty when the schedule respects every edge and no PE runs two layers in
// overlapping stage intervals; otherwise a description of the first violation.
std::optional<std::string> check_schedule(const sched::ComputeGraph& g,
                                          const sched::PePool& pool,
                                          const std::vector<std::uint64_t>& durations,
                                          const sched::Schedule& s);

// Makespan when layers run one at a time.
std::int64_t serial_makespan(const std::vector<std::uint64_t>& durations);

struct BruteForceResult {
  std::uint64_t best_max_time = 0;
  std::size_t feasible_vectors = 0;
};
// Exhaustive minimum of max_j T_j over feasible K vectors. Returns nullopt
// when more than `limit` feasible vectors exist.
std::optional<BruteForceResult> brute_force_allocation(const sched::DevicePlan& plan,
                                                       std::size_t limit = 200);

// Empty when every derived field of the report matches a recomputation from
// its own per-layer figures.
std::optional<std::string> check_report_arithmetic(const sched::PerfReport& r);

// ---------------------------------------------------------------------------
// Acceptance suite

struct CriterionResult {
  int id = 0;
  std::string title;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
  double budget_seconds = 0.0;
};

struct Criterion {
  int id;
  std::string title;
  double budget_seconds;
  std::function<std::string(bool&)> body;  // sets the flag, returns detail
};

const std::vector<Criterion>& acceptance_criteria();

// Runs one criterion, timing it; exceeding the budget fails it.
CriterionResult run_criterion(const Criterion& c);

std::string format_result(const CriterionResult& r);

// Random allocation instances whose feasible K vectors number between 2 and 200.
std::vector<sched::DevicePlan> random_allocation_instances(std::size_t count, std::uint64_t seed);

// Frozen fixture values, regenerated with tests/acceptance/regen_fixtures.cpp.
// Bound for 32 segments on [-8, 0], from pwl_softmax_bound.
inline constexpr double kPwlSoftmaxBound32 = 0.015796327989564079;
// Fraction of random allocator instances on which greedy matched the
// exhaustive optimum when the fixture was generated.
inline constexpr double kAllocatorOptimalRate = 1.00;

}  // namespace blockcirc::verify
