#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "stafem/assembly.hpp"
#include "stafem/connectivity.hpp"
#include "stafem/edits.hpp"
#include "stafem/elasticity.hpp"
#include "stafem/solver.hpp"

namespace stafem {

enum class OperatorKind { proxy, elasticity, dynamics };

std::string_view to_string(OperatorKind k);
OperatorKind parse_operator(std::string_view name);

struct MeshSource {
  std::filesystem::path node_path;  // empty: use the block generator
  std::filesystem::path ele_path;
  std::array<int, 3> block{6, 6, 6};
};

struct RunConfig {
  MeshSource mesh;
  OperatorKind op = OperatorKind::proxy;
  Scenario scenario = Scenario::fracture;
  ScheduleParams schedule;
  UpdatePolicy policy = UpdatePolicy::streaming_update;
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  double epsilon = 1e-6;
  CgConfig cg;
  Material material;
  double timestep = 1e-2;
  bool parity_check = false;
  int connectivity_rebuild_period = 1;
  std::size_t connectivity_samples = 32;
  /// Streaming elasticity only: recompute all blocks every N frames (0 = never).
  int reaccumulate_every = 0;
  /// Seed-level worker threads; 0 reads STAFEM_THREADS (default 1).
  int threads = 0;
  /// Optional CG convergence sink (seed, policy, frame, iteration, relative residual).
  /// Called from worker threads when threads > 1.
  std::function<void(std::uint64_t, UpdatePolicy, int, int, double)> cg_trace;

  /// Throws ConfigError on an unusable configuration.
  void validate() const;
};

/// Everything derived from the mesh that all policies and seeds share.
struct Workspace {
  SupersetMesh mesh;
  std::optional<ElementStiffnessCache> cache;
  FaceAdjacency adjacency;
  std::size_t max_edge_valence = 0;
  /// Bound on local-recompute rescans per edited tet for the configured operator.
  std::size_t max_rescan_per_tet = 0;
};

Workspace prepare_workspace(const RunConfig& config);

struct FrameMetrics {
  std::uint64_t seed = 0;
  int frame = 0;
  OperatorKind op = OperatorKind::proxy;
  Scenario scenario = Scenario::fracture;
  UpdatePolicy policy = UpdatePolicy::streaming_update;

  double frame_time = 0;  // seconds
  double update_time = 0;
  double connectivity_time = 0;
  double finalize_time = 0;
  double solve_time = 0;

  int cg_iterations = 0;
  double cg_residual = 0;
  bool cg_converged = false;

  std::size_t active_tets = 0;
  std::size_t delta_size = 0;
  WorkCounters counters;

  bool parity_checked = false;
  std::size_t parity_mismatch_count = 0;
  double parity_max_abs_diff = 0;

  double connectivity_mismatch_rate = 0;
  std::size_t components = 0;      // union-find
  std::size_t bfs_components = 0;  // oracle
  std::size_t state_bytes = 0;
};

struct RunFailure {
  std::uint64_t seed = 0;
  UpdatePolicy policy = UpdatePolicy::streaming_update;
  std::string message;
};

struct BenchmarkResult {
  std::vector<FrameMetrics> frames;  // ordered by (seed, frame)
  std::vector<RunFailure> failures;
};

/// Runs the configured policy on every seed.
BenchmarkResult run_benchmark(const RunConfig& config);
BenchmarkResult run_benchmark(const Workspace& ws, const RunConfig& config);

/// One (policy, seed) run on a given serialized schedule. Throws on replay errors.
std::vector<FrameMetrics> run_seed(const Workspace& ws, const RunConfig& config, UpdatePolicy policy,
                                   const std::string& schedule_json);

struct Stat {
  double mean = 0, std = 0, min = 0, max = 0;
  std::size_t count = 0;
};

/// Aggregate over values; std is the population standard deviation.
Stat summarize(const std::vector<double>& values);

struct PolicySummary {
  UpdatePolicy policy;
  Stat frame_time;
  Stat update_time;
  Stat solve_time;
  Stat cg_iterations;
  /// Median over seeds of the per-seed mean update time (warm-up frame excluded).
  double median_update_time = 0;
  double median_frame_time = 0;
};

struct ComparisonReport {
  RunConfig config;
  std::vector<BenchmarkResult> runs;  // indexed like `policies`
  std::vector<UpdatePolicy> policies;
  std::vector<PolicySummary> summaries;
  bool identical_cg_iterations = true;
  /// median update time R / S, and L / S (0 when a policy is missing).
  double update_speedup_rebuild = 0;
  double update_speedup_local = 0;
};

/// Runs every policy in `policies` on identical serialized schedules per seed.
ComparisonReport run_policy_comparison(const Workspace& ws, const RunConfig& config,
                                       std::vector<UpdatePolicy> policies = {UpdatePolicy::full_rebuild,
                                                                             UpdatePolicy::local_recompute,
                                                                             UpdatePolicy::streaming_update});
ComparisonReport run_policy_comparison(const RunConfig& config);

struct SweepRow {
  double half_width = 0;
  double mean_delta_size = 0;
  std::vector<PolicySummary> summaries;
};

/// Fracture runs with a fixed slab half-width (relative to mesh extent) per entry.
std::vector<SweepRow> run_locality_sweep(const RunConfig& config, const std::vector<double>& half_widths,
                                         std::vector<UpdatePolicy> policies = {UpdatePolicy::local_recompute,
                                                                               UpdatePolicy::streaming_update});

struct TemporalLocalityReport {
  ComparisonReport comparison;
  double local_over_streaming = 0;  // median update-time ratio
};

/// Repeated delete/re-add of one slab on the elasticity operator.
TemporalLocalityReport run_temporal_locality(const RunConfig& config);

/// Spearman rank correlation (average ranks for ties).
double spearman(const std::vector<double>& x, const std::vector<double>& y);

/// CSV with one row per (seed, frame); column order is fixed.
void write_csv(std::ostream& out, const std::vector<FrameMetrics>& frames);
const std::vector<std::string>& csv_columns();
/// JSON summary grouped by (operator, scenario, policy); frame 0 is excluded as warm-up.
std::string summary_json(const std::vector<FrameMetrics>& frames, const std::vector<RunFailure>& failures);
/// Writes `<prefix>.csv` and `<prefix>.json`.
void emit_report(const std::filesystem::path& prefix, const std::vector<FrameMetrics>& frames,
                 const std::vector<RunFailure>& failures);

}  // namespace stafem
