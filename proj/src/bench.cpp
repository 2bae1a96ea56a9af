#include "stafem/bench.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <mutex>
#include <numeric>
#include <thread>

#include "stafem/proxy.hpp"
#include "stafem/rng.hpp"

namespace stafem {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

constexpr double kElasticParityTolerance = 1e-12;
constexpr std::uint64_t kRhsStream = 0x5248'5300'0000'0000ULL;  // "RHS"

int resolve_threads(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("STAFEM_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  return 1;
}

std::vector<double> seeded_rhs(std::uint64_t seed, int frame, std::size_t n) {
  CounterRng rng(seed, kRhsStream | static_cast<std::uint64_t>(frame));
  std::vector<double> b(n);
  for (double& x : b) x = rng.normal();
  return b;
}

// Rows used for aggregates: frame 0 is a warm-up frame unless it is the only one.
std::vector<const FrameMetrics*> aggregate_rows(const std::vector<FrameMetrics>& frames) {
  std::vector<const FrameMetrics*> rows;
  for (const auto& f : frames) {
    if (f.frame > 0) rows.push_back(&f);
  }
  if (rows.empty()) {
    for (const auto& f : frames) rows.push_back(&f);
  }
  return rows;
}

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

PolicySummary summarize_policy(UpdatePolicy policy, const std::vector<FrameMetrics>& frames) {
  PolicySummary s{policy, {}, {}, {}, {}, 0, 0};
  const auto rows = aggregate_rows(frames);
  std::vector<double> ft, ut, st, it;
  for (const auto* r : rows) {
    ft.push_back(r->frame_time);
    ut.push_back(r->update_time);
    st.push_back(r->solve_time);
    it.push_back(r->cg_iterations);
  }
  s.frame_time = summarize(ft);
  s.update_time = summarize(ut);
  s.solve_time = summarize(st);
  s.cg_iterations = summarize(it);

  // Per-seed means, then the median across seeds.
  std::vector<std::uint64_t> seeds;
  for (const auto* r : rows) seeds.push_back(r->seed);
  std::sort(seeds.begin(), seeds.end());
  seeds.erase(std::unique(seeds.begin(), seeds.end()), seeds.end());
  std::vector<double> per_seed_update, per_seed_frame;
  for (std::uint64_t seed : seeds) {
    double u = 0, f = 0;
    std::size_t n = 0;
    for (const auto* r : rows) {
      if (r->seed != seed) continue;
      u += r->update_time;
      f += r->frame_time;
      ++n;
    }
    per_seed_update.push_back(u / static_cast<double>(n));
    per_seed_frame.push_back(f / static_cast<double>(n));
  }
  s.median_update_time = median(per_seed_update);
  s.median_frame_time = median(per_seed_frame);
  return s;
}

std::unique_ptr<Assembler> make_assembler(const Workspace& ws, OperatorKind op, UpdatePolicy policy,
                                          const ActiveMask& initial) {
  if (op == OperatorKind::proxy) return std::make_unique<ProxyAssembler>(ws.mesh, policy, initial);
  if (!ws.cache) throw ConfigError("workspace has no element stiffness cache");
  return std::make_unique<ElasticAssembler>(ws.mesh, *ws.cache, policy, initial);
}

}  // namespace

std::string_view to_string(OperatorKind k) {
  switch (k) {
    case OperatorKind::proxy: return "proxy";
    case OperatorKind::elasticity: return "elasticity";
    case OperatorKind::dynamics: return "dynamics";
  }
  return "?";
}

OperatorKind parse_operator(std::string_view name) {
  if (name == "proxy") return OperatorKind::proxy;
  if (name == "elasticity") return OperatorKind::elasticity;
  if (name == "dynamics") return OperatorKind::dynamics;
  throw ConfigError("unknown operator '" + std::string(name) + "'");
}

void RunConfig::validate() const {
  if (seeds.empty()) throw ConfigError("at least one seed is required");
  if (scenario != Scenario::repeated_locality && schedule.frames < 1) throw ConfigError("frames must be >= 1");
  if (scenario == Scenario::repeated_locality && schedule.cycles < 1) throw ConfigError("cycles must be >= 1");
  if (mesh.node_path.empty() && std::any_of(mesh.block.begin(), mesh.block.end(), [](int d) { return d < 1; })) {
    throw ConfigError("block dimensions must be >= 1");
  }
  if (!(epsilon >= 0)) throw ConfigError("epsilon must be >= 0");
  if (op != OperatorKind::dynamics && !(epsilon > 0)) throw ConfigError("static solves need epsilon > 0");
  if (!(cg.tolerance > 0)) throw ConfigError("CG tolerance must be positive");
  if (cg.max_iterations < 0) throw ConfigError("CG max_iterations must be >= 0");
  if (!(timestep > 0)) throw ConfigError("timestep must be positive");
  if (connectivity_rebuild_period < 1) throw ConfigError("connectivity rebuild period must be >= 1");
  if (reaccumulate_every < 0) throw ConfigError("reaccumulate_every must be >= 0");
}

Workspace prepare_workspace(const RunConfig& config) {
  config.validate();
  Workspace ws;
  SupersetMesh base = config.mesh.node_path.empty()
                          ? generate_block_mesh(config.mesh.block[0], config.mesh.block[1], config.mesh.block[2])
                          : load_mesh(config.mesh.node_path, config.mesh.ele_path);
  if (config.scenario == Scenario::refinement) {
    std::vector<TetId> all(base.num_tets());
    std::iota(all.begin(), all.end(), TetId{0});
    ws.mesh = build_refinement(base, all);
  } else {
    ws.mesh = std::move(base);
  }
  if (config.op != OperatorKind::proxy) ws.cache = precompute_element_stiffness(ws.mesh, config.material);
  ws.adjacency = precompute_face_adjacency(ws.mesh);
  ws.max_edge_valence = max_edge_valence(ws.mesh);
  ws.max_rescan_per_tet =
      config.op == OperatorKind::proxy ? max_tet_edge_rescan(ws.mesh) : max_tet_entry_rescan(ws.mesh);
  return ws;
}

std::vector<FrameMetrics> run_seed(const Workspace& ws, const RunConfig& config, UpdatePolicy policy,
                                   const std::string& schedule_json) {
  const Schedule schedule = schedule_from_json(schedule_json);
  if (schedule.initial_mask.size() != ws.mesh.num_tets()) throw ConfigError("schedule does not match the mesh");

  std::unique_ptr<Assembler> assembler = make_assembler(ws, config.op, policy, schedule.initial_mask);
  auto* elastic = dynamic_cast<ElasticAssembler*>(assembler.get());
  ConnectivityState connectivity(ws.adjacency, config.connectivity_rebuild_period);
  connectivity.rebuild(schedule.initial_mask);

  const bool dynamics = config.op == OperatorKind::dynamics;
  const double eps = dynamics ? 0.0 : config.epsilon;
  DynamicsState motion = DynamicsState::at_rest(3 * ws.mesh.num_vertices(), config.timestep);

  std::vector<FrameMetrics> out;
  out.reserve(schedule.frames.size());
  for (std::size_t t = 0; t < schedule.frames.size(); ++t) {
    const EditBatch& batch = schedule.frames[t];
    FrameMetrics m;
    m.seed = schedule.seed;
    m.frame = static_cast<int>(t);
    m.op = config.op;
    m.scenario = schedule.scenario;
    m.policy = policy;
    m.delta_size = batch.size();

    const auto frame_start = Clock::now();

    auto start = Clock::now();
    assembler->apply(batch);
    if (elastic && policy == UpdatePolicy::streaming_update && config.reaccumulate_every > 0 &&
        (t + 1) % static_cast<std::size_t>(config.reaccumulate_every) == 0) {
      elastic->reaccumulate();
    }
    m.update_time = seconds_since(start);

    start = Clock::now();
    connectivity.update(assembler->mask(), batch);
    m.connectivity_time = seconds_since(start);

    start = Clock::now();
    const CsrMatrix a = assembler->finalize(eps);
    m.finalize_time = seconds_since(start);

    start = Clock::now();
    CgTrace trace;
    if (config.cg_trace) {
      trace = [&](int it, double res) { config.cg_trace(schedule.seed, policy, m.frame, it, res); };
    }
    CgResult solve;
    std::vector<double> mass;
    if (dynamics) {
      mass = lumped_mass(elastic->state());
      motion.f = gravity_load(mass);
      solve = implicit_euler_step(motion, mass, a, config.cg, trace);
    } else {
      solve = pcg_solve(a, seeded_rhs(schedule.seed, m.frame, a.n), config.cg, {}, trace);
    }
    m.solve_time = seconds_since(start);
    m.frame_time = seconds_since(frame_start);

    m.cg_iterations = solve.iterations;
    m.cg_residual = solve.relative_residual;
    m.cg_converged = solve.converged;
    m.active_tets = assembler->mask().count();
    m.counters = assembler->counters();
    m.state_bytes = assembler->state_bytes();

    // Measurement apparatus below; excluded from the timed phases above.
    if (config.parity_check) {
      m.parity_checked = true;
      ParityResult parity;
      if (config.op == OperatorKind::proxy) {
        const ProxyState shadow = rebuild_proxy(ws.mesh, assembler->mask(), false);
        parity = compare(finalize(shadow, eps), a, 0.0);
      } else {
        const ElasticState shadow = rebuild_elasticity(ws.mesh, *ws.cache, assembler->mask(), false);
        parity = compare(finalize(shadow, eps), a, kElasticParityTolerance);
        const auto& mine = elastic->state().vertex_mass;
        for (std::size_t v = 0; v < mine.size(); ++v) {
          const double d = std::abs(mine[v] - shadow.vertex_mass[v]);
          parity.max_abs_diff = std::max(parity.max_abs_diff, d);
          if (d > kElasticParityTolerance) ++parity.mismatch_count;
        }
      }
      m.parity_mismatch_count = parity.mismatch_count;
      m.parity_max_abs_diff = parity.max_abs_diff;
    }
    const std::uint64_t check_seed = CounterRng::mix(schedule.seed * 0x9e3779b97f4a7c15ULL + t);
    m.connectivity_mismatch_rate =
        spot_check(connectivity, ws.adjacency, assembler->mask(), config.connectivity_samples, check_seed);
    m.components = connectivity.component_count();
    m.bfs_components = bfs_components(ws.adjacency, assembler->mask()).count;

    out.push_back(m);
  }
  return out;
}

ComparisonReport run_policy_comparison(const Workspace& ws, const RunConfig& config,
                                       std::vector<UpdatePolicy> policies) {
  config.validate();
  ComparisonReport report;
  report.config = config;
  report.policies = policies;
  report.runs.resize(policies.size());

  const std::size_t nseeds = config.seeds.size();
  // per_seed[s][p]: frames of policy p on seed s; filled by worker threads.
  std::vector<std::vector<std::vector<FrameMetrics>>> per_seed(nseeds, std::vector<std::vector<FrameMetrics>>(policies.size()));
  std::vector<RunFailure> failures;
  std::mutex failure_lock;

  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t s = next++; s < nseeds; s = next++) {
      const std::uint64_t seed = config.seeds[s];
      std::string json;
      try {
        json = schedule_to_json(make_schedule(ws.mesh, config.scenario, seed, config.schedule));
      } catch (const std::exception& e) {
        std::lock_guard lock(failure_lock);
        for (UpdatePolicy p : policies) failures.push_back({seed, p, e.what()});
        continue;
      }
      for (std::size_t p = 0; p < policies.size(); ++p) {
        try {
          per_seed[s][p] = run_seed(ws, config, policies[p], json);
        } catch (const std::exception& e) {
          std::lock_guard lock(failure_lock);
          failures.push_back({seed, policies[p], e.what()});
        }
      }
    }
  };
  const int threads = std::min<int>(resolve_threads(config.threads), static_cast<int>(std::max<std::size_t>(nseeds, 1)));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  for (std::size_t p = 0; p < policies.size(); ++p) {
    for (std::size_t s = 0; s < nseeds; ++s) {
      auto& f = per_seed[s][p];
      report.runs[p].frames.insert(report.runs[p].frames.end(), f.begin(), f.end());
    }
    for (const auto& f : failures) {
      if (f.policy == policies[p]) report.runs[p].failures.push_back(f);
    }
    report.summaries.push_back(summarize_policy(policies[p], report.runs[p].frames));
  }

  // Identical systems must give identical iteration counts frame by frame.
  for (std::size_t s = 0; s < nseeds; ++s) {
    for (std::size_t p = 1; p < policies.size(); ++p) {
      const auto& a = per_seed[s][0];
      const auto& b = per_seed[s][p];
      if (a.size() != b.size()) {
        report.identical_cg_iterations = false;
        continue;
      }
      for (std::size_t t = 0; t < a.size(); ++t) {
        if (a[t].cg_iterations != b[t].cg_iterations) report.identical_cg_iterations = false;
      }
    }
  }

  const auto find = [&](UpdatePolicy p) -> const PolicySummary* {
    for (const auto& s : report.summaries) {
      if (s.policy == p) return &s;
    }
    return nullptr;
  };
  if (const auto* st = find(UpdatePolicy::streaming_update); st && st->median_update_time > 0) {
    if (const auto* r = find(UpdatePolicy::full_rebuild)) report.update_speedup_rebuild = r->median_update_time / st->median_update_time;
    if (const auto* l = find(UpdatePolicy::local_recompute)) report.update_speedup_local = l->median_update_time / st->median_update_time;
  }
  return report;
}

ComparisonReport run_policy_comparison(const RunConfig& config) {
  const Workspace ws = prepare_workspace(config);
  return run_policy_comparison(ws, config);
}

BenchmarkResult run_benchmark(const Workspace& ws, const RunConfig& config) {
  ComparisonReport report = run_policy_comparison(ws, config, {config.policy});
  return std::move(report.runs.front());
}

BenchmarkResult run_benchmark(const RunConfig& config) {
  const Workspace ws = prepare_workspace(config);
  return run_benchmark(ws, config);
}

std::vector<SweepRow> run_locality_sweep(const RunConfig& config, const std::vector<double>& half_widths,
                                         std::vector<UpdatePolicy> policies) {
  RunConfig cfg = config;
  cfg.scenario = Scenario::fracture;
  const Workspace ws = prepare_workspace(cfg);
  std::vector<SweepRow> rows;
  for (double w : half_widths) {
    cfg.schedule.half_width = w;
    const ComparisonReport report = run_policy_comparison(ws, cfg, policies);
    SweepRow row;
    row.half_width = w;
    row.summaries = report.summaries;
    const auto agg = aggregate_rows(report.runs.front().frames);
    double delta = 0;
    for (const auto* r : agg) delta += static_cast<double>(r->delta_size);
    row.mean_delta_size = agg.empty() ? 0 : delta / static_cast<double>(agg.size());
    rows.push_back(std::move(row));
  }
  return rows;
}

TemporalLocalityReport run_temporal_locality(const RunConfig& config) {
  RunConfig cfg = config;
  cfg.op = OperatorKind::elasticity;
  cfg.scenario = Scenario::repeated_locality;
  const Workspace ws = prepare_workspace(cfg);
  TemporalLocalityReport out;
  out.comparison = run_policy_comparison(ws, cfg);
  out.local_over_streaming = out.comparison.update_speedup_local;
  return out;
}

Stat summarize(const std::vector<double>& values) {
  Stat s;
  s.count = values.size();
  if (values.empty()) return s;
  s.min = *std::min_element(values.begin(), values.end());
  s.max = *std::max_element(values.begin(), values.end());
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  double var = 0;
  for (double v : values) var += (v - s.mean) * (v - s.mean);
  s.std = std::sqrt(var / static_cast<double>(values.size()));
  return s;
}

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) return 0.0;
  const auto ranks = [](const std::vector<double>& v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < idx.size();) {
      std::size_t j = i;
      while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
      const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
      for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
      i = j + 1;
    }
    return r;
  };
  const auto rx = ranks(x), ry = ranks(y);
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / static_cast<double>(rx.size());
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / static_cast<double>(ry.size());
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  return sxx > 0 && syy > 0 ? sxy / std::sqrt(sxx * syy) : 0.0;
}

}  // namespace stafem
