#include <cstdio>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "stafem/bench.hpp"
#include "stafem/proxy.hpp"

using namespace stafem;

namespace {

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  if (const auto dots = text.find(".."); dots != std::string::npos) {
    const auto lo = std::stoull(text.substr(0, dots));
    const auto hi = std::stoull(text.substr(dots + 2));
    if (hi < lo) throw ConfigError("empty seed range '" + text + "'");
    for (auto s = lo; s <= hi; ++s) seeds.push_back(s);
    return seeds;
  }
  std::stringstream in(text);
  for (std::string item; std::getline(in, item, ',');) seeds.push_back(std::stoull(item));
  if (seeds.empty()) throw ConfigError("no seeds given");
  return seeds;
}

std::array<int, 3> parse_block(const std::string& text) {
  std::array<int, 3> dims{};
  char c1 = 0, c2 = 0;
  std::stringstream in(text);
  if (!(in >> dims[0] >> c1 >> dims[1] >> c2 >> dims[2]) || c1 != ',' || c2 != ',') {
    throw ConfigError("--block expects NX,NY,NZ, got '" + text + "'");
  }
  return dims;
}

// Accepts a prefix or either file of a .node/.ele pair.
MeshSource mesh_from_path(const std::string& path) {
  std::filesystem::path p(path);
  if (p.extension() == ".node" || p.extension() == ".ele") p.replace_extension();
  MeshSource m;
  m.node_path = p.string() + ".node";
  m.ele_path = p.string() + ".ele";
  return m;
}

std::vector<UpdatePolicy> parse_policies(const std::string& text) {
  if (text == "all") return {UpdatePolicy::full_rebuild, UpdatePolicy::local_recompute, UpdatePolicy::streaming_update};
  std::vector<UpdatePolicy> out;
  std::stringstream in(text);
  for (std::string item; std::getline(in, item, ',');) out.push_back(parse_policy(item));
  return out;
}

struct CommonOptions {
  std::string mesh, block = "6,6,6", op = "proxy", scenario = "fracture", seeds = "0..9";
  int frames = 8;
  double target_fraction = 0.05, half_width = -1;
  int axis = -1, cycles = 4, parents = 4;
  double epsilon = 1e-6, cg_tol = 1e-8;
  int cg_max_iter = 0;
  double young = 1.0, nu = 0.3, rho = 1.0, timestep = 1e-2;
  int conn_period = 1, threads = 0, reaccumulate = 0;
  bool parity = false;

  void add(CLI::App* app) {
    auto* m = app->add_option("--mesh", mesh, "TetGen .node/.ele prefix");
    app->add_option("--block", block, "Block mesh cells NX,NY,NZ")->excludes(m);
    app->add_option("--operator", op, "proxy | elasticity | dynamics");
    app->add_option("--scenario", scenario, "fracture | refinement | merge | repeat");
    app->add_option("--frames", frames, "Frames per seed (repeat: 2 per cycle)");
    app->add_option("--seeds", seeds, "Seed range a..b or list a,b,c");
    app->add_option("--target-fraction", target_fraction, "Slab size as fraction of tets");
    app->add_option("--half-width", half_width, "Fixed slab half-width relative to extent");
    app->add_option("--axis", axis, "Slab axis 0..2 (default: longest)");
    app->add_option("--cycles", cycles, "Repeat scenario cycles");
    app->add_option("--parents-per-frame", parents, "Refinement parents per frame");
    app->add_option("--epsilon", epsilon, "Diagonal shift");
    app->add_option("--cg-tol", cg_tol, "CG relative residual tolerance");
    app->add_option("--cg-max-iter", cg_max_iter, "CG iteration cap (0: 10 n)");
    app->add_option("--young", young, "Young's modulus");
    app->add_option("--poisson", nu, "Poisson ratio");
    app->add_option("--density", rho, "Mass density");
    app->add_option("--timestep", timestep, "Implicit Euler step");
    app->add_option("--conn-period", conn_period, "Union-find rebuild period in frames");
    app->add_option("--reaccumulate-every", reaccumulate, "Streaming elasticity: recompute all blocks every N frames");
    app->add_option("--threads", threads, "Seed-level threads (default: STAFEM_THREADS or 1)");
    app->add_flag("--parity", parity, "Compare every frame against a rebuild");
  }

  RunConfig config() const {
    RunConfig c;
    c.mesh = mesh.empty() ? MeshSource{{}, {}, parse_block(block)} : mesh_from_path(mesh);
    c.op = parse_operator(op);
    c.scenario = parse_scenario(scenario);
    c.schedule.frames = frames;
    c.schedule.axis = axis;
    c.schedule.target_fraction = target_fraction;
    c.schedule.half_width = half_width;
    c.schedule.cycles = cycles;
    c.schedule.parents_per_frame = parents;
    c.seeds = parse_seeds(seeds);
    c.epsilon = epsilon;
    c.cg.tolerance = cg_tol;
    c.cg.max_iterations = cg_max_iter;
    c.material = {young, nu, rho};
    c.timestep = timestep;
    c.parity_check = parity;
    c.connectivity_rebuild_period = conn_period;
    c.reaccumulate_every = reaccumulate;
    c.threads = threads;
    return c;
  }
};

void print_summary(const ComparisonReport& report) {
  std::printf("%-8s %14s %14s %14s %10s\n", "policy", "update_ms", "frame_ms", "solve_ms", "cg_iter");
  for (const auto& s : report.summaries) {
    std::printf("%-8c %7.4f+-%-6.4f %7.4f+-%-6.4f %7.4f+-%-6.4f %10.1f\n", policy_letter(s.policy),
                1e3 * s.update_time.mean, 1e3 * s.update_time.std, 1e3 * s.frame_time.mean, 1e3 * s.frame_time.std,
                1e3 * s.solve_time.mean, 1e3 * s.solve_time.std, s.cg_iterations.mean);
  }
  if (report.update_speedup_rebuild > 0) std::printf("median update R/S: %.2fx\n", report.update_speedup_rebuild);
  if (report.update_speedup_local > 0) std::printf("median update L/S: %.2fx\n", report.update_speedup_local);
  std::printf("cg iterations identical across policies: %s\n", report.identical_cg_iterations ? "yes" : "no");
  for (const auto& run : report.runs) {
    for (const auto& f : run.failures) {
      std::fprintf(stderr, "failure: seed %llu policy %c: %s\n", static_cast<unsigned long long>(f.seed),
                   policy_letter(f.policy), f.message.c_str());
    }
  }
  std::printf("(frame 0 excluded from aggregates as warm-up)\n");
}

int cmd_bench(const CommonOptions& opt, const std::string& policy, const std::string& out,
              const std::string& trace_path, const std::string& material_out) {
  RunConfig config = opt.config();
  std::ofstream trace;
  std::mutex trace_lock;
  if (!trace_path.empty()) {
    trace.open(trace_path);
    if (!trace) throw std::runtime_error("cannot write " + trace_path);
    trace << "seed,policy,frame,iteration,residual\n";
    config.cg_trace = [&](std::uint64_t seed, UpdatePolicy p, int frame, int it, double res) {
      std::lock_guard lock(trace_lock);
      trace << seed << ',' << policy_letter(p) << ',' << frame << ',' << it << ',' << res << '\n';
    };
  }
  if (!material_out.empty()) {
    const nlohmann::ordered_json m = {{"youngs_modulus", config.material.youngs_modulus},
                                      {"poisson_ratio", config.material.poisson_ratio},
                                      {"density", config.material.density}};
    std::ofstream(material_out) << m.dump(2) << '\n';
  }

  const Workspace ws = prepare_workspace(config);
  std::printf("mesh: %zu vertices, %zu candidate tets, %zu edges\n", ws.mesh.num_vertices(), ws.mesh.num_tets(),
              ws.mesh.num_edges());
  const ComparisonReport report = run_policy_comparison(ws, config, parse_policies(policy));
  print_summary(report);

  std::vector<FrameMetrics> frames;
  std::vector<RunFailure> failures;
  std::size_t mismatched = 0;
  for (const auto& run : report.runs) {
    frames.insert(frames.end(), run.frames.begin(), run.frames.end());
    failures.insert(failures.end(), run.failures.begin(), run.failures.end());
    for (const auto& f : run.frames) mismatched += f.parity_mismatch_count > 0;
  }
  if (config.parity_check) std::printf("parity: %zu mismatched frames of %zu\n", mismatched, frames.size());
  if (!out.empty()) {
    emit_report(out, frames, failures);
    std::printf("wrote %s.csv and %s.json\n", out.c_str(), out.c_str());
  }
  return failures.empty() && mismatched == 0 ? 0 : 1;
}

int cmd_sweep(const CommonOptions& opt, const std::vector<double>& widths, const std::string& out) {
  RunConfig config = opt.config();
  const auto rows = run_locality_sweep(config, widths);
  std::vector<double> w, s;
  std::ofstream csv;
  if (!out.empty()) {
    csv.open(out);
    if (!csv) throw std::runtime_error("cannot write " + out);
    csv << "half_width,mean_delta_size,policy,update_time_mean,update_time_std,median_update_time\n";
  }
  std::printf("%10s %12s %14s %14s\n", "half_width", "mean_delta", "L_update_ms", "S_update_ms");
  for (const auto& row : rows) {
    double l = 0, st = 0;
    for (const auto& sum : row.summaries) {
      if (sum.policy == UpdatePolicy::local_recompute) l = sum.median_update_time;
      if (sum.policy == UpdatePolicy::streaming_update) st = sum.median_update_time;
      if (csv.is_open()) {
        csv << row.half_width << ',' << row.mean_delta_size << ',' << policy_letter(sum.policy) << ','
            << sum.update_time.mean << ',' << sum.update_time.std << ',' << sum.median_update_time << '\n';
      }
    }
    std::printf("%10.4f %12.1f %14.5f %14.5f\n", row.half_width, row.mean_delta_size, 1e3 * l, 1e3 * st);
    w.push_back(row.half_width);
    s.push_back(st);
  }
  std::printf("spearman(half_width, S update): %.3f\n", spearman(w, s));
  return 0;
}

int cmd_mesh_gen(int nx, int ny, int nz, const std::string& out) {
  const SupersetMesh mesh = generate_block_mesh(nx, ny, nz);
  write_mesh(mesh, out + ".node", out + ".ele");
  std::printf("wrote %s.node (%zu vertices) and %s.ele (%zu tets)\n", out.c_str(), mesh.num_vertices(), out.c_str(),
              mesh.num_tets());
  return 0;
}

int cmd_schedule_gen(const CommonOptions& opt, std::uint64_t seed, const std::string& out) {
  RunConfig config = opt.config();
  const Workspace ws = prepare_workspace(config);
  const std::string json = schedule_to_json(make_schedule(ws.mesh, config.scenario, seed, config.schedule));
  if (out.empty() || out == "-") {
    std::cout << json << '\n';
  } else {
    std::ofstream(out) << json << '\n';
  }
  return 0;
}

int cmd_schedule_dump(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const Schedule s = schedule_from_json(text);
  std::printf("scenario %s, seed %llu, %zu candidate tets, %zu initially active\n", std::string(to_string(s.scenario)).c_str(),
              static_cast<unsigned long long>(s.seed), s.initial_mask.size(), s.initial_mask.count());
  std::size_t active = s.initial_mask.count();
  for (std::size_t t = 0; t < s.frames.size(); ++t) {
    active = active - s.frames[t].deleted.size() + s.frames[t].added.size();
    std::printf("frame %3zu: -%zu +%zu -> %zu active\n", t, s.frames[t].deleted.size(), s.frames[t].added.size(), active);
  }
  return 0;
}

int cmd_matrix_dump(const CommonOptions& opt, std::uint64_t seed, int frame, const std::string& out) {
  RunConfig config = opt.config();
  const Workspace ws = prepare_workspace(config);
  const Schedule s = make_schedule(ws.mesh, config.scenario, seed, config.schedule);
  if (frame < -1 || frame >= static_cast<int>(s.frames.size())) throw ConfigError("frame out of range");
  ActiveMask mask = s.initial_mask;
  for (int t = 0; t <= frame; ++t) apply_batch(ws.mesh, mask, s.frames[t]);
  const CsrMatrix a = config.op == OperatorKind::proxy
                          ? finalize(rebuild_proxy(ws.mesh, mask, false), config.epsilon)
                          : finalize(rebuild_elasticity(ws.mesh, *ws.cache, mask, false), config.epsilon);
  std::ofstream f(out);
  if (!f) throw std::runtime_error("cannot write " + out);
  write_matrix_market(f, a);
  std::printf("wrote %s (n = %zu, nnz = %zu)\n", out.c_str(), a.n, a.nnz());
  return 0;
}

// Parity, counter, and connectivity checks over small block meshes.
int cmd_verify(int n, const std::string& seeds) {
  int failed = 0;
  const auto report = [&](const std::string& name, bool ok, const std::string& detail) {
    std::printf("%s %s  %s\n", ok ? "PASS" : "FAIL", name.c_str(), detail.c_str());
    failed += !ok;
  };
  for (OperatorKind op : {OperatorKind::proxy, OperatorKind::elasticity, OperatorKind::dynamics}) {
    for (Scenario sc : {Scenario::fracture, Scenario::refinement, Scenario::merge, Scenario::repeated_locality}) {
      RunConfig c;
      c.mesh.block = {n, n, n};
      c.op = op;
      c.scenario = sc;
      c.seeds = parse_seeds(seeds);
      c.parity_check = true;
      c.schedule.cycles = 2;
      if (op == OperatorKind::dynamics) c.epsilon = 0;
      const Workspace ws = prepare_workspace(c);
      const ComparisonReport r = run_policy_comparison(ws, c);
      std::size_t frames = 0, parity_bad = 0, counter_bad = 0, conn_bad = 0, failures = 0;
      double max_diff = 0;
      for (const auto& run : r.runs) {
        failures += run.failures.size();
        for (const auto& f : run.frames) {
          ++frames;
          parity_bad += f.parity_mismatch_count > 0;
          max_diff = std::max(max_diff, f.parity_max_abs_diff);
          conn_bad += f.connectivity_mismatch_rate > 0 || f.components != f.bfs_components;
          const auto d = f.delta_size;
          const auto& k = f.counters;
          bool ok = true;
          if (f.policy == UpdatePolicy::streaming_update) ok = k.edges_visited == 6 * d;
          if (f.policy == UpdatePolicy::full_rebuild) ok = k.tets_scanned == f.active_tets;
          if (f.policy == UpdatePolicy::local_recompute && d > 0) {
            ok = k.tets_scanned >= d && k.tets_scanned <= d * ws.max_rescan_per_tet;
          }
          counter_bad += !ok;
        }
      }
      char detail[160];
      std::snprintf(detail, sizeof detail, "frames=%zu parity_bad=%zu max_diff=%.3g counters_bad=%zu conn_bad=%zu failures=%zu",
                    frames, parity_bad, max_diff, counter_bad, conn_bad, failures);
      const bool ok = failures == 0 && parity_bad == 0 && counter_bad == 0 && conn_bad == 0 && r.identical_cg_iterations;
      report(std::string(to_string(op)) + "/" + std::string(to_string(sc)), ok, detail);
    }
  }
  std::printf("%d failed\n", failed);
  return failed ? 1 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Streaming topology-aware FEM operator maintenance benchmark"};
  app.require_subcommand(1);

  CommonOptions bench_opt;
  std::string policy = "all", out, trace, material_out;
  auto* bench = app.add_subcommand("bench", "Run policies on matched edit schedules");
  bench_opt.add(bench);
  bench->add_option("--policy", policy, "R | L | S | all (or a comma list)");
  bench->add_option("--out", out, "Output prefix for <out>.csv and <out>.json");
  bench->add_option("--trace", trace, "CG convergence trace CSV");
  bench->add_option("--material-out", material_out, "Write the material config as JSON");

  CommonOptions sweep_opt;
  std::vector<double> widths{0.03, 0.06, 0.09, 0.13, 0.16};
  std::string sweep_out;
  auto* sweep = app.add_subcommand("sweep", "Fracture locality sweep over slab half-widths");
  sweep_opt.add(sweep);
  sweep->add_option("--half-widths", widths, "Slab half-widths relative to mesh extent")->delimiter(',');
  sweep->add_option("--out", sweep_out, "Sweep CSV path");

  int verify_n = 4;
  std::string verify_seeds = "0..2";
  auto* verify = app.add_subcommand("verify", "Parity, counter and connectivity checks on block meshes");
  verify->add_option("--n", verify_n, "Block mesh cells per axis");
  verify->add_option("--seeds", verify_seeds, "Seed range");

  int nx = 4, ny = 4, nz = 4;
  std::string mesh_out;
  auto* mesh = app.add_subcommand("mesh", "Mesh utilities");
  mesh->require_subcommand(1);
  auto* mesh_gen = mesh->add_subcommand("gen", "Write a Kuhn-split block mesh as .node/.ele");
  mesh_gen->add_option("--nx", nx)->required();
  mesh_gen->add_option("--ny", ny)->required();
  mesh_gen->add_option("--nz", nz)->required();
  mesh_gen->add_option("--out", mesh_out, "Output prefix")->required();

  CommonOptions sched_opt;
  std::uint64_t sched_seed = 0;
  std::string sched_out, sched_in;
  auto* schedule = app.add_subcommand("schedule", "Edit schedule utilities");
  schedule->require_subcommand(1);
  auto* sched_gen = schedule->add_subcommand("gen", "Generate a schedule as JSON");
  sched_opt.add(sched_gen);
  sched_gen->add_option("--seed", sched_seed);
  sched_gen->add_option("--out", sched_out, "Output file (default stdout)");
  auto* sched_dump = schedule->add_subcommand("dump", "Summarize a schedule JSON file");
  sched_dump->add_option("file", sched_in)->required();

  CommonOptions matrix_opt;
  std::uint64_t matrix_seed = 0;
  int matrix_frame = -1;
  std::string matrix_out;
  auto* matrix = app.add_subcommand("matrix", "Write the operator after a schedule prefix as MatrixMarket");
  matrix_opt.add(matrix);
  matrix->add_option("--seed", matrix_seed);
  matrix->add_option("--frame", matrix_frame, "Last applied frame (-1: initial mask)");
  matrix->add_option("--out", matrix_out)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*bench) return cmd_bench(bench_opt, policy, out, trace, material_out);
    if (*sweep) return cmd_sweep(sweep_opt, widths, sweep_out);
    if (*verify) return cmd_verify(verify_n, verify_seeds);
    if (*mesh_gen) return cmd_mesh_gen(nx, ny, nz, mesh_out);
    if (*sched_gen) return cmd_schedule_gen(sched_opt, sched_seed, sched_out);
    if (*sched_dump) return cmd_schedule_dump(sched_in);
    if (*matrix) return cmd_matrix_dump(matrix_opt, matrix_seed, matrix_frame, matrix_out);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
