#include <sstream>

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "stafem/bench.hpp"
#include "stafem/elasticity.hpp"
#include "stafem/proxy.hpp"

namespace py = pybind11;
using namespace stafem;

namespace {

py::array_t<double> vertex_array(const SupersetMesh& m) {
  py::array_t<double> out({static_cast<py::ssize_t>(m.num_vertices()), py::ssize_t{3}});
  auto a = out.mutable_unchecked<2>();
  for (std::size_t i = 0; i < m.num_vertices(); ++i) {
    for (int d = 0; d < 3; ++d) a(i, d) = m.vertex(i)[d];
  }
  return out;
}

py::array_t<std::uint32_t> tet_array(const SupersetMesh& m) {
  py::array_t<std::uint32_t> out({static_cast<py::ssize_t>(m.num_tets()), py::ssize_t{4}});
  auto a = out.mutable_unchecked<2>();
  for (std::size_t t = 0; t < m.num_tets(); ++t) {
    for (int k = 0; k < 4; ++k) a(t, k) = m.tet(t)[k];
  }
  return out;
}

template <class T, class Src>
py::array_t<T> to_array(const std::vector<Src>& v) {
  py::array_t<T> out(static_cast<py::ssize_t>(v.size()));
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

py::array_t<bool> mask_array(const ActiveMask& mask) {
  py::array_t<bool> out(static_cast<py::ssize_t>(mask.size()));
  bool* d = out.mutable_data();
  for (std::size_t t = 0; t < mask.size(); ++t) d[t] = mask[t];
  return out;
}

ActiveMask mask_from(const py::array_t<bool, py::array::c_style | py::array::forcecast>& in) {
  const auto a = in.unchecked<1>();
  ActiveMask mask(static_cast<std::size_t>(a.shape(0)), false);
  for (py::ssize_t t = 0; t < a.shape(0); ++t) mask.set(static_cast<TetId>(t), a(t));
  return mask;
}

// (data, indices, indptr, n): the argument order of scipy.sparse.csr_matrix.
py::tuple csr_tuple(const CsrMatrix& m) {
  return py::make_tuple(to_array<double>(m.val), to_array<std::int64_t>(m.col), to_array<std::int64_t>(m.row_ptr), m.n);
}

std::string csv_text(const std::vector<FrameMetrics>& frames) {
  std::ostringstream s;
  write_csv(s, frames);
  return s.str();
}

}  // namespace

PYBIND11_MODULE(_stafem, m) {
  m.doc() = "Topology-edit operator assembly benchmarks";

  py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<EditError>(m, "EditError", PyExc_RuntimeError);
  py::register_exception<MeshError>(m, "MeshError", PyExc_RuntimeError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);
  py::register_exception<InvariantError>(m, "InvariantError", PyExc_AssertionError);

  py::class_<SupersetMesh>(m, "Mesh")
      .def_property_readonly("num_vertices", &SupersetMesh::num_vertices)
      .def_property_readonly("num_tets", &SupersetMesh::num_tets)
      .def_property_readonly("num_edges", &SupersetMesh::num_edges)
      .def_property_readonly("vertices", &vertex_array)
      .def_property_readonly("tets", &tet_array)
      .def("volume", [](const SupersetMesh& mesh, TetId t) { return tet_volume(mesh, t); })
      .def("coarse_mask", [](const SupersetMesh& mesh) { return mask_array(coarse_mask(mesh)); })
      .def("write", [](const SupersetMesh& mesh, const std::string& node, const std::string& ele) {
        write_mesh(mesh, node, ele);
      });

  m.def("block_mesh", &generate_block_mesh, py::arg("nx"), py::arg("ny"), py::arg("nz"));
  m.def("load_mesh", [](const std::string& node, const std::string& ele) { return load_mesh(node, ele); });
  m.def("refine", [](const SupersetMesh& mesh, std::vector<TetId> tets) { return build_refinement(mesh, tets); });

  py::class_<ScheduleParams>(m, "ScheduleParams")
      .def(py::init<>())
      .def_readwrite("frames", &ScheduleParams::frames)
      .def_readwrite("axis", &ScheduleParams::axis)
      .def_readwrite("target_fraction", &ScheduleParams::target_fraction)
      .def_readwrite("half_width", &ScheduleParams::half_width)
      .def_readwrite("cycles", &ScheduleParams::cycles)
      .def_readwrite("parents_per_frame", &ScheduleParams::parents_per_frame);

  py::class_<Schedule>(m, "Schedule")
      .def_property_readonly("scenario", [](const Schedule& s) { return std::string(to_string(s.scenario)); })
      .def_readonly("seed", &Schedule::seed)
      .def_property_readonly("initial_mask", [](const Schedule& s) { return mask_array(s.initial_mask); })
      .def_property_readonly("frames",
                             [](const Schedule& s) {
                               py::list out;
                               for (const auto& b : s.frames) out.append(py::make_tuple(b.deleted, b.added));
                               return out;
                             })
      .def("to_json", &schedule_to_json)
      .def_static("from_json", [](const std::string& text) { return schedule_from_json(text); });

  m.def(
      "make_schedule",
      [](const SupersetMesh& mesh, const std::string& scenario, std::uint64_t seed, const ScheduleParams& p) {
        return make_schedule(mesh, parse_scenario(scenario), seed, p);
      },
      py::arg("mesh"), py::arg("scenario"), py::arg("seed") = 0, py::arg("params") = ScheduleParams{});

  py::class_<Material>(m, "Material")
      .def(py::init([](double young, double nu, double rho) { return Material{young, nu, rho}; }),
           py::arg("youngs_modulus") = 1.0, py::arg("poisson_ratio") = 0.3, py::arg("density") = 1.0)
      .def_readwrite("youngs_modulus", &Material::youngs_modulus)
      .def_readwrite("poisson_ratio", &Material::poisson_ratio)
      .def_readwrite("density", &Material::density);

  m.def(
      "element_stiffness",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& x, const Material& mat) {
        const auto a = x.unchecked<2>();
        if (a.shape(0) != 4 || a.shape(1) != 3) throw std::invalid_argument("expected a 4x3 vertex array");
        std::array<Vec3, 4> p;
        for (int i = 0; i < 4; ++i) p[i] = Vec3(a(i, 0), a(i, 1), a(i, 2));
        const ElementMatrix k = element_stiffness(p, mat);
        py::array_t<double> out({12, 12});
        std::copy(k.begin(), k.end(), out.mutable_data());
        return out;
      },
      py::arg("vertices"), py::arg("material") = Material{});

  py::class_<ElementStiffnessCache>(m, "ElementCache")
      .def_readonly("stiffness_quantum", &ElementStiffnessCache::stiffness_quantum)
      .def_readonly("mass_quantum", &ElementStiffnessCache::mass_quantum);
  m.def("precompute_element_stiffness", &precompute_element_stiffness, py::arg("mesh"),
        py::arg("material") = Material{}, py::keep_alive<0, 1>());

  py::class_<WorkCounters>(m, "WorkCounters")
      .def_readonly("edges_visited", &WorkCounters::edges_visited)
      .def_readonly("entries_mutated", &WorkCounters::entries_mutated)
      .def_readonly("tets_scanned", &WorkCounters::tets_scanned);

  py::class_<Assembler>(m, "Assembler")
      .def_property_readonly("policy", [](const Assembler& a) { return std::string(1, policy_letter(a.policy())); })
      .def(
          "apply",
          [](Assembler& a, std::vector<TetId> deleted, std::vector<TetId> added) {
            std::sort(deleted.begin(), deleted.end());
            std::sort(added.begin(), added.end());
            a.apply(EditBatch{std::move(deleted), std::move(added)});
          },
          py::arg("deleted"), py::arg("added"))
      .def("finalize", [](const Assembler& a, double eps) { return csr_tuple(a.finalize(eps)); }, py::arg("eps") = 0.0)
      .def_property_readonly("mask", [](const Assembler& a) { return mask_array(a.mask()); })
      .def_property_readonly("counters", [](const Assembler& a) { return a.counters(); })
      .def_property_readonly("state_bytes", &Assembler::state_bytes);

  py::class_<ProxyAssembler, Assembler>(m, "ProxyAssembler")
      .def(py::init([](const SupersetMesh& mesh, const std::string& policy, const py::array_t<bool>& mask) {
             return std::make_unique<ProxyAssembler>(mesh, parse_policy(policy), mask_from(mask));
           }),
           py::arg("mesh"), py::arg("policy"), py::arg("mask"), py::keep_alive<1, 2>());

  py::class_<ElasticAssembler, Assembler>(m, "ElasticAssembler")
      .def(py::init([](const SupersetMesh& mesh, const ElementStiffnessCache& cache, const std::string& policy,
                       const py::array_t<bool>& mask) {
             return std::make_unique<ElasticAssembler>(mesh, cache, parse_policy(policy), mask_from(mask));
           }),
           py::arg("mesh"), py::arg("cache"), py::arg("policy"), py::arg("mask"), py::keep_alive<1, 2>(),
           py::keep_alive<1, 3>())
      .def("lumped_mass", [](const ElasticAssembler& a) { return lumped_mass(a.state()); });

  py::class_<CgResult>(m, "CgResult")
      .def_readonly("x", &CgResult::x)
      .def_readonly("iterations", &CgResult::iterations)
      .def_readonly("relative_residual", &CgResult::relative_residual)
      .def_readonly("converged", &CgResult::converged);

  m.def(
      "pcg_solve",
      [](const Assembler& a, double eps, const std::vector<double>& b, double tol, int max_iter) {
        return pcg_solve(a.finalize(eps), b, CgConfig{tol, max_iter});
      },
      py::arg("assembler"), py::arg("eps"), py::arg("rhs"), py::arg("tolerance") = 1e-8,
      py::arg("max_iterations") = 0);

  py::class_<RunConfig>(m, "RunConfig")
      .def(py::init<>())
      .def_property(
          "block", [](const RunConfig& c) { return c.mesh.block; },
          [](RunConfig& c, std::array<int, 3> b) { c.mesh.block = b; })
      .def_property(
          "operator", [](const RunConfig& c) { return std::string(to_string(c.op)); },
          [](RunConfig& c, const std::string& s) { c.op = parse_operator(s); })
      .def_property(
          "scenario", [](const RunConfig& c) { return std::string(to_string(c.scenario)); },
          [](RunConfig& c, const std::string& s) { c.scenario = parse_scenario(s); })
      .def_property(
          "policy", [](const RunConfig& c) { return std::string(1, policy_letter(c.policy)); },
          [](RunConfig& c, const std::string& s) { c.policy = parse_policy(s); })
      .def_readwrite("schedule", &RunConfig::schedule)
      .def_readwrite("seeds", &RunConfig::seeds)
      .def_readwrite("epsilon", &RunConfig::epsilon)
      .def_readwrite("material", &RunConfig::material)
      .def_readwrite("timestep", &RunConfig::timestep)
      .def_readwrite("parity_check", &RunConfig::parity_check)
      .def_readwrite("connectivity_rebuild_period", &RunConfig::connectivity_rebuild_period)
      .def_readwrite("threads", &RunConfig::threads)
      .def_property(
          "cg_tolerance", [](const RunConfig& c) { return c.cg.tolerance; },
          [](RunConfig& c, double t) { c.cg.tolerance = t; })
      .def("validate", &RunConfig::validate);

  py::class_<BenchmarkResult>(m, "BenchmarkResult")
      .def_property_readonly("num_frames", [](const BenchmarkResult& r) { return r.frames.size(); })
      .def_property_readonly("failures",
                             [](const BenchmarkResult& r) {
                               py::list out;
                               for (const auto& f : r.failures) out.append(py::make_tuple(f.seed, f.message));
                               return out;
                             })
      .def("csv", [](const BenchmarkResult& r) { return csv_text(r.frames); })
      .def("summary_json", [](const BenchmarkResult& r) { return summary_json(r.frames, r.failures); });

  m.def(
      "run_benchmark", [](const RunConfig& c) { return run_benchmark(c); }, py::arg("config"),
      py::call_guard<py::gil_scoped_release>());
  m.def("csv_columns", &csv_columns);
}
