#include "stafem/elasticity.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

namespace stafem {

ElementMatrix element_stiffness(const std::array<Vec3, 4>& x, const Material& material) {
  Eigen::Matrix3d dm;
  dm.col(0) = x[1] - x[0];
  dm.col(1) = x[2] - x[0];
  dm.col(2) = x[3] - x[0];
  const double volume = std::abs(dm.determinant()) / 6.0;
  const Eigen::Matrix3d inv = dm.inverse();

  // Rows of inv are the gradients of the shape functions of vertices 1..3.
  Eigen::Matrix<double, 3, 4> grad;
  grad.rightCols<3>() = inv.transpose();
  grad.col(0) = -grad.rightCols<3>().rowwise().sum();

  // Voigt order xx, yy, zz, xy, yz, zx with engineering shear strains.
  Eigen::Matrix<double, 6, 12> b = Eigen::Matrix<double, 6, 12>::Zero();
  for (int a = 0; a < 4; ++a) {
    const double gx = grad(0, a), gy = grad(1, a), gz = grad(2, a);
    const int c = 3 * a;
    b(0, c) = gx;
    b(1, c + 1) = gy;
    b(2, c + 2) = gz;
    b(3, c) = gy;
    b(3, c + 1) = gx;
    b(4, c + 1) = gz;
    b(4, c + 2) = gy;
    b(5, c) = gz;
    b(5, c + 2) = gx;
  }

  const double e = material.youngs_modulus;
  const double nu = material.poisson_ratio;
  const double lambda = e * nu / ((1.0 + nu) * (1.0 - 2.0 * nu));
  const double mu = e / (2.0 * (1.0 + nu));
  Eigen::Matrix<double, 6, 6> d = Eigen::Matrix<double, 6, 6>::Zero();
  d.topLeftCorner<3, 3>().setConstant(lambda);
  d.topLeftCorner<3, 3>().diagonal().array() += 2.0 * mu;
  d.bottomRightCorner<3, 3>().diagonal().setConstant(mu);

  Eigen::Matrix<double, 12, 12> k = volume * b.transpose() * d * b;
  k = 0.5 * (k + k.transpose()).eval();  // exact symmetry

  ElementMatrix out;
  Eigen::Map<Eigen::Matrix<double, 12, 12, Eigen::RowMajor>>(out.data()) = k;
  return out;
}

Mat3 element_block(const ElementMatrix& k, int a, int b) {
  Mat3 m;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) m[3 * i + j] = k[(3 * a + i) * 12 + 3 * b + j];
  }
  return m;
}

ElementBlocks oriented_blocks(const ElementMatrix& k, const Tet& tet) {
  ElementBlocks out;
  for (int e = 0; e < 6; ++e) {
    auto [a, b] = kTetEdgeSlots[e];
    if (tet[a] > tet[b]) std::swap(a, b);
    out[e] = element_block(k, a, b);
  }
  for (int a = 0; a < 4; ++a) out[6 + a] = element_block(k, a, a);
  return out;
}

ElementStiffnessCache precompute_element_stiffness(const SupersetMesh& mesh, const Material& material) {
  if (!(material.poisson_ratio > -1.0 && material.poisson_ratio < 0.5)) {
    throw ConfigError("Poisson ratio must lie in (-1, 0.5)");
  }
  if (!(material.youngs_modulus > 0.0)) throw ConfigError("Young's modulus must be positive");
  if (!(material.density > 0.0)) throw ConfigError("density must be positive");

  const BoundingBox box = bounding_box(mesh);
  const double extent = (box.max - box.min).maxCoeff();
  const double min_volume = 1e-14 * extent * extent * extent;

  ElementStiffnessCache cache;
  cache.material = material;
  cache.stiffness.resize(mesh.num_tets());
  cache.volume.resize(mesh.num_tets());
  std::vector<TetId> degenerate;
  for (TetId t = 0; t < mesh.num_tets(); ++t) {
    cache.volume[t] = tet_volume(mesh, t);
    if (!(cache.volume[t] > min_volume)) {
      degenerate.push_back(t);
      continue;
    }
    const Tet& tet = mesh.tet(t);
    cache.stiffness[t] = oriented_blocks(
        element_stiffness({mesh.vertex(tet[0]), mesh.vertex(tet[1]), mesh.vertex(tet[2]), mesh.vertex(tet[3])}, material),
        tet);
  }
  if (!degenerate.empty()) {
    std::string msg = "degenerate tetrahedra:";
    for (std::size_t i = 0; i < degenerate.size() && i < 32; ++i) msg += " " + std::to_string(degenerate[i]);
    if (degenerate.size() > 32) msg += " ... (" + std::to_string(degenerate.size()) + " total)";
    throw MeshError(msg);
  }

  // Any matrix entry or vertex mass collects contributions only from tets around one vertex.
  const double valence = static_cast<double>(build_vertex_incidence(mesh).max_valence());
  double max_entry = 0, max_volume = 0;
  for (TetId t = 0; t < mesh.num_tets(); ++t) {
    for (const Mat3& b : cache.stiffness[t]) {
      for (double k : b) max_entry = std::max(max_entry, std::abs(k));
    }
    max_volume = std::max(max_volume, cache.volume[t]);
  }
  cache.stiffness_quantum = exact_sum_quantum(valence * max_entry);
  cache.mass_quantum = exact_sum_quantum(valence * 0.25 * material.density * max_volume);
  cache.quarter_mass.resize(mesh.num_tets());
  const auto snap = [](double x, double q) { return std::nearbyint(x / q) * q; };
  for (TetId t = 0; t < mesh.num_tets(); ++t) {
    for (Mat3& b : cache.stiffness[t]) {
      for (double& k : b) k = snap(k, cache.stiffness_quantum);
    }
    cache.quarter_mass[t] = snap(0.25 * material.density * cache.volume[t], cache.mass_quantum);
  }
  return cache;
}

double exact_sum_quantum(double bound) {
  if (!(bound > 0) || !std::isfinite(bound)) return 0x1p-1074;
  int e = 0;
  std::frexp(bound * (1 + 0x1p-20), &e);  // slack for snapping rounding up; bound < 2^e
  return std::ldexp(1.0, e - 53);
}

namespace {

using BlockEntry = SymmetricSparseMatrix<Mat3>::Entry;
using Traits = BlockTraits<Mat3>;

// Local slots (a, b) of edge k of tet t, ordered so that tet[a] == edge.u.
std::array<int, 2> oriented_slots(const Tet& tet, int k) {
  auto [a, b] = kTetEdgeSlots[k];
  if (tet[a] > tet[b]) std::swap(a, b);
  return {a, b};
}

// Edge slot index of the local vertex pair {a, b}.
constexpr int kEdgeSlotOf[4][4] = {{-1, 0, 1, 2}, {0, -1, 3, 4}, {1, 3, -1, 5}, {2, 4, 5, -1}};

double quarter_mass(const ElementStiffnessCache& cache, TetId t) { return cache.quarter_mass[t]; }

}  // namespace

ElasticState rebuild_elasticity(const SupersetMesh& mesh, const ElementStiffnessCache& cache, const ActiveMask& mask,
                                bool with_counts) {
  ElasticState state;
  state.mesh = &mesh;
  state.cache = &cache;
  state.mask = mask;

  const std::size_t nv = mesh.num_vertices();
  std::vector<std::uint32_t> dense(mesh.num_edges(), 0);
  std::vector<std::uint32_t> vcount(nv, 0);
  for (TetId t = 0; t < mesh.num_tets(); ++t) {
    if (!mask[t]) continue;
    for (EdgeId e : mesh.tet_edges(t)) ++dense[e];
    for (VertexId v : mesh.tet(t)) ++vcount[v];
  }

  // Structure first, then scatter-add in tet order.
  // The streaming state keeps a slot for every candidate pair; inactive ones start retired.
  std::vector<std::vector<BlockEntry>> rows(nv);
  for (EdgeId e = 0; e < mesh.num_edges(); ++e) {
    const bool live = dense[e] > 0;
    if (!live && !with_counts) continue;
    const Edge& edge = mesh.edge(e);
    if (dense[e] > UINT16_MAX) throw MeshError("edge valence too large for slot counters");
    const auto count = static_cast<std::uint16_t>(with_counts ? dense[e] : 0);
    rows[edge.u].push_back({edge.v, live, count, Traits::zero()});
    rows[edge.v].push_back({edge.u, live, 0, Traits::zero()});
  }
  for (auto& r : rows) {
    std::sort(r.begin(), r.end(), [](const BlockEntry& a, const BlockEntry& b) { return a.col < b.col; });
  }
  state.stiffness = SymmetricSparseMatrix<Mat3>::from_rows(std::move(rows), std::vector<Mat3>(nv, Traits::zero()));
  state.vertex_mass.assign(nv, 0.0);

  auto& k = state.stiffness;
  for (TetId t = 0; t < mesh.num_tets(); ++t) {
    if (!mask[t]) continue;
    ++state.counters.tets_scanned;
    const Tet& tet = mesh.tet(t);
    const ElementBlocks& ke = cache.stiffness[t];
    for (int e = 0; e < 6; ++e) {
      const auto [a, b] = oriented_slots(tet, e);
      k.add(tet[a], tet[b], ke[e]);
      ++state.counters.edges_visited;
    }
    for (int a = 0; a < 4; ++a) {
      Traits::add(k.diagonal(tet[a]), ke[6 + a]);
      state.vertex_mass[tet[a]] += quarter_mass(cache, t);
    }
    state.counters.entries_mutated += 10;
  }
  if (with_counts) {
    state.vertex_counts = std::move(vcount);
    state.slot_positions.resize(mesh.num_tets());
    for (TetId t = 0; t < mesh.num_tets(); ++t) {
      const Tet& tet = mesh.tet(t);
      for (int e = 0; e < 6; ++e) {
        const auto [a, b] = oriented_slots(tet, e);
        const std::size_t pu = k.position(tet[a], tet[b]);
        const std::size_t pv = k.position(tet[b], tet[a]);
        if (std::max(pu, pv) > UINT16_MAX) throw MeshError("vertex valence too large for slot positions");
        state.slot_positions[t][2 * e] = static_cast<std::uint16_t>(pu);
        state.slot_positions[t][2 * e + 1] = static_cast<std::uint16_t>(pv);
      }
    }
  }
  return state;
}

std::uint32_t pair_count(const ElasticState& state, EdgeId e) {
  const Edge& edge = state.mesh->edge(e);
  const auto& row = state.stiffness.row(edge.u);
  const auto it = std::lower_bound(row.begin(), row.end(), edge.v, [](const BlockEntry& x, VertexId c) { return x.col < c; });
  return it != row.end() && it->col == edge.v ? it->count : 0;
}

void apply_edits_streaming(ElasticState& state, const EditBatch& batch) {
  const SupersetMesh& mesh = *state.mesh;
  const ElementStiffnessCache& cache = *state.cache;
  if (state.slot_positions.size() != mesh.num_tets()) throw InvariantError("streaming update on a state without counts");
  apply_batch(mesh, state.mask, batch);
  state.counters.reset();
  auto& k = state.stiffness;

  for (TetId t : batch.deleted) {
    ++state.counters.tets_scanned;
    const Tet& tet = mesh.tet(t);
    const ElementBlocks& ke = cache.stiffness[t];
    const auto& pos = state.slot_positions[t];
    for (int e = 0; e < 6; ++e) {
      ++state.counters.edges_visited;
      const auto [a, b] = oriented_slots(tet, e);
      auto& count = k.count_at(tet[a], pos[2 * e]);
      if (count == 0) {
        throw InvariantError("block contributor underflow on edge " + std::to_string(mesh.tet_edges(t)[e]));
      }
      if (--count == 0) {
        k.retire_at(tet[a], pos[2 * e], tet[b], pos[2 * e + 1]);
      } else {
        k.sub_at(tet[a], pos[2 * e], tet[b], pos[2 * e + 1], ke[e]);
      }
    }
    for (int a = 0; a < 4; ++a) {
      const VertexId v = tet[a];
      if (state.vertex_counts[v] == 0) throw InvariantError("vertex contributor underflow");
      if (--state.vertex_counts[v] == 0) {
        k.diagonal(v) = Traits::zero();
        state.vertex_mass[v] = 0.0;
      } else {
        Traits::sub(k.diagonal(v), ke[6 + a]);
        state.vertex_mass[v] -= quarter_mass(cache, t);
      }
    }
    state.counters.entries_mutated += 10;
  }

  for (TetId t : batch.added) {
    ++state.counters.tets_scanned;
    const Tet& tet = mesh.tet(t);
    const ElementBlocks& ke = cache.stiffness[t];
    const auto& pos = state.slot_positions[t];
    for (int e = 0; e < 6; ++e) {
      ++state.counters.edges_visited;
      const auto [a, b] = oriented_slots(tet, e);
      auto& count = k.count_at(tet[a], pos[2 * e]);
      if (count == UINT16_MAX) throw InvariantError("block contributor overflow");
      if (++count == 1) {
        k.revive_at(tet[a], pos[2 * e], tet[b], pos[2 * e + 1], ke[e]);
      } else {
        k.add_at(tet[a], pos[2 * e], tet[b], pos[2 * e + 1], ke[e]);
      }
    }
    for (int a = 0; a < 4; ++a) {
      const VertexId v = tet[a];
      ++state.vertex_counts[v];
      Traits::add(k.diagonal(v), ke[6 + a]);
      state.vertex_mass[v] += quarter_mass(cache, t);
    }
    state.counters.entries_mutated += 10;
  }
}

void apply_edits_local_recompute(ElasticState& state, const EditBatch& batch, const Incidence& edge_incidence,
                                 const Incidence& vertex_incidence) {
  const SupersetMesh& mesh = *state.mesh;
  const ElementStiffnessCache& cache = *state.cache;
  apply_batch(mesh, state.mask, batch);
  state.counters.reset();
  auto& k = state.stiffness;

  std::vector<EdgeId> edges;
  std::vector<VertexId> verts;
  edges.reserve(6 * batch.size());
  verts.reserve(4 * batch.size());
  for (const auto* ids : {&batch.deleted, &batch.added}) {
    for (TetId t : *ids) {
      const auto& te = mesh.tet_edges(t);
      edges.insert(edges.end(), te.begin(), te.end());
      const Tet& tet = mesh.tet(t);
      verts.insert(verts.end(), tet.begin(), tet.end());
    }
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  std::sort(verts.begin(), verts.end());
  verts.erase(std::unique(verts.begin(), verts.end()), verts.end());

  for (EdgeId e : edges) {
    ++state.counters.edges_visited;
    Mat3 sum = Traits::zero();
    std::uint32_t active = 0;
    const auto tets = edge_incidence.tets_of(e);
    const auto* slots = edge_incidence.slots.data() + edge_incidence.offsets[e];
    for (std::size_t i = 0; i < tets.size(); ++i) {
      ++state.counters.tets_scanned;
      if (!state.mask[tets[i]]) continue;
      ++active;
      Traits::add(sum, cache.stiffness[tets[i]][kEdgeSlotOf[slots[i][0]][slots[i][1]]]);
    }
    const Edge& edge = mesh.edge(e);
    const bool present = k.contains(edge.u, edge.v);
    if (active > 0) {
      present ? k.assign(edge.u, edge.v, sum) : k.insert(edge.u, edge.v, sum);
      ++state.counters.entries_mutated;
    } else if (present) {
      k.erase(edge.u, edge.v);
      ++state.counters.entries_mutated;
    }
  }

  for (VertexId v : verts) {
    Mat3 sum = Traits::zero();
    double mass = 0.0;
    const auto tets = vertex_incidence.tets_of(v);
    const auto* slots = vertex_incidence.slots.data() + vertex_incidence.offsets[v];
    for (std::size_t i = 0; i < tets.size(); ++i) {
      ++state.counters.tets_scanned;
      if (!state.mask[tets[i]]) continue;
      Traits::add(sum, cache.stiffness[tets[i]][6 + slots[i][0]]);
      mass += quarter_mass(cache, tets[i]);
    }
    k.diagonal(v) = sum;
    state.vertex_mass[v] = mass;
    ++state.counters.entries_mutated;
  }
}

void apply_edits_rebuild(ElasticState& state, const EditBatch& batch) {
  apply_batch(*state.mesh, state.mask, batch);
  state = rebuild_elasticity(*state.mesh, *state.cache, state.mask, /*with_counts=*/false);
}

CsrMatrix finalize(const ElasticState& state, double eps) { return materialize(state.stiffness, eps); }

std::vector<double> lumped_mass(const ElasticState& state) {
  std::vector<double> m(3 * state.vertex_mass.size());
  for (std::size_t v = 0; v < state.vertex_mass.size(); ++v) m[3 * v] = m[3 * v + 1] = m[3 * v + 2] = state.vertex_mass[v];
  return m;
}

ElasticAssembler::ElasticAssembler(const SupersetMesh& mesh, const ElementStiffnessCache& cache, UpdatePolicy policy,
                                   const ActiveMask& initial)
    : policy_(policy), state_(rebuild_elasticity(mesh, cache, initial, policy == UpdatePolicy::streaming_update)) {
  if (initial.size() != mesh.num_tets() || cache.stiffness.size() != mesh.num_tets()) {
    throw ConfigError("mask or stiffness cache size does not match the mesh");
  }
  if (policy == UpdatePolicy::local_recompute) {
    edge_incidence_ = build_edge_incidence(mesh);
    vertex_incidence_ = build_vertex_incidence(mesh);
  }
}

void ElasticAssembler::apply(const EditBatch& batch) {
  switch (policy_) {
    case UpdatePolicy::full_rebuild: apply_edits_rebuild(state_, batch); break;
    case UpdatePolicy::local_recompute:
      apply_edits_local_recompute(state_, batch, edge_incidence_, vertex_incidence_);
      break;
    case UpdatePolicy::streaming_update: apply_edits_streaming(state_, batch); break;
  }
}

void ElasticAssembler::reaccumulate() {
  const WorkCounters counters = state_.counters;
  state_ = rebuild_elasticity(*state_.mesh, *state_.cache, state_.mask, policy_ == UpdatePolicy::streaming_update);
  state_.counters = counters;
}

std::size_t ElasticAssembler::state_bytes() const {
  using namespace memory_cost;
  const SupersetMesh& mesh = *state_.mesh;
  const std::size_t n = mesh.num_vertices();
  std::size_t bytes = mesh.num_tets() * kMaskPerTet + n * (kRowHeader + kBlockDiagonal + kVertexMass) +
                      state_.stiffness.slot_entries() * kBlockEntry;
  if (policy_ == UpdatePolicy::streaming_update) {
    bytes += state_.vertex_counts.size() * kVertexCount +
             state_.slot_positions.size() * 12 * kSlotPosition;
  }
  if (policy_ == UpdatePolicy::local_recompute) {
    for (const Incidence* inc : {&edge_incidence_, &vertex_incidence_}) {
      bytes += inc->offsets.size() * kIncidenceOffset + inc->tets.size() * kIncidenceItem;
    }
  }
  return bytes;
}

}  // namespace stafem
