#include "stafem/proxy.hpp"

#include <algorithm>

namespace stafem {

std::string_view to_string(UpdatePolicy p) {
  switch (p) {
    case UpdatePolicy::full_rebuild: return "full_rebuild";
    case UpdatePolicy::local_recompute: return "local_recompute";
    case UpdatePolicy::streaming_update: return "streaming_update";
  }
  return "?";
}

char policy_letter(UpdatePolicy p) {
  switch (p) {
    case UpdatePolicy::full_rebuild: return 'R';
    case UpdatePolicy::local_recompute: return 'L';
    case UpdatePolicy::streaming_update: return 'S';
  }
  return '?';
}

UpdatePolicy parse_policy(std::string_view name) {
  if (name == "R" || name == "full_rebuild" || name == "rebuild") return UpdatePolicy::full_rebuild;
  if (name == "L" || name == "local_recompute" || name == "local") return UpdatePolicy::local_recompute;
  if (name == "S" || name == "streaming_update" || name == "streaming") return UpdatePolicy::streaming_update;
  throw ConfigError("unknown update policy '" + std::string(name) + "'");
}

namespace {

using Entry = SymmetricSparseMatrix<double>::Entry;

}  // namespace

ProxyState rebuild_proxy(const SupersetMesh& mesh, const ActiveMask& mask, bool with_counts) {
  ProxyState state;
  state.mesh = &mesh;
  state.mask = mask;

  std::vector<std::uint32_t> dense(mesh.num_edges(), 0);
  for (TetId t = 0; t < mesh.num_tets(); ++t) {
    if (!mask[t]) continue;
    ++state.counters.tets_scanned;
    for (EdgeId e : mesh.tet_edges(t)) ++dense[e];
    state.counters.edges_visited += 6;
  }

  std::vector<std::vector<Entry>> rows(mesh.num_vertices());
  std::vector<double> diag(mesh.num_vertices(), 0.0);
  for (EdgeId e = 0; e < mesh.num_edges(); ++e) {
    if (dense[e] == 0) continue;
    const Edge& edge = mesh.edge(e);
    rows[edge.u].push_back({edge.v, true, 0, -1.0});
    rows[edge.v].push_back({edge.u, true, 0, -1.0});
    diag[edge.u] += 1.0;
    diag[edge.v] += 1.0;
    if (with_counts) state.counts.emplace(e, dense[e]);
  }
  for (auto& r : rows) {
    std::sort(r.begin(), r.end(), [](const Entry& a, const Entry& b) { return a.col < b.col; });
    state.counters.entries_mutated += r.size();
  }
  state.counters.entries_mutated += mesh.num_vertices();
  state.laplacian = SymmetricSparseMatrix<double>::from_rows(std::move(rows), std::move(diag));
  return state;
}

void apply_edits_streaming(ProxyState& state, const EditBatch& batch) {
  const SupersetMesh& mesh = *state.mesh;
  apply_batch(mesh, state.mask, batch);
  state.counters.reset();
  auto& L = state.laplacian;

  for (TetId t : batch.deleted) {
    ++state.counters.tets_scanned;
    for (EdgeId e : mesh.tet_edges(t)) {
      ++state.counters.edges_visited;
      auto it = state.counts.find(e);
      if (it == state.counts.end() || it->second == 0) {
        throw InvariantError("edge multiplicity underflow on edge " + std::to_string(e));
      }
      if (--it->second == 0) {
        const Edge& edge = mesh.edge(e);
        L.retire(edge.u, edge.v);
        L.diagonal(edge.u) -= 1.0;
        L.diagonal(edge.v) -= 1.0;
        state.counters.entries_mutated += 4;
      }
    }
  }
  for (TetId t : batch.added) {
    ++state.counters.tets_scanned;
    for (EdgeId e : mesh.tet_edges(t)) {
      ++state.counters.edges_visited;
      if (++state.counts[e] == 1) {
        const Edge& edge = mesh.edge(e);
        L.insert(edge.u, edge.v, -1.0);
        L.diagonal(edge.u) += 1.0;
        L.diagonal(edge.v) += 1.0;
        state.counters.entries_mutated += 4;
      }
    }
  }
}

void apply_edits_local_recompute(ProxyState& state, const EditBatch& batch, const Incidence& edge_incidence) {
  const SupersetMesh& mesh = *state.mesh;
  apply_batch(mesh, state.mask, batch);
  state.counters.reset();
  auto& L = state.laplacian;

  std::vector<EdgeId> touched;
  touched.reserve(6 * batch.size());
  for (const auto* ids : {&batch.deleted, &batch.added}) {
    for (TetId t : *ids) {
      const auto& te = mesh.tet_edges(t);
      touched.insert(touched.end(), te.begin(), te.end());
    }
  }
  std::sort(touched.begin(), touched.end());
  touched.erase(std::unique(touched.begin(), touched.end()), touched.end());

  for (EdgeId e : touched) {
    ++state.counters.edges_visited;
    std::uint32_t active = 0;
    for (TetId t : edge_incidence.tets_of(e)) {
      ++state.counters.tets_scanned;
      active += state.mask[t] ? 1 : 0;
    }
    const Edge& edge = mesh.edge(e);
    const bool present = L.contains(edge.u, edge.v);
    if (active > 0 && !present) {
      L.insert(edge.u, edge.v, -1.0);
      L.diagonal(edge.u) += 1.0;
      L.diagonal(edge.v) += 1.0;
      state.counters.entries_mutated += 4;
    } else if (active == 0 && present) {
      L.erase(edge.u, edge.v);
      L.diagonal(edge.u) -= 1.0;
      L.diagonal(edge.v) -= 1.0;
      state.counters.entries_mutated += 4;
    }
  }
}

void apply_edits_rebuild(ProxyState& state, const EditBatch& batch) {
  const SupersetMesh& mesh = *state.mesh;
  apply_batch(mesh, state.mask, batch);
  state = rebuild_proxy(mesh, state.mask, /*with_counts=*/false);
}

CsrMatrix finalize(const ProxyState& state, double eps) { return materialize(state.laplacian, eps); }

EdgeMultiplicityMap count_edge_multiplicity(const SupersetMesh& mesh, const ActiveMask& mask) {
  EdgeMultiplicityMap counts;
  for (TetId t = 0; t < mesh.num_tets(); ++t) {
    if (!mask[t]) continue;
    const Tet& tet = mesh.tet(t);
    for (const auto& [a, b] : kTetEdgeSlots) {
      EdgeId e = 0;
      if (!mesh.find_edge(tet[a], tet[b], e)) throw InvariantError("tet edge missing from edge table");
      ++counts[e];
    }
  }
  return counts;
}

ProxyAssembler::ProxyAssembler(const SupersetMesh& mesh, UpdatePolicy policy, const ActiveMask& initial)
    : policy_(policy),
      state_(rebuild_proxy(mesh, initial, policy == UpdatePolicy::streaming_update)) {
  if (initial.size() != mesh.num_tets()) throw ConfigError("active mask size does not match the mesh");
  if (policy == UpdatePolicy::local_recompute) edge_incidence_ = build_edge_incidence(mesh);
}

void ProxyAssembler::apply(const EditBatch& batch) {
  switch (policy_) {
    case UpdatePolicy::full_rebuild: apply_edits_rebuild(state_, batch); break;
    case UpdatePolicy::local_recompute: apply_edits_local_recompute(state_, batch, edge_incidence_); break;
    case UpdatePolicy::streaming_update: apply_edits_streaming(state_, batch); break;
  }
}

std::size_t ProxyAssembler::state_bytes() const {
  using namespace memory_cost;
  const SupersetMesh& mesh = *state_.mesh;
  const std::size_t n = mesh.num_vertices();
  std::size_t bytes = mesh.num_tets() * kMaskPerTet + n * (kRowHeader + kScalarDiagonal) +
                      state_.laplacian.slot_entries() * kScalarEntry;
  if (policy_ == UpdatePolicy::streaming_update) bytes += state_.counts.size() * kMultiplicityEntry;
  if (policy_ == UpdatePolicy::local_recompute) {
    bytes += edge_incidence_.offsets.size() * kIncidenceOffset + edge_incidence_.tets.size() * kIncidenceItem;
  }
  return bytes;
}

}  // namespace stafem
