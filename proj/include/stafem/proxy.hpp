#pragma once

#include <memory>

#include "stafem/assembly.hpp"

namespace stafem {

/// Graph-Laplacian proxy state: L_t over binary edge activity, plus the edge
/// multiplicities when the streaming policy maintains them.
struct ProxyState {
  const SupersetMesh* mesh = nullptr;
  ActiveMask mask;
  SymmetricSparseMatrix<double> laplacian;  // off-diagonals -1, diagonal = degree
  EdgeMultiplicityMap counts;
  WorkCounters counters;
};

/// Full scan of the active tets. `counts` is filled only when `with_counts` is set.
ProxyState rebuild_proxy(const SupersetMesh& mesh, const ActiveMask& mask, bool with_counts = true);

/// Updates multiplicities of the six edges of each edited tet and inserts or removes
/// off-diagonal pairs on 0 <-> positive transitions.
void apply_edits_streaming(ProxyState& state, const EditBatch& batch);

/// Stateless exact update: recomputes the activity of every edge touched by the batch by
/// rescanning all candidate tets incident to it. Ignores `state.counts`.
void apply_edits_local_recompute(ProxyState& state, const EditBatch& batch, const Incidence& edge_incidence);

/// Applies the batch to the mask and rebuilds from scratch.
void apply_edits_rebuild(ProxyState& state, const EditBatch& batch);

/// A_t = L_t + eps I in compressed rows.
CsrMatrix finalize(const ProxyState& state, double eps);

/// Brute-force multiplicity recount, the oracle for `ProxyState::counts`.
EdgeMultiplicityMap count_edge_multiplicity(const SupersetMesh& mesh, const ActiveMask& mask);

class ProxyAssembler final : public Assembler {
 public:
  ProxyAssembler(const SupersetMesh& mesh, UpdatePolicy policy, const ActiveMask& initial);

  UpdatePolicy policy() const override { return policy_; }
  void apply(const EditBatch& batch) override;
  CsrMatrix finalize(double eps) const override { return stafem::finalize(state_, eps); }
  const ActiveMask& mask() const override { return state_.mask; }
  const WorkCounters& counters() const override { return state_.counters; }
  std::size_t state_bytes() const override;

  const ProxyState& state() const { return state_; }

 private:
  UpdatePolicy policy_;
  ProxyState state_;
  Incidence edge_incidence_;  // local_recompute only
};

}  // namespace stafem
