#pragma once

#include <array>
#include <vector>

#include "stafem/assembly.hpp"

namespace stafem {

struct Material {
  double youngs_modulus = 1.0;
  double poisson_ratio = 0.3;
  double density = 1.0;
};

/// Row-major 12x12 element matrix; DOF 3k+c is component c of local vertex k.
using ElementMatrix = std::array<double, 144>;

/// Linear-tetrahedron stiffness volume * B^T D B for one element.
ElementMatrix element_stiffness(const std::array<Vec3, 4>& x, const Material& material);

/// 3x3 sub-block (a, b) of an element matrix.
Mat3 element_block(const ElementMatrix& k, int a, int b);

/// The ten upper blocks of an element matrix: [k] is the block of tet edge slot k
/// (kTetEdgeSlots order) oriented from the lower to the higher global vertex id, and
/// [6 + a] is the diagonal block of local vertex a.
using ElementBlocks = std::array<Mat3, 10>;
ElementBlocks oriented_blocks(const ElementMatrix& k, const Tet& tet);

/// Per candidate tet element data. Stiffness entries and quarter masses are snapped to a
/// power-of-two grid (`stiffness_quantum`, `mass_quantum`) fine enough that every partial
/// sum at one matrix entry is exactly representable; assembly in any order and additive
/// removal are then exact, so all policies produce bitwise-identical operators.
struct ElementStiffnessCache {
  Material material;
  std::vector<ElementBlocks> stiffness;
  std::vector<double> volume;
  std::vector<double> quarter_mass;  // density * volume / 4
  double stiffness_quantum = 0;
  double mass_quantum = 0;
};

/// Smallest power of two q with 2^53 q > bound; multiples of q up to `bound` in magnitude
/// add and subtract exactly.
double exact_sum_quantum(double bound);

/// Throws ConfigError for an invalid Poisson ratio or non-positive modulus/density, and
/// MeshError listing every degenerate candidate tet.
ElementStiffnessCache precompute_element_stiffness(const SupersetMesh& mesh, const Material& material);

/// Element-assembled operator state: K_t as 3x3 blocks per vertex pair plus the lumped
/// mass. The streaming policy additionally keeps a slot for every candidate pair (retired
/// while inactive) whose counter holds the pair's contributor count, per-vertex
/// contributor counts, and the row positions of each candidate tet's blocks so deltas
/// are applied without searching.
struct ElasticState {
  const SupersetMesh* mesh = nullptr;
  const ElementStiffnessCache* cache = nullptr;
  ActiveMask mask;
  SymmetricSparseMatrix<Mat3> stiffness;
  std::vector<double> vertex_mass;
  std::vector<std::uint32_t> vertex_counts;  // diagonal contributors (streaming)
  /// Streaming: per candidate tet and oriented edge k, positions of (u, v) in row u at
  /// [2k] and of (v, u) in row v at [2k + 1].
  std::vector<std::array<std::uint16_t, 12>> slot_positions;
  WorkCounters counters;
};

/// Full scan of the active tets. `with_counts` also builds the streaming state (counts,
/// preallocated candidate slots, and slot positions).
ElasticState rebuild_elasticity(const SupersetMesh& mesh, const ElementStiffnessCache& cache, const ActiveMask& mask,
                                bool with_counts = true);

/// Streaming contributor count of a candidate edge, read from its slot (0 if none).
std::uint32_t pair_count(const ElasticState& state, EdgeId e);

/// Adds (for Δ+) or subtracts (for Δ−) the ten upper-triangle blocks of each edited tet.
/// Pairs whose contributor count reaches zero are retired from the structure, and
/// diagonal blocks and masses of vertices left without active tets are reset to zero.
/// Needs a state built with `with_counts`.
void apply_edits_streaming(ElasticState& state, const EditBatch& batch);

/// Recomputes every touched block and vertex mass from all active incident tets.
void apply_edits_local_recompute(ElasticState& state, const EditBatch& batch, const Incidence& edge_incidence,
                                 const Incidence& vertex_incidence);

void apply_edits_rebuild(ElasticState& state, const EditBatch& batch);

/// K_t + eps I expanded to 3n scalar rows.
CsrMatrix finalize(const ElasticState& state, double eps);

/// Per-DOF lumped mass (each vertex mass repeated three times).
std::vector<double> lumped_mass(const ElasticState& state);

class ElasticAssembler final : public Assembler {
 public:
  ElasticAssembler(const SupersetMesh& mesh, const ElementStiffnessCache& cache, UpdatePolicy policy,
                   const ActiveMask& initial);

  UpdatePolicy policy() const override { return policy_; }
  void apply(const EditBatch& batch) override;
  CsrMatrix finalize(double eps) const override { return stafem::finalize(state_, eps); }
  const ActiveMask& mask() const override { return state_.mask; }
  const WorkCounters& counters() const override { return state_.counters; }
  std::size_t state_bytes() const override;

  const ElasticState& state() const { return state_; }
  /// Recomputes every maintained block from scratch (streaming drift guard).
  void reaccumulate();

 private:
  UpdatePolicy policy_;
  ElasticState state_;
  Incidence edge_incidence_;
  Incidence vertex_incidence_;
};

}  // namespace stafem
