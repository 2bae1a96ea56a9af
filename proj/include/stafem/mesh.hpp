#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <vector>

#include <absl/container/flat_hash_map.h>

#include "stafem/types.hpp"

namespace stafem {

/// Immutable superset tetrahedral mesh: every vertex and every candidate tetrahedron
/// a run may ever activate, with canonical tet-to-edge incidence precomputed.
class SupersetMesh {
 public:
  using Refinement = std::map<TetId, std::array<TetId, 8>>;

  SupersetMesh() = default;

  /// Validates index ranges and distinctness, then builds the edge tables.
  SupersetMesh(std::vector<Vec3> vertices, std::vector<Tet> tets, Refinement refinement = {});

  std::size_t num_vertices() const { return vertices_.size(); }
  std::size_t num_tets() const { return tets_.size(); }
  std::size_t num_edges() const { return edges_.size(); }

  const std::vector<Vec3>& vertices() const { return vertices_; }
  const std::vector<Tet>& tets() const { return tets_; }
  const Vec3& vertex(VertexId v) const { return vertices_[v]; }
  const Tet& tet(TetId t) const { return tets_[t]; }

  const std::vector<Edge>& edges() const { return edges_; }
  const Edge& edge(EdgeId e) const { return edges_[e]; }
  /// Six edge ids of tet `t`, in the local order of kTetEdgeSlots.
  const std::array<EdgeId, 6>& tet_edges(TetId t) const { return tet_edges_[t]; }
  /// Looks up the dense id of edge {a, b}; false when it is not a candidate edge.
  bool find_edge(VertexId a, VertexId b, EdgeId& out) const;

  const Refinement& refinement() const { return refinement_; }
  /// Parent of a refinement child, or kNoTet.
  TetId parent_of(TetId t) const { return parent_of_.empty() ? kNoTet : parent_of_[t]; }
  bool has_children(TetId t) const { return refinement_.contains(t); }

  Vec3 centroid(TetId t) const;

  bool operator==(const SupersetMesh& other) const;

 private:
  std::vector<Vec3> vertices_;
  std::vector<Tet> tets_;
  std::vector<Edge> edges_;
  std::vector<std::array<EdgeId, 6>> tet_edges_;
  absl::flat_hash_map<std::uint64_t, EdgeId> edge_index_;
  Refinement refinement_;
  std::vector<TetId> parent_of_;
};

/// Active tetrahedron subset of one mesh.
class ActiveMask {
 public:
  ActiveMask() = default;
  ActiveMask(std::size_t num_tets, bool value) : active_(num_tets, value ? 1 : 0), count_(value ? num_tets : 0) {}

  std::size_t size() const { return active_.size(); }
  std::size_t count() const { return count_; }
  bool operator[](TetId t) const { return active_[t] != 0; }

  void set(TetId t, bool value) {
    const auto old = active_[t];
    active_[t] = value ? 1 : 0;
    count_ += static_cast<std::size_t>(active_[t]) - old;
  }

  std::vector<TetId> active_ids() const;

  bool operator==(const ActiveMask&) const = default;

 private:
  std::vector<std::uint8_t> active_;
  std::size_t count_ = 0;
};

/// Default mask: every tet active except refinement children.
ActiveMask coarse_mask(const SupersetMesh& mesh);

/// True when no parent is active together with one of its children.
bool refinement_consistent(const SupersetMesh& mesh, const ActiveMask& mask);

/// Compressed incidence from a key (edge or vertex) to candidate tets, with the local
/// vertex slots of the key inside each tet. Built by policies that rescan incidence.
struct Incidence {
  std::vector<std::size_t> offsets;  // size = keys + 1
  std::vector<TetId> tets;
  std::vector<std::array<std::uint8_t, 2>> slots;

  std::span<const TetId> tets_of(std::size_t key) const {
    return {tets.data() + offsets[key], offsets[key + 1] - offsets[key]};
  }
  std::size_t valence(std::size_t key) const { return offsets[key + 1] - offsets[key]; }
  std::size_t max_valence() const;
};

Incidence build_edge_incidence(const SupersetMesh& mesh);
Incidence build_vertex_incidence(const SupersetMesh& mesh);

/// Largest number of candidate tets incident to one edge.
std::size_t max_edge_valence(const SupersetMesh& mesh);
/// Largest total edge valence over the six edges of a single tet; bounds the proxy
/// local-recompute rescan cost of one edited tet.
std::size_t max_tet_edge_rescan(const SupersetMesh& mesh);
/// As above, plus the four vertex valences (diagonal blocks of the elasticity operator).
std::size_t max_tet_entry_rescan(const SupersetMesh& mesh);

double tet_volume(const SupersetMesh& mesh, TetId t);
double signed_tet_volume(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d);

struct BoundingBox {
  Vec3 min;
  Vec3 max;
  int longest_axis() const;
};
BoundingBox bounding_box(const SupersetMesh& mesh);

SupersetMesh load_mesh(const std::filesystem::path& node_path, const std::filesystem::path& ele_path);
void write_mesh(const SupersetMesh& mesh, const std::filesystem::path& node_path, const std::filesystem::path& ele_path);

/// Unit-spacing grid of nx*ny*nz cubes, each split into six tets around its main diagonal.
SupersetMesh generate_block_mesh(int nx, int ny, int nz);

/// Returns a copy of `mesh` extended with a regular 1->8 midpoint subdivision of each tet
/// in `refinable`. Midpoints are shared across parents through the edge table.
SupersetMesh build_refinement(const SupersetMesh& mesh, std::span<const TetId> refinable);

}  // namespace stafem
