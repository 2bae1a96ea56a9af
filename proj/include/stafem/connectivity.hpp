#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "stafem/edits.hpp"
#include "stafem/mesh.hpp"

namespace stafem {

/// Face-sharing tet pairs of the candidate pool.
struct FaceAdjacency {
  std::vector<std::pair<TetId, TetId>> pairs;  // (a, b) with a < b, sorted
  std::vector<std::size_t> offsets;            // per-tet neighbour lists
  std::vector<TetId> neighbors;

  std::span<const TetId> neighbors_of(TetId t) const {
    return {neighbors.data() + offsets[t], offsets[t + 1] - offsets[t]};
  }
};

/// Throws MeshError when a face is shared by more than two candidate tets.
FaceAdjacency precompute_face_adjacency(const SupersetMesh& mesh);

struct Components {
  std::vector<std::int32_t> label;  // -1 for inactive tets
  std::size_t count = 0;
};

/// Breadth-first component labelling restricted to active tets; the oracle for the
/// union-find state.
Components bfs_components(const FaceAdjacency& adjacency, const ActiveMask& mask);

/// Union-find over active tets, rebuilt from the mask every `rebuild_period` frames.
/// Between rebuilds additions are unioned eagerly and deletions are ignored, so a stale
/// state can report two tets as connected when they are not, never the reverse.
///
/// find() compresses paths, so queries mutate the state; callers need exclusive access.
class ConnectivityState {
 public:
  ConnectivityState(const FaceAdjacency& adjacency, int rebuild_period);

  void rebuild(const ActiveMask& mask);
  /// Advances one frame. `mask` is the mask after `batch` has been applied. Returns true
  /// when this call rebuilt from scratch.
  bool update(const ActiveMask& mask, const EditBatch& batch);

  /// Throws std::invalid_argument if either tet is not tracked.
  bool same_component(TetId a, TetId b);
  std::size_t component_count();
  bool tracked(TetId t) const { return t < member_.size() && member_[t] != 0; }

  int rebuild_period() const { return rebuild_period_; }
  int frames_since_rebuild() const { return frames_since_rebuild_; }

 private:
  TetId find(TetId t);
  void unite(TetId a, TetId b);

  const FaceAdjacency* adjacency_;
  int rebuild_period_;
  int frames_since_rebuild_ = 0;
  std::vector<TetId> parent_;
  std::vector<std::uint8_t> rank_;
  std::vector<std::uint8_t> member_;
};

/// Fraction of `sample_size` random active-tet pairs whose union-find answer disagrees
/// with BFS on `mask`.
double spot_check(ConnectivityState& state, const FaceAdjacency& adjacency, const ActiveMask& mask,
                  std::size_t sample_size, std::uint64_t seed);

}  // namespace stafem
