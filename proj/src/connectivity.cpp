#include "stafem/connectivity.hpp"

#include <algorithm>
#include <deque>
#include <numeric>
#include <stdexcept>

#include "stafem/rng.hpp"

namespace stafem {

FaceAdjacency precompute_face_adjacency(const SupersetMesh& mesh) {
  struct FaceRef {
    std::array<VertexId, 3> key;
    TetId tet;
  };
  std::vector<FaceRef> faces;
  faces.reserve(4 * mesh.num_tets());
  for (TetId t = 0; t < mesh.num_tets(); ++t) {
    const Tet& tet = mesh.tet(t);
    for (int skip = 0; skip < 4; ++skip) {
      std::array<VertexId, 3> key{};
      for (int a = 0, k = 0; a < 4; ++a) {
        if (a != skip) key[k++] = tet[a];
      }
      std::sort(key.begin(), key.end());
      faces.push_back({key, t});
    }
  }
  std::sort(faces.begin(), faces.end(), [](const FaceRef& a, const FaceRef& b) {
    return a.key != b.key ? a.key < b.key : a.tet < b.tet;
  });

  FaceAdjacency adj;
  for (std::size_t i = 0; i < faces.size();) {
    std::size_t j = i + 1;
    while (j < faces.size() && faces[j].key == faces[i].key) ++j;
    if (j - i > 2) {
      throw MeshError("face (" + std::to_string(faces[i].key[0]) + "," + std::to_string(faces[i].key[1]) + "," +
                      std::to_string(faces[i].key[2]) + ") is shared by " + std::to_string(j - i) + " tets");
    }
    if (j - i == 2) adj.pairs.emplace_back(faces[i].tet, faces[i + 1].tet);
    i = j;
  }
  std::sort(adj.pairs.begin(), adj.pairs.end());

  adj.offsets.assign(mesh.num_tets() + 1, 0);
  for (const auto& [a, b] : adj.pairs) {
    ++adj.offsets[a + 1];
    ++adj.offsets[b + 1];
  }
  std::partial_sum(adj.offsets.begin(), adj.offsets.end(), adj.offsets.begin());
  adj.neighbors.resize(adj.offsets.back());
  std::vector<std::size_t> cursor(adj.offsets.begin(), adj.offsets.end() - 1);
  for (const auto& [a, b] : adj.pairs) {
    adj.neighbors[cursor[a]++] = b;
    adj.neighbors[cursor[b]++] = a;
  }
  return adj;
}

Components bfs_components(const FaceAdjacency& adjacency, const ActiveMask& mask) {
  Components c;
  c.label.assign(mask.size(), -1);
  std::deque<TetId> queue;
  for (TetId s = 0; s < mask.size(); ++s) {
    if (!mask[s] || c.label[s] >= 0) continue;
    const auto id = static_cast<std::int32_t>(c.count++);
    c.label[s] = id;
    queue.push_back(s);
    while (!queue.empty()) {
      const TetId t = queue.front();
      queue.pop_front();
      for (TetId n : adjacency.neighbors_of(t)) {
        if (mask[n] && c.label[n] < 0) {
          c.label[n] = id;
          queue.push_back(n);
        }
      }
    }
  }
  return c;
}

ConnectivityState::ConnectivityState(const FaceAdjacency& adjacency, int rebuild_period)
    : adjacency_(&adjacency), rebuild_period_(rebuild_period) {
  if (rebuild_period < 1) throw ConfigError("connectivity rebuild period must be >= 1");
}

void ConnectivityState::rebuild(const ActiveMask& mask) {
  const std::size_t n = mask.size();
  parent_.resize(n);
  std::iota(parent_.begin(), parent_.end(), TetId{0});
  rank_.assign(n, 0);
  member_.assign(n, 0);
  for (TetId t = 0; t < n; ++t) member_[t] = mask[t] ? 1 : 0;
  for (const auto& [a, b] : adjacency_->pairs) {
    if (member_[a] && member_[b]) unite(a, b);
  }
  frames_since_rebuild_ = 0;
}

bool ConnectivityState::update(const ActiveMask& mask, const EditBatch& batch) {
  if (++frames_since_rebuild_ >= rebuild_period_ || member_.size() != mask.size()) {
    rebuild(mask);
    return true;
  }
  for (TetId t : batch.added) {
    member_[t] = 1;
    parent_[t] = t;
    rank_[t] = 0;
  }
  for (TetId t : batch.added) {
    for (TetId n : adjacency_->neighbors_of(t)) {
      if (member_[n]) unite(t, n);
    }
  }
  return false;
}

TetId ConnectivityState::find(TetId t) {
  TetId root = t;
  while (parent_[root] != root) root = parent_[root];
  while (parent_[t] != root) {
    const TetId next = parent_[t];
    parent_[t] = root;
    t = next;
  }
  return root;
}

void ConnectivityState::unite(TetId a, TetId b) {
  a = find(a);
  b = find(b);
  if (a == b) return;
  if (rank_[a] < rank_[b]) std::swap(a, b);
  parent_[b] = a;
  if (rank_[a] == rank_[b]) ++rank_[a];
}

bool ConnectivityState::same_component(TetId a, TetId b) {
  if (!tracked(a) || !tracked(b)) {
    throw std::invalid_argument("connectivity query on an untracked tet");
  }
  return find(a) == find(b);
}

std::size_t ConnectivityState::component_count() {
  std::size_t count = 0;
  for (TetId t = 0; t < member_.size(); ++t) {
    if (member_[t] && find(t) == t) ++count;
  }
  return count;
}

double spot_check(ConnectivityState& state, const FaceAdjacency& adjacency, const ActiveMask& mask,
                  std::size_t sample_size, std::uint64_t seed) {
  if (sample_size == 0) return 0.0;
  const auto active = mask.active_ids();
  if (active.empty()) return 0.0;
  const Components oracle = bfs_components(adjacency, mask);
  CounterRng rng(seed, 0x434f4e4eULL);  // "CONN"
  std::size_t mismatches = 0;
  for (std::size_t i = 0; i < sample_size; ++i) {
    const TetId a = active[rng.below(active.size())];
    const TetId b = active[rng.below(active.size())];
    const bool expected = oracle.label[a] == oracle.label[b];
    const bool got = state.tracked(a) && state.tracked(b) && state.same_component(a, b);
    if (got != expected) ++mismatches;
  }
  return static_cast<double>(mismatches) / static_cast<double>(sample_size);
}

}  // namespace stafem
