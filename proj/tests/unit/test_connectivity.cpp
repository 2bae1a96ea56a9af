#include <doctest.h>

#include "../oracles.hpp"
#include "stafem/connectivity.hpp"
#include "stafem/rng.hpp"
#include "support.hpp"

using namespace stafem;

TEST_SUITE("connectivity") {
  TEST_CASE("face adjacency matches a pairwise scan") {
    for (Scenario sc : {Scenario::fracture, Scenario::refinement}) {
      const auto mesh = support::scenario_mesh(sc, 2, 2, 2);
      const FaceAdjacency adj = precompute_face_adjacency(mesh);
      CHECK(adj.pairs == oracle::face_pairs(mesh));
      for (TetId t = 0; t < mesh.num_tets(); ++t) {
        for (TetId n : adj.neighbors_of(t)) {
          const auto key = std::minmax(t, n);
          CHECK(std::binary_search(adj.pairs.begin(), adj.pairs.end(), std::pair<TetId, TetId>(key)));
        }
      }
    }
  }

  TEST_CASE("non-manifold faces are rejected") {
    std::vector<Vec3> v{Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0, 0, 1), Vec3(0, 0, -1), Vec3(1, 1, 1)};
    const SupersetMesh mesh(v, {Tet{0, 1, 2, 3}, Tet{0, 1, 2, 4}, Tet{0, 1, 2, 5}});
    CHECK_THROWS_AS(precompute_face_adjacency(mesh), MeshError);
  }

  TEST_CASE("BFS components match label relaxation on random masks") {
    const auto mesh = generate_block_mesh(3, 3, 3);
    const FaceAdjacency adj = precompute_face_adjacency(mesh);
    const auto pairs = oracle::face_pairs(mesh);
    CounterRng rng(1, 1);
    for (int trial = 0; trial < 20; ++trial) {
      ActiveMask mask(mesh.num_tets(), false);
      for (TetId t = 0; t < mesh.num_tets(); ++t) mask.set(t, rng.uniform() < 0.4 + 0.02 * trial);
      const Components c = bfs_components(adj, mask);
      const auto ref = oracle::component_labels(pairs, mask);
      CHECK(c.count == oracle::count_components(ref));
      for (TetId a = 0; a < mesh.num_tets(); ++a) {
        CHECK((c.label[a] < 0) == (ref[a] < 0));
        for (TetId b = a + 1; b < mesh.num_tets(); b += 7) {
          if (ref[a] >= 0 && ref[b] >= 0) CHECK((c.label[a] == c.label[b]) == (ref[a] == ref[b]));
        }
      }
    }
  }

  TEST_CASE("union-find with per-frame rebuild agrees with BFS on every scenario") {
    ScheduleParams p;
    p.frames = 6;
    p.parents_per_frame = 3;
    for (Scenario sc : support::kScenarios) {
      const auto mesh = support::scenario_mesh(sc, 5, 5, 5);
      const FaceAdjacency adj = precompute_face_adjacency(mesh);
      const Schedule sch = make_schedule(mesh, sc, 2, p);
      ConnectivityState uf(adj, 1);
      uf.rebuild(sch.initial_mask);
      ActiveMask mask = sch.initial_mask;
      std::size_t prev = uf.component_count();
      for (std::size_t f = 0; f < sch.frames.size(); ++f) {
        apply_batch(mesh, mask, sch.frames[f]);
        CHECK(uf.update(mask, sch.frames[f]));
        CHECK(spot_check(uf, adj, mask, 256, f) == 0.0);
        const std::size_t count = uf.component_count();
        CHECK(count == bfs_components(adj, mask).count);
        if (sc == Scenario::merge) CHECK(count <= prev);
        prev = count;
      }
      if (sc == Scenario::merge || sc == Scenario::repeated_locality) CHECK(prev == 1);
    }
  }

  TEST_CASE("stale union-find can merge but never split") {
    const auto mesh = generate_block_mesh(6, 4, 4);
    const FaceAdjacency adj = precompute_face_adjacency(mesh);
    ScheduleParams p;
    p.frames = 3;
    p.half_width = 0.1;  // wide enough to cut the block in two
    const Schedule sch = make_fracture_schedule(mesh, 0, p);
    ConnectivityState uf(adj, 100);
    uf.rebuild(sch.initial_mask);
    ActiveMask mask = sch.initial_mask;
    for (const auto& batch : sch.frames) {
      apply_batch(mesh, mask, batch);
      CHECK_FALSE(uf.update(mask, batch));
    }
    CHECK(uf.frames_since_rebuild() == 3);
    const Components truth = bfs_components(adj, mask);
    REQUIRE(truth.count == 2);
    const auto active = mask.active_ids();
    std::size_t false_merges = 0;
    for (std::size_t i = 0; i < active.size(); i += 5) {
      for (std::size_t j = i + 1; j < active.size(); j += 11) {
        const TetId a = active[i], b = active[j];
        const bool same = truth.label[a] == truth.label[b];
        const bool uf_same = uf.same_component(a, b);
        if (same) CHECK(uf_same);
        if (!same && uf_same) ++false_merges;
      }
    }
    CHECK(false_merges > 0);  // the deletions split the mesh but the stale state has not seen it
    CHECK(spot_check(uf, adj, mask, 256, 9) > 0.0);

    // Additions are unioned eagerly even between rebuilds.
    std::vector<TetId> slab = fixed_slab(mesh, -1, p.half_width).tets;
    std::sort(slab.begin(), slab.end());
    ActiveMask merged = mask;
    apply_batch(mesh, merged, {{}, slab});
    uf.rebuild(mask);
    ConnectivityState lazy(adj, 100);
    lazy.rebuild(mask);
    CHECK(lazy.component_count() == 2);
    lazy.update(merged, {{}, slab});
    CHECK(lazy.component_count() == 1);
    CHECK(spot_check(lazy, adj, merged, 256, 3) == 0.0);
  }

  TEST_CASE("queries on untracked tets throw") {
    const auto mesh = generate_block_mesh(1, 1, 1);
    const FaceAdjacency adj = precompute_face_adjacency(mesh);
    ActiveMask mask(mesh.num_tets(), true);
    mask.set(2, false);
    ConnectivityState uf(adj, 1);
    uf.rebuild(mask);
    CHECK_FALSE(uf.tracked(2));
    CHECK_THROWS_AS(uf.same_component(0, 2), std::invalid_argument);
    CHECK(uf.same_component(0, 1));
    CHECK_THROWS_AS(ConnectivityState(adj, 0), ConfigError);
  }
}
