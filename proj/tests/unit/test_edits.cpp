#include <doctest.h>

#include <cmath>
#include <numeric>
#include <set>

#include "stafem/edits.hpp"
#include "stafem/rng.hpp"

using namespace stafem;

namespace {

SupersetMesh refined_mesh(int n) {
  const auto base = generate_block_mesh(n, n, n);
  std::vector<TetId> all(base.num_tets());
  std::iota(all.begin(), all.end(), TetId{0});
  return build_refinement(base, all);
}

const Scenario kSlabScenarios[] = {Scenario::fracture, Scenario::merge, Scenario::repeated_locality};

}  // namespace

TEST_SUITE("edits") {
  TEST_CASE("scenario names round trip") {
    for (Scenario s : {Scenario::fracture, Scenario::refinement, Scenario::merge, Scenario::repeated_locality}) {
      CHECK(parse_scenario(to_string(s)) == s);
    }
    CHECK(parse_scenario("repeat") == Scenario::repeated_locality);
    CHECK_THROWS_AS(parse_scenario("explode"), ConfigError);
  }

  TEST_CASE("adaptive slab is the tie-closed prefix nearest the target") {
    for (int n : {4, 5, 6}) {
      for (double f : {0.02, 0.05, 0.1, 0.3}) {
        const auto mesh = generate_block_mesh(n, n, n + 1);
        const Slab slab = adaptive_slab(mesh, -1, f);
        CHECK(slab.axis == 2);
        REQUIRE_FALSE(slab.tets.empty());
        const auto box = bounding_box(mesh);
        CHECK(slab.center == doctest::Approx(0.5 * (box.min[2] + box.max[2])));

        std::vector<double> dist(mesh.num_tets());
        for (TetId t = 0; t < mesh.num_tets(); ++t) dist[t] = std::abs(mesh.centroid(t)[2] - slab.center);
        const std::set<TetId> in(slab.tets.begin(), slab.tets.end());
        CHECK(in.size() == slab.tets.size());
        for (TetId t = 0; t < mesh.num_tets(); ++t) CHECK((dist[t] <= slab.half_width) == in.contains(t));

        // Every nonempty tie-closed prefix size, by brute force.
        std::set<double> levels(dist.begin(), dist.end());
        const double target = std::ceil(f * static_cast<double>(mesh.num_tets()));
        double best = 1e300;
        for (double lv : levels) {
          const auto size = std::count_if(dist.begin(), dist.end(), [&](double d) { return d <= lv; });
          best = std::min(best, std::abs(static_cast<double>(size) - target));
        }
        CHECK(std::abs(static_cast<double>(slab.tets.size()) - target) == best);
      }
    }
    const auto mesh = generate_block_mesh(3, 3, 3);
    CHECK_THROWS_AS(adaptive_slab(mesh, -1, 0.0), ConfigError);
    CHECK_THROWS_AS(adaptive_slab(mesh, 3, 0.1), ConfigError);
  }

  TEST_CASE("fixed slab selects centroids within the relative half-width") {
    const auto mesh = generate_block_mesh(6, 4, 4);
    for (double w : {0.01, 0.05, 0.1, 0.2}) {
      std::size_t expected = 0;
      for (TetId t = 0; t < mesh.num_tets(); ++t) expected += std::abs(mesh.centroid(t)[0] - 3.0) <= w * 6.0;
      if (expected == 0) {
        CHECK_THROWS_AS(fixed_slab(mesh, 0, w), ConfigError);
      } else {
        CHECK(fixed_slab(mesh, 0, w).tets.size() == expected);
      }
    }
    // Wider slabs are supersets of narrower ones.
    const auto a = fixed_slab(mesh, 0, 0.05).tets, b = fixed_slab(mesh, 0, 0.2).tets;
    const std::set<TetId> sa(a.begin(), a.end()), sb(b.begin(), b.end());
    CHECK(std::includes(sb.begin(), sb.end(), sa.begin(), sa.end()));
  }

  TEST_CASE("schedules are deterministic") {
    const auto mesh = generate_block_mesh(4, 4, 4);
    const auto fine = refined_mesh(3);
    ScheduleParams p;
    for (Scenario s : kSlabScenarios) CHECK(make_schedule(mesh, s, 7, p) == make_schedule(mesh, s, 7, p));
    CHECK(make_schedule(fine, Scenario::refinement, 7, p) == make_schedule(fine, Scenario::refinement, 7, p));
    CHECK_FALSE(make_schedule(fine, Scenario::refinement, 7, p) == make_schedule(fine, Scenario::refinement, 8, p));
  }

  TEST_CASE("every generated schedule replays validly") {
    const auto mesh = generate_block_mesh(4, 4, 4);
    const auto fine = refined_mesh(3);
    ScheduleParams p;
    p.frames = 6;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      for (Scenario s : kSlabScenarios) {
        const Schedule sch = make_schedule(mesh, s, seed, p);
        ActiveMask mask = sch.initial_mask;
        for (const auto& batch : sch.frames) {
          CHECK_NOTHROW(validate_batch(mesh, mask, batch));
          apply_batch(mesh, mask, batch);
        }
      }
      const Schedule sch = make_schedule(fine, Scenario::refinement, seed, p);
      ActiveMask mask = sch.initial_mask;
      for (const auto& batch : sch.frames) {
        apply_batch(fine, mask, batch);
        CHECK(refinement_consistent(fine, mask));
      }
    }
  }

  TEST_CASE("merge starts where fracture ends") {
    const auto mesh = generate_block_mesh(5, 4, 4);
    ScheduleParams p;
    p.frames = 5;
    for (std::uint64_t seed : {0u, 3u}) {
      const Schedule frac = make_fracture_schedule(mesh, seed, p);
      const Schedule merge = make_merge_schedule(mesh, seed, p);
      CHECK(merge.initial_mask == replay(mesh, frac));
      CHECK(replay(mesh, merge) == frac.initial_mask);
    }
  }

  TEST_CASE("fracture deletes the slab exactly once in distance order") {
    const auto mesh = generate_block_mesh(6, 6, 6);
    ScheduleParams p;
    p.frames = 4;
    const Schedule s = make_fracture_schedule(mesh, 0, p);
    const Slab slab = adaptive_slab(mesh, -1, p.target_fraction);
    std::multiset<TetId> deleted;
    std::size_t lo = 0, hi = 0;
    for (const auto& b : s.frames) {
      CHECK(b.added.empty());
      deleted.insert(b.deleted.begin(), b.deleted.end());
      hi = std::max(hi, b.deleted.size());
      lo = lo == 0 ? b.deleted.size() : std::min(lo, b.deleted.size());
    }
    CHECK(deleted == std::multiset<TetId>(slab.tets.begin(), slab.tets.end()));
    CHECK(hi - lo <= 1);  // near-equal batches
  }

  TEST_CASE("repeated locality alternates delete and re-add of one slab") {
    const auto mesh = generate_block_mesh(4, 4, 4);
    ScheduleParams p;
    p.cycles = 3;
    const Schedule s = make_repeated_locality_schedule(mesh, 1, p);
    REQUIRE(s.frames.size() == 6);
    CHECK(s.params.frames == 6);
    for (std::size_t f = 0; f < s.frames.size(); f += 2) {
      CHECK(s.frames[f].deleted == s.frames[f + 1].added);
      CHECK(s.frames[f].added.empty());
      CHECK(s.frames[f + 1].deleted.empty());
    }
    CHECK(replay(mesh, s) == s.initial_mask);
  }

  TEST_CASE("refinement swaps parents for their children") {
    const auto fine = refined_mesh(3);
    ScheduleParams p;
    p.frames = 5;
    p.parents_per_frame = 3;
    const Schedule s = make_refinement_schedule(fine, 11, p);
    std::set<TetId> parents;
    for (const auto& b : s.frames) {
      CHECK(b.deleted.size() == 3);
      CHECK(b.added.size() == 24);
      for (TetId t : b.deleted) {
        CHECK(parents.insert(t).second);
        for (TetId c : fine.refinement().at(t)) CHECK(std::binary_search(b.added.begin(), b.added.end(), c));
      }
    }
    p.frames = 1000;
    CHECK_THROWS_AS(make_refinement_schedule(fine, 0, p), ConfigError);
    CHECK_THROWS_AS(make_fracture_schedule(fine, 0, ScheduleParams{}), ConfigError);
  }

  TEST_CASE("strict validation rejects invalid batches") {
    const auto mesh = generate_block_mesh(2, 2, 2);
    ActiveMask mask(mesh.num_tets(), true);
    mask.set(5, false);
    CHECK_THROWS_AS(validate_batch(mesh, mask, {{5}, {}}), EditError);      // delete inactive
    CHECK_THROWS_AS(validate_batch(mesh, mask, {{}, {4}}), EditError);      // add active
    CHECK_THROWS_AS(validate_batch(mesh, mask, {{3, 1}, {}}), EditError);   // unsorted
    CHECK_THROWS_AS(validate_batch(mesh, mask, {{1, 1}, {}}), EditError);   // duplicate
    CHECK_THROWS_AS(validate_batch(mesh, mask, {{}, {999}}), EditError);    // out of range
    CHECK_NOTHROW(validate_batch(mesh, mask, {{1, 2}, {5}}));
    const ActiveMask before = mask;
    CHECK_THROWS_AS(apply_batch(mesh, mask, {{5}, {}}), EditError);
    CHECK(mask == before);

    const auto fine = refined_mesh(1);
    ActiveMask coarse = coarse_mask(fine);
    const auto& [parent, children] = *fine.refinement().begin();
    CHECK_THROWS_AS(validate_batch(fine, coarse, {{}, {children[0]}}), EditError);
    EditBatch swap{{parent}, std::vector<TetId>(children.begin(), children.end())};
    std::sort(swap.added.begin(), swap.added.end());
    apply_batch(fine, coarse, swap);
    CHECK_THROWS_AS(validate_batch(fine, coarse, {{}, {parent}}), EditError);
  }

  TEST_CASE("schedule JSON round trip") {
    const auto mesh = generate_block_mesh(4, 4, 4);
    const auto fine = refined_mesh(2);
    ScheduleParams p;
    p.half_width = 0.1;
    for (Scenario s : kSlabScenarios) {
      const Schedule sch = make_schedule(mesh, s, 42, p);
      CHECK(schedule_from_json(schedule_to_json(sch)) == sch);
      CHECK(schedule_to_json(schedule_from_json(schedule_to_json(sch))) == schedule_to_json(sch));
    }
    const Schedule r = make_schedule(fine, Scenario::refinement, 5, ScheduleParams{});
    CHECK(schedule_from_json(schedule_to_json(r)) == r);
    CHECK_THROWS_AS(schedule_from_json("{"), ConfigError);
    CHECK_THROWS_AS(schedule_from_json(R"({"scenario":"fracture"})"), ConfigError);
  }

  TEST_CASE("counter RNG reproduces its mixing formula and ranges") {
    CounterRng rng(5, 9);
    const std::uint64_t first = rng.next();
    CHECK(first == CounterRng::mix(5 * 0x9e3779b97f4a7c15ULL + 9 * 0xd1b54a32d192ed03ULL));
    CHECK(CounterRng(5, 9).at(0) == first);
    CHECK(CounterRng(5, 9).at(1) != first);
    double sum = 0, sq = 0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
      const double u = rng.uniform();
      CHECK_UNARY(u >= 0.0);
      CHECK_UNARY(u < 1.0);
      CHECK(rng.below(7) < 7);
      const double z = rng.normal();
      sum += z;
      sq += z * z;
    }
    CHECK(std::abs(sum / n) < 0.02);
    CHECK(std::abs(sq / n - 1.0) < 0.02);
  }
}
