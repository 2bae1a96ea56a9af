#include "stafem/edits.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "stafem/rng.hpp"

namespace stafem {

namespace {

constexpr std::uint64_t kRefinementStream = 0x5245'4649'4e45ULL;  // "REFINE"

int resolve_axis(const SupersetMesh& mesh, int axis) {
  if (axis < -1 || axis > 2) throw ConfigError("slab axis must be -1, 0, 1 or 2");
  return axis >= 0 ? axis : bounding_box(mesh).longest_axis();
}

struct Ranked {
  std::vector<TetId> order;     // by (distance, id)
  std::vector<double> distance;  // aligned with order
  double center = 0.0;
};

Ranked rank_by_plane_distance(const SupersetMesh& mesh, int axis) {
  const BoundingBox box = bounding_box(mesh);
  Ranked r;
  r.center = 0.5 * (box.min[axis] + box.max[axis]);
  std::vector<double> dist(mesh.num_tets());
  for (TetId t = 0; t < mesh.num_tets(); ++t) dist[t] = std::abs(mesh.centroid(t)[axis] - r.center);
  r.order.resize(mesh.num_tets());
  for (TetId t = 0; t < mesh.num_tets(); ++t) r.order[t] = t;
  std::sort(r.order.begin(), r.order.end(), [&](TetId a, TetId b) {
    return dist[a] != dist[b] ? dist[a] < dist[b] : a < b;
  });
  r.distance.reserve(r.order.size());
  for (TetId t : r.order) r.distance.push_back(dist[t]);
  return r;
}

Slab prefix_slab(const Ranked& r, int axis, std::size_t count) {
  if (count == 0) throw ConfigError("slab configuration selects no tetrahedra");
  Slab slab;
  slab.axis = axis;
  slab.center = r.center;
  slab.half_width = r.distance[count - 1];
  slab.tets.assign(r.order.begin(), r.order.begin() + static_cast<std::ptrdiff_t>(count));
  return slab;
}

// Only top-level (non-child) tets belong to slabs; children of a refinement superset
// are never active in fracture/merge scenarios.
void require_unrefined(const SupersetMesh& mesh) {
  if (!mesh.refinement().empty()) throw ConfigError("slab scenarios expect a mesh without refinement children");
}

Slab scenario_slab(const SupersetMesh& mesh, const ScheduleParams& p) {
  require_unrefined(mesh);
  if (p.half_width >= 0) return fixed_slab(mesh, p.axis, p.half_width);
  return adaptive_slab(mesh, p.axis, p.target_fraction);
}

void check_frames(const ScheduleParams& p) {
  if (p.frames < 1) throw ConfigError("frame count must be >= 1");
}

// Splits `ids` into `frames` contiguous batches of near-equal size.
std::vector<std::vector<TetId>> partition(const std::vector<TetId>& ids, int frames) {
  std::vector<std::vector<TetId>> out(static_cast<std::size_t>(frames));
  const std::size_t n = ids.size();
  for (int f = 0; f < frames; ++f) {
    const std::size_t lo = n * static_cast<std::size_t>(f) / static_cast<std::size_t>(frames);
    const std::size_t hi = n * static_cast<std::size_t>(f + 1) / static_cast<std::size_t>(frames);
    out[static_cast<std::size_t>(f)].assign(ids.begin() + static_cast<std::ptrdiff_t>(lo),
                                             ids.begin() + static_cast<std::ptrdiff_t>(hi));
    std::sort(out[static_cast<std::size_t>(f)].begin(), out[static_cast<std::size_t>(f)].end());
  }
  return out;
}

std::vector<TetId> sorted_copy(std::vector<TetId> ids) {
  std::sort(ids.begin(), ids.end());
  return ids;
}

}  // namespace

std::string_view to_string(Scenario s) {
  switch (s) {
    case Scenario::fracture: return "fracture";
    case Scenario::refinement: return "refinement";
    case Scenario::merge: return "merge";
    case Scenario::repeated_locality: return "repeat";
  }
  return "?";
}

Scenario parse_scenario(std::string_view name) {
  if (name == "fracture") return Scenario::fracture;
  if (name == "refinement") return Scenario::refinement;
  if (name == "merge") return Scenario::merge;
  if (name == "repeat" || name == "repeated_locality") return Scenario::repeated_locality;
  throw ConfigError("unknown scenario '" + std::string(name) + "'");
}

Slab adaptive_slab(const SupersetMesh& mesh, int axis, double target_fraction) {
  if (!(target_fraction > 0.0 && target_fraction < 1.0)) throw ConfigError("target_fraction must lie in (0, 1)");
  axis = resolve_axis(mesh, axis);
  const Ranked r = rank_by_plane_distance(mesh, axis);
  const auto target = static_cast<std::size_t>(std::ceil(target_fraction * static_cast<double>(mesh.num_tets())));

  // Tie-closed prefixes end right after a distance value changes. Binary search for the
  // first group boundary at or above the target, then compare with the one below it.
  const auto& d = r.distance;
  const auto hi_it = target == 0 ? d.begin() : std::upper_bound(d.begin(), d.end(), d[target - 1]);
  const auto above = static_cast<std::size_t>(hi_it - d.begin());
  const auto below = target == 0 ? 0
                                 : static_cast<std::size_t>(std::lower_bound(d.begin(), d.end(), d[target - 1]) - d.begin());
  const std::size_t count = below > 0 && (target - below) <= (above - target) ? below : above;
  return prefix_slab(r, axis, count);
}

Slab fixed_slab(const SupersetMesh& mesh, int axis, double relative_half_width) {
  if (relative_half_width < 0) throw ConfigError("half_width must be >= 0");
  axis = resolve_axis(mesh, axis);
  const Ranked r = rank_by_plane_distance(mesh, axis);
  const BoundingBox box = bounding_box(mesh);
  const double w = relative_half_width * (box.max[axis] - box.min[axis]);
  const auto count = static_cast<std::size_t>(std::upper_bound(r.distance.begin(), r.distance.end(), w) - r.distance.begin());
  return prefix_slab(r, axis, count);
}

Schedule make_fracture_schedule(const SupersetMesh& mesh, std::uint64_t seed, const ScheduleParams& params) {
  check_frames(params);
  const Slab slab = scenario_slab(mesh, params);
  Schedule s{Scenario::fracture, seed, params, ActiveMask(mesh.num_tets(), true), {}};
  for (auto& batch : partition(slab.tets, params.frames)) s.frames.push_back({std::move(batch), {}});
  return s;
}

Schedule make_merge_schedule(const SupersetMesh& mesh, std::uint64_t seed, const ScheduleParams& params) {
  check_frames(params);
  const Slab slab = scenario_slab(mesh, params);
  Schedule s{Scenario::merge, seed, params, ActiveMask(mesh.num_tets(), true), {}};
  for (TetId t : slab.tets) s.initial_mask.set(t, false);
  const std::vector<TetId> farthest_first(slab.tets.rbegin(), slab.tets.rend());
  for (auto& batch : partition(farthest_first, params.frames)) s.frames.push_back({{}, std::move(batch)});
  return s;
}

Schedule make_repeated_locality_schedule(const SupersetMesh& mesh, std::uint64_t seed, const ScheduleParams& params) {
  if (params.cycles < 1) throw ConfigError("cycles must be >= 1");
  const Slab slab = scenario_slab(mesh, params);
  ScheduleParams p = params;
  p.frames = 2 * params.cycles;
  Schedule s{Scenario::repeated_locality, seed, p, ActiveMask(mesh.num_tets(), true), {}};
  const auto ids = sorted_copy(slab.tets);
  for (int c = 0; c < params.cycles; ++c) {
    s.frames.push_back({ids, {}});
    s.frames.push_back({{}, ids});
  }
  return s;
}

Schedule make_refinement_schedule(const SupersetMesh& mesh, std::uint64_t seed, const ScheduleParams& params) {
  check_frames(params);
  if (params.parents_per_frame < 1) throw ConfigError("parents_per_frame must be >= 1");
  Schedule s{Scenario::refinement, seed, params, coarse_mask(mesh), {}};

  std::vector<TetId> parents;
  for (const auto& [parent, children] : mesh.refinement()) {
    if (s.initial_mask[parent]) parents.push_back(parent);
  }
  const auto needed = static_cast<std::size_t>(params.frames) * static_cast<std::size_t>(params.parents_per_frame);
  if (parents.size() < needed) {
    throw ConfigError("refinement schedule needs " + std::to_string(needed) + " refinable parents, mesh has " +
                      std::to_string(parents.size()));
  }

  // Partial Fisher-Yates: the first `needed` slots become a uniform random selection.
  CounterRng rng(seed, kRefinementStream);
  for (std::size_t i = 0; i < needed; ++i) {
    const std::size_t j = i + rng.below(parents.size() - i);
    std::swap(parents[i], parents[j]);
  }

  const auto ppf = static_cast<std::size_t>(params.parents_per_frame);
  for (int f = 0; f < params.frames; ++f) {
    EditBatch batch;
    for (std::size_t k = 0; k < ppf; ++k) {
      const TetId parent = parents[static_cast<std::size_t>(f) * ppf + k];
      batch.deleted.push_back(parent);
      const auto& children = mesh.refinement().at(parent);
      batch.added.insert(batch.added.end(), children.begin(), children.end());
    }
    std::sort(batch.deleted.begin(), batch.deleted.end());
    std::sort(batch.added.begin(), batch.added.end());
    s.frames.push_back(std::move(batch));
  }
  return s;
}

Schedule make_schedule(const SupersetMesh& mesh, Scenario scenario, std::uint64_t seed, const ScheduleParams& params) {
  switch (scenario) {
    case Scenario::fracture: return make_fracture_schedule(mesh, seed, params);
    case Scenario::refinement: return make_refinement_schedule(mesh, seed, params);
    case Scenario::merge: return make_merge_schedule(mesh, seed, params);
    case Scenario::repeated_locality: return make_repeated_locality_schedule(mesh, seed, params);
  }
  throw ConfigError("unknown scenario");
}

void validate_batch(const SupersetMesh& mesh, const ActiveMask& mask, const EditBatch& batch) {
  const auto check_sorted = [](const std::vector<TetId>& ids, const char* what) {
    if (std::adjacent_find(ids.begin(), ids.end(), std::greater_equal<>()) != ids.end()) {
      throw EditError(std::string(what) + " list must be sorted and duplicate-free");
    }
  };
  check_sorted(batch.deleted, "deleted");
  check_sorted(batch.added, "added");

  for (TetId t : batch.deleted) {
    if (t >= mask.size()) throw EditError("deleted tet " + std::to_string(t) + " out of range");
    if (!mask[t]) throw EditError("deleting inactive tet " + std::to_string(t));
  }
  for (TetId t : batch.added) {
    if (t >= mask.size()) throw EditError("added tet " + std::to_string(t) + " out of range");
    if (mask[t]) throw EditError("adding active tet " + std::to_string(t));
  }
  // Deleted ids are active and added ids inactive, so the two lists are disjoint here.

  if (mesh.refinement().empty()) return;
  const auto deleted = [&](TetId t) { return std::binary_search(batch.deleted.begin(), batch.deleted.end(), t); };
  const auto added = [&](TetId t) { return std::binary_search(batch.added.begin(), batch.added.end(), t); };
  const auto active_after = [&](TetId t) { return (mask[t] && !deleted(t)) || added(t); };
  for (TetId t : batch.added) {
    if (const TetId p = mesh.parent_of(t); p != kNoTet && active_after(p)) {
      throw EditError("tet " + std::to_string(t) + " would be active together with its parent " + std::to_string(p));
    }
    if (auto it = mesh.refinement().find(t); it != mesh.refinement().end()) {
      for (TetId c : it->second) {
        if (active_after(c)) {
          throw EditError("tet " + std::to_string(t) + " would be active together with its child " + std::to_string(c));
        }
      }
    }
  }
}

void apply_batch(const SupersetMesh& mesh, ActiveMask& mask, const EditBatch& batch) {
  validate_batch(mesh, mask, batch);
  for (TetId t : batch.deleted) mask.set(t, false);
  for (TetId t : batch.added) mask.set(t, true);
}

ActiveMask replay(const SupersetMesh& mesh, const Schedule& schedule) {
  ActiveMask mask = schedule.initial_mask;
  for (const EditBatch& batch : schedule.frames) apply_batch(mesh, mask, batch);
  return mask;
}

// ---------------------------------------------------------------------------
// JSON

std::string schedule_to_json(const Schedule& s) {
  using nlohmann::json;
  json inactive = json::array();
  for (TetId t = 0; t < s.initial_mask.size(); ++t) {
    if (!s.initial_mask[t]) inactive.push_back(t);
  }
  json frames = json::array();
  for (const EditBatch& b : s.frames) frames.push_back({{"deleted", b.deleted}, {"added", b.added}});
  const json doc{
      {"scenario", std::string(to_string(s.scenario))},
      {"seed", s.seed},
      {"num_tets", s.initial_mask.size()},
      {"params",
       {{"frames", s.params.frames},
        {"axis", s.params.axis},
        {"target_fraction", s.params.target_fraction},
        {"half_width", s.params.half_width},
        {"cycles", s.params.cycles},
        {"parents_per_frame", s.params.parents_per_frame}}},
      {"initial_inactive", std::move(inactive)},
      {"frames", std::move(frames)},
  };
  return doc.dump();
}

Schedule schedule_from_json(std::string_view text) {
  using nlohmann::json;
  try {
    const json doc = json::parse(text);
    Schedule s;
    s.scenario = parse_scenario(doc.at("scenario").get<std::string>());
    s.seed = doc.at("seed").get<std::uint64_t>();
    const auto& p = doc.at("params");
    s.params.frames = p.at("frames").get<int>();
    s.params.axis = p.at("axis").get<int>();
    s.params.target_fraction = p.at("target_fraction").get<double>();
    s.params.half_width = p.at("half_width").get<double>();
    s.params.cycles = p.at("cycles").get<int>();
    s.params.parents_per_frame = p.at("parents_per_frame").get<int>();
    const auto num_tets = doc.at("num_tets").get<std::size_t>();
    s.initial_mask = ActiveMask(num_tets, true);
    for (TetId t : doc.at("initial_inactive").get<std::vector<TetId>>()) {
      if (t >= num_tets) throw ConfigError("initial_inactive id out of range");
      s.initial_mask.set(t, false);
    }
    for (const auto& f : doc.at("frames")) {
      s.frames.push_back({f.at("deleted").get<std::vector<TetId>>(), f.at("added").get<std::vector<TetId>>()});
    }
    return s;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed schedule JSON: ") + e.what());
  }
}

}  // namespace stafem
