#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "stafem/mesh.hpp"

namespace stafem {

/// One frame of topology edits. Both lists are sorted and duplicate-free.
struct EditBatch {
  std::vector<TetId> deleted;
  std::vector<TetId> added;

  std::size_t size() const { return deleted.size() + added.size(); }
  bool empty() const { return deleted.empty() && added.empty(); }
  bool operator==(const EditBatch&) const = default;
};

enum class Scenario { fracture, refinement, merge, repeated_locality };

std::string_view to_string(Scenario s);
Scenario parse_scenario(std::string_view name);

struct ScheduleParams {
  int frames = 8;
  /// Slab normal axis (0, 1, 2); -1 picks the longest bounding-box axis.
  int axis = -1;
  /// Fraction of candidate tets the adaptive slab aims to hold.
  double target_fraction = 0.05;
  /// When >= 0, a fixed slab half-width relative to the mesh extent along the axis;
  /// overrides target_fraction.
  double half_width = -1.0;
  int cycles = 4;
  int parents_per_frame = 4;

  bool operator==(const ScheduleParams&) const = default;
};

struct Schedule {
  Scenario scenario = Scenario::fracture;
  std::uint64_t seed = 0;
  ScheduleParams params;
  ActiveMask initial_mask;
  std::vector<EditBatch> frames;

  bool operator==(const Schedule&) const = default;
};

/// Tets whose centroid lies within `half_width` of the plane x[axis] = center, sorted by
/// (distance, id).
struct Slab {
  int axis = 0;
  double center = 0.0;
  double half_width = 0.0;  // absolute, as realized
  std::vector<TetId> tets;
};

/// Adaptive slab: the tie-closed distance prefix whose size is closest to
/// ceil(target_fraction * |tets|), located by binary search over sorted distances.
Slab adaptive_slab(const SupersetMesh& mesh, int axis, double target_fraction);
/// Slab with a fixed half-width given relative to the mesh extent along `axis`.
Slab fixed_slab(const SupersetMesh& mesh, int axis, double relative_half_width);

Schedule make_fracture_schedule(const SupersetMesh& mesh, std::uint64_t seed, const ScheduleParams& params);
Schedule make_refinement_schedule(const SupersetMesh& mesh, std::uint64_t seed, const ScheduleParams& params);
Schedule make_merge_schedule(const SupersetMesh& mesh, std::uint64_t seed, const ScheduleParams& params);
Schedule make_repeated_locality_schedule(const SupersetMesh& mesh, std::uint64_t seed, const ScheduleParams& params);
Schedule make_schedule(const SupersetMesh& mesh, Scenario scenario, std::uint64_t seed, const ScheduleParams& params);

/// Throws EditError if `batch` cannot be applied to `mask` in strict mode: a deleted tet
/// is inactive, an added tet is active, the sets overlap, or a parent would end up
/// active together with one of its children.
void validate_batch(const SupersetMesh& mesh, const ActiveMask& mask, const EditBatch& batch);
/// validate_batch, then apply.
void apply_batch(const SupersetMesh& mesh, ActiveMask& mask, const EditBatch& batch);
/// Mask after replaying every frame.
ActiveMask replay(const SupersetMesh& mesh, const Schedule& schedule);

std::string schedule_to_json(const Schedule& schedule);
Schedule schedule_from_json(std::string_view json);

}  // namespace stafem
