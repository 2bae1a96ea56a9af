#pragma once

#include <numeric>

#include "stafem/assembly.hpp"
#include "stafem/edits.hpp"

namespace support {

/// Superset mesh a scenario runs on: the block mesh, or its full 1->8 refinement.
inline stafem::SupersetMesh scenario_mesh(stafem::Scenario s, int nx, int ny, int nz) {
  auto base = stafem::generate_block_mesh(nx, ny, nz);
  if (s != stafem::Scenario::refinement) return base;
  std::vector<stafem::TetId> all(base.num_tets());
  std::iota(all.begin(), all.end(), stafem::TetId{0});
  return stafem::build_refinement(base, all);
}

inline constexpr stafem::Scenario kScenarios[] = {stafem::Scenario::fracture, stafem::Scenario::refinement,
                                                  stafem::Scenario::merge, stafem::Scenario::repeated_locality};

inline constexpr stafem::UpdatePolicy kPolicies[] = {stafem::UpdatePolicy::full_rebuild,
                                                     stafem::UpdatePolicy::local_recompute,
                                                     stafem::UpdatePolicy::streaming_update};

}  // namespace support
