#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>

#include <absl/container/flat_hash_map.h>

#include "stafem/edits.hpp"
#include "stafem/mesh.hpp"
#include "stafem/sparse.hpp"

namespace stafem {

enum class UpdatePolicy { full_rebuild, local_recompute, streaming_update };

std::string_view to_string(UpdatePolicy p);
/// Short letter used in reports: R, L or S.
char policy_letter(UpdatePolicy p);
/// Accepts R/L/S or the full policy names.
UpdatePolicy parse_policy(std::string_view name);

/// Per-frame work counters; reset at the start of every apply().
struct WorkCounters {
  std::uint64_t edges_visited = 0;
  std::uint64_t entries_mutated = 0;
  std::uint64_t tets_scanned = 0;

  void reset() { *this = {}; }
};

/// Persistent count of active tets per candidate edge. An edge whose count drops to zero
/// keeps its entry (and its retired matrix slot) for later reuse.
using EdgeMultiplicityMap = absl::flat_hash_map<EdgeId, std::uint32_t>;

/// Fixed per-item byte costs used by every state-footprint estimate.
namespace memory_cost {
inline constexpr std::size_t kMaskPerTet = 1;
inline constexpr std::size_t kRowHeader = 24;           // std::vector header per matrix row
inline constexpr std::size_t kScalarEntry = 16;         // {col, double, live} with padding
inline constexpr std::size_t kBlockEntry = 80;          // {col, 3x3 doubles, live} with padding
inline constexpr std::size_t kScalarDiagonal = 8;
inline constexpr std::size_t kBlockDiagonal = 72;
inline constexpr std::size_t kMultiplicityEntry = 16;   // flat hash slot (8) + control byte at typical load
inline constexpr std::size_t kVertexCount = 4;
inline constexpr std::size_t kVertexMass = 8;
inline constexpr std::size_t kIncidenceOffset = 8;
inline constexpr std::size_t kIncidenceItem = 6;        // tet id (4) + two local slots (2)
inline constexpr std::size_t kSlotPosition = 2;         // cached row position of one block
}  // namespace memory_cost

/// Common interface the benchmark driver uses for every (operator, policy) pair.
class Assembler {
 public:
  virtual ~Assembler() = default;

  virtual UpdatePolicy policy() const = 0;
  /// Validates and applies one edit batch; counters reflect this call only.
  virtual void apply(const EditBatch& batch) = 0;
  /// Materialized operator with eps added to the diagonal.
  virtual CsrMatrix finalize(double eps) const = 0;
  virtual const ActiveMask& mask() const = 0;
  virtual const WorkCounters& counters() const = 0;
  /// Estimated bytes of state this policy keeps between frames.
  virtual std::size_t state_bytes() const = 0;
};

}  // namespace stafem
