#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

#include "stafem/types.hpp"

namespace stafem {

/// Dense 3x3 block, row-major.
using Mat3 = std::array<double, 9>;

template <class V>
struct BlockTraits;

template <>
struct BlockTraits<double> {
  static constexpr int kSize = 1;
  static double zero() { return 0.0; }
  static double transpose(double x) { return x; }
  static void add(double& a, double b) { a += b; }
  static void sub(double& a, double b) { a -= b; }
};

template <>
struct BlockTraits<Mat3> {
  static constexpr int kSize = 3;
  static Mat3 zero() { return {}; }
  static Mat3 transpose(const Mat3& m) { return {m[0], m[3], m[6], m[1], m[4], m[7], m[2], m[5], m[8]}; }
  static void add(Mat3& a, const Mat3& b) {
    for (int i = 0; i < 9; ++i) a[i] += b[i];
  }
  static void sub(Mat3& a, const Mat3& b) {
    for (int i = 0; i < 9; ++i) a[i] -= b[i];
  }
};

/// Symmetric sparse operator over `n` block rows with a dynamic off-diagonal pattern.
///
/// Off-diagonal pairs are stored in both directions in per-row vectors sorted by column,
/// so materialization is a linear scan and the layout is independent of insertion order.
/// The mirrored entry of (u, v) always holds transpose(value(u, v)).
///
/// A pair can be retired instead of erased: its slot stays in the row with a zero value
/// and is skipped by materialization until a later insert revives it. Each slot also has
/// a small counter that callers may use for contributor bookkeeping; it sits in padding
/// and does not grow the entry.
template <class V>
class SymmetricSparseMatrix {
 public:
  using Traits = BlockTraits<V>;

  struct Entry {
    VertexId col;
    bool live = true;
    std::uint16_t count = 0;
    V value;
    bool operator==(const Entry&) const = default;
  };

  SymmetricSparseMatrix() = default;
  explicit SymmetricSparseMatrix(std::size_t n) : rows_(n), diag_(n, Traits::zero()) {}

  /// Bulk construction for rebuilds. Rows must be column-sorted, exclude the diagonal,
  /// and be mutually transposed.
  static SymmetricSparseMatrix from_rows(std::vector<std::vector<Entry>> rows, std::vector<V> diag) {
    SymmetricSparseMatrix m;
    std::size_t live = 0, retired = 0;
    for (const auto& r : rows) {
      for (const auto& e : r) ++(e.live ? live : retired);
    }
    m.rows_ = std::move(rows);
    m.diag_ = std::move(diag);
    m.pairs_ = live / 2;
    m.retired_ = retired / 2;
    return m;
  }

  std::size_t dimension() const { return rows_.size(); }
  std::size_t num_pairs() const { return pairs_; }
  std::size_t num_retired() const { return retired_; }

  V& diagonal(VertexId u) { return diag_[u]; }
  const V& diagonal(VertexId u) const { return diag_[u]; }
  /// Raw row including retired slots.
  const std::vector<Entry>& row(VertexId u) const { return rows_[u]; }

  V* find(VertexId u, VertexId v) {
    Entry* e = slot(u, v);
    return e != nullptr && e->live ? &e->value : nullptr;
  }
  const V* find(VertexId u, VertexId v) const { return const_cast<SymmetricSparseMatrix*>(this)->find(u, v); }
  bool contains(VertexId u, VertexId v) const { return find(u, v) != nullptr; }

  /// Inserts the pair {u, v}, reviving a retired slot when there is one. Throws
  /// InvariantError if the pair is already present.
  void insert(VertexId u, VertexId v, const V& value) {
    if (Entry* a = slot(u, v)) {
      if (a->live) throw InvariantError("inserting an entry that is already present");
      Entry* b = slot(v, u);
      a->live = b->live = true;
      a->value = value;
      b->value = Traits::transpose(value);
      --retired_;
    } else {
      insert_one(u, v, value);
      insert_one(v, u, Traits::transpose(value));
    }
    ++pairs_;
  }

  /// Removes the pair {u, v} and its slot; throws InvariantError if absent.
  void erase(VertexId u, VertexId v) {
    Entry* a = slot(u, v);
    if (a == nullptr) throw InvariantError("erasing an entry that is not present");
    if (a->live) {
      --pairs_;
    } else {
      --retired_;
    }
    erase_one(u, v);
    erase_one(v, u);
  }

  /// Structurally removes the pair {u, v} but keeps its slot for reuse.
  void retire(VertexId u, VertexId v) {
    Entry* a = slot(u, v);
    Entry* b = slot(v, u);
    if (a == nullptr || !a->live) throw InvariantError("retiring an entry that is not present");
    a->live = b->live = false;
    a->value = b->value = Traits::zero();
    --pairs_;
    ++retired_;
  }

  /// Adds `delta` to an existing pair (and its transpose to the mirror).
  void add(VertexId u, VertexId v, const V& delta) {
    V* a = find(u, v);
    V* b = find(v, u);
    if (a == nullptr || b == nullptr) throw InvariantError("accumulating into an absent entry");
    Traits::add(*a, delta);
    Traits::add(*b, Traits::transpose(delta));
  }

  void sub(VertexId u, VertexId v, const V& delta) {
    V* a = find(u, v);
    V* b = find(v, u);
    if (a == nullptr || b == nullptr) throw InvariantError("subtracting from an absent entry");
    Traits::sub(*a, delta);
    Traits::sub(*b, Traits::transpose(delta));
  }

  /// Overwrites an existing pair.
  void assign(VertexId u, VertexId v, const V& value) {
    V* a = find(u, v);
    V* b = find(v, u);
    if (a == nullptr || b == nullptr) throw InvariantError("assigning to an absent entry");
    *a = value;
    *b = Traits::transpose(value);
  }

  /// Position of the slot (u, v) within row u, retired slots included. Positions stay
  /// valid until a pair is inserted into a fresh slot or erased.
  std::size_t position(VertexId u, VertexId v) {
    Entry* e = slot(u, v);
    if (e == nullptr) throw InvariantError("no slot for the requested pair");
    return static_cast<std::size_t>(e - rows_[u].data());
  }

  // Positional variants of add/sub/retire/insert for callers that cached positions of
  // (u, v) in row u (pu) and of (v, u) in row v (pv).
  std::uint16_t& count_at(VertexId u, std::size_t pu) { return rows_[u][pu].count; }
  std::uint16_t count_at(VertexId u, std::size_t pu) const { return rows_[u][pu].count; }

  void add_at(VertexId u, std::size_t pu, VertexId v, std::size_t pv, const V& delta) {
    Entry& a = rows_[u][pu];
    Entry& b = rows_[v][pv];
    if (!a.live) throw InvariantError("accumulating into a retired slot");
    Traits::add(a.value, delta);
    Traits::add(b.value, Traits::transpose(delta));
  }
  void sub_at(VertexId u, std::size_t pu, VertexId v, std::size_t pv, const V& delta) {
    Entry& a = rows_[u][pu];
    Entry& b = rows_[v][pv];
    if (!a.live) throw InvariantError("subtracting from a retired slot");
    Traits::sub(a.value, delta);
    Traits::sub(b.value, Traits::transpose(delta));
  }
  void retire_at(VertexId u, std::size_t pu, VertexId v, std::size_t pv) {
    Entry& a = rows_[u][pu];
    Entry& b = rows_[v][pv];
    if (!a.live) throw InvariantError("retiring a retired slot");
    a.live = b.live = false;
    a.value = b.value = Traits::zero();
    --pairs_;
    ++retired_;
  }
  void revive_at(VertexId u, std::size_t pu, VertexId v, std::size_t pv, const V& value) {
    Entry& a = rows_[u][pu];
    Entry& b = rows_[v][pv];
    if (a.live) throw InvariantError("reviving a live slot");
    a.live = b.live = true;
    a.value = value;
    b.value = Traits::transpose(value);
    ++pairs_;
    --retired_;
  }

  /// Live off-diagonal entries, both directions.
  std::size_t stored_entries() const { return 2 * pairs_; }
  /// Allocated off-diagonal slots, retired ones included.
  std::size_t slot_entries() const { return 2 * (pairs_ + retired_); }

  bool operator==(const SymmetricSparseMatrix&) const = default;

 private:
  static auto lower(std::vector<Entry>& r, VertexId col) {
    return std::lower_bound(r.begin(), r.end(), col, [](const Entry& e, VertexId c) { return e.col < c; });
  }

  Entry* slot(VertexId u, VertexId v) {
    auto& r = rows_[u];
    auto it = lower(r, v);
    return it != r.end() && it->col == v ? &*it : nullptr;
  }

  void insert_one(VertexId u, VertexId v, const V& value) {
    auto& r = rows_[u];
    r.insert(lower(r, v), Entry{v, true, 0, value});
  }

  void erase_one(VertexId u, VertexId v) {
    auto& r = rows_[u];
    r.erase(lower(r, v));
  }

  std::vector<std::vector<Entry>> rows_;
  std::vector<V> diag_;
  std::size_t pairs_ = 0;
  std::size_t retired_ = 0;
};

/// Immutable compressed-row matrix with sorted column indices.
struct CsrMatrix {
  std::size_t n = 0;
  std::vector<std::size_t> row_ptr{0};
  std::vector<std::uint32_t> col;
  std::vector<double> val;

  std::size_t nnz() const { return val.size(); }
  void multiply(std::span<const double> x, std::span<double> y) const;
  std::vector<double> diagonal() const;
  double max_abs() const;
  bool operator==(const CsrMatrix&) const = default;
};

/// Scalar operator: off-diagonal pairs and diagonal as stored, plus eps on the diagonal.
CsrMatrix materialize(const SymmetricSparseMatrix<double>& m, double eps);
/// Block operator expanded to 3n scalar rows, plus eps on the diagonal. Every diagonal
/// block is emitted (zero blocks included) so the diagonal is always structurally present.
CsrMatrix materialize(const SymmetricSparseMatrix<Mat3>& m, double eps);

struct ParityResult {
  std::size_t mismatch_count = 0;
  double max_abs_diff = 0.0;
};

/// Entrywise comparison of two sorted CSR matrices. An entry present in only one matrix
/// is a structural mismatch; a shared entry mismatches when |a - b| > tolerance.
ParityResult compare(const CsrMatrix& a, const CsrMatrix& b, double tolerance);

/// MatrixMarket coordinate dump (general, 1-based, sorted by row then column).
void write_matrix_market(std::ostream& out, const CsrMatrix& m);

}  // namespace stafem
