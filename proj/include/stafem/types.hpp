#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace stafem {

using VertexId = std::uint32_t;
using TetId = std::uint32_t;
using EdgeId = std::uint32_t;

inline constexpr TetId kNoTet = ~TetId{0};

using Vec3 = Eigen::Vector3d;
using Tet = std::array<VertexId, 4>;

/// Undirected edge stored canonically with u < v.
struct Edge {
  VertexId u = 0;
  VertexId v = 0;

  static Edge canonical(VertexId a, VertexId b) { return a < b ? Edge{a, b} : Edge{b, a}; }
  std::uint64_t key() const { return (std::uint64_t{u} << 32) | v; }

  auto operator<=>(const Edge&) const = default;
};

/// Local vertex slots of the six edges of a tetrahedron.
inline constexpr std::array<std::array<int, 2>, 6> kTetEdgeSlots{{{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}}};

// Error taxonomy. Everything derives from std::runtime_error or std::logic_error so
// callers that only care about "it failed" can catch the standard bases.

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& file, std::size_t line, const std::string& what)
      : std::runtime_error(file + ":" + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class EditError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class MeshError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Broken internal invariant (e.g. a multiplicity count going negative).
class InvariantError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace stafem
