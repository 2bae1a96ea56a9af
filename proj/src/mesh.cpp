#include "stafem/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <Eigen/Geometry>

namespace stafem {

SupersetMesh::SupersetMesh(std::vector<Vec3> vertices, std::vector<Tet> tets, Refinement refinement)
    : vertices_(std::move(vertices)), tets_(std::move(tets)), refinement_(std::move(refinement)) {
  const auto n = vertices_.size();
  for (std::size_t t = 0; t < tets_.size(); ++t) {
    const Tet& tet = tets_[t];
    for (int a = 0; a < 4; ++a) {
      if (tet[a] >= n) {
        throw MeshError("tet " + std::to_string(t) + " references vertex " + std::to_string(tet[a]) +
                        " but the mesh has " + std::to_string(n) + " vertices");
      }
      for (int b = a + 1; b < 4; ++b) {
        if (tet[a] == tet[b]) throw MeshError("tet " + std::to_string(t) + " repeats vertex " + std::to_string(tet[a]));
      }
    }
  }

  tet_edges_.resize(tets_.size());
  edge_index_.reserve(tets_.size() * 2);
  for (std::size_t t = 0; t < tets_.size(); ++t) {
    for (int k = 0; k < 6; ++k) {
      const auto [a, b] = kTetEdgeSlots[k];
      const Edge e = Edge::canonical(tets_[t][a], tets_[t][b]);
      auto [it, inserted] = edge_index_.try_emplace(e.key(), static_cast<EdgeId>(edges_.size()));
      if (inserted) edges_.push_back(e);
      tet_edges_[t][k] = it->second;
    }
  }

  if (!refinement_.empty()) {
    parent_of_.assign(tets_.size(), kNoTet);
    for (const auto& [parent, children] : refinement_) {
      if (parent >= tets_.size()) throw MeshError("refinement parent " + std::to_string(parent) + " out of range");
      for (TetId c : children) {
        if (c >= tets_.size()) throw MeshError("refinement child " + std::to_string(c) + " out of range");
        if (c == parent) throw MeshError("tet " + std::to_string(c) + " listed as its own refinement child");
        if (parent_of_[c] != kNoTet) throw MeshError("tet " + std::to_string(c) + " has two refinement parents");
        parent_of_[c] = parent;
      }
    }
  }
}

bool SupersetMesh::find_edge(VertexId a, VertexId b, EdgeId& out) const {
  auto it = edge_index_.find(Edge::canonical(a, b).key());
  if (it == edge_index_.end()) return false;
  out = it->second;
  return true;
}

Vec3 SupersetMesh::centroid(TetId t) const {
  const Tet& k = tets_[t];
  return 0.25 * (vertices_[k[0]] + vertices_[k[1]] + vertices_[k[2]] + vertices_[k[3]]);
}

bool SupersetMesh::operator==(const SupersetMesh& other) const {
  if (vertices_.size() != other.vertices_.size()) return false;
  for (std::size_t i = 0; i < vertices_.size(); ++i) {
    if (vertices_[i] != other.vertices_[i]) return false;
  }
  return tets_ == other.tets_ && refinement_ == other.refinement_;
}

std::vector<TetId> ActiveMask::active_ids() const {
  std::vector<TetId> ids;
  ids.reserve(count_);
  for (std::size_t t = 0; t < active_.size(); ++t) {
    if (active_[t]) ids.push_back(static_cast<TetId>(t));
  }
  return ids;
}

ActiveMask coarse_mask(const SupersetMesh& mesh) {
  ActiveMask mask(mesh.num_tets(), true);
  for (const auto& [parent, children] : mesh.refinement()) {
    for (TetId c : children) mask.set(c, false);
  }
  return mask;
}

bool refinement_consistent(const SupersetMesh& mesh, const ActiveMask& mask) {
  for (const auto& [parent, children] : mesh.refinement()) {
    if (!mask[parent]) continue;
    for (TetId c : children) {
      if (mask[c]) return false;
    }
  }
  return true;
}

std::size_t Incidence::max_valence() const {
  std::size_t best = 0;
  for (std::size_t k = 0; k + 1 < offsets.size(); ++k) best = std::max(best, valence(k));
  return best;
}

namespace {

// Two-pass counting sort into CSR form. `emit(t, sink)` reports each (key, slot pair) of tet t.
template <class Emit>
Incidence build_incidence(const SupersetMesh& mesh, std::size_t num_keys, Emit emit) {
  Incidence inc;
  inc.offsets.assign(num_keys + 1, 0);
  for (TetId t = 0; t < mesh.num_tets(); ++t) {
    emit(t, [&](std::size_t key, int, int) { ++inc.offsets[key + 1]; });
  }
  std::partial_sum(inc.offsets.begin(), inc.offsets.end(), inc.offsets.begin());
  inc.tets.resize(inc.offsets.back());
  inc.slots.resize(inc.offsets.back());
  std::vector<std::size_t> cursor(inc.offsets.begin(), inc.offsets.end() - 1);
  for (TetId t = 0; t < mesh.num_tets(); ++t) {
    emit(t, [&](std::size_t key, int a, int b) {
      const auto pos = cursor[key]++;
      inc.tets[pos] = t;
      inc.slots[pos] = {static_cast<std::uint8_t>(a), static_cast<std::uint8_t>(b)};
    });
  }
  return inc;
}

}  // namespace

Incidence build_edge_incidence(const SupersetMesh& mesh) {
  return build_incidence(mesh, mesh.num_edges(), [&](TetId t, auto&& sink) {
    const Tet& tet = mesh.tet(t);
    for (int k = 0; k < 6; ++k) {
      auto [a, b] = kTetEdgeSlots[k];
      if (tet[a] > tet[b]) std::swap(a, b);  // slots ordered as (edge.u, edge.v)
      sink(mesh.tet_edges(t)[k], a, b);
    }
  });
}

Incidence build_vertex_incidence(const SupersetMesh& mesh) {
  return build_incidence(mesh, mesh.num_vertices(), [&](TetId t, auto&& sink) {
    for (int a = 0; a < 4; ++a) sink(mesh.tet(t)[a], a, a);
  });
}

namespace {

std::vector<std::size_t> edge_valences(const SupersetMesh& mesh) {
  std::vector<std::size_t> val(mesh.num_edges(), 0);
  for (TetId t = 0; t < mesh.num_tets(); ++t) {
    for (EdgeId e : mesh.tet_edges(t)) ++val[e];
  }
  return val;
}

}  // namespace

std::size_t max_edge_valence(const SupersetMesh& mesh) {
  const auto val = edge_valences(mesh);
  return val.empty() ? 0 : *std::max_element(val.begin(), val.end());
}

std::size_t max_tet_edge_rescan(const SupersetMesh& mesh) {
  const auto val = edge_valences(mesh);
  std::size_t best = 0;
  for (TetId t = 0; t < mesh.num_tets(); ++t) {
    std::size_t sum = 0;
    for (EdgeId e : mesh.tet_edges(t)) sum += val[e];
    best = std::max(best, sum);
  }
  return best;
}

std::size_t max_tet_entry_rescan(const SupersetMesh& mesh) {
  const auto val = edge_valences(mesh);
  std::vector<std::size_t> vval(mesh.num_vertices(), 0);
  for (const Tet& tet : mesh.tets()) {
    for (VertexId v : tet) ++vval[v];
  }
  std::size_t best = 0;
  for (TetId t = 0; t < mesh.num_tets(); ++t) {
    std::size_t sum = 0;
    for (EdgeId e : mesh.tet_edges(t)) sum += val[e];
    for (VertexId v : mesh.tet(t)) sum += vval[v];
    best = std::max(best, sum);
  }
  return best;
}

double signed_tet_volume(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d) {
  return (b - a).dot((c - a).cross(d - a)) / 6.0;
}

double tet_volume(const SupersetMesh& mesh, TetId t) {
  const Tet& k = mesh.tet(t);
  return std::abs(signed_tet_volume(mesh.vertex(k[0]), mesh.vertex(k[1]), mesh.vertex(k[2]), mesh.vertex(k[3])));
}

int BoundingBox::longest_axis() const {
  const Vec3 ext = max - min;
  int axis = 0;
  for (int d = 1; d < 3; ++d) {
    if (ext[d] > ext[axis]) axis = d;
  }
  return axis;
}

BoundingBox bounding_box(const SupersetMesh& mesh) {
  BoundingBox box{Vec3::Zero(), Vec3::Zero()};
  if (mesh.num_vertices() == 0) return box;
  box.min = box.max = mesh.vertex(0);
  for (const Vec3& p : mesh.vertices()) {
    box.min = box.min.cwiseMin(p);
    box.max = box.max.cwiseMax(p);
  }
  return box;
}

// ---------------------------------------------------------------------------
// TetGen .node / .ele

namespace {

struct LineReader {
  std::ifstream in;
  std::string file;
  std::size_t line_no = 0;

  explicit LineReader(const std::filesystem::path& path) : in(path), file(path.string()) {
    if (!in) throw ParseError(file, 0, "cannot open file");
  }

  // Next non-blank line with '#' comments stripped; false at end of file.
  bool next(std::istringstream& out) {
    std::string line;
    while (std::getline(in, line)) {
      ++line_no;
      if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      out.clear();
      out.str(line);
      return true;
    }
    return false;
  }

  [[noreturn]] void fail(const std::string& what) const { throw ParseError(file, line_no, what); }
};

template <class T>
T read_field(std::istringstream& ls, const LineReader& r, const char* what) {
  T value{};
  if (!(ls >> value)) r.fail(std::string("expected ") + what);
  return value;
}

}  // namespace

SupersetMesh load_mesh(const std::filesystem::path& node_path, const std::filesystem::path& ele_path) {
  std::istringstream ls;

  LineReader nodes(node_path);
  if (!nodes.next(ls)) nodes.fail("missing header");
  const auto nv = read_field<long long>(ls, nodes, "vertex count");
  if (nv < 0) nodes.fail("negative vertex count");
  if (long long dim = 3; ls >> dim && dim != 3) nodes.fail("only 3D node files are supported");

  std::vector<Vec3> vertices;
  vertices.reserve(static_cast<std::size_t>(nv));
  long long base = 0;
  for (long long i = 0; i < nv; ++i) {
    if (!nodes.next(ls)) nodes.fail("expected " + std::to_string(nv) + " vertices, found " + std::to_string(i));
    const auto idx = read_field<long long>(ls, nodes, "vertex index");
    if (i == 0) {
      if (idx != 0 && idx != 1) nodes.fail("first vertex index must be 0 or 1");
      base = idx;
    }
    if (idx != i + base) nodes.fail("vertex indices must be consecutive");
    Vec3 p;
    for (int d = 0; d < 3; ++d) p[d] = read_field<double>(ls, nodes, "coordinate");
    if (!p.allFinite()) nodes.fail("non-finite coordinate");
    vertices.push_back(p);
  }

  LineReader eles(ele_path);
  if (!eles.next(ls)) eles.fail("missing header");
  const auto nt = read_field<long long>(ls, eles, "tet count");
  if (nt < 0) eles.fail("negative tet count");
  if (long long per = 4; ls >> per && per != 4) eles.fail("only 4-node tetrahedra are supported");

  std::vector<Tet> tets;
  tets.reserve(static_cast<std::size_t>(nt));
  for (long long i = 0; i < nt; ++i) {
    if (!eles.next(ls)) eles.fail("expected " + std::to_string(nt) + " tets, found " + std::to_string(i));
    read_field<long long>(ls, eles, "tet index");
    Tet tet{};
    for (int a = 0; a < 4; ++a) {
      const auto v = read_field<long long>(ls, eles, "vertex reference") - base;
      if (v < 0 || v >= nv) eles.fail("vertex index " + std::to_string(v + base) + " out of range");
      tet[a] = static_cast<VertexId>(v);
    }
    for (int a = 0; a < 4; ++a) {
      for (int b = a + 1; b < 4; ++b) {
        if (tet[a] == tet[b]) eles.fail("tet repeats a vertex");
      }
    }
    tets.push_back(tet);
  }
  return SupersetMesh(std::move(vertices), std::move(tets));
}

void write_mesh(const SupersetMesh& mesh, const std::filesystem::path& node_path, const std::filesystem::path& ele_path) {
  std::ofstream node(node_path);
  std::ofstream ele(ele_path);
  if (!node || !ele) throw std::runtime_error("cannot open mesh output files");
  node.precision(17);
  node << mesh.num_vertices() << " 3 0 0\n";
  for (std::size_t i = 0; i < mesh.num_vertices(); ++i) {
    const Vec3& p = mesh.vertex(static_cast<VertexId>(i));
    node << i << ' ' << p.x() << ' ' << p.y() << ' ' << p.z() << '\n';
  }
  ele << mesh.num_tets() << " 4 0\n";
  for (std::size_t t = 0; t < mesh.num_tets(); ++t) {
    const Tet& k = mesh.tet(static_cast<TetId>(t));
    ele << t << ' ' << k[0] << ' ' << k[1] << ' ' << k[2] << ' ' << k[3] << '\n';
  }
}

// ---------------------------------------------------------------------------
// Generators

namespace {

// Swap two vertices if needed so the tet has positive orientation.
Tet oriented(const std::vector<Vec3>& v, Tet t) {
  if (signed_tet_volume(v[t[0]], v[t[1]], v[t[2]], v[t[3]]) < 0) std::swap(t[2], t[3]);
  return t;
}

}  // namespace

SupersetMesh generate_block_mesh(int nx, int ny, int nz) {
  if (nx < 1 || ny < 1 || nz < 1) throw std::invalid_argument("block mesh dimensions must be >= 1");
  const auto id = [&](int i, int j, int k) {
    return static_cast<VertexId>(i + (nx + 1) * (j + (ny + 1) * k));
  };

  std::vector<Vec3> vertices;
  vertices.reserve(static_cast<std::size_t>(nx + 1) * (ny + 1) * (nz + 1));
  for (int k = 0; k <= nz; ++k) {
    for (int j = 0; j <= ny; ++j) {
      for (int i = 0; i <= nx; ++i) vertices.emplace_back(i, j, k);
    }
  }

  // Six tets per cube, each a monotone path from corner (0,0,0) to (1,1,1) along one
  // axis permutation. Every cube uses the same diagonal, so neighbouring cubes conform.
  static constexpr std::array<std::array<int, 3>, 6> kPerms{
      {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}}};

  std::vector<Tet> tets;
  tets.reserve(static_cast<std::size_t>(nx) * ny * nz * 6);
  for (int k = 0; k < nz; ++k) {
    for (int j = 0; j < ny; ++j) {
      for (int i = 0; i < nx; ++i) {
        for (const auto& perm : kPerms) {
          std::array<int, 3> c{i, j, k};
          Tet tet{};
          tet[0] = id(c[0], c[1], c[2]);
          for (int s = 0; s < 3; ++s) {
            ++c[perm[s]];
            tet[s + 1] = id(c[0], c[1], c[2]);
          }
          tets.push_back(oriented(vertices, tet));
        }
      }
    }
  }
  return SupersetMesh(std::move(vertices), std::move(tets));
}

SupersetMesh build_refinement(const SupersetMesh& mesh, std::span<const TetId> refinable) {
  for (TetId t : refinable) {
    if (t >= mesh.num_tets()) throw std::invalid_argument("refinable tet id " + std::to_string(t) + " out of range");
    if (mesh.has_children(t)) throw std::invalid_argument("tet " + std::to_string(t) + " is already refined");
  }

  std::vector<Vec3> vertices = mesh.vertices();
  std::vector<Tet> tets = mesh.tets();
  SupersetMesh::Refinement refinement = mesh.refinement();

  std::vector<VertexId> midpoint(mesh.num_edges(), ~VertexId{0});
  const auto mid = [&](TetId t, int k) {
    const EdgeId e = mesh.tet_edges(t)[k];
    if (midpoint[e] == ~VertexId{0}) {
      const Edge& edge = mesh.edge(e);
      midpoint[e] = static_cast<VertexId>(vertices.size());
      vertices.push_back(0.5 * (mesh.vertex(edge.u) + mesh.vertex(edge.v)));
    }
    return midpoint[e];
  };

  std::vector<TetId> sorted(refinable.begin(), refinable.end());
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());

  for (TetId t : sorted) {
    const Tet& p = mesh.tet(t);
    // Edge slots follow kTetEdgeSlots: 01 02 03 12 13 23.
    const VertexId m01 = mid(t, 0), m02 = mid(t, 1), m03 = mid(t, 2);
    const VertexId m12 = mid(t, 3), m13 = mid(t, 4), m23 = mid(t, 5);
    const std::array<Tet, 8> children{{
        {p[0], m01, m02, m03},
        {m01, p[1], m12, m13},
        {m02, m12, p[2], m23},
        {m03, m13, m23, p[3]},
        // inner octahedron split along the m02-m13 diagonal
        {m01, m02, m03, m13},
        {m01, m02, m12, m13},
        {m02, m03, m13, m23},
        {m02, m12, m13, m23},
    }};
    std::array<TetId, 8> ids{};
    for (int c = 0; c < 8; ++c) {
      ids[c] = static_cast<TetId>(tets.size());
      tets.push_back(oriented(vertices, children[c]));
    }
    refinement.emplace(t, ids);
  }
  return SupersetMesh(std::move(vertices), std::move(tets), std::move(refinement));
}

}  // namespace stafem
