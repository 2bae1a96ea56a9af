#include "stafem/sparse.hpp"

#include <cmath>
#include <ostream>

namespace stafem {

void CsrMatrix::multiply(std::span<const double> x, std::span<double> y) const {
  for (std::size_t i = 0; i < n; ++i) {
    double sum = 0.0;
    for (std::size_t k = row_ptr[i]; k < row_ptr[i + 1]; ++k) sum += val[k] * x[col[k]];
    y[i] = sum;
  }
}

std::vector<double> CsrMatrix::diagonal() const {
  std::vector<double> d(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = row_ptr[i]; k < row_ptr[i + 1]; ++k) {
      if (col[k] == i) d[i] = val[k];
    }
  }
  return d;
}

double CsrMatrix::max_abs() const {
  double m = 0.0;
  for (double v : val) m = std::max(m, std::abs(v));
  return m;
}

CsrMatrix materialize(const SymmetricSparseMatrix<double>& m, double eps) {
  CsrMatrix out;
  out.n = m.dimension();
  out.row_ptr.reserve(out.n + 1);
  out.col.reserve(m.stored_entries() + out.n);
  out.val.reserve(m.stored_entries() + out.n);
  for (VertexId u = 0; u < out.n; ++u) {
    const auto& row = m.row(u);
    auto it = row.begin();
    for (; it != row.end() && it->col < u; ++it) {
      if (!it->live) continue;
      out.col.push_back(it->col);
      out.val.push_back(it->value);
    }
    out.col.push_back(u);
    out.val.push_back(m.diagonal(u) + eps);
    for (; it != row.end(); ++it) {
      if (!it->live) continue;
      out.col.push_back(it->col);
      out.val.push_back(it->value);
    }
    out.row_ptr.push_back(out.col.size());
  }
  return out;
}

CsrMatrix materialize(const SymmetricSparseMatrix<Mat3>& m, double eps) {
  CsrMatrix out;
  const std::size_t nv = m.dimension();
  out.n = 3 * nv;
  out.row_ptr.reserve(out.n + 1);
  const std::size_t nnz = 9 * (m.stored_entries() + nv);
  out.col.reserve(nnz);
  out.val.reserve(nnz);
  for (VertexId u = 0; u < nv; ++u) {
    const auto& row = m.row(u);
    const auto split = std::lower_bound(row.begin(), row.end(), u,
                                        [](const auto& e, VertexId c) { return e.col < c; });
    for (int r = 0; r < 3; ++r) {
      const auto emit = [&](VertexId c, const Mat3& b, double shift) {
        for (int s = 0; s < 3; ++s) {
          out.col.push_back(3 * c + static_cast<std::uint32_t>(s));
          out.val.push_back(b[3 * r + s] + (s == r ? shift : 0.0));
        }
      };
      for (auto it = row.begin(); it != split; ++it) {
        if (it->live) emit(it->col, it->value, 0.0);
      }
      emit(u, m.diagonal(u), eps);
      for (auto it = split; it != row.end(); ++it) {
        if (it->live) emit(it->col, it->value, 0.0);
      }
      out.row_ptr.push_back(out.col.size());
    }
  }
  return out;
}

ParityResult compare(const CsrMatrix& a, const CsrMatrix& b, double tolerance) {
  ParityResult res;
  const std::size_t n = std::max(a.n, b.n);
  const auto record = [&](double diff, bool structural) {
    res.max_abs_diff = std::max(res.max_abs_diff, diff);
    if (structural || diff > tolerance) ++res.mismatch_count;
  };
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t ka = i < a.n ? a.row_ptr[i] : 0, ea = i < a.n ? a.row_ptr[i + 1] : 0;
    std::size_t kb = i < b.n ? b.row_ptr[i] : 0, eb = i < b.n ? b.row_ptr[i + 1] : 0;
    while (ka < ea || kb < eb) {
      if (kb == eb || (ka < ea && a.col[ka] < b.col[kb])) {
        record(std::abs(a.val[ka++]), true);
      } else if (ka == ea || b.col[kb] < a.col[ka]) {
        record(std::abs(b.val[kb++]), true);
      } else {
        record(std::abs(a.val[ka++] - b.val[kb++]), false);
      }
    }
  }
  return res;
}

void write_matrix_market(std::ostream& out, const CsrMatrix& m) {
  out << "%%MatrixMarket matrix coordinate real general\n";
  out << m.n << ' ' << m.n << ' ' << m.nnz() << '\n';
  const auto old = out.precision(17);
  for (std::size_t i = 0; i < m.n; ++i) {
    for (std::size_t k = m.row_ptr[i]; k < m.row_ptr[i + 1]; ++k) {
      out << i + 1 << ' ' << m.col[k] + 1 << ' ' << m.val[k] << '\n';
    }
  }
  out.precision(old);
}

}  // namespace stafem
