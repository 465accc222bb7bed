#pragma once

// Matrix Market coordinate export for external verification of the
// assembled operators.

#include <Eigen/Sparse>

#include <ostream>

namespace mfmfe {

inline void write_matrix_market(std::ostream& os, const Eigen::SparseMatrix<double>& m,
                                bool symmetric = false) {
  os.precision(17);
  os << "%%MatrixMarket matrix coordinate real "
     << (symmetric ? "symmetric" : "general") << '\n';
  int nnz = 0;
  for (int c = 0; c < m.outerSize(); ++c)
    for (Eigen::SparseMatrix<double>::InnerIterator it(m, c); it; ++it)
      if (!symmetric || it.row() >= it.col()) ++nnz;
  os << m.rows() << ' ' << m.cols() << ' ' << nnz << '\n';
  for (int c = 0; c < m.outerSize(); ++c)
    for (Eigen::SparseMatrix<double>::InnerIterator it(m, c); it; ++it) {
      if (symmetric && it.row() < it.col()) continue;
      os << it.row() + 1 << ' ' << it.col() + 1 << ' ' << it.value() << '\n';
    }
}

}  // namespace mfmfe
