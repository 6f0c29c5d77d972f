#pragma once

// Sparse direct solve of -Lap_h u = rho at interior nodes, u = 0 on the
// boundary, assembled from the (2N+1)-point stencil.

#include "bi/charge.hpp"
#include "bi/fields.hpp"

#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include <stdexcept>
#include <vector>

namespace test {

inline bi::GridField poisson_direct(const bi::GridDensity& rho)
{
  const auto& grid = rho.grid();
  const int dim = grid.dim();
  const std::size_t nodes = grid.node_count();
  std::vector<long> unknown(nodes, -1);
  long count = 0;
  for (std::size_t n = 0; n < nodes; ++n) {
    if (!grid.is_boundary(n)) {
      unknown[n] = count++;
    }
  }
  std::vector<std::size_t> stride(dim);
  std::size_t st = 1;
  for (int i = dim - 1; i >= 0; --i) {
    stride[i] = st;
    st *= grid.points();
  }
  const double inv_h2 = 1.0 / (grid.spacing() * grid.spacing());
  std::vector<Eigen::Triplet<double>> entries;
  Eigen::VectorXd rhs(count);
  for (std::size_t n = 0; n < nodes; ++n) {
    const long row = unknown[n];
    if (row < 0) {
      continue;
    }
    entries.emplace_back(row, row, 2.0 * dim * inv_h2);
    for (int i = 0; i < dim; ++i) {
      for (std::size_t m : {n - stride[i], n + stride[i]}) {
        if (unknown[m] >= 0) {
          entries.emplace_back(row, unknown[m], -inv_h2);
        }
      }
    }
    rhs[row] = rho.values()[n];
  }
  Eigen::SparseMatrix<double> A(count, count);
  A.setFromTriplets(entries.begin(), entries.end());
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  lu.compute(A);
  if (lu.info() != Eigen::Success) {
    throw std::runtime_error("sparse factorization failed");
  }
  const Eigen::VectorXd x = lu.solve(rhs);
  bi::GridField u(grid);
  for (std::size_t n = 0; n < nodes; ++n) {
    if (unknown[n] >= 0) {
      u[n] = x[unknown[n]];
    }
  }
  return u;
}

} // namespace test
