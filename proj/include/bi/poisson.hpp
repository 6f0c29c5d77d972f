#pragma once

#include "bi/fields.hpp"

#include <memory>
#include <span>
#include <vector>

namespace bi {

/// Fast solver for the (2N+1)-point Dirichlet Laplacian on a BoxGrid, by a
/// type-I sine transform over the interior nodes.
class DirichletLaplacian
{
public:
  explicit DirichletLaplacian(const BoxGrid& grid);
  ~DirichletLaplacian();
  DirichletLaplacian(DirichletLaplacian&&) noexcept;
  DirichletLaplacian& operator=(DirichletLaplacian&&) noexcept;

  const BoxGrid& grid() const;

  /// Overwrites `values` with the solution x of -Lap_h x = values at interior
  /// nodes, x = 0 on the boundary. Boundary entries of the input are ignored.
  void solve_in_place(std::span<double> values) const;
  std::vector<double> solve(std::span<const double> rhs) const;

private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// -Lap_h x at interior nodes (boundary entries of x are used as data), zero on
/// the boundary.
std::vector<double> negative_laplacian(const BoxGrid& grid, std::span<const double> x);

} // namespace bi
