#include "bi/poisson.hpp"

#include <fftw3.h>

#include <cmath>
#include <numbers>

namespace bi {

struct DirichletLaplacian::Impl
{
  BoxGrid grid;
  int interior;
  std::size_t interior_count;
  double* buffer = nullptr;
  fftw_plan plan = nullptr;
  std::vector<double> inverse_eigen;

  explicit Impl(const BoxGrid& g) : grid(g), interior(g.points() - 2)
  {
    const int dim = g.dim();
    interior_count = 1;
    for (int i = 0; i < dim; ++i) {
      interior_count *= interior;
    }
    buffer = fftw_alloc_real(interior_count);
    std::vector<int> n(dim, interior);
    std::vector<fftw_r2r_kind> kinds(dim, FFTW_RODFT00);
    plan = fftw_plan_r2r(dim, n.data(), buffer, buffer, kinds.data(), FFTW_ESTIMATE);

    const double h2 = g.spacing() * g.spacing();
    std::vector<double> lambda1(interior);
    for (int k = 0; k < interior; ++k) {
      lambda1[k] = (2.0 - 2.0 * std::cos(std::numbers::pi * (k + 1) / (interior + 1))) / h2;
    }
    const double norm = std::pow(2.0 * (interior + 1), dim);
    inverse_eigen.resize(interior_count);
    std::vector<int> idx(dim, 0);
    for (std::size_t m = 0; m < interior_count; ++m) {
      double lam = 0.0;
      for (int i = 0; i < dim; ++i) {
        lam += lambda1[idx[i]];
      }
      inverse_eigen[m] = 1.0 / (lam * norm);
      for (int i = dim - 1; i >= 0; --i) {
        if (++idx[i] < interior) {
          break;
        }
        idx[i] = 0;
      }
    }
  }

  ~Impl()
  {
    fftw_destroy_plan(plan);
    fftw_free(buffer);
  }

  // visits interior nodes in the same row-major order as the transform buffer
  template <class F>
  void for_interior(F&& f) const
  {
    const int dim = grid.dim();
    std::vector<int> idx(dim, 1);
    for (std::size_t m = 0; m < interior_count; ++m) {
      f(m, grid.node_at(idx));
      for (int i = dim - 1; i >= 0; --i) {
        if (++idx[i] <= interior) {
          break;
        }
        idx[i] = 1;
      }
    }
  }
};

DirichletLaplacian::DirichletLaplacian(const BoxGrid& grid) : impl_(std::make_unique<Impl>(grid)) {}
DirichletLaplacian::~DirichletLaplacian() = default;
DirichletLaplacian::DirichletLaplacian(DirichletLaplacian&&) noexcept = default;
DirichletLaplacian& DirichletLaplacian::operator=(DirichletLaplacian&&) noexcept = default;

const BoxGrid& DirichletLaplacian::grid() const { return impl_->grid; }

void DirichletLaplacian::solve_in_place(std::span<double> values) const
{
  Impl& s = *impl_;
  s.for_interior([&](std::size_t m, std::size_t n) { s.buffer[m] = values[n]; });
  fftw_execute(s.plan);
  for (std::size_t m = 0; m < s.interior_count; ++m) {
    s.buffer[m] *= s.inverse_eigen[m];
  }
  fftw_execute(s.plan);
  for (std::size_t n = 0; n < values.size(); ++n) {
    if (s.grid.is_boundary(n)) {
      values[n] = 0.0;
    }
  }
  s.for_interior([&](std::size_t m, std::size_t n) { values[n] = s.buffer[m]; });
}

std::vector<double> DirichletLaplacian::solve(std::span<const double> rhs) const
{
  std::vector<double> out(rhs.begin(), rhs.end());
  solve_in_place(out);
  return out;
}

std::vector<double> negative_laplacian(const BoxGrid& grid, std::span<const double> x)
{
  const int dim = grid.dim();
  const double inv_h2 = 1.0 / (grid.spacing() * grid.spacing());
  std::vector<double> out(grid.node_count(), 0.0);
  for (std::size_t n = 0; n < out.size(); ++n) {
    if (grid.is_boundary(n)) {
      continue;
    }
    double acc = 2.0 * dim * x[n];
    for (int i = 0; i < dim; ++i) {
      acc -= x[n + grid.stride(i)] + x[n - grid.stride(i)];
    }
    out[n] = acc * inv_h2;
  }
  return out;
}

} // namespace bi
