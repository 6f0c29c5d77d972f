#pragma once

#include <functional>
#include <span>
#include <vector>

namespace bi::quad {

using Integrand = std::function<double(double)>;

struct Estimate
{
  double value = 0.0;
  double error = 0.0;
};

/// Adaptive Gauss-Kronrod (15 point) on a finite interval.
Estimate gauss_kronrod(const Integrand& f, double a, double b, double rel_tol = 1e-12,
                       unsigned max_depth = 15);

/// Double-exponential rule; tolerates integrable endpoint singularities.
Estimate tanh_sinh(const Integrand& f, double a, double b, double rel_tol = 1e-12);

/// Sum of Gauss-Kronrod integrals over consecutive breakpoints.
double piecewise(const Integrand& f, std::span<const double> breaks, double rel_tol = 1e-12);

/// Gauss-Legendre rule on [-1, 1].
struct Rule
{
  std::vector<double> nodes;
  std::vector<double> weights;
};
Rule gauss_legendre(int n);

/// Maps a [-1,1] rule onto [a,b].
Rule gauss_legendre(int n, double a, double b);

/// Product quadrature on the unit sphere S^{N-1}. Weights sum to the exact
/// surface area, so constants are integrated to rounding error.
class SphereRule
{
public:
  SphereRule(int dim, int polar_points, int azimuth_points);

  int dim() const { return dim_; }
  std::size_t size() const { return weights_.size(); }
  std::span<const double> direction(std::size_t k) const
  {
    return {directions_.data() + k * dim_, static_cast<std::size_t>(dim_)};
  }
  double weight(std::size_t k) const { return weights_[k]; }

private:
  int dim_;
  std::vector<double> directions_;
  std::vector<double> weights_;
};

} // namespace bi::quad
