#include "bi/quadrature.hpp"

#include "bi/error.hpp"
#include "bi/geometry.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace bi::quad {

Estimate gauss_kronrod(const Integrand& f, double a, double b, double rel_tol, unsigned max_depth)
{
  if (a == b) {
    return {};
  }
  // tighter requests cannot be met by the K15-G7 error estimate and only burn subdivisions
  rel_tol = std::max(rel_tol, 1e-13);
  // integrate on [0,1]: on narrow intervals far from the origin the recursion
  // otherwise fails to terminate
  const double width = b - a;
  auto unit = [&](double y) { return f(a + width * y); };
  double err = 0.0;
  double value = boost::math::quadrature::gauss_kronrod<double, 15>::integrate(
    unit, 0.0, 1.0, max_depth, rel_tol, &err);
  return {value * width, err * std::abs(width)};
}

Estimate tanh_sinh(const Integrand& f, double a, double b, double rel_tol)
{
  if (a == b) {
    return {};
  }
  static thread_local boost::math::quadrature::tanh_sinh<double> integrator;
  double err = 0.0;
  double l1 = 0.0;
  double value = integrator.integrate(f, a, b, rel_tol, &err, &l1);
  return {value, err};
}

double piecewise(const Integrand& f, std::span<const double> breaks, double rel_tol)
{
  double total = 0.0;
  for (std::size_t i = 1; i < breaks.size(); ++i) {
    total += gauss_kronrod(f, breaks[i - 1], breaks[i], rel_tol).value;
  }
  return total;
}

Rule gauss_legendre(int n)
{
  if (n < 1) {
    throw InvalidArgument("quadrature", "Gauss-Legendre rule needs at least one node");
  }
  // Legendre P_n and P_{n-1} at x by the three-term recurrence.
  auto legendre = [n](double x) {
    double p0 = 1.0;
    double p1 = x;
    for (int k = 2; k <= n; ++k) {
      double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
      p0 = p1;
      p1 = p2;
    }
    return std::pair{p1, p0};
  };
  Rule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    for (int iter = 0; iter < 100; ++iter) {
      auto [pn, pm] = legendre(x);
      double dp = n * (x * pn - pm) / (x * x - 1.0);
      double dx = pn / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) {
        break;
      }
    }
    auto [pn, pm] = legendre(x);
    double dp = n * (x * pn - pm) / (x * x - 1.0);
    double w = 2.0 / ((1.0 - x * x) * dp * dp);
    rule.nodes[i] = -x;
    rule.nodes[n - 1 - i] = x;
    rule.weights[i] = w;
    rule.weights[n - 1 - i] = w;
  }
  return rule;
}

Rule gauss_legendre(int n, double a, double b)
{
  Rule rule = gauss_legendre(n);
  double half = 0.5 * (b - a);
  double mid = 0.5 * (a + b);
  for (int i = 0; i < n; ++i) {
    rule.nodes[i] = mid + half * rule.nodes[i];
    rule.weights[i] *= half;
  }
  return rule;
}

SphereRule::SphereRule(int dim, int polar_points, int azimuth_points) : dim_(dim)
{
  if (dim < 2 || polar_points < 1 || azimuth_points < 1) {
    throw InvalidArgument("quadrature", "invalid sphere rule parameters");
  }
  // Hyperspherical coordinates: N-2 polar angles on [0, pi] with weight
  // sin^{N-1-k}, then one azimuth on [0, 2 pi).
  Rule polar = gauss_legendre(polar_points, 0.0, std::numbers::pi);
  int n_polar = dim - 2;
  std::size_t total = static_cast<std::size_t>(azimuth_points);
  for (int k = 0; k < n_polar; ++k) {
    total *= static_cast<std::size_t>(polar_points);
  }
  directions_.reserve(total * dim);
  weights_.reserve(total);
  std::vector<int> idx(n_polar, 0);
  std::vector<double> dir(dim);
  for (std::size_t t = 0; t < total; ++t) {
    std::size_t rem = t;
    int ia = static_cast<int>(rem % azimuth_points);
    rem /= azimuth_points;
    for (int k = n_polar - 1; k >= 0; --k) {
      idx[k] = static_cast<int>(rem % polar_points);
      rem /= polar_points;
    }
    double w = 2.0 * std::numbers::pi / azimuth_points;
    double sin_prod = 1.0;
    for (int k = 0; k < n_polar; ++k) {
      double theta = polar.nodes[idx[k]];
      dir[k] = sin_prod * std::cos(theta);
      w *= polar.weights[idx[k]] * std::pow(std::sin(theta), dim - 2 - k);
      sin_prod *= std::sin(theta);
    }
    double phi = 2.0 * std::numbers::pi * (ia + 0.5) / azimuth_points;
    dir[dim - 2] = sin_prod * std::cos(phi);
    dir[dim - 1] = sin_prod * std::sin(phi);
    directions_.insert(directions_.end(), dir.begin(), dir.end());
    weights_.push_back(w);
  }
  double sum = 0.0;
  for (double w : weights_) {
    sum += w;
  }
  double scale = unit_sphere_area(dim) / sum;
  for (double& w : weights_) {
    w *= scale;
  }
}

} // namespace bi::quad
