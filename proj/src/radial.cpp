#include "bi/radial.hpp"

#include "bi/error.hpp"
#include "bi/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

namespace bi {

namespace {

double far_field_potential(double a, double r, int dim)
{
  // int_r^inf g / sqrt(1 + g^2), g = a s^{1-N}, expanded to fifth order in g
  const int n = dim;
  const double t1 = a * std::pow(r, 2 - n) / (n - 2);
  const double t3 = std::pow(a, 3) * std::pow(r, 4 - 3 * n) / (2.0 * (3 * n - 4));
  const double t5 = 3.0 * std::pow(a, 5) * std::pow(r, 6 - 5 * n) / (8.0 * (5 * n - 6));
  return t1 - t3 + t5;
}

double slope_of(double flux, double r, int dim)
{
  const double g = flux * std::pow(r, 1 - dim);
  return -g / std::hypot(1.0, g);
}

/// w'' from g = F r^{1-N} and the local density: g' = rho - (N-1) g / r.
double curvature(double g, double r, double rho, int dim)
{
  const double gp = rho - (dim - 1) * g / r;
  return -gp / std::pow(1.0 + g * g, 1.5);
}

double shell_flux(const RadialDensity& density, double a, double b)
{
  const int n = density.dim();
  auto f = [&](double s) { return density(s) * std::pow(s, n - 1); };
  const double knot = density.knot_spacing();
  if (knot == 0.0) {
    return quad::gauss_kronrod(f, a, b, 1e-13).value;
  }
  // a polynomial of degree N + 2 between knots; one K15 panel is exact up to degree 22
  const unsigned depth = n <= 20 ? 0 : 15;
  double total = 0.0, lo = a;
  for (double k = std::floor(a / knot) + 1.0; lo < b; k += 1.0) {
    const double hi = std::min(k * knot, b);
    total += quad::gauss_kronrod(f, lo, hi, 1e-13, depth).value;
    lo = hi;
  }
  return total;
}

} // namespace

double natural_radius(const RadialDensity& density)
{
  if (auto p = density.origin_power()) {
    return p->valid_up_to;
  }
  double s = density.support_radius();
  return (s > 0.0 && std::isfinite(s)) ? s : 1.0;
}

std::vector<double> radial_mesh(const RadialDensity& density, const RadialMeshConfig& config)
{
  const double r0 = config.reference_radius > 0.0 ? config.reference_radius : natural_radius(density);
  if (!(config.min_factor > 0.0) || !(config.max_factor > config.min_factor) || config.points_per_decade < 10) {
    throw InvalidArgument("radial", "invalid radial mesh configuration");
  }
  const double r_min = config.min_factor * r0;
  double r_max = config.max_factor * r0;
  const double support = density.support_radius();
  if (std::isfinite(support) && support * 10.0 > r_max) {
    r_max = support * 10.0;
  }
  const double step = 1.0 / config.points_per_decade;
  const double decades = std::log10(r_max / r_min);
  const int count = static_cast<int>(std::ceil(decades / step - 1e-9));
  std::vector<double> mesh;
  mesh.reserve(count + 8);
  for (int k = 0; k <= count; ++k) {
    mesh.push_back(r_min * std::pow(10.0, std::min(k * step, decades)));
  }
  for (double b : density.breakpoints()) {
    if (b > r_min && b < r_max) {
      mesh.push_back(b);
    }
  }
  std::sort(mesh.begin(), mesh.end());
  // drop mesh nodes that nearly coincide with an inserted breakpoint
  std::vector<double> out;
  const auto breaks = density.breakpoints();
  for (double r : mesh) {
    if (!out.empty() && r - out.back() < 1e-9 * r) {
      bool is_break = std::find(breaks.begin(), breaks.end(), r) != breaks.end();
      if (is_break) {
        out.back() = r;
      }
      continue;
    }
    out.push_back(r);
  }
  return out;
}

std::vector<double> cumulative_flux(const RadialDensity& density, const std::vector<double>& mesh)
{
  if (mesh.empty() || !(mesh.front() > 0.0)) {
    throw InvalidArgument("radial", "radial mesh must be nonempty and positive");
  }
  if (auto p = density.origin_power(); p && p->exponent >= density.dim() - 1) {
    throw NumericalFailure("radial", "flux integral diverges at the origin");
  }
  std::vector<double> flux(mesh.size());
  // closed form near the origin for power data, quadrature otherwise
  flux[0] = density.flux(mesh[0]);
  for (std::size_t k = 0; k + 1 < mesh.size(); ++k) {
    flux[k + 1] = flux[k] + shell_flux(density, mesh[k], mesh[k + 1]);
  }
  return flux;
}

SlopeData slope_from_flux(const std::vector<double>& flux, const std::vector<double>& mesh, int dim)
{
  if (flux.size() != mesh.size()) {
    throw InvalidArgument("radial", "flux and mesh sizes differ");
  }
  SlopeData d;
  d.g.resize(mesh.size());
  d.slope.resize(mesh.size());
  d.v.resize(mesh.size());
  for (std::size_t k = 0; k < mesh.size(); ++k) {
    const double g = flux[k] * std::pow(mesh[k], 1 - dim);
    const double norm = std::hypot(1.0, g);
    d.g[k] = g;
    d.v[k] = 1.0 / norm;
    d.slope[k] = -g / norm;
  }
  return d;
}

std::vector<double> integrate_potential(const RadialDensity& density, const std::vector<double>& mesh,
                                        const std::vector<double>& flux)
{
  const int dim = density.dim();
  const double support = density.support_radius();
  if (!std::isfinite(support) && density(mesh.back()) != 0.0) {
    throw NumericalFailure("radial", "potential tail is not integrable: density has unbounded support");
  }
  if (support > mesh.back()) {
    throw InvalidArgument("radial", "mesh must extend past the density support");
  }
  const auto rule = quad::gauss_legendre(5);
  std::vector<double> u(mesh.size());
  u.back() = far_field_potential(flux.back(), mesh.back(), dim);
  for (std::size_t k = mesh.size() - 1; k-- > 0;) {
    const double a = mesh[k], b = mesh[k + 1];
    const double half = 0.5 * (b - a);
    double f = flux[k];
    double prev = a;
    double acc = 0.0;
    for (std::size_t j = 0; j < rule.nodes.size(); ++j) {
      const double x = a + half * (rule.nodes[j] + 1.0);
      f += shell_flux(density, prev, x);
      prev = x;
      acc += rule.weights[j] * slope_of(f, x, dim);
    }
    u[k] = u[k + 1] - half * acc;
  }
  return u;
}

double RadialProfile::slope_at(double r) const
{
  r = std::abs(r);
  if (r == 0.0) {
    return 0.0;
  }
  double f;
  if (r >= mesh.back()) {
    f = total_flux;
  } else if (r <= mesh.front()) {
    f = density.flux(r);
  } else {
    auto it = std::upper_bound(mesh.begin(), mesh.end(), r);
    std::size_t k = static_cast<std::size_t>(it - mesh.begin()) - 1;
    f = flux[k] + (r > mesh[k] ? shell_flux(density, mesh[k], r) : 0.0);
  }
  return slope_of(f, r, dim);
}

double RadialProfile::v_at(double r) const
{
  const double w = slope_at(r);
  // |w'| = g / sqrt(1+g^2); recover v without cancellation
  const double g = std::abs(w) < 1.0 ? std::abs(w) / std::sqrt((1.0 - std::abs(w)) * (1.0 + std::abs(w))) : kInfinity;
  return 1.0 / std::hypot(1.0, g);
}

double RadialProfile::potential_at(double r) const
{
  r = std::abs(r);
  if (r >= mesh.back()) {
    return far_field_potential(total_flux, r, dim);
  }
  if (r <= mesh.front()) {
    if (r == mesh.front()) {
      return potential.front();
    }
    return potential.front() -
           quad::gauss_kronrod([this](double s) { return slope_at(s); }, r, mesh.front(), 1e-12).value;
  }
  auto it = std::upper_bound(mesh.begin(), mesh.end(), r);
  std::size_t k = static_cast<std::size_t>(it - mesh.begin()) - 1;
  if (r == mesh[k]) {
    return potential[k];
  }
  // quintic Hermite with one-sided curvatures, exact to O(h^6)
  const double a = mesh[k], b = mesh[k + 1];
  const double h = b - a;
  const double t = (r - a) / h;
  const double t2 = t * t, t3 = t2 * t, t4 = t3 * t, t5 = t4 * t;
  const double c0 = curvature(g[k], a, density(std::nextafter(a, b)), dim);
  const double c1 = curvature(g[k + 1], b, density(std::nextafter(b, a)), dim);
  const double h0 = 1 - 10 * t3 + 15 * t4 - 6 * t5;
  const double h1 = t - 6 * t3 + 8 * t4 - 3 * t5;
  const double h2 = 0.5 * (t2 - 3 * t3 + 3 * t4 - t5);
  const double h3 = 0.5 * (t3 - 2 * t4 + t5);
  const double h4 = -4 * t3 + 7 * t4 - 3 * t5;
  const double h5 = 10 * t3 - 15 * t4 + 6 * t5;
  return h0 * potential[k] + h * (h1 * slope[k] + h4 * slope[k + 1]) + h * h * (h2 * c0 + h3 * c1) +
         h5 * potential[k + 1];
}

double RadialProfile::second_derivative(double r) const
{
  r = std::abs(r);
  if (r == 0.0) {
    r = mesh.front();
  }
  const double w = slope_at(r);
  return curvature(-w / std::sqrt((1.0 - w) * (1.0 + w)), r, density(r), dim);
}

double RadialProfile::hessian_frobenius_sq(double r) const
{
  r = std::abs(r);
  if (r == 0.0) {
    r = mesh.front();
  }
  const double w2 = second_derivative(r);
  const double w1 = slope_at(r);
  return w2 * w2 + (dim - 1) * (w1 / r) * (w1 / r);
}

RadialProfile solve_radial(const RadialDensity& density, const RadialMeshConfig& config)
{
  RadialProfile p{density.dim(), 0.0, 0.0, density, {}, {}, {}, {}, {}, {}, {}};
  p.reference_radius = config.reference_radius > 0.0 ? config.reference_radius : natural_radius(density);
  p.mesh = radial_mesh(density, config);
  p.rho.resize(p.mesh.size());
  for (std::size_t k = 0; k < p.mesh.size(); ++k) {
    p.rho[k] = density(p.mesh[k]);
  }
  p.flux = cumulative_flux(density, p.mesh);
  p.total_flux = p.flux.back();
  auto s = slope_from_flux(p.flux, p.mesh, p.dim);
  p.g = std::move(s.g);
  p.slope = std::move(s.slope);
  p.v = std::move(s.v);
  p.potential = integrate_potential(density, p.mesh, p.flux);
  return p;
}

std::vector<double> apply_radial_operator(const RadialProfile& profile)
{
  const auto& r = profile.mesh;
  const int n = profile.dim;
  std::vector<double> out(r.size(), std::nan(""));
  auto phi = [&](std::size_t k) { return std::pow(r[k], n - 1) * (profile.slope[k] / profile.v[k]); };
  for (std::size_t k = 1; k + 1 < r.size(); ++k) {
    out[k] = -std::pow(r[k], 1 - n) * (phi(k + 1) - phi(k - 1)) / (r[k + 1] - r[k - 1]);
  }
  return out;
}

nlohmann::json OriginClassification::to_json() const
{
  nlohmann::json j;
  j["format_version"] = 1;
  j["limit_abs_slope"] = limit_abs_slope;
  j["critical_q"] = std::isfinite(critical_q) ? nlohmann::json(critical_q) : nlohmann::json("inf");
  j["verdict"] = gradient_degenerate ? "gradient-degenerate" : "strictly-spacelike";
  j["samples"] = samples;
  return j;
}

OriginClassification classify_origin_regularity(const RadialProfile& profile)
{
  if (profile.r_min() > 1e-6 * profile.reference_radius * (1.0 + 1e-12)) {
    throw InvalidArgument("radial", "profile must reach r_min <= 1e-6 r0 for origin classification");
  }
  OriginClassification c;
  for (int k = 0; k < 5; ++k) {
    c.samples.push_back(std::abs(profile.slope_at(profile.r_min() * std::pow(10.0, k))));
  }
  if (std::abs(c.samples[1] - c.samples[0]) > 0.01) {
    throw NumericalFailure("radial", "mesh not fine enough: |w'| still changes by more than 0.01 per decade at r_min");
  }
  // iterated Aitken extrapolation toward r -> 0
  std::vector<double> seq = c.samples;
  while (seq.size() >= 3) {
    std::vector<double> next;
    for (std::size_t i = 0; i + 2 < seq.size(); ++i) {
      const double d1 = seq[i + 1] - seq[i];
      const double d2 = seq[i + 2] - 2.0 * seq[i + 1] + seq[i];
      if (std::abs(d2) <= 1e-14 * std::max(1.0, std::abs(seq[i])) || !std::isfinite(d1 * d1 / d2)) {
        next.push_back(seq[i]);
      } else {
        next.push_back(seq[i] - d1 * d1 / d2);
      }
    }
    seq = std::move(next);
  }
  c.limit_abs_slope = std::clamp(seq.front(), 0.0, 1.0);
  c.gradient_degenerate = c.limit_abs_slope >= 1.0 - 1e-6;
  c.critical_q = kInfinity;
  if (auto p = profile.density.origin_power(); p && p->amplitude != 0.0 && p->exponent > -1.0) {
    c.critical_q = profile.dim / (p->exponent + 1.0);
  }
  return c;
}

void write_csv(std::ostream& out, const RadialProfile& profile)
{
  out << "r,rho,F,w_prime,u\n";
  char line[256];
  for (std::size_t k = 0; k < profile.mesh.size(); ++k) {
    std::snprintf(line, sizeof line, "%.17g,%.17g,%.17g,%.17g,%.17g\n", profile.mesh[k], profile.rho[k],
                  profile.flux[k], profile.slope[k], profile.potential[k]);
    out << line;
  }
}

} // namespace bi
