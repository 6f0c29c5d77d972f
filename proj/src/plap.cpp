#include "bi/plap.hpp"

#include "bi/error.hpp"
#include "descent.hpp"

#include <boost/multiprecision/cpp_int.hpp>

#include <cmath>
#include <cstdio>

namespace bi {

namespace {

constexpr const char* kModule = "plap";

/// Adapter exposing P_k to the descent driver.
struct SeriesCell
{
  const SeriesCoefficients& coeffs;
  double value(double s) const { return coeffs.partial_sum(s); }
  double d1(double s) const { return coeffs.derivative(s); }
  double d2(double s) const { return coeffs.second_derivative(s); }
  double change(double s0, double ds) const { return coeffs.change(s0, ds); }
};

void check_order(int k)
{
  if (k < 1) {
    throw InvalidArgument(kModule, "series order must be at least 1");
  }
}

} // namespace

double SeriesCoefficients::partial_sum(double s) const
{
  double acc = 0.0;
  for (int h = order; h >= 1; --h) {
    acc = (acc + c[h - 1]) * s;
  }
  return acc;
}

double SeriesCoefficients::derivative(double s) const
{
  double acc = 0.0;
  for (int h = order; h >= 1; --h) {
    acc = acc * s + h * c[h - 1];
  }
  return acc;
}

double SeriesCoefficients::second_derivative(double s) const
{
  double acc = 0.0;
  for (int h = order; h >= 2; --h) {
    acc = acc * s + h * (h - 1) * c[h - 1];
  }
  return acc;
}

double SeriesCoefficients::change(double s0, double ds) const
{
  // (s1^h - s0^h) / (s1 - s0) = sum_j s1^j s0^{h-1-j}, built up by q_h = s1 q_{h-1} + s0^{h-1}
  const double s1 = s0 + ds;
  double q = 1.0, p0 = 1.0, acc = c[0];
  for (int h = 2; h <= order; ++h) {
    p0 *= s0;
    q = s1 * q + p0;
    acc += c[h - 1] * q;
  }
  return ds * acc;
}

SeriesCoefficients series_coefficients(int k)
{
  check_order(k);
  using boost::multiprecision::cpp_rational;
  SeriesCoefficients out;
  out.order = k;
  // sqrt(1 - s) = sum b_h s^h with b_h = b_{h-1} (h - 3/2) / h, and c_h = -b_h
  cpp_rational b = 1;
  for (int h = 1; h <= k; ++h) {
    b = b * cpp_rational(2 * h - 3, 2 * h);
    const cpp_rational ch = -b;
    out.c.push_back(static_cast<double>(ch));
    out.exact.push_back(ch.str());
  }
  return out;
}

double truncated_energy(const GridField& u, const GridDensity& rho, const SeriesCoefficients& coeffs)
{
  detail::require_same_grid(u, rho, kModule);
  return detail::cell_energy(SeriesCell{coeffs}, u, detail::coupling_weights(rho));
}

std::vector<double> truncated_energy_gradient(const GridField& u, const GridDensity& rho,
                                              const SeriesCoefficients& coeffs)
{
  detail::require_same_grid(u, rho, kModule);
  const auto s = cell_gradient_sq(u.grid(), u.values());
  return detail::cell_energy_gradient(SeriesCell{coeffs}, u, s, detail::coupling_weights(rho));
}

XNorm2k xnorm_2k(const GridField& u, int k)
{
  check_order(k);
  const auto s = cell_gradient_sq(u.grid(), u.values());
  const double vol = u.grid().cell_volume();
  XNorm2k out;
  double peak = 0.0;
  for (double x : s) {
    out.gradient_l2_sq += x;
    peak = std::max(peak, x);
  }
  out.gradient_l2_sq *= vol;
  if (peak > 0.0) {
    // scale by the peak so large k cannot overflow
    double acc = 0.0;
    for (double x : s) {
      acc += std::pow(x / peak, k);
    }
    out.gradient_l2k = std::sqrt(peak) * std::pow(acc * vol, 0.5 / k);
  }
  out.value = std::sqrt(out.gradient_l2_sq + out.gradient_l2k * out.gradient_l2k);
  return out;
}

MinimizeResult minimize_truncated(const GridDensity& rho, int k, const EnergyConfig& config)
{
  return minimize_truncated(rho, k, config, GridField(rho.grid()));
}

MinimizeResult minimize_truncated(const GridDensity& rho, int k, const EnergyConfig& config, const GridField& initial)
{
  config.validate();
  detail::require_same_grid(initial, rho, kModule);
  const auto coeffs = series_coefficients(k);
  const SeriesCell cell{coeffs};
  auto result = detail::descend(cell, rho, config, initial, std::numeric_limits<double>::infinity(),
                                [](std::span<const double>) {}, kModule);
  const auto tests = standard_test_functions(rho.grid());
  result.weak_residual = detail::residual_over_tests(cell, result.field, rho, tests, kModule);
  return result;
}

SeriesSweep series_sweep(const GridDensity& rho, const std::vector<int>& orders, const EnergyConfig& config)
{
  for (int k : orders) {
    check_order(k);
  }
  SeriesSweep out{minimize(rho, config), {}};
  for (int k : orders) {
    auto r = minimize_truncated(rho, k, config);
    double dist = 0.0;
    for (std::size_t n = 0; n < rho.grid().node_count(); ++n) {
      dist = std::max(dist, std::abs(r.field[n] - out.full.field[n]));
    }
    out.rows.push_back({k, r.energy, r.sup_gradient, dist, r.converged});
  }
  return out;
}

void write_sweep_csv(std::ostream& out, const SeriesSweep& sweep)
{
  out << "k,energy,sup_gradient,distance_to_full\n";
  char line[256];
  for (const auto& row : sweep.rows) {
    std::snprintf(line, sizeof line, "%d,%.17g,%.17g,%.17g\n", row.k, row.energy, row.sup_gradient, row.distance);
    out << line;
  }
}

} // namespace bi
