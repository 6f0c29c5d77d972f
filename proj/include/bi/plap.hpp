#pragma once

#include "bi/charge.hpp"
#include "bi/fields.hpp"
#include "bi/minimizer.hpp"

#include <ostream>
#include <string>
#include <vector>

namespace bi {

/// Taylor coefficients c_h of s^h in 1 - sqrt(1 - s), h = 1..order. The energy
/// density truncated at order k is P_k(s) = sum_h c_h s^h with s = |grad u|^2.
struct SeriesCoefficients
{
  int order = 0;
  std::vector<double> c;
  /// exact values as "p/q"
  std::vector<std::string> exact;

  double partial_sum(double s) const;
  double derivative(double s) const;
  double second_derivative(double s) const;
  /// P_k(s0 + ds) - P_k(s0) without cancellation
  double change(double s0, double ds) const;
};

SeriesCoefficients series_coefficients(int k);

/// sum_c h^N P_k(|grad u|_c^2) - <rho, u>. Defined for every field.
double truncated_energy(const GridField& u, const GridDensity& rho, const SeriesCoefficients& coeffs);
std::vector<double> truncated_energy_gradient(const GridField& u, const GridDensity& rho,
                                              const SeriesCoefficients& coeffs);

struct XNorm2k
{
  /// int |grad u|^2
  double gradient_l2_sq = 0.0;
  /// (int |grad u|^{2k})^{1/2k}
  double gradient_l2k = 0.0;
  /// sqrt(gradient_l2_sq + gradient_l2k^2)
  double value = 0.0;
};

XNorm2k xnorm_2k(const GridField& u, int k);

/// Unconstrained minimizer of the truncated energy with zero boundary values.
/// `weak_residual` in the result refers to the truncated Euler-Lagrange equation.
MinimizeResult minimize_truncated(const GridDensity& rho, int k, const EnergyConfig& config = {});
MinimizeResult minimize_truncated(const GridDensity& rho, int k, const EnergyConfig& config, const GridField& initial);

struct SweepRow
{
  int k = 0;
  double energy = 0.0;
  double sup_gradient = 0.0;
  /// sup norm distance to the Born-Infeld minimizer
  double distance = 0.0;
  bool converged = false;
};

struct SeriesSweep
{
  MinimizeResult full;
  std::vector<SweepRow> rows;
};

SeriesSweep series_sweep(const GridDensity& rho, const std::vector<int>& orders, const EnergyConfig& config = {});
void write_sweep_csv(std::ostream& out, const SeriesSweep& sweep);

} // namespace bi
