#pragma once

#include "bi/charge.hpp"
#include "bi/fields.hpp"
#include "bi/radial.hpp"

#include <json.hpp>

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace bi {

/// Cells whose centre x has Lorentz distance
/// l(x, x0) = [|x - x0|^2 - (u(x) - u(x0))^2]^{1/2} below R. Throws
/// ConstraintViolation if |u(x) - u(x0)| > |x - x0| (1 + tolerance) at a centre.
std::vector<char> lorentz_ball_mask(const GridField& u, std::span<const double> x0, double R,
                                    double tolerance = 1e-9);
std::vector<char> euclidean_ball_mask(const BoxGrid& grid, std::span<const double> x0, double R);

struct EstimateReport
{
  std::vector<double> center;
  double radius = 0.0;
  double gamma = 0.0;
  double C = 0.0;
  double q = 0.0;
  double beta = 0.0;
  double c_rho = 0.0;
  double term_lhs = 0.0;
  double term_volume = 0.0;
  double term_datum = 0.0;
  double term_hessian = 0.0;
  /// int_{K_{R/2}} sum u_ij^2, so term_hessian = C R^{2-N} e^{-gamma/4} hessian_integral
  double hessian_integral = 0.0;
  /// smallest v seen on K_R
  double min_v = 0.0;
  double margin = 0.0;

  nlohmann::json to_json() const;
};

/// c R (2/q)^{(q-2)/2} int_0^R s^{-beta} [q/2 omega_N^{2/q} + c/(1-beta) s^{2-beta}]^{(q-2)/2} ds
double datum_term(int dim, double q, double c_rho, double R);

/// Radial solution centred at the origin; K_R(x0) is integrated in polar
/// coordinates about x0 using the axial symmetry through the origin.
EstimateReport evaluate_estimate(const RadialProfile& u, std::span<const double> x0, double R, double gamma,
                                 double C, double q);
/// Grid solution: cell sums over the Lorentz ball mask, Hessian by central differences.
EstimateReport evaluate_estimate(const GridField& u, const GridDensity& rho, std::span<const double> x0, double R,
                                 double gamma, double C, double q);

/// Solutions the calibration and certification run on: radial profiles of the
/// power data C r^{-1-beta} (C = N - 1 - beta, cutoff 1, taper 0.25)
/// mollified at scale 0.1.
RadialProfile mollified_power_solution(int dim, double beta);

struct EstimateSample
{
  double offset = 0.0;
  double radius = 0.0;
};

/// Offsets |x0| uniform in [0, 1.5], radii log-uniform in [0.02, 1].
std::vector<EstimateSample> estimate_samples(std::size_t count, std::uint64_t seed);

struct Calibration
{
  double gamma = 0.0;
  /// 0.9 of the smallest admissible C over the calibration lattice
  double C = 0.0;
  double C_limit = 0.0;
  std::size_t instances = 0;
  nlohmann::json to_json() const;
};

/// Largest C with nonnegative margin on every lattice point (|x0|, R) of
/// [0, 1.5] x [0.02, 1] for each profile, with a 10% safety factor.
Calibration calibrate_estimate(const std::vector<RadialProfile>& suite, double gamma, double q,
                               int offsets = 13, int radii = 13);

/// Sharp Sobolev constant for D^{1,k}(R^N) into L^{Nk/(N-k)}, 1 < k < N.
double talenti_constant(int dim, double k);
/// |phi|_inf <= c (|phi|_s + |grad phi|_s) for s > N, from the potential
/// estimate on the unit ball around each point.
double morrey_constant(int dim, double s);

struct SmallDataInput
{
  int dim = 3;
  double m = 1.2;
  double q = 7.0;
  double norm_q = 0.0;
  double norm_m = 0.0;
  /// <= 0 selects 1/(2N)
  double gamma = 0.0;
  /// Morrey exponent for the m = 1 branch, <= 0 selects N + 1
  double morrey_s = 0.0;

  void validate() const;
  nlohmann::json to_json() const;
};

struct SmallDataReport
{
  SmallDataInput input;
  double gamma = 0.0;
  double beta = 0.0;
  double c_rho = 0.0;
  double sobolev_exponent = 0.0;
  double sobolev_constant = 0.0;
  /// only for m = 1
  double morrey_s = 0.0;
  double morrey_constant = 0.0;
  bool m1_smallness = true;
  /// bound on |<rho, u>| entering c_1
  double pairing_bound = 0.0;
  double c1 = 0.0;
  double c2 = 0.0;
  double volume_term = 0.0;
  double datum_term = 0.0;
  /// lower bound on v^gamma at R = 1
  double lower_bound = 0.0;
  std::optional<double> delta;
  /// sqrt(1 - delta^2)
  std::optional<double> gradient_bound;

  nlohmann::json to_json() const;
};

SmallDataReport small_data_report(const SmallDataInput& input);

struct ThresholdResult
{
  /// largest t with a positive bound at norms scaled by t
  double multiplier = 0.0;
  /// t (|rho|_q + |rho|_m)
  double c3 = 0.0;
  SmallDataReport report;
  nlohmann::json to_json() const;
};

ThresholdResult small_data_threshold(const SmallDataInput& shape);

class RegularizedOperator
{
public:
  explicit RegularizedOperator(double epsilon);

  double epsilon() const { return epsilon_; }
  /// eta(r) r
  double cutoff(double r) const;
  double cutoff_derivative(double r) const;
  double f(double r) const;
  double f_derivative(double r) const;
  /// |a(z)|/|z| + |da(z)| over |z| = r (Frobenius norm)
  double growth_ratio(double r, int dim) const;
  /// sup_r growth_ratio
  double growth_constant(int dim) const;
  /// 1/sqrt(eps - eps^2/4)
  double plateau_bound() const;

private:
  double epsilon_;
};

std::vector<double> a_eps(const RegularizedOperator& op, std::span<const double> z);
/// Row-major N x N.
std::vector<double> a_eps_jacobian(const RegularizedOperator& op, std::span<const double> z);

struct StructureReport
{
  double epsilon = 0.0;
  int dim = 0;
  std::size_t samples = 0;
  double min_ellipticity = 0.0;
  double max_fd_error = 0.0;
  double max_asymmetry = 0.0;
  double max_raw_flux_error = 0.0;
  double L_empirical = 0.0;
  double L_analytic = 0.0;
  double plateau_bound = 0.0;
  nlohmann::json to_json() const;
};

/// Random z with |z| in [0, 2.5] and random lambda. Throws NumericalFailure on
/// an ellipticity violation.
StructureReport check_structure_conditions(const RegularizedOperator& op, std::size_t samples, int dim = 3,
                                           std::uint64_t seed = 0);

struct ScalingReport
{
  double t = 0.0;
  double q = 0.0;
  int dim = 0;
  double norm_ratio = 0.0;
  double norm_expected = 0.0;
  double norm_defect = 0.0;
  double energy_ratio = 0.0;
  double energy_expected = 0.0;
  double energy_defect = 0.0;
  /// the same ratio from the radial L^q quadrature
  double radial_norm_ratio = 0.0;
  double radial_norm_defect = 0.0;
  nlohmann::json to_json() const;
};

/// Smooth random field with zero boundary values, scaled to sup |grad u| = 0.9.
GridField random_admissible_field(const BoxGrid& grid, std::uint64_t seed);

/// Compares rho_t(x) = rho(x/t)/t and w_t(x) = t w(x/t) on the box scaled by t
/// against the originals; w is random_admissible_field(grid, seed).
ScalingReport scaling_check(const RadialDensity& rho, double t, const BoxGrid& grid, double q,
                            std::uint64_t seed = 0);

} // namespace bi
