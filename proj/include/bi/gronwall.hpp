#pragma once

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace bi {

/// Psi(s) = C1 s^{-beta}, beta in (0, 1).
struct PowerWeight
{
  double C1 = 1.0;
  double beta = 0.5;
};

/// Piecewise linear through (t_i, value_i), t_0 = 0.
struct TabulatedWeight
{
  std::vector<double> t;
  std::vector<double> values;
};

/// g(k) = k^gamma, gamma in (0, 1).
struct PowerGrowth
{
  double gamma = 0.5;
};

/// Piecewise linear through (k_i, value_i) with k_0 = 0, extended past the
/// last knot with the last slope. Strictly increasing with g(0) > 0.
struct TabulatedGrowth
{
  std::vector<double> k;
  std::vector<double> values;
};

/// U(t) <= C0 + int_0^t Psi(s) g(U(s)) ds on [0, T].
class GronwallProblem
{
public:
  using Weight = std::variant<PowerWeight, TabulatedWeight>;
  using Growth = std::variant<PowerGrowth, TabulatedGrowth>;

  GronwallProblem(double C0, double T, Weight weight, Growth growth);

  static GronwallProblem power(double C0, double C1, double beta, double gamma, double T);

  double C0() const { return C0_; }
  double T() const { return T_; }
  const Weight& weight() const { return psi_; }
  const Growth& growth() const { return g_; }

  double psi(double s) const;
  /// int_0^t Psi
  double psi_integral(double t) const;
  double g(double k) const;

  nlohmann::json to_json() const;
  static GronwallProblem from_json(const nlohmann::json& j);

private:
  double C0_, T_;
  Weight psi_;
  Growth g_;
  /// Phi at the knots of a tabulated g
  std::vector<double> phi_knots_;
  friend double phi(const GronwallProblem&, double);
};

/// Phi(l) = int_0^l dk / g(k)
double phi(const GronwallProblem& problem, double l);
/// Bisection, then Newton to 1e-14 relative. Throws InvalidArgument for y < 0.
double phi_inverse(const GronwallProblem& problem, double y);

/// Phi^{-1}(Phi(C0) + int_0^t Psi)
double gronwall_bound(const GronwallProblem& problem, double t);

/// (1-gamma)^{1/(1-gamma)} [C0^{1-gamma}/(1-gamma) + C1 t^{1-beta}/(1-beta)]^{1/(1-gamma)}
double power_case_bound(double C0, double C1, double beta, double gamma, double t);

struct Tabulated
{
  std::vector<double> t;
  std::vector<double> values;
};

/// Mesh of `points` nodes on [0, T], graded as T (i/n)^2 toward the singular endpoint.
std::vector<double> gronwall_mesh(double T, std::size_t points);

/// Product-integration weights on a mesh: int over cell j of Psi times the
/// linear hat functions, exact for the power weight.
struct ProductRule
{
  std::vector<double> lower;
  std::vector<double> upper;
};

ProductRule product_rule(const GronwallProblem& problem, const std::vector<double>& mesh);

/// C0 + int_0^{t_i} Psi g(U) at every node, with g(U) linear on each cell.
std::vector<double> hypothesis_rhs(const GronwallProblem& problem, const Tabulated& U);

struct FixedPoint
{
  Tabulated U;
  /// sup |U_{j+1} - U_j| after each iteration
  std::vector<double> increments;
};

/// U_{j+1} = C0 + int_0^t Psi g(U_j) from U_0 = C0.
FixedPoint fixed_point_iterate(const GronwallProblem& problem, std::size_t points = 2048, int iterations = 20);

enum class CertifyStatus
{
  certified,
  bound_violated,
  hypothesis_violated,
};

std::string to_string(CertifyStatus s);

struct Certificate
{
  CertifyStatus status = CertifyStatus::certified;
  double tolerance = 0.0;
  /// min_i (rhs_i (1 + tol) - U_i) / rhs_i
  double hypothesis_margin = 0.0;
  double hypothesis_worst_t = 0.0;
  /// min_i (bound_i (1 + tol) - U_i) / bound_i, reported even when the hypothesis fails
  double bound_margin = 0.0;
  double bound_worst_t = 0.0;
  /// min_i 1 - U_i / bound_i
  double bound_gap = 0.0;

  bool passed() const { return status == CertifyStatus::certified; }
  nlohmann::json to_json() const;
};

Certificate certify_bound(const GronwallProblem& problem, const Tabulated& U, double tolerance);

struct SuiteDraw
{
  double C0, C1, beta, gamma, T;
  Certificate certificate;
  double final_increment;
};

struct CertificationSuite
{
  std::vector<SuiteDraw> draws;
  std::size_t passed = 0;
  /// smallest bound_gap over the draws
  double tightest_gap = 0.0;
  nlohmann::json to_json() const;
};

/// gamma, beta in [0.1, 0.9], C0 in [0.1, 10], C1 in [0, 10], T in [0.1, 5].
CertificationSuite certification_suite(std::size_t draws, std::uint64_t seed, double tolerance = 1e-4,
                                       std::size_t points = 2048, int iterations = 20);

/// The power bound with C0 = omega_N, Psi = c t s^{-beta}, g = k^{(q-2)/q}
/// against (2/q)^{q/2} [q/2 omega_N^{2/q} + c/(1-beta) t^{2-beta}]^{q/2}.
struct SubstitutionCheck
{
  int dim = 0;
  int q = 0;
  /// exact exponents as "p/q"
  std::string gamma;
  std::string outer_exponent;
  std::string inner_exponent;
  std::string time_exponent;
  bool exponents_match = false;
  bool coefficients_match = false;
  double max_relative_defect = 0.0;
  bool passed = false;
  nlohmann::json to_json() const;
};

SubstitutionCheck monotonicity_substitution_check(int q, int dim);

} // namespace bi
