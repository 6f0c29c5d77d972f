#pragma once

#include "bi/charge.hpp"
#include "bi/fields.hpp"

#include <json.hpp>

#include <cstdint>
#include <span>
#include <vector>

namespace bi {

enum class StepRule
{
  /// constant step, shrunk only to stay admissible and monotone
  fixed,
  /// Armijo backtracking along the preconditioned gradient
  backtracking,
  /// exact line search along preconditioned nonlinear conjugate gradients
  line_search,
};

struct EnergyConfig
{
  int max_iterations = 2000;
  StepRule step_rule = StepRule::line_search;
  double initial_step = 1.0;
  /// stop when the relative energy decrease falls below this
  double tolerance = 1e-14;
  /// smallest admissible v = sqrt(1 - |grad u|^2) per cell
  double margin = 1e-6;

  void validate() const;
  nlohmann::json to_json() const;
  static EnergyConfig from_json(const nlohmann::json& j);
};

struct MinimizeResult
{
  GridField field;
  double energy = 0.0;
  int iterations = 0;
  double sup_gradient = 0.0;
  std::vector<double> energy_history;
  double weak_residual = 0.0;
  /// false when the iteration cap was hit first; the field is still admissible
  bool converged = false;

  nlohmann::json diagnostics() const;
};

/// Phi(s) = 1 - sqrt(1 - s) without cancellation.
double born_infeld_density(double s);

/// Discrete energy: sum_c h^N Phi(|grad u|_c^2) - sum_n w_n h^N rho_n u_n with
/// trapezoidal node weights. Throws ConstraintViolation if some cell exceeds 1.
double energy(const GridField& u, const GridDensity& rho);

/// Exact gradient of `energy` with respect to the nodal values. Boundary
/// entries are zero (the boundary is fixed data). Throws ConstraintViolation
/// if some cell has v < margin.
std::vector<double> energy_gradient(const GridField& u, const GridDensity& rho, double margin = 1e-6);

/// E(u + step d) - E(u), evaluated cellwise without cancellation.
double energy_change(const GridField& u, std::span<const double> direction, double step, const GridDensity& rho);

/// Nearest admissible field with |grad u|_c <= 1 - margin everywhere, by edge
/// clipping and least-squares re-integration (boundary values kept). Returns
/// an exact copy when the input already satisfies the bound.
GridField project_constraint(const GridField& u, double margin = 1e-6);

/// Minimizer of the discrete energy with zero boundary values.
MinimizeResult minimize(const GridDensity& rho, const EnergyConfig& config = {});
/// Minimizer starting from `initial`, whose boundary values are held fixed.
MinimizeResult minimize(const GridDensity& rho, const EnergyConfig& config, const GridField& initial);

struct WeakResidual
{
  /// max over test functions of |a(u, psi) - <rho, psi>| / |grad psi|_2
  double residual = 0.0;
  /// int |grad u|^2 / sqrt(1 - |grad u|^2)
  double flux_pairing = 0.0;
  /// int rho u
  double coupling = 0.0;
  double defect() const { return flux_pairing - coupling; }
};

WeakResidual weak_residual(const GridField& u, const GridDensity& rho, std::span<const GridField> tests);

/// Tensor-product hats centred at {-L/2, 0, L/2}^N plus three smooth bumps
/// with seeded random centres and radii. All vanish on the boundary.
std::vector<GridField> standard_test_functions(const BoxGrid& grid, std::uint64_t seed = 0);

} // namespace bi
