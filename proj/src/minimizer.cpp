#include "bi/minimizer.hpp"

#include "bi/error.hpp"
#include "bi/poisson.hpp"
#include "descent.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>

namespace bi {

namespace {

constexpr const char* kModule = "minimizer";

using detail::coupling_weights;
using detail::dot;

struct BornInfeldCell
{
  double value(double s) const { return born_infeld_density(std::min(s, 1.0)); }
  double d1(double s) const { return 0.5 / std::sqrt(std::max(1.0 - s, 0.0)); }
  double d2(double s) const
  {
    const double v = std::sqrt(std::max(1.0 - s, 0.0));
    return 0.25 / (v * v * v);
  }
  /// Phi(s0 + ds) - Phi(s0) without cancellation
  double change(double s0, double ds) const
  {
    const double s1 = std::min(s0 + ds, 1.0);
    return ds / (std::sqrt(1.0 - std::min(s0, 1.0)) + std::sqrt(1.0 - s1));
  }
};

void require_same_grid(const GridField& u, const GridDensity& rho) { detail::require_same_grid(u, rho, kModule); }

void require_margin(std::span<const double> s, double margin)
{
  for (std::size_t c = 0; c < s.size(); ++c) {
    const double v = s[c] >= 1.0 ? 0.0 : std::sqrt(1.0 - s[c]);
    if (v < margin || v == 0.0) {
      throw ConstraintViolation(kModule, "cell " + std::to_string(c) + " has v = " + std::to_string(v) +
                                             " below the margin; shrink the step or project");
    }
  }
}

std::vector<char> boundary_mask(const BoxGrid& grid)
{
  std::vector<char> mask(grid.node_count());
  for (std::size_t n = 0; n < mask.size(); ++n) {
    mask[n] = grid.is_boundary(n) ? 1 : 0;
  }
  return mask;
}

GridField boundary_part(const GridField& u, const std::vector<char>& boundary)
{
  GridField b(u.grid());
  for (std::size_t n = 0; n < boundary.size(); ++n) {
    if (boundary[n]) {
      b[n] = u[n];
    }
  }
  return b;
}

/// v-margin expressed as a bound on |grad u|: 1 - sqrt(1 - m^2).
double gradient_margin(double v_margin) { return v_margin * v_margin / (1.0 + std::sqrt(1.0 - v_margin * v_margin)); }

} // namespace

void EnergyConfig::validate() const
{
  if (max_iterations < 0) {
    throw InvalidArgument(kModule, "max_iterations must be nonnegative");
  }
  if (!(tolerance > 0.0)) {
    throw InvalidArgument(kModule, "tolerance must be positive");
  }
  if (!(margin >= 0.0 && margin < 0.1)) {
    throw InvalidArgument(kModule, "margin must lie in [0, 0.1)");
  }
  if (!(initial_step > 0.0) || !std::isfinite(initial_step)) {
    throw InvalidArgument(kModule, "initial_step must be positive");
  }
}

nlohmann::json EnergyConfig::to_json() const
{
  static const char* names[] = {"fixed", "backtracking", "line_search"};
  return {{"max_iterations", max_iterations},
          {"step_rule", names[static_cast<int>(step_rule)]},
          {"initial_step", initial_step},
          {"tolerance", tolerance},
          {"margin", margin}};
}

EnergyConfig EnergyConfig::from_json(const nlohmann::json& j)
{
  EnergyConfig c;
  try {
    c.max_iterations = j.value("max_iterations", c.max_iterations);
    c.initial_step = j.value("initial_step", c.initial_step);
    c.tolerance = j.value("tolerance", c.tolerance);
    c.margin = j.value("margin", c.margin);
    const std::string rule = j.value("step_rule", std::string("line_search"));
    if (rule == "fixed") {
      c.step_rule = StepRule::fixed;
    } else if (rule == "backtracking") {
      c.step_rule = StepRule::backtracking;
    } else if (rule == "line_search") {
      c.step_rule = StepRule::line_search;
    } else {
      throw InvalidArgument(kModule, "unknown step_rule '" + rule + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(kModule, std::string("bad energy config: ") + e.what());
  }
  c.validate();
  return c;
}

nlohmann::json MinimizeResult::diagnostics() const
{
  return {{"energy", energy},
          {"iterations", iterations},
          {"sup_gradient", sup_gradient},
          {"weak_residual", weak_residual},
          {"converged", converged},
          {"energy_history", energy_history}};
}

double born_infeld_density(double s) { return s / (1.0 + std::sqrt(1.0 - s)); }

double energy(const GridField& u, const GridDensity& rho)
{
  require_same_grid(u, rho);
  v_from_gradient_sq(cell_gradient_sq(u.grid(), u.values()));
  return detail::cell_energy(BornInfeldCell{}, u, coupling_weights(rho));
}

std::vector<double> energy_gradient(const GridField& u, const GridDensity& rho, double margin)
{
  require_same_grid(u, rho);
  const auto s = cell_gradient_sq(u.grid(), u.values());
  require_margin(s, margin);
  return detail::cell_energy_gradient(BornInfeldCell{}, u, s, coupling_weights(rho));
}

double energy_change(const GridField& u, std::span<const double> direction, double step, const GridDensity& rho)
{
  require_same_grid(u, rho);
  const BornInfeldCell cell;
  const auto w = coupling_weights(rho);
  return detail::LineModel<BornInfeldCell>(cell, u, direction, w).change(step);
}

GridField project_constraint(const GridField& u, double margin)
{
  if (!(margin >= 0.0 && margin < 1.0)) {
    throw InvalidArgument(kModule, "projection margin must lie in [0, 1)");
  }
  const auto& grid = u.grid();
  const double bound = 1.0 - margin;
  auto admissible = [&](const std::vector<double>& s) {
    return std::all_of(s.begin(), s.end(), [&](double x) { return x <= bound * bound; });
  };
  auto s = cell_gradient_sq(grid, u.values());
  if (admissible(s)) {
    return u;
  }
  const int dim = grid.dim();
  const unsigned corners = grid.corners_per_cell();
  const double h = grid.spacing();
  const auto boundary = boundary_mask(grid);
  const GridField b = boundary_part(u, boundary);
  // edges with both ends on the boundary are fixed data
  for (std::size_t c = 0; c < grid.cell_count(); ++c) {
    const std::size_t base = grid.cell_bases()[c];
    double fixed = 0.0;
    for (int axis = 0; axis < dim; ++axis) {
      for (unsigned k = 0; k < corners; ++k) {
        if (k & (1u << axis)) {
          continue;
        }
        const std::size_t a = base + grid.corner_offset(k), e = a + grid.stride(axis);
        if (boundary[a] && boundary[e]) {
          fixed += (u[e] - u[a]) * (u[e] - u[a]);
        }
      }
    }
    if (fixed / (h * h * static_cast<double>(1u << (dim - 1))) > bound * bound) {
      throw InvalidArgument(kModule, "boundary trace alone violates the gradient bound");
    }
  }
  DirichletLaplacian lap(grid);
  GridField current = u;
  double target = bound;
  std::vector<std::vector<double>> factor(dim, std::vector<double>(grid.node_count()));
  for (int sweep = 0; sweep < 500; ++sweep) {
    for (auto& f : factor) {
      std::fill(f.begin(), f.end(), 1.0);
    }
    const auto& bases = grid.cell_bases();
    for (std::size_t c = 0; c < bases.size(); ++c) {
      if (s[c] <= target * target) {
        continue;
      }
      const double f = target / std::sqrt(s[c]);
      for (int axis = 0; axis < dim; ++axis) {
        for (unsigned k = 0; k < corners; ++k) {
          if (!(k & (1u << axis))) {
            double& e = factor[axis][bases[c] + grid.corner_offset(k)];
            e = std::min(e, f);
          }
        }
      }
    }
    // least-squares re-integration of the clipped edge field
    std::vector<double> rhs(grid.node_count(), 0.0);
    for (int axis = 0; axis < dim; ++axis) {
      const std::size_t st = grid.stride(axis);
      for (std::size_t n = 0; n < grid.node_count(); ++n) {
        if (static_cast<int>((n / st) % grid.points()) == grid.points() - 1) {
          continue;
        }
        const double clipped = factor[axis][n] * (current[n + st] - current[n]) / h;
        const double q = clipped - (b[n + st] - b[n]) / h;
        rhs[n + st] += q / h;
        rhs[n] -= q / h;
      }
    }
    lap.solve_in_place(rhs);
    for (std::size_t n = 0; n < rhs.size(); ++n) {
      current[n] = boundary[n] ? b[n] : rhs[n];
    }
    s = cell_gradient_sq(grid, current.values());
    if (admissible(s)) {
      return current;
    }
    target *= 0.99;
  }
  throw NumericalFailure(kModule, "constraint projection did not converge in 500 sweeps");
}

MinimizeResult minimize(const GridDensity& rho, const EnergyConfig& config)
{
  return minimize(rho, config, GridField(rho.grid()));
}

MinimizeResult minimize(const GridDensity& rho, const EnergyConfig& config, const GridField& initial)
{
  config.validate();
  require_same_grid(initial, rho);
  // steps stay a little inside the margin so rounding cannot push v below it
  const double step_margin = 1.01 * std::max(config.margin, 1e-12);
  const double smax = 1.0 - step_margin * step_margin;
  GridField u = initial;
  {
    const auto s = cell_gradient_sq(u.grid(), u.values());
    if (std::any_of(s.begin(), s.end(), [&](double x) { return x > smax; })) {
      u = project_constraint(u, gradient_margin(step_margin));
    }
  }
  auto result = detail::descend(BornInfeldCell{}, rho, config, std::move(u), smax,
                                [&](std::span<const double> s) { require_margin(s, config.margin); }, kModule);
  result.weak_residual = weak_residual(result.field, rho, standard_test_functions(rho.grid())).residual;
  return result;
}

WeakResidual weak_residual(const GridField& u, const GridDensity& rho, std::span<const GridField> tests)
{
  require_same_grid(u, rho);
  const double vol = u.grid().cell_volume();
  const auto s = cell_gradient_sq(u.grid(), u.values());
  const auto v = v_from_gradient_sq(s);
  WeakResidual out;
  for (std::size_t c = 0; c < v.size(); ++c) {
    if (v[c] == 0.0) {
      throw ConstraintViolation(kModule, "degenerate cell (v = 0) in weak residual");
    }
    out.flux_pairing += vol * s[c] / v[c];
  }
  out.coupling = dot(coupling_weights(rho), u.values());
  out.residual = detail::residual_over_tests(BornInfeldCell{}, u, rho, tests, kModule);
  return out;
}

std::vector<GridField> standard_test_functions(const BoxGrid& grid, std::uint64_t seed)
{
  const int dim = grid.dim();
  const double half = 0.5 * grid.extent();
  std::vector<GridField> out;
  std::vector<double> x(dim);
  int count = 1;
  for (int i = 0; i < dim; ++i) {
    count *= 3;
  }
  for (int m = 0; m < count; ++m) {
    std::vector<double> centre(dim);
    for (int i = 0, k = m; i < dim; ++i, k /= 3) {
      centre[i] = (k % 3 - 1) * half;
    }
    GridField psi(grid);
    for (std::size_t n = 0; n < grid.node_count(); ++n) {
      grid.node_position(n, x);
      double p = 1.0;
      for (int i = 0; i < dim && p > 0.0; ++i) {
        p *= std::max(0.0, 1.0 - std::abs(x[i] - centre[i]) / half);
      }
      psi[n] = p;
    }
    out.push_back(psi.with_zero_boundary());
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> pos(-half, half), rad(0.5 * half, half);
  for (int m = 0; m < 3; ++m) {
    std::vector<double> centre(dim);
    for (double& c : centre) {
      c = pos(rng);
    }
    const double r = rad(rng);
    GridField psi(grid);
    for (std::size_t n = 0; n < grid.node_count(); ++n) {
      grid.node_position(n, x);
      double d2 = 0.0;
      for (int i = 0; i < dim; ++i) {
        d2 += (x[i] - centre[i]) * (x[i] - centre[i]);
      }
      const double t = d2 / (r * r);
      psi[n] = t < 1.0 ? std::exp(1.0 - 1.0 / (1.0 - t)) : 0.0;
    }
    out.push_back(psi.with_zero_boundary());
  }
  return out;
}

} // namespace bi
