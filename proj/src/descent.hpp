#pragma once

// Preconditioned descent shared by the Born-Infeld and truncated-series
// minimizers. A cell density D supplies Phi(s), its first two derivatives and
// an accurate difference Phi(s0 + ds) - Phi(s0); the energy is
// sum_c h^N Phi(|grad u|_c^2) - sum_n w_n h^N rho_n u_n.

#include "bi/charge.hpp"
#include "bi/error.hpp"
#include "bi/fields.hpp"
#include "bi/minimizer.hpp"
#include "bi/poisson.hpp"

#include <boost/math/tools/roots.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

namespace bi::detail {

inline void require_same_grid(const GridField& u, const GridDensity& rho, const char* module)
{
  if (!(u.grid() == rho.grid())) {
    throw InvalidArgument(module, "field and density live on different grids");
  }
}

/// h^N w_n rho_n, so that the coupling term is a plain dot product.
inline std::vector<double> coupling_weights(const GridDensity& rho)
{
  const auto& grid = rho.grid();
  std::vector<double> w(grid.node_count());
  const auto values = rho.values();
  for (std::size_t n = 0; n < w.size(); ++n) {
    w[n] = grid.cell_volume() * grid.trapezoid_weight(n) * values[n];
  }
  return w;
}

inline double dot(std::span<const double> a, std::span<const double> b)
{
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    s += a[i] * b[i];
  }
  return s;
}

template <class D>
double cell_energy(const D& density, const GridField& u, std::span<const double> coupling)
{
  double first = 0.0;
  for (double s : cell_gradient_sq(u.grid(), u.values())) {
    first += density.value(s);
  }
  return u.grid().cell_volume() * first - dot(coupling, u.values());
}

/// Gradient of the energy in the nodal values, zero on the boundary, from
/// precomputed cell norms.
template <class D>
std::vector<double> cell_energy_gradient(const D& density, const GridField& u, std::span<const double> s,
                                         std::span<const double> coupling)
{
  const auto& grid = u.grid();
  std::vector<double> weights(s.size());
  for (std::size_t c = 0; c < s.size(); ++c) {
    weights[c] = 2.0 * grid.cell_volume() * density.d1(s[c]);
  }
  auto g = weighted_gradient_transpose(grid, weights, u.values());
  for (std::size_t n = 0; n < g.size(); ++n) {
    g[n] = grid.is_boundary(n) ? 0.0 : g[n] - coupling[n];
  }
  return g;
}

/// E(u + a d) - E(u) as a function of the step a, from the per-cell quadratics
/// s_c(a) = s0 + 2 a b + a^2 q.
template <class D>
class LineModel
{
public:
  LineModel(const D& density, const GridField& u, std::span<const double> d, std::span<const double> coupling)
    : density_(density),
      volume_(u.grid().cell_volume()),
      s0_(cell_gradient_sq(u.grid(), u.values())),
      b_(cell_gradient_dot(u.grid(), u.values(), d)),
      q_(cell_gradient_sq(u.grid(), d)),
      linear_(dot(coupling, d))
  {
  }

  double change(double a) const
  {
    double acc = 0.0;
    for (std::size_t c = 0; c < s0_.size(); ++c) {
      const double ds = a * (2.0 * b_[c] + a * q_[c]);
      if (ds != 0.0) {
        acc += density_.change(s0_[c], ds);
      }
    }
    return volume_ * acc - a * linear_;
  }

  /// first and second derivative in a
  std::pair<double, double> slope(double a) const
  {
    double d1 = 0.0, d2 = 0.0;
    for (std::size_t c = 0; c < s0_.size(); ++c) {
      const double s = s0_[c] + a * (2.0 * b_[c] + a * q_[c]);
      const double ds = 2.0 * (b_[c] + a * q_[c]);
      const double p1 = density_.d1(s);
      d1 += ds * p1;
      d2 += ds * ds * density_.d2(s) + 2.0 * q_[c] * p1;
    }
    return {volume_ * d1 - linear_, volume_ * d2};
  }

  /// Largest step keeping every s_c <= smax.
  double max_step(double smax) const
  {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < s0_.size(); ++c) {
      const double room = std::max(smax - s0_[c], 0.0);
      const double b = b_[c], q = q_[c];
      if (q <= 0.0) {
        continue;
      }
      const double disc = std::sqrt(b * b + q * room);
      const double a = b >= 0.0 ? room / (b + disc) : (disc - b) / q;
      best = std::min(best, a);
    }
    return best;
  }

private:
  const D& density_;
  double volume_;
  std::vector<double> s0_, b_, q_;
  double linear_;
};

template <class D>
double exact_step(const LineModel<D>& model, double hi, double guess, const char* module)
{
  if (!std::isfinite(hi)) {
    hi = std::max(guess, 1e-300);
    while (model.slope(hi).first < 0.0) {
      hi *= 2.0;
      if (!std::isfinite(hi)) {
        throw NumericalFailure(module, "energy unbounded below along the search direction");
      }
    }
  } else if (model.slope(hi).first <= 0.0) {
    return hi;
  }
  std::uintmax_t iterations = 200;
  return boost::math::tools::newton_raphson_iterate([&](double a) { return model.slope(a); },
                                                    std::clamp(guess, 0.0, hi), 0.0, hi, 48, iterations);
}

/// Runs the descent from u (boundary values held fixed). For constrained
/// densities every iterate keeps s_c <= smax; pass smax = inf otherwise.
/// `check` sees the cell norms before each gradient evaluation.
template <class D, class Check>
MinimizeResult descend(const D& density, const GridDensity& rho, const EnergyConfig& config, GridField u,
                       double smax, Check&& check, const char* module)
{
  const auto& grid = rho.grid();
  const auto coupling = coupling_weights(rho);
  DirichletLaplacian lap(grid);
  auto precondition = [&](const std::vector<double>& g) {
    auto z = lap.solve(g);
    for (double& x : z) {
      x /= grid.cell_volume();
    }
    return z;
  };

  MinimizeResult result{u, cell_energy(density, u, coupling), 0, 0.0, {}, 0.0, false};
  result.energy_history.push_back(result.energy);
  std::vector<double> d, z_prev;
  double gz_prev = 0.0;
  bool restart = true;
  int quiet = 0;
  const std::size_t nodes = grid.node_count();
  for (; result.iterations < config.max_iterations; ++result.iterations) {
    const auto s = cell_gradient_sq(grid, u.values());
    check(s);
    const auto g = cell_energy_gradient(density, u, s, coupling);
    const auto z = precondition(g);
    const double gz = dot(g, z);
    if (!(gz > 0.0)) {
      result.converged = true;
      break;
    }
    std::vector<double> next(nodes);
    double beta = 0.0;
    if (config.step_rule == StepRule::line_search && !restart) {
      beta = std::max(0.0, (gz - dot(g, z_prev)) / gz_prev);
    }
    for (std::size_t n = 0; n < nodes; ++n) {
      next[n] = -z[n] + (beta > 0.0 ? beta * d[n] : 0.0);
    }
    if (dot(g, next) >= 0.0) {
      for (std::size_t n = 0; n < nodes; ++n) {
        next[n] = -z[n];
      }
    }
    d = std::move(next);
    z_prev = z;
    gz_prev = gz;

    const LineModel<D> model(density, u, d, coupling);
    const double cap = std::isfinite(smax) ? model.max_step(smax) * (1.0 - 1e-9) : smax;
    double step = 0.0;
    restart = false;
    switch (config.step_rule) {
    case StepRule::line_search:
      step = exact_step(model, cap, config.initial_step, module);
      restart = step >= cap;
      break;
    case StepRule::backtracking: {
      const double slope0 = dot(g, d);
      step = std::min(config.initial_step, cap);
      for (int k = 0; k < 200 && model.change(step) > 1e-4 * step * slope0; ++k) {
        step *= 0.5;
      }
      break;
    }
    case StepRule::fixed:
      step = std::min(config.initial_step, cap);
      for (int k = 0; k < 200 && model.change(step) > 0.0; ++k) {
        step *= 0.5;
      }
      break;
    }
    const double change = model.change(step);
    if (!(change < 0.0)) {
      result.converged = true;
      break;
    }
    for (std::size_t n = 0; n < nodes; ++n) {
      u[n] += step * d[n];
    }
    // the accurate change is tracked rather than re-summed energies, whose
    // rounding would otherwise dominate near convergence
    result.energy += change;
    result.energy_history.push_back(result.energy);
    const double scale = std::max(std::abs(result.energy), std::numeric_limits<double>::min());
    quiet = (-change <= config.tolerance * scale) ? quiet + 1 : 0;
    // small steps alone do not mean convergence: also ask the preconditioned
    // gradient for a small predicted decrease
    if (quiet >= 2 && 0.5 * gz <= config.tolerance * scale) {
      ++result.iterations;
      result.converged = true;
      break;
    }
  }
  result.energy = cell_energy(density, u, coupling);
  const auto s = cell_gradient_sq(grid, u.values());
  result.sup_gradient = std::sqrt(*std::max_element(s.begin(), s.end()));
  result.field = std::move(u);
  return result;
}

/// max over tests of |sum_c h^N 2 Phi'(s_c) <grad u, grad psi>_c - <rho, psi>| / |grad psi|_2
template <class D>
double residual_over_tests(const D& density, const GridField& u, const GridDensity& rho,
                           std::span<const GridField> tests, const char* module)
{
  const auto& grid = u.grid();
  const double vol = grid.cell_volume();
  const auto s = cell_gradient_sq(grid, u.values());
  std::vector<double> weight(s.size());
  for (std::size_t c = 0; c < s.size(); ++c) {
    weight[c] = 2.0 * density.d1(s[c]);
  }
  const auto w = coupling_weights(rho);
  double out = 0.0;
  for (const auto& psi : tests) {
    if (!(psi.grid() == grid)) {
      throw InvalidArgument(module, "test function lives on a different grid");
    }
    const auto pair = cell_gradient_dot(grid, u.values(), psi.values());
    const auto norm_sq = cell_gradient_sq(grid, psi.values());
    double a = 0.0, norm = 0.0;
    for (std::size_t c = 0; c < pair.size(); ++c) {
      a += pair[c] * weight[c];
      norm += norm_sq[c];
    }
    norm = std::sqrt(vol * norm);
    if (norm == 0.0) {
      continue;
    }
    out = std::max(out, std::abs(vol * a - dot(w, psi.values())) / norm);
  }
  return out;
}

} // namespace bi::detail
