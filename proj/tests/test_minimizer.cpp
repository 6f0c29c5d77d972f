#include "bi/error.hpp"
#include "bi/minimizer.hpp"
#include "bi/poisson.hpp"
#include "bi/radial.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace bi;

namespace {

GridField field_from(const BoxGrid& grid, auto&& f)
{
  GridField u(grid);
  std::vector<double> x(grid.dim());
  for (std::size_t n = 0; n < grid.node_count(); ++n) {
    grid.node_position(n, x);
    u[n] = f(x);
  }
  return u;
}

GridField random_admissible(const BoxGrid& grid, std::mt19937_64& rng, double amplitude)
{
  std::normal_distribution<double> normal;
  std::vector<double> k(grid.dim());
  for (double& x : k) {
    x = normal(rng);
  }
  const double phase = normal(rng);
  const double L = grid.extent();
  auto u = field_from(grid, [&](const std::vector<double>& x) {
    double bump = 1.0, arg = phase;
    for (std::size_t i = 0; i < x.size(); ++i) {
      bump *= 1.0 - (x[i] / L) * (x[i] / L);
      arg += k[i] * x[i];
    }
    return amplitude * L * bump * std::sin(arg);
  });
  u = u.with_zero_boundary();
  // keep the field strictly spacelike
  const double sup = sup_gradient_norm(gradient(u));
  if (sup > 0.9) {
    for (double& x : u.values()) {
      x *= 0.9 / sup;
    }
  }
  return u;
}

double sup_diff(const GridField& a, const GridField& b)
{
  double m = 0.0;
  for (std::size_t n = 0; n < a.grid().node_count(); ++n) {
    m = std::max(m, std::abs(a[n] - b[n]));
  }
  return m;
}

double x_norm_sq(const GridField& u)
{
  double s = 0.0;
  for (double c : cell_gradient_sq(u.grid(), u.values())) {
    s += c;
  }
  return s * u.grid().cell_volume();
}

} // namespace

TEST_CASE("energy of the zero field and of uncharged fields")
{
  BoxGrid grid(3, 1.0, 9);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> normal;
  std::vector<double> rho(grid.node_count());
  for (double& r : rho) {
    r = normal(rng);
  }
  GridDensity charged(grid, rho);
  double e0 = energy(GridField(grid), charged);
  CHECK(e0 == 0.0);
  CHECK_FALSE(std::signbit(e0));

  GridDensity none(grid, std::vector<double>(grid.node_count(), 0.0));
  for (int trial = 0; trial < 5; ++trial) {
    auto u = random_admissible(grid, rng, 0.3);
    CHECK(energy(u, none) > 0.0);
  }
  // constant field: zero gradient, zero energy
  GridField c(grid, std::vector<double>(grid.node_count(), 0.7));
  CHECK(energy(c, none) == 0.0);
  GridField steep = field_from(grid, [](const std::vector<double>& x) { return 2.0 * x[0]; });
  CHECK_THROWS_AS(energy(steep, none), ConstraintViolation);
}

TEST_CASE("cellwise sandwich s/2 <= Phi(s) <= s")
{
  for (double s : {0.0, 1e-12, 1e-3, 0.25, 0.5, 0.9, 0.999999, 1.0}) {
    CHECK(0.5 * s <= born_infeld_density(s));
    CHECK(born_infeld_density(s) <= s);
  }
  CHECK(born_infeld_density(0.75) == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("energy gradient at zero and against central differences")
{
  BoxGrid grid(3, 1.0, 11);
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  std::vector<double> rho(grid.node_count());
  for (double& r : rho) {
    r = unif(rng);
  }
  GridDensity density(grid, rho);
  auto g0 = energy_gradient(GridField(grid), density);
  for (std::size_t n = 0; n < grid.node_count(); ++n) {
    if (grid.is_boundary(n)) {
      CHECK(g0[n] == 0.0);
    } else {
      CHECK(g0[n] == doctest::Approx(-rho[n] * grid.cell_volume()).epsilon(1e-14));
    }
  }

  auto u = random_admissible(grid, rng, 0.4);
  auto psi = random_admissible(grid, rng, 0.2);
  auto g = energy_gradient(u, density);
  double directional = 0.0;
  for (std::size_t n = 0; n < grid.node_count(); ++n) {
    directional += g[n] * psi[n];
  }
  std::vector<double> errors;
  for (double t : {1e-4, 1e-5}) {
    GridField up = u, um = u;
    for (std::size_t n = 0; n < grid.node_count(); ++n) {
      up[n] += t * psi[n];
      um[n] -= t * psi[n];
    }
    double fd = (energy(up, density) - energy(um, density)) / (2 * t);
    errors.push_back(std::abs(fd - directional));
    CHECK(fd == doctest::Approx(directional).epsilon(1e-6));
  }
  // accurate differences isolate the O(t^2) term
  auto d = std::vector<double>(psi.values().begin(), psi.values().end());
  for (double t : {1e-4, 1e-5}) {
    double fd = (energy_change(u, d, t, density) - energy_change(u, d, -t, density)) / (2 * t);
    CHECK(std::abs(fd - directional) <= 1e-6 * t * t * 1e4 + 1e-13 * std::abs(directional));
  }
  // gradient refuses cells below the margin
  GridField near = field_from(grid, [](const std::vector<double>& x) { return (1.0 - 1e-14) * x[0]; });
  CHECK_THROWS_AS(energy_gradient(near, density, 1e-6), ConstraintViolation);
}

TEST_CASE("energy change matches the difference of energies")
{
  BoxGrid grid(3, 1.0, 9);
  std::mt19937_64 rng(5);
  auto u = random_admissible(grid, rng, 0.3);
  auto d = random_admissible(grid, rng, 0.3);
  GridDensity rho(grid, std::vector<double>(grid.node_count(), 0.4));
  for (double t : {0.5, 0.01, -0.2}) {
    GridField w = u;
    for (std::size_t n = 0; n < grid.node_count(); ++n) {
      w[n] += t * d[n];
    }
    std::vector<double> dv(d.values().begin(), d.values().end());
    CHECK(energy_change(u, dv, t, rho) == doctest::Approx(energy(w, rho) - energy(u, rho)).epsilon(1e-10));
  }
}

TEST_CASE("discrete strict convexity on random pairs")
{
  BoxGrid grid(3, 1.0, 9);
  std::mt19937_64 rng(8);
  GridDensity rho(grid, std::vector<double>(grid.node_count(), 1.0));
  for (int trial = 0; trial < 10; ++trial) {
    auto u = random_admissible(grid, rng, 0.5);
    auto w = random_admissible(grid, rng, 0.5);
    GridField mid(grid);
    for (std::size_t n = 0; n < grid.node_count(); ++n) {
      mid[n] = 0.5 * (u[n] + w[n]);
    }
    CHECK(energy(mid, rho) < 0.5 * energy(u, rho) + 0.5 * energy(w, rho));
  }
}

TEST_CASE("constraint projection")
{
  BoxGrid grid(3, 1.0, 17);
  std::mt19937_64 rng(21);
  auto ok = random_admissible(grid, rng, 0.2);
  auto same = project_constraint(ok, 1e-6);
  for (std::size_t n = 0; n < grid.node_count(); ++n) {
    CHECK(std::bit_cast<std::uint64_t>(same[n]) == std::bit_cast<std::uint64_t>(ok[n]));
  }

  auto steep = field_from(grid, [](const std::vector<double>& x) { return 2.0 * x[0]; }).with_zero_boundary();
  for (double margin : {1e-6, 0.05}) {
    auto p = project_constraint(steep, margin);
    CHECK(sup_gradient_norm(gradient(p)) <= 1.0 - margin + 1e-12);
    CHECK(p.has_zero_boundary());
    // idempotent once admissible
    auto again = project_constraint(p, margin);
    CHECK(sup_diff(again, p) == 0.0);
  }

  std::normal_distribution<double> normal;
  GridField noisy(grid);
  for (std::size_t n = 0; n < grid.node_count(); ++n) {
    noisy[n] = grid.is_boundary(n) ? 0.0 : 0.5 * normal(rng);
  }
  auto p = project_constraint(noisy, 1e-6);
  GridDensity rho(grid, std::vector<double>(grid.node_count(), 1.0));
  CHECK(std::isfinite(energy(p, rho)));

  // a fixed boundary trace is kept
  auto traced = field_from(grid, [](const std::vector<double>& x) {
    double bubble = (1 - x[0] * x[0]) * (1 - x[1] * x[1]) * (1 - x[2] * x[2]);
    return 0.5 * x[1] + 0.3 * x[0] * x[0] * x[2] + 3.0 * bubble * x[0];
  });
  REQUIRE(sup_gradient_norm(gradient(traced)) > 1.5);
  auto pt = project_constraint(traced, 0.01);
  for (std::size_t n = 0; n < grid.node_count(); ++n) {
    if (grid.is_boundary(n)) {
      CHECK(pt[n] == traced[n]);
    }
  }
  CHECK(sup_gradient_norm(gradient(pt)) <= 0.99 + 1e-12);
  CHECK_THROWS_AS(project_constraint(ok, 1.0), InvalidArgument);
  auto bad_trace = field_from(grid, [](const std::vector<double>& x) { return 3.0 * x[0] * x[0] * x[2]; });
  CHECK_THROWS_AS(project_constraint(bad_trace, 0.01), InvalidArgument);
}

TEST_CASE("minimize with zero data returns the zero field")
{
  BoxGrid grid(3, 1.0, 9);
  GridDensity rho(grid, std::vector<double>(grid.node_count(), 0.0));
  auto r = minimize(rho);
  CHECK(r.converged);
  CHECK(r.energy == 0.0);
  CHECK(sup_diff(r.field, GridField(grid)) == 0.0);
  CHECK(r.weak_residual == 0.0);
}

TEST_CASE("minimizer invariants on a smooth charge")
{
  BoxGrid grid(3, 1.0, 17);
  auto rho = sample_to_grid(RadialDensity::bump(3, 6.0, 0.6), grid);
  for (auto rule : {StepRule::line_search, StepRule::backtracking}) {
    EnergyConfig cfg;
    cfg.step_rule = rule;
    cfg.max_iterations = 5000;
    auto r = minimize(rho, cfg);
    CHECK(r.converged);
    CHECK(r.energy <= 0.0);
    CHECK(r.sup_gradient <= 1.0);
    for (std::size_t k = 1; k < r.energy_history.size(); ++k) {
      CHECK(r.energy_history[k] <= r.energy_history[k - 1]);
    }
    CHECK(r.energy == energy(r.field, rho));
    CHECK(r.energy_history.back() == doctest::Approx(r.energy).epsilon(1e-13));
    // a priori bound (1/2)|u|_X^2 <= int rho u
    auto wr = weak_residual(r.field, rho, standard_test_functions(grid));
    CHECK(0.5 * x_norm_sq(r.field) <= wr.coupling);
    // int |grad u|^2 / v <= int rho u, with equality up to solver tolerance
    CHECK(wr.defect() <= 1e-8 * wr.coupling);
    CHECK(std::abs(wr.defect()) <= 1e-6 * wr.coupling);
    CHECK(wr.residual < 1e-6);
    for (double s : cell_gradient_sq(grid, r.field.values())) {
      CHECK(0.5 * s <= born_infeld_density(s));
      CHECK(born_infeld_density(s) <= s);
    }
  }
  EnergyConfig fixed;
  fixed.step_rule = StepRule::fixed;
  fixed.initial_step = 0.5;
  fixed.max_iterations = 3;
  auto capped = minimize(rho, fixed);
  CHECK_FALSE(capped.converged);
  CHECK(capped.iterations == 3);
  CHECK(capped.energy < 0.0);
}

TEST_CASE("uniqueness surrogate: different admissible starts agree")
{
  BoxGrid grid(3, 1.0, 17);
  auto rho = sample_to_grid(RadialDensity::bump(3, 6.0, 0.6), grid);
  EnergyConfig cfg;
  cfg.tolerance = 1e-16;
  std::mt19937_64 rng(2);
  auto a = minimize(rho, cfg);
  auto b = minimize(rho, cfg, random_admissible(grid, rng, 0.5));
  CHECK(a.converged);
  CHECK(b.converged);
  // the tolerance bounds the relative energy gap, which is quadratic in the field error
  CHECK(sup_diff(a.field, b.field) <= 10 * std::sqrt(cfg.tolerance));
}

TEST_CASE("energy scaling under x -> x/t")
{
  BoxGrid grid(3, 1.0, 17);
  auto base = RadialDensity::bump(3, 6.0, 0.6);
  auto rho = sample_to_grid(base, grid);
  auto r = minimize(rho);
  for (double t : {0.5, 2.0}) {
    BoxGrid scaled(3, t, 17);
    std::vector<double> values(rho.values().begin(), rho.values().end());
    for (double& v : values) {
      v /= t;
    }
    auto rs = minimize(GridDensity(scaled, values));
    CHECK(rs.energy == doctest::Approx(std::pow(t, 3) * r.energy).epsilon(1e-10));
    for (std::size_t n = 0; n < grid.node_count(); ++n) {
      CHECK(rs.field[n] == doctest::Approx(t * r.field[n]).epsilon(1e-6).scale(1.0));
    }
  }
}

TEST_CASE("weak residual of zero data and of the exact radial profile")
{
  BoxGrid grid(3, 1.0, 9);
  GridDensity zero(grid, std::vector<double>(grid.node_count(), 0.0));
  auto wr = weak_residual(GridField(grid), zero, standard_test_functions(grid));
  CHECK(wr.residual == 0.0);
  CHECK(wr.flux_pairing == 0.0);
  CHECK(wr.coupling == 0.0);

  auto density = RadialDensity::bump(3, 6.0, 0.6);
  auto prof = solve_radial(density);
  double prev_res = kInfinity, prev_grad = kInfinity;
  for (int points : {17, 33, 65}) {
    BoxGrid g(3, 1.0, points);
    auto u = field_from(g, [&](const std::vector<double>& x) { return prof.potential_at(std::hypot(x[0], x[1], x[2])); });
    auto rho = sample_to_grid(density, g);
    double res = weak_residual(u, rho, standard_test_functions(g)).residual;
    // dual norm of the energy gradient, sqrt(g . (h^N(-Lap_h))^{-1} g)
    auto grad = energy_gradient(u, rho);
    auto z = DirichletLaplacian(g).solve(grad);
    double dual = 0.0;
    for (std::size_t n = 0; n < grad.size(); ++n) {
      dual += grad[n] * z[n];
    }
    dual = std::sqrt(dual / g.cell_volume());
    MESSAGE(points << " residual " << res << " gradient " << dual);
    CHECK(res < prev_res);
    CHECK(dual < prev_grad);
    prev_res = res;
    prev_grad = dual;
  }
}

TEST_CASE("energy config validation and JSON")
{
  EnergyConfig c;
  c.margin = 0.2;
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
  c = {};
  c.tolerance = 0.0;
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
  c = {};
  c.step_rule = StepRule::backtracking;
  auto back = EnergyConfig::from_json(c.to_json());
  CHECK(back.step_rule == StepRule::backtracking);
  CHECK(back.tolerance == c.tolerance);
  CHECK_THROWS_AS(EnergyConfig::from_json({{"step_rule", "newton"}}), InvalidArgument);
  BoxGrid a(3, 1.0, 9), b(3, 1.0, 11);
  CHECK_THROWS_AS(energy(GridField(a), GridDensity(b, std::vector<double>(b.node_count()))), InvalidArgument);
}

TEST_CASE("grid minimizer approaches the exact radial profile")
{
  auto density = RadialDensity::bump(3, 0.5, 0.25);
  auto prof = solve_radial(density);
  double prev = kInfinity;
  for (int points : {17, 33}) {
    BoxGrid grid(3, 1.0, points);
    auto exact =
        field_from(grid, [&](const std::vector<double>& x) { return prof.potential_at(std::hypot(x[0], x[1], x[2])); });
    GridField start(grid);
    for (std::size_t n = 0; n < grid.node_count(); ++n) {
      if (grid.is_boundary(n)) {
        start[n] = exact[n];
      }
    }
    auto r = minimize(sample_to_grid(density, grid), {}, start);
    CHECK(r.converged);
    double err = sup_diff(r.field, exact);
    CHECK(err < 0.6 * prev);
    prev = err;
  }
}
