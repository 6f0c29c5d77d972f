#include "bi/error.hpp"
#include "bi/plap.hpp"

#include "poisson_oracle.hpp"

#include <doctest.h>

#include <boost/math/special_functions/binomial.hpp>
#include <boost/multiprecision/cpp_bin_float.hpp>

#include <cmath>
#include <random>

using namespace bi;

namespace {

// (2h choose h) / ((2h - 1) 4^h)
double closed_form_coefficient(int h)
{
  return boost::math::binomial_coefficient<double>(2 * h, h) / ((2.0 * h - 1.0) * std::pow(4.0, h));
}

double bi_density(double s) { return s / (1.0 + std::sqrt(1.0 - s)); }

GridField smooth_field(const BoxGrid& grid, double amplitude)
{
  GridField u(grid);
  std::vector<double> x(grid.dim());
  const double L = grid.extent();
  for (std::size_t n = 0; n < grid.node_count(); ++n) {
    grid.node_position(n, x);
    double v = amplitude * L;
    for (int i = 0; i < grid.dim(); ++i) {
      v *= std::cos(0.5 * M_PI * x[i] / L);
    }
    u[n] = v * (1.0 + 0.3 * std::sin(2.0 * x[0] + x.back()));
  }
  return u.with_zero_boundary();
}

double sup_diff(const GridField& a, const GridField& b)
{
  double m = 0.0;
  for (std::size_t n = 0; n < a.grid().node_count(); ++n) {
    m = std::max(m, std::abs(a[n] - b[n]));
  }
  return m;
}

} // namespace

TEST_CASE("series coefficients match the Taylor expansion of 1 - sqrt(1 - s)")
{
  const auto c = series_coefficients(12);
  CHECK(c.exact[0] == "1/2");
  CHECK(c.exact[1] == "1/8");
  CHECK(c.exact[2] == "1/16");
  CHECK(c.exact[3] == "5/128");
  for (int h = 1; h <= 12; ++h) {
    CHECK(c.c[h - 1] > 0.0);
    CHECK(c.c[h - 1] == doctest::Approx(closed_form_coefficient(h)).epsilon(1e-14));
  }

  // remainder after k terms is c_{k+1} s^{k+1} (1 + O(s)), evaluated in 50 digits
  using big = boost::multiprecision::cpp_bin_float_50;
  const big s = big(1) / 1000;
  const big exact = 1 - sqrt(1 - s);
  for (int k = 1; k <= 6; ++k) {
    big partial = 0, power = 1;
    for (double ch : series_coefficients(k).c) {
      power *= s;
      partial += big(ch) * power;
    }
    const double scaled = static_cast<double>((exact - partial) / (power * s));
    CHECK(scaled == doctest::Approx(closed_form_coefficient(k + 1)).epsilon(5e-3));
  }
  CHECK_THROWS_AS(series_coefficients(0), InvalidArgument);
}

TEST_CASE("partial sums: zero at zero, monotone in k, sandwich against the full density")
{
  for (double s : {0.0, 1e-6, 0.1, 0.5, 0.9, 0.999}) {
    double prev = 0.0;
    for (int k = 1; k <= 20; ++k) {
      const auto c = series_coefficients(k);
      const double p = c.partial_sum(s);
      if (s == 0.0) {
        CHECK(p == 0.0);
        continue;
      }
      CHECK(p >= prev);
      const double tail = series_coefficients(k + 1).c[k] * std::pow(s, k + 1) / (1.0 - s);
      CHECK(p <= bi_density(s) * (1.0 + 1e-15));
      CHECK(bi_density(s) <= (p + tail) * (1.0 + 1e-15));
      prev = p;
    }
  }
}

TEST_CASE("series derivatives and accurate differences")
{
  const auto c = series_coefficients(7);
  for (double s : {0.0, 0.3, 0.8, 1.7}) {
    const double h = 1e-6;
    const double d1 = (c.partial_sum(s + h) - c.partial_sum(s - h)) / (2 * h);
    const double d2 = (c.derivative(s + h) - c.derivative(s - h)) / (2 * h);
    CHECK(c.derivative(s) == doctest::Approx(d1).epsilon(1e-8));
    CHECK(c.second_derivative(s) == doctest::Approx(d2).epsilon(1e-8));
    for (double ds : {1e-12, 1e-3, 0.4}) {
      CHECK(c.change(s, ds) == doctest::Approx(c.partial_sum(s + ds) - c.partial_sum(s)).epsilon(1e-9));
    }
  }
  // tiny increments keep full relative precision
  CHECK(c.change(0.5, 1e-20) == doctest::Approx(c.derivative(0.5) * 1e-20).epsilon(1e-14));
}

TEST_CASE("truncated energy")
{
  const BoxGrid grid(3, 1.0, 9);
  const auto rho = sample_to_grid(RadialDensity::bump(3, 2.0, 0.6), grid);
  CHECK(truncated_energy(GridField(grid), rho, series_coefficients(4)) == 0.0);

  const auto u = smooth_field(grid, 0.4);
  REQUIRE(sup_gradient_norm(gradient(u)) < 1.0);
  const double full = energy(u, rho);
  double prev = -INFINITY;
  for (int k : {1, 2, 3, 5, 8, 13, 40}) {
    const double e = truncated_energy(u, rho, series_coefficients(k));
    CHECK(e > prev);
    CHECK(e <= full);
    prev = e;
  }
  CHECK(prev == doctest::Approx(full).epsilon(1e-12));

  // defined beyond the light cone
  const auto steep = smooth_field(grid, 3.0);
  CHECK(sup_gradient_norm(gradient(steep)) > 1.0);
  CHECK(std::isfinite(truncated_energy(steep, rho, series_coefficients(6))));
}

TEST_CASE("truncated energy gradient against finite differences")
{
  const BoxGrid grid(3, 1.0, 9);
  const auto rho = sample_to_grid(RadialDensity::bump(3, 1.0, 0.7), grid);
  const auto u = smooth_field(grid, 1.5);
  const auto c = series_coefficients(5);
  const auto g = truncated_energy_gradient(u, rho, c);
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<std::size_t> pick(0, grid.node_count() - 1);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = pick(rng);
    if (grid.is_boundary(n)) {
      CHECK(g[n] == 0.0);
      continue;
    }
    const double h = 1e-6;
    auto up = u, down = u;
    up[n] += h;
    down[n] -= h;
    const double fd = (truncated_energy(up, rho, c) - truncated_energy(down, rho, c)) / (2 * h);
    CHECK(g[n] == doctest::Approx(fd).epsilon(1e-6).scale(1e-8));
  }
}

TEST_CASE("xnorm_2k")
{
  const BoxGrid grid(3, 1.0, 17);
  const auto zero = xnorm_2k(GridField(grid), 3);
  CHECK(zero.value == 0.0);
  CHECK(zero.gradient_l2k == 0.0);

  // u = clamp(x_0, -a, a): |grad u| = 1 on the slab |x_0| < a and zero elsewhere
  const double a = 4 * grid.spacing();
  GridField slab(grid);
  std::vector<double> x(3);
  for (std::size_t n = 0; n < grid.node_count(); ++n) {
    grid.node_position(n, x);
    slab[n] = std::clamp(x[0], -a, a);
  }
  const double volume = 2 * a * 4.0;
  for (int k : {1, 2, 5, 10}) {
    const auto norm = xnorm_2k(slab, k);
    CHECK(norm.gradient_l2_sq == doctest::Approx(volume).epsilon(1e-12));
    CHECK(norm.gradient_l2k == doctest::Approx(std::pow(volume, 0.5 / k)).epsilon(1e-12));
    CHECK(norm.value == doctest::Approx(std::sqrt(volume + std::pow(volume, 1.0 / k))).epsilon(1e-12));
  }

  // |grad u|_{2k} approaches the sup of the gradient as k grows
  const auto u = smooth_field(grid, 0.7);
  const double sup = sup_gradient_norm(gradient(u));
  double prev = INFINITY;
  for (int k : {4, 16, 64, 256, 1024}) {
    const double gap = std::abs(xnorm_2k(u, k).gradient_l2k - sup);
    CHECK(gap < prev);
    prev = gap;
  }
  CHECK(prev < 0.01 * sup);
  CHECK_THROWS_AS(xnorm_2k(u, 0), InvalidArgument);
}

TEST_CASE("minimize_truncated: zero data and k = 1 against a direct Poisson solve")
{
  const BoxGrid grid(3, 1.0, 17);
  const auto none = minimize_truncated(sample_to_grid(RadialDensity::zero(3), grid), 4);
  CHECK(none.converged);
  for (double x : none.field.values()) {
    CHECK(x == 0.0);
  }

  for (const auto& g : {BoxGrid(3, 1.0, 17), BoxGrid(3, 1.5, 21)}) {
    const auto rho = sample_to_grid(RadialDensity::bump(g.dim(), 3.0, 0.5), g);
    const auto r = minimize_truncated(rho, 1);
    CHECK(r.converged);
    const auto oracle = test::poisson_direct(rho);
    const double peak = *std::max_element(oracle.values().begin(), oracle.values().end());
    MESSAGE(g.points(), " points: |u_1 - poisson|_inf = ", sup_diff(r.field, oracle), " peak ", peak);
    CHECK(sup_diff(r.field, oracle) <= 1e-8);
    CHECK(r.weak_residual < 1e-8);
  }
}

TEST_CASE("series minimizers approach the Born-Infeld minimizer")
{
  const BoxGrid grid(3, 1.0, 17);
  const auto rho = sample_to_grid(RadialDensity::bump(3, 3.0, 0.5), grid);
  const auto sweep = series_sweep(rho, {1, 2, 4, 8, 16});
  REQUIRE(sweep.full.converged);
  REQUIRE(sweep.full.sup_gradient < 1.0);
  const double full = sweep.full.energy;
  // the unconstrained k = 1 minimizer leaves the light cone on this datum
  CHECK(sweep.rows.front().sup_gradient > 1.0);
  double prev_dist = INFINITY, prev_energy = -INFINITY;
  for (const auto& row : sweep.rows) {
    CHECK(row.converged);
    CHECK(row.distance <= prev_dist);
    // P_k <= Phi, so min I_k <= min I; the gap closes as k grows
    CHECK(row.energy >= prev_energy);
    CHECK(row.energy <= full + 1e-12 * std::abs(full));
    prev_dist = row.distance;
    prev_energy = row.energy;
  }
  CHECK(sweep.rows.back().distance < 1e-3 * sweep.rows.front().distance);

  std::ostringstream csv;
  write_sweep_csv(csv, sweep);
  CHECK(csv.str().rfind("k,energy,sup_gradient,distance_to_full\n1,", 0) == 0);
}
