#include "bi/error.hpp"
#include "bi/fields.hpp"
#include "bi/grid_io.hpp"
#include "bi/poisson.hpp"

#include <doctest.h>

#include <cmath>
#include <cstring>
#include <random>
#include <sstream>

using namespace bi;

namespace {

GridField sample(const BoxGrid& g, auto&& f)
{
  GridField out(g);
  std::vector<double> x(g.dim());
  for (std::size_t n = 0; n < g.node_count(); ++n) {
    g.node_position(n, x);
    out[n] = f(x);
  }
  return out;
}

} // namespace

TEST_CASE("grid construction rejects bad shapes")
{
  CHECK_THROWS_AS(BoxGrid(2, 1.0, 9), InvalidArgument);
  CHECK_THROWS_AS(BoxGrid(3, 1.0, 10), InvalidArgument);
  CHECK_THROWS_AS(BoxGrid(3, 1.0, 7), InvalidArgument);
  CHECK_THROWS_AS(BoxGrid(3, -1.0, 9), InvalidArgument);
  BoxGrid g(3, 1.0, 9);
  CHECK(g.spacing() == doctest::Approx(0.25));
  CHECK(g.node_count() == 729);
  CHECK(g.cell_count() == 512);
  std::vector<double> x(3);
  g.node_position(g.node_count() / 2, x);
  CHECK(x[0] == 0.0);
  CHECK(x[1] == 0.0);
  CHECK(x[2] == 0.0);
}

TEST_CASE("gradient of zero and affine fields")
{
  BoxGrid g(3, 1.0, 9);
  auto zero = gradient(GridField(g));
  for (int a = 0; a < 3; ++a) {
    for (double c : zero.component(a)) {
      CHECK(c == 0.0);
    }
  }
  auto u = sample(g, [](auto& x) { return x[0]; }).with_zero_boundary();
  auto gu = gradient(u);
  // faces whose both ends are interior
  std::vector<int> f(3);
  for (f[0] = 1; f[0] < 7; ++f[0]) {
    for (f[1] = 1; f[1] < 7; ++f[1]) {
      for (f[2] = 1; f[2] < 7; ++f[2]) {
        CHECK(gu.at(0, f) == doctest::Approx(1.0).epsilon(1e-14));
        CHECK(gu.at(1, f) == 0.0);
        CHECK(gu.at(2, f) == 0.0);
      }
    }
  }
  CHECK(gu.extents(0) == std::vector<int>{8, 9, 9});
  CHECK(gu.extents(2) == std::vector<int>{9, 9, 8});
}

TEST_CASE("forward difference of a quadratic hits the face-center derivative")
{
  BoxGrid g(3, 1.0, 11);
  auto u = sample(g, [](auto& x) { return x[0] * x[0] + x[1] * x[1] + x[2] * x[2]; });
  auto gu = gradient(u);
  for (int a = 0; a < 3; ++a) {
    auto ext = gu.extents(a);
    std::vector<int> f(3);
    for (f[0] = 0; f[0] < ext[0]; ++f[0]) {
      for (f[1] = 0; f[1] < ext[1]; ++f[1]) {
        for (f[2] = 0; f[2] < ext[2]; ++f[2]) {
          double center = g.coordinate(f[a]) + 0.5 * g.spacing();
          CHECK(gu.at(a, f) == doctest::Approx(2.0 * center).epsilon(1e-12).scale(1.0));
        }
      }
    }
  }
}

TEST_CASE("gradient is linear")
{
  BoxGrid g(3, 1.0, 9);
  std::mt19937_64 rng(7);
  std::normal_distribution<double> d;
  GridField a(g), b(g), c(g);
  for (std::size_t n = 0; n < g.node_count(); ++n) {
    a[n] = d(rng);
    b[n] = d(rng);
    c[n] = 1.5 * a[n] - 0.25 * b[n];
  }
  auto ga = gradient(a), gb = gradient(b), gc = gradient(c);
  for (int ax = 0; ax < 3; ++ax) {
    for (std::size_t k = 0; k < ga.component(ax).size(); ++k) {
      double expect = 1.5 * ga.component(ax)[k] - 0.25 * gb.component(ax)[k];
      CHECK(gc.component(ax)[k] == doctest::Approx(expect).epsilon(1e-13).scale(1.0));
    }
  }
}

TEST_CASE("sup gradient norm and v field")
{
  BoxGrid g(3, 1.0, 9);
  CHECK(sup_gradient_norm(gradient(GridField(g))) == 0.0);
  for (double v : v_field(gradient(GridField(g)))) {
    CHECK(v == 1.0);
  }
  auto lin = sample(g, [](auto& x) { return 0.6 * x[1]; });
  auto gl = gradient(lin);
  CHECK(sup_gradient_norm(gl) == doctest::Approx(0.6));
  for (double v : v_field(gl)) {
    CHECK(v == doctest::Approx(0.8).epsilon(1e-14));
  }
  auto unit = sample(g, [](auto& x) { return x[2]; });
  CHECK(sup_gradient_norm(gradient(unit)) == doctest::Approx(1.0));
  for (double v : v_field(gradient(unit))) {
    CHECK(v == doctest::Approx(0.0).scale(1.0).epsilon(1e-7));
  }
  auto steep = sample(g, [](auto& x) { return 1.01 * x[2]; });
  CHECK_THROWS_AS(v_field(gradient(steep)), ConstraintViolation);
}

TEST_CASE("cell gradient from nodal values matches the staggered field")
{
  BoxGrid g(4, 1.0, 9);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> d(-0.1, 0.1);
  GridField u(g);
  for (std::size_t n = 0; n < g.node_count(); ++n) {
    u[n] = d(rng);
  }
  auto a = cell_gradient_sq(gradient(u));
  auto b = cell_gradient_sq(g, u.values());
  REQUIRE(a.size() == b.size());
  for (std::size_t c = 0; c < a.size(); ++c) {
    CHECK(a[c] == doctest::Approx(b[c]).epsilon(1e-13));
  }
}

TEST_CASE("v lies in [0,1] for random spacelike fields")
{
  BoxGrid g(3, 1.0, 9);
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> d(-0.05, 0.05);
  for (int trial = 0; trial < 5; ++trial) {
    GridField u(g);
    for (std::size_t n = 0; n < g.node_count(); ++n) {
      u[n] = d(rng);
    }
    auto gu = gradient(u);
    if (sup_gradient_norm(gu) <= 1.0) {
      for (double v : v_field(gu)) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
      }
    }
  }
}

TEST_CASE("lq norm")
{
  BoxGrid g(3, 1.0, 9);
  std::vector<double> zero(g.cell_count(), 0.0);
  CHECK(lq_norm(zero, g, 2.0) == 0.0);
  CHECK_THROWS_AS(lq_norm(zero, g, 0.5), InvalidArgument);
  std::vector<double> ind(g.cell_count(), 0.0);
  for (int m = 0; m < 37; ++m) {
    ind[m * 5] = 1.0;
  }
  for (double q : {1.0, 2.0, 7.0}) {
    CHECK(lq_norm(ind, g, q) == doctest::Approx(std::pow(37 * g.cell_volume(), 1.0 / q)));
    std::vector<double> scaled(ind);
    for (double& v : scaled) {
      v *= -3.5;
    }
    CHECK(lq_norm(scaled, g, q) == doctest::Approx(3.5 * lq_norm(ind, g, q)).epsilon(1e-14));
  }
  // int_{[-1,1]^3} x1^2 = 8/3
  double prev = 1.0;
  for (int p : {9, 17, 33}) {
    BoxGrid gg(3, 1.0, p);
    std::vector<double> vals(gg.cell_count());
    std::vector<double> x(3);
    for (std::size_t c = 0; c < gg.cell_count(); ++c) {
      gg.cell_center(c, x);
      vals[c] = x[0];
    }
    double err = std::abs(lq_norm(vals, gg, 2.0) - std::sqrt(8.0 / 3.0));
    CHECK(err < prev);
    prev = err;
  }
  CHECK(prev < 1e-3);
}

TEST_CASE("W22 seminorm")
{
  BoxGrid g(3, 1.0, 33);
  std::vector<double> c = {0.0, 0.0, 0.0};
  auto aff = sample(g, [](auto& x) { return 0.3 * x[0] - 0.2 * x[2] + 1.0; });
  CHECK(w22_seminorm_ball(aff, c, 0.5) == doctest::Approx(0.0).scale(1.0).epsilon(1e-9));
  auto quad = sample(g, [](auto& x) { return 0.5 * (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]); });
  // N * (node count in ball) * h^N
  std::size_t inside = 0;
  std::vector<double> x(3);
  for (std::size_t n = 0; n < g.node_count(); ++n) {
    g.node_position(n, x);
    if (x[0] * x[0] + x[1] * x[1] + x[2] * x[2] < 0.25) {
      ++inside;
    }
  }
  double expect = std::sqrt(3.0 * inside * g.cell_volume());
  CHECK(w22_seminorm_ball(quad, c, 0.5) == doctest::Approx(expect).epsilon(1e-10));
  CHECK_THROWS_AS(w22_seminorm_ball(quad, c, 0.95), InvalidArgument);
}

TEST_CASE("discrete derivatives converge on a Gaussian")
{
  // first order for the cell gradient, second order for the Hessian integrand
  auto err_at = [](int points) {
    BoxGrid g(3, 2.0, points);
    auto u = sample(g, [](auto& x) { return std::exp(-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2])); });
    auto sq = cell_gradient_sq(g, u.values());
    double eg = 0.0;
    std::vector<double> x(3);
    for (std::size_t c = 0; c < g.cell_count(); ++c) {
      g.cell_center(c, x);
      double r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
      double exact = 4.0 * r2 * std::exp(-2.0 * r2);
      eg = std::max(eg, std::abs(std::sqrt(sq[c]) - std::sqrt(exact)));
    }
    double eh = 0.0;
    for (std::size_t n = 0; n < g.node_count(); ++n) {
      if (g.is_boundary(n)) {
        continue;
      }
      g.node_position(n, x);
      double r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
      double e = std::exp(-r2);
      // Hessian 2e(2 x x^T - I): Frobenius^2 = 4e^2 (4 r^4 - 4 r^2 + 3)
      double exact = 4.0 * e * e * (4.0 * r2 * r2 - 4.0 * r2 + 3.0);
      eh = std::max(eh, std::abs(hessian_frobenius_sq(u, n) - exact));
    }
    return std::pair{eg, eh};
  };
  auto [g1, h1] = err_at(17);
  auto [g2, h2] = err_at(33);
  CHECK(g1 / g2 > 1.7);
  CHECK(h1 / h2 > 3.4);
}

TEST_CASE("interpolation is exact for multilinear data")
{
  BoxGrid g(3, 1.0, 9);
  auto u = sample(g, [](auto& x) { return 1.0 + x[0] - 2.0 * x[1] * x[2] + 0.5 * x[0] * x[1] * x[2]; });
  std::vector<double> p = {0.13, -0.71, 0.402};
  double expect = 1.0 + p[0] - 2.0 * p[1] * p[2] + 0.5 * p[0] * p[1] * p[2];
  CHECK(interpolate(g, u.values(), p) == doctest::Approx(expect).epsilon(1e-14));
}

TEST_CASE("grid field serialization round-trips bit-exactly")
{
  BoxGrid g(3, 0.7, 9);
  std::mt19937_64 rng(5);
  std::normal_distribution<double> d;
  GridField u(g);
  for (std::size_t n = 0; n < g.node_count(); ++n) {
    u[n] = d(rng) * 1e-3;
  }
  std::stringstream ss;
  write_binary(ss, u);
  auto back = read_binary(ss);
  CHECK(back.grid() == g);
  CHECK(std::memcmp(back.values().data(), u.values().data(), u.values().size() * sizeof(double)) == 0);
  auto js = from_json(to_json(u));
  CHECK(js.grid() == g);
  CHECK(std::memcmp(js.values().data(), u.values().data(), u.values().size() * sizeof(double)) == 0);
  std::stringstream bad("XXXX");
  CHECK_THROWS_AS(read_binary(bad), InvalidArgument);
  CHECK_THROWS_AS(from_json("{\"version\": 1}"), InvalidArgument);
}

TEST_CASE("sine-transform Poisson solve inverts the discrete Laplacian")
{
  BoxGrid g(3, 1.0, 17);
  std::mt19937_64 rng(9);
  std::normal_distribution<double> d;
  std::vector<double> x(g.node_count(), 0.0);
  for (std::size_t n = 0; n < x.size(); ++n) {
    if (!g.is_boundary(n)) {
      x[n] = d(rng);
    }
  }
  DirichletLaplacian lap(g);
  auto b = negative_laplacian(g, x);
  auto y = lap.solve(b);
  for (std::size_t n = 0; n < x.size(); ++n) {
    CHECK(y[n] == doctest::Approx(x[n]).scale(1.0).epsilon(1e-11));
  }
}
