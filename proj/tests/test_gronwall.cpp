#include "bi/error.hpp"
#include "bi/gronwall.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace bi;

TEST_CASE("Phi and its inverse")
{
  const auto half = GronwallProblem::power(1.0, 1.0, 0.5, 0.5, 1.0);
  CHECK(phi(half, 0.0) == 0.0);
  CHECK(phi(half, 4.0) == doctest::Approx(4.0).epsilon(1e-15));
  CHECK(phi(half, 2.0) == doctest::Approx(2.0 * std::sqrt(2.0)).epsilon(1e-15));
  CHECK(phi_inverse(half, 0.0) == 0.0);
  for (double gamma : {0.1, 0.5, 0.9}) {
    const auto p = GronwallProblem::power(1.0, 1.0, 0.5, gamma, 1.0);
    for (double l : {0.1, 1.0, 10.0}) {
      CHECK(phi_inverse(p, phi(p, l)) == doctest::Approx(l).epsilon(1e-10));
    }
  }

  // g(k) = 1 + k: Phi(l) = log(1 + l)
  const GronwallProblem lin(1.0, 1.0, PowerWeight{1.0, 0.5}, TabulatedGrowth{{0.0, 1.0, 3.0}, {1.0, 2.0, 4.0}});
  for (double l : {0.0, 0.1, 1.0, 2.5, 10.0, 100.0}) {
    CHECK(phi(lin, l) == doctest::Approx(std::log1p(l)).epsilon(1e-13));
  }
  for (double l : {0.1, 1.0, 10.0}) {
    CHECK(phi_inverse(lin, phi(lin, l)) == doctest::Approx(l).epsilon(1e-10));
  }
  CHECK_THROWS_AS(phi_inverse(half, -1.0), InvalidArgument);
  CHECK_THROWS_AS(phi(half, -1.0), InvalidArgument);
}

TEST_CASE("problem validation")
{
  CHECK_THROWS_AS(GronwallProblem::power(0.0, 1.0, 0.5, 0.5, 1.0), InvalidArgument);
  CHECK_THROWS_AS(GronwallProblem::power(1.0, -1.0, 0.5, 0.5, 1.0), InvalidArgument);
  CHECK_THROWS_AS(GronwallProblem::power(1.0, 1.0, 1.0, 0.5, 1.0), InvalidArgument);
  CHECK_THROWS_AS(GronwallProblem::power(1.0, 1.0, 0.5, 0.0, 1.0), InvalidArgument);
  CHECK_THROWS_AS(GronwallProblem::power(1.0, 1.0, 0.5, 0.5, 0.0), InvalidArgument);
  CHECK_THROWS_AS(GronwallProblem(1.0, 1.0, PowerWeight{}, TabulatedGrowth{{0.0, 1.0}, {0.0, 1.0}}), InvalidArgument);
  CHECK_THROWS_AS(GronwallProblem(1.0, 1.0, PowerWeight{}, TabulatedGrowth{{0.0, 1.0}, {2.0, 1.0}}), InvalidArgument);
  CHECK_THROWS_AS(GronwallProblem(1.0, 2.0, TabulatedWeight{{0.0, 1.0}, {1.0, 1.0}}, PowerGrowth{}), InvalidArgument);

  const GronwallProblem tab(2.0, 1.0, TabulatedWeight{{0.0, 0.5, 1.0}, {1.0, 3.0, 2.0}}, TabulatedGrowth{{0.0, 2.0}, {1.0, 5.0}});
  const auto back = GronwallProblem::from_json(tab.to_json());
  CHECK(back.to_json() == tab.to_json());
  CHECK_THROWS_AS(GronwallProblem::from_json(nlohmann::json{{"C0", 1.0}}), InvalidArgument);
}

TEST_CASE("power-case closed form")
{
  CHECK(power_case_bound(1.0, 1.0, 0.5, 0.5, 1.0) == doctest::Approx(4.0).epsilon(1e-15));
  for (double C0 : {0.1, 1.0, 7.0}) {
    for (double gamma : {0.2, 0.5, 0.8}) {
      CHECK(power_case_bound(C0, 0.0, 0.3, gamma, 2.0) == C0);
    }
  }
  CHECK_THROWS_AS(power_case_bound(1.0, 1.0, 0.0, 0.5, 1.0), InvalidArgument);
  CHECK_THROWS_AS(power_case_bound(1.0, -1.0, 0.5, 0.5, 1.0), InvalidArgument);
}

TEST_CASE("gronwall_bound")
{
  const auto p = GronwallProblem::power(1.5, 2.0, 0.4, 0.6, 3.0);
  CHECK(gronwall_bound(p, 0.0) == 1.5);

  const auto flat = GronwallProblem::power(2.5, 0.0, 0.4, 0.6, 3.0);
  for (double t : {0.0, 0.5, 3.0}) {
    CHECK(gronwall_bound(flat, t) == 2.5);
  }

  // two routes on the power family: Phi^{-1} by root finding vs the closed form
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int k = 0; k < 200; ++k) {
    const double gamma = 0.1 + 0.8 * u(rng), beta = 0.1 + 0.8 * u(rng);
    const double C0 = 0.1 + 9.9 * u(rng), C1 = 10.0 * u(rng), T = 0.1 + 4.9 * u(rng);
    const auto q = GronwallProblem::power(C0, C1, beta, gamma, T);
    for (double t : {0.0, 0.3 * T, T}) {
      CHECK(gronwall_bound(q, t) == doctest::Approx(power_case_bound(C0, C1, beta, gamma, t)).epsilon(1e-12));
    }
  }

  // monotone in t, C0 (strictly) and C1
  double prev = 0.0;
  for (int k = 0; k <= 50; ++k) {
    const double b = gronwall_bound(p, 3.0 * k / 50);
    CHECK(b >= prev);
    prev = b;
  }
  CHECK(gronwall_bound(GronwallProblem::power(1.6, 2.0, 0.4, 0.6, 3.0), 1.0) > gronwall_bound(p, 1.0));
  CHECK(gronwall_bound(GronwallProblem::power(1.5, 2.5, 0.4, 0.6, 3.0), 1.0) >= gronwall_bound(p, 1.0));
  CHECK_THROWS_AS(gronwall_bound(p, 3.5), InvalidArgument);

  // Psi = 1 tabulated, g = k^gamma: ((1 - gamma)(C0^{1-gamma}/(1 - gamma) + t))^{1/(1-gamma)}
  const GronwallProblem unit(2.0, 2.0, TabulatedWeight{{0.0, 1.0, 2.0}, {1.0, 1.0, 1.0}}, PowerGrowth{0.5});
  for (double t : {0.25, 1.0, 1.75}) {
    CHECK(unit.psi_integral(t) == doctest::Approx(t).epsilon(1e-15));
    CHECK(gronwall_bound(unit, t) == doctest::Approx(std::pow(0.5 * (std::sqrt(2.0) / 0.5 + t), 2.0)).epsilon(1e-12));
  }
}

TEST_CASE("product rule")
{
  const auto p = GronwallProblem::power(1.0, 3.0, 0.7, 0.5, 2.0);
  const auto mesh = gronwall_mesh(2.0, 257);
  CHECK(mesh.front() == 0.0);
  CHECK(mesh.back() == 2.0);
  const auto rule = product_rule(p, mesh);
  double zeroth = 0.0, first = 0.0;
  for (std::size_t j = 0; j + 1 < mesh.size(); ++j) {
    zeroth += rule.lower[j] + rule.upper[j];
    first += rule.lower[j] * mesh[j] + rule.upper[j] * mesh[j + 1];
  }
  // exact for polynomials of degree one against s^{-beta}
  CHECK(zeroth == doctest::Approx(p.psi_integral(2.0)).epsilon(1e-13));
  CHECK(first == doctest::Approx(3.0 * std::pow(2.0, 1.3) / 1.3).epsilon(1e-12));

  const GronwallProblem tab(1.0, 2.0, TabulatedWeight{{0.0, 0.7, 2.0}, {2.0, 1.0, 4.0}}, PowerGrowth{0.5});
  const auto trule = product_rule(tab, mesh);
  zeroth = 0.0;
  for (std::size_t j = 0; j + 1 < mesh.size(); ++j) {
    zeroth += trule.lower[j] + trule.upper[j];
  }
  CHECK(zeroth == doctest::Approx(tab.psi_integral(2.0)).epsilon(1e-13));
}

TEST_CASE("certify_bound")
{
  const auto p = GronwallProblem::power(2.0, 1.5, 0.5, 0.5, 2.0);
  Tabulated half;
  half.t = gronwall_mesh(2.0, 512);
  half.values.assign(half.t.size(), 1.0);
  const auto c = certify_bound(p, half, 1e-4);
  CHECK(c.passed());
  CHECK(c.bound_gap == doctest::Approx(0.5));

  const auto fp = fixed_point_iterate(p);
  CHECK(fp.U.t.size() == 2048);
  CHECK(fp.increments.size() == 20);
  CHECK(fp.increments.back() < 1e-6 * fp.increments.front());
  const auto near = certify_bound(p, fp.U, 1e-4);
  CHECK(near.passed());
  CHECK(near.hypothesis_margin >= 0.0);
  CHECK(near.bound_gap > -1e-4);
  CHECK(near.bound_gap < 1e-4);

  Tabulated over = fp.U;
  for (std::size_t i = 0; i < over.t.size(); ++i) {
    over.values[i] = 1.01 * gronwall_bound(p, over.t[i]);
  }
  const auto bad = certify_bound(p, over, 1e-4);
  CHECK_FALSE(bad.passed());
  // 1.01 x bound already breaks the hypothesis; the bound margin is still reported
  CHECK(bad.status == CertifyStatus::hypothesis_violated);
  CHECK(bad.bound_margin < 0.0);
  CHECK(bad.bound_margin == doctest::Approx(1.0001 - 1.01).epsilon(1e-9));
  CHECK(bad.to_json()["status"] == "hypothesis_violated");

  // a late jump is not covered by the integral of the past
  Tabulated spike = fp.U;
  spike.values.back() *= 1.01;
  CHECK(certify_bound(p, spike, 1e-4).status == CertifyStatus::hypothesis_violated);

  Tabulated wrong;
  wrong.t = {0.0, 3.0};
  wrong.values = {1.0, 1.0};
  CHECK_THROWS_AS(certify_bound(p, wrong, 1e-4), InvalidArgument);
}

TEST_CASE("fixed-point certification over random draws")
{
  const auto suite = certification_suite(100, 2024);
  CHECK(suite.draws.size() == 100);
  CHECK(suite.passed == 100);
  for (const auto& d : suite.draws) {
    CHECK(d.certificate.hypothesis_margin >= 0.0);
    CHECK(d.certificate.bound_margin >= 0.0);
  }
  MESSAGE("tightest gap ", suite.tightest_gap);
  CHECK(suite.to_json()["passed"] == 100);
}

TEST_CASE("monotonicity-formula substitution")
{
  const auto c = monotonicity_substitution_check(8, 3);
  CHECK(c.gamma == "3/4");
  CHECK(c.outer_exponent == "4");
  CHECK(c.inner_exponent == "1/4");
  CHECK(c.time_exponent == "5/4");
  CHECK(c.exponents_match);
  CHECK(c.coefficients_match);
  CHECK(c.max_relative_defect <= 1e-13);
  CHECK(c.passed);
  CHECK(monotonicity_substitution_check(21, 3).passed);
  CHECK_THROWS_AS(monotonicity_substitution_check(6, 3), InvalidArgument);
}
