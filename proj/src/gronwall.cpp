#include "bi/gronwall.hpp"

#include "bi/error.hpp"
#include "bi/geometry.hpp"
#include "bi/quadrature.hpp"

#include <boost/multiprecision/cpp_int.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace bi {

namespace {

constexpr const char* kModule = "gronwall";
constexpr double kInf = std::numeric_limits<double>::infinity();

void require(bool ok, const std::string& what)
{
  if (!ok) {
    throw InvalidArgument(kModule, what);
  }
}

template <class... Ts>
struct overloaded : Ts...
{
  using Ts::operator()...;
};

/// index of the segment [x_i, x_{i+1}) holding x, clamped to the last segment
std::size_t segment(const std::vector<double>& x, double v)
{
  auto it = std::upper_bound(x.begin(), x.end(), v);
  const std::size_t k = it == x.begin() ? 0 : static_cast<std::size_t>(it - x.begin()) - 1;
  return std::min(k, x.size() - 2);
}

double linear(const std::vector<double>& x, const std::vector<double>& y, double v)
{
  const std::size_t k = segment(x, v);
  return y[k] + (y[k + 1] - y[k]) * (v - x[k]) / (x[k + 1] - x[k]);
}

void check_knots(const std::vector<double>& x, const std::vector<double>& y, const char* what)
{
  require(x.size() >= 2 && x.size() == y.size(), std::string(what) + " needs at least two knots");
  require(x.front() == 0.0, std::string(what) + " must start at 0");
  for (std::size_t i = 0; i < x.size(); ++i) {
    require(std::isfinite(x[i]) && std::isfinite(y[i]), std::string(what) + " has non-finite entries");
    if (i > 0) {
      require(x[i] > x[i - 1], std::string(what) + " knots must increase");
    }
  }
}

} // namespace

GronwallProblem::GronwallProblem(double C0, double T, Weight weight, Growth growth)
  : C0_(C0), T_(T), psi_(std::move(weight)), g_(std::move(growth))
{
  require(C0 > 0.0 && std::isfinite(C0), "C0 must be positive");
  require(T > 0.0 && std::isfinite(T), "T must be positive");
  std::visit(overloaded{[](const PowerWeight& p) {
                          require(p.C1 >= 0.0 && std::isfinite(p.C1), "C1 must be nonnegative");
                          require(p.beta > 0.0 && p.beta < 1.0, "beta must lie in (0, 1)");
                        },
                        [T](const TabulatedWeight& w) {
                          check_knots(w.t, w.values, "tabulated psi");
                          require(w.t.back() >= T, "tabulated psi must cover [0, T]");
                          for (double v : w.values) {
                            require(v >= 0.0, "psi must be nonnegative");
                          }
                        }},
             psi_);
  std::visit(overloaded{[](const PowerGrowth& p) { require(p.gamma > 0.0 && p.gamma < 1.0, "gamma must lie in (0, 1)"); },
                        [this](const TabulatedGrowth& t) {
                          check_knots(t.k, t.values, "tabulated g");
                          // 1/g of a linear interpolant through g(0) = 0 is not integrable at 0
                          require(t.values.front() > 0.0, "tabulated g needs g(0) > 0");
                          for (std::size_t i = 1; i < t.values.size(); ++i) {
                            require(t.values[i] > t.values[i - 1], "g must be strictly increasing");
                          }
                          phi_knots_.assign(1, 0.0);
                          for (std::size_t i = 1; i < t.k.size(); ++i) {
                            const quad::Integrand inv = [this](double k) { return 1.0 / this->g(k); };
                            phi_knots_.push_back(phi_knots_.back() + quad::gauss_kronrod(inv, t.k[i - 1], t.k[i], 1e-14).value);
                          }
                        }},
             g_);
}

GronwallProblem GronwallProblem::power(double C0, double C1, double beta, double gamma, double T)
{
  return GronwallProblem(C0, T, PowerWeight{C1, beta}, PowerGrowth{gamma});
}

double GronwallProblem::psi(double s) const
{
  return std::visit(overloaded{[s](const PowerWeight& p) { return p.C1 * std::pow(s, -p.beta); },
                               [s](const TabulatedWeight& w) { return linear(w.t, w.values, s); }},
                    psi_);
}

double GronwallProblem::psi_integral(double t) const
{
  require(t >= 0.0, "t must be nonnegative");
  return std::visit(overloaded{[t](const PowerWeight& p) { return p.C1 * std::pow(t, 1.0 - p.beta) / (1.0 - p.beta); },
                               [t](const TabulatedWeight& w) {
                                 double acc = 0.0;
                                 for (std::size_t i = 1; i < w.t.size() && w.t[i - 1] < t; ++i) {
                                   const double b = std::min(w.t[i], t);
                                   const double vb = linear(w.t, w.values, b);
                                   acc += 0.5 * (w.values[i - 1] + vb) * (b - w.t[i - 1]);
                                 }
                                 return acc;
                               }},
                    psi_);
}

double GronwallProblem::g(double k) const
{
  return std::visit(overloaded{[k](const PowerGrowth& p) { return std::pow(k, p.gamma); },
                               [k](const TabulatedGrowth& t) { return linear(t.k, t.values, k); }},
                    g_);
}

nlohmann::json GronwallProblem::to_json() const
{
  nlohmann::json j{{"C0", C0_}, {"T", T_}};
  std::visit(overloaded{[&](const PowerWeight& p) { j["psi"] = {{"family", "power"}, {"C1", p.C1}, {"beta", p.beta}}; },
                        [&](const TabulatedWeight& w) {
                          j["psi"] = {{"family", "tabulated"}, {"t", w.t}, {"values", w.values}};
                        }},
             psi_);
  std::visit(overloaded{[&](const PowerGrowth& p) { j["g"] = {{"family", "power"}, {"gamma", p.gamma}}; },
                        [&](const TabulatedGrowth& t) {
                          j["g"] = {{"family", "tabulated"}, {"k", t.k}, {"values", t.values}};
                        }},
             g_);
  return j;
}

GronwallProblem GronwallProblem::from_json(const nlohmann::json& j)
{
  try {
    Weight psi;
    const auto& p = j.at("psi");
    const std::string pf = p.at("family");
    if (pf == "power") {
      psi = PowerWeight{p.at("C1").get<double>(), p.at("beta").get<double>()};
    } else if (pf == "tabulated") {
      psi = TabulatedWeight{p.at("t").get<std::vector<double>>(), p.at("values").get<std::vector<double>>()};
    } else {
      throw InvalidArgument(kModule, "unknown psi family '" + pf + "'");
    }
    Growth g;
    const auto& q = j.at("g");
    const std::string gf = q.at("family");
    if (gf == "power") {
      g = PowerGrowth{q.at("gamma").get<double>()};
    } else if (gf == "tabulated") {
      g = TabulatedGrowth{q.at("k").get<std::vector<double>>(), q.at("values").get<std::vector<double>>()};
    } else {
      throw InvalidArgument(kModule, "unknown g family '" + gf + "'");
    }
    return GronwallProblem(j.at("C0").get<double>(), j.at("T").get<double>(), std::move(psi), std::move(g));
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(kModule, std::string("malformed problem: ") + e.what());
  }
}

double phi(const GronwallProblem& problem, double l)
{
  require(l >= 0.0 && !std::isnan(l), "Phi needs l >= 0");
  return std::visit(overloaded{[l](const PowerGrowth& p) { return std::pow(l, 1.0 - p.gamma) / (1.0 - p.gamma); },
                               [&](const TabulatedGrowth& t) {
                                 const std::size_t k = std::min(segment(t.k, l), t.k.size() - 1);
                                 const double start = l >= t.k.back() ? t.k.back() : t.k[k];
                                 const double base = l >= t.k.back() ? problem.phi_knots_.back() : problem.phi_knots_[k];
                                 auto inv = [&](double x) { return 1.0 / problem.g(x); };
                                 return base + quad::gauss_kronrod(inv, start, l, 1e-14).value;
                               }},
                    problem.growth());
}

double phi_inverse(const GronwallProblem& problem, double y)
{
  require(y >= 0.0 && std::isfinite(y), "Phi^{-1} needs y in [0, inf)");
  if (y == 0.0) {
    return 0.0;
  }
  double lo = 0.0, hi = 1.0;
  while (phi(problem, hi) < y) {
    lo = hi;
    hi *= 2.0;
    if (!std::isfinite(hi)) {
      throw NumericalFailure(kModule, "Phi^{-1} overflows");
    }
  }
  for (int k = 0; k < 200 && hi - lo > 1e-6 * hi; ++k) {
    const double mid = 0.5 * (lo + hi);
    (phi(problem, mid) < y ? lo : hi) = mid;
  }
  // Phi' = 1/g
  double l = 0.5 * (lo + hi);
  for (int k = 0; k < 50; ++k) {
    const double step = (phi(problem, l) - y) * problem.g(l);
    const double next = std::clamp(l - step, lo, hi);
    const bool done = std::abs(next - l) <= 1e-15 * l;
    l = next;
    if (done) {
      break;
    }
  }
  return l;
}

double gronwall_bound(const GronwallProblem& problem, double t)
{
  require(t >= 0.0 && t <= problem.T() * (1.0 + 1e-12), "t must lie in [0, T]");
  const double forcing = t == 0.0 ? 0.0 : problem.psi_integral(t);
  if (forcing == 0.0) {
    return problem.C0();
  }
  return phi_inverse(problem, phi(problem, problem.C0()) + forcing);
}

double power_case_bound(double C0, double C1, double beta, double gamma, double t)
{
  require(beta > 0.0 && beta < 1.0 && gamma > 0.0 && gamma < 1.0, "beta and gamma must lie in (0, 1)");
  require(C0 > 0.0 && C1 >= 0.0 && t >= 0.0, "need C0 > 0, C1 >= 0, t >= 0");
  if (C1 == 0.0 || t == 0.0) {
    return C0;
  }
  const double e = 1.0 - gamma;
  return std::pow(e, 1.0 / e) * std::pow(std::pow(C0, e) / e + C1 * std::pow(t, 1.0 - beta) / (1.0 - beta), 1.0 / e);
}

std::vector<double> gronwall_mesh(double T, std::size_t points)
{
  require(points >= 2, "mesh needs at least two points");
  std::vector<double> t(points);
  const double n = static_cast<double>(points - 1);
  for (std::size_t i = 0; i < points; ++i) {
    const double x = i / n;
    t[i] = T * x * x;
  }
  t.back() = T;
  return t;
}

ProductRule product_rule(const GronwallProblem& problem, const std::vector<double>& mesh)
{
  require(mesh.size() >= 2 && mesh.front() == 0.0, "mesh must start at 0");
  ProductRule rule;
  rule.lower.resize(mesh.size() - 1);
  rule.upper.resize(mesh.size() - 1);
  std::visit(overloaded{[&](const PowerWeight& p) {
                          // int_a^b s^{-beta} (b - s) / h and int_a^b s^{-beta} (s - a) / h
                          const double e1 = 1.0 - p.beta, e2 = 2.0 - p.beta;
                          for (std::size_t j = 0; j + 1 < mesh.size(); ++j) {
                            const double a = mesh[j], b = mesh[j + 1], h = b - a;
                            const double m0 = (std::pow(b, e1) - std::pow(a, e1)) / e1;
                            const double m1 = (std::pow(b, e2) - std::pow(a, e2)) / e2;
                            rule.upper[j] = p.C1 * (m1 - a * m0) / h;
                            rule.lower[j] = p.C1 * (b * m0 - m1) / h;
                          }
                        },
                        [&](const TabulatedWeight& w) {
                          for (std::size_t j = 0; j + 1 < mesh.size(); ++j) {
                            const double a = mesh[j], b = mesh[j + 1], h = b - a;
                            std::vector<double> breaks{a};
                            for (double x : w.t) {
                              if (x > a && x < b) {
                                breaks.push_back(x);
                              }
                            }
                            breaks.push_back(b);
                            auto lo = [&](double s) { return problem.psi(s) * (b - s) / h; };
                            auto hi = [&](double s) { return problem.psi(s) * (s - a) / h; };
                            rule.lower[j] = quad::piecewise(lo, breaks, 1e-13);
                            rule.upper[j] = quad::piecewise(hi, breaks, 1e-13);
                          }
                        }},
             problem.weight());
  return rule;
}

namespace {

void check_tabulated(const GronwallProblem& problem, const Tabulated& U)
{
  require(U.t.size() >= 2 && U.t.size() == U.values.size(), "tabulated U needs matching t and values");
  require(U.t.front() == 0.0, "tabulated U must start at t = 0");
  require(U.t.back() <= problem.T() * (1.0 + 1e-12), "tabulated U extends past T");
  for (std::size_t i = 0; i < U.t.size(); ++i) {
    require(std::isfinite(U.values[i]) && U.values[i] >= 0.0, "U must be finite and nonnegative");
    if (i > 0) {
      require(U.t[i] > U.t[i - 1], "U mesh must increase");
    }
  }
}

std::vector<double> rhs_with(const GronwallProblem& problem, const ProductRule& rule, const std::vector<double>& U)
{
  std::vector<double> out(U.size());
  out[0] = problem.C0();
  double acc = 0.0;
  double g_prev = problem.g(U[0]);
  for (std::size_t j = 0; j + 1 < U.size(); ++j) {
    const double g_next = problem.g(U[j + 1]);
    acc += rule.lower[j] * g_prev + rule.upper[j] * g_next;
    out[j + 1] = problem.C0() + acc;
    g_prev = g_next;
  }
  return out;
}

} // namespace

std::vector<double> hypothesis_rhs(const GronwallProblem& problem, const Tabulated& U)
{
  check_tabulated(problem, U);
  return rhs_with(problem, product_rule(problem, U.t), U.values);
}

FixedPoint fixed_point_iterate(const GronwallProblem& problem, std::size_t points, int iterations)
{
  require(iterations >= 1, "need at least one iteration");
  FixedPoint out;
  out.U.t = gronwall_mesh(problem.T(), points);
  out.U.values.assign(points, problem.C0());
  const auto rule = product_rule(problem, out.U.t);
  for (int it = 0; it < iterations; ++it) {
    auto next = rhs_with(problem, rule, out.U.values);
    double inc = 0.0;
    for (std::size_t i = 0; i < points; ++i) {
      inc = std::max(inc, std::abs(next[i] - out.U.values[i]));
    }
    out.U.values = std::move(next);
    out.increments.push_back(inc);
    if (!std::isfinite(inc)) {
      throw NumericalFailure(kModule, "fixed-point iteration diverged");
    }
  }
  return out;
}

std::string to_string(CertifyStatus s)
{
  switch (s) {
  case CertifyStatus::certified:
    return "certified";
  case CertifyStatus::bound_violated:
    return "bound_violated";
  case CertifyStatus::hypothesis_violated:
    return "hypothesis_violated";
  }
  return "unknown";
}

nlohmann::json Certificate::to_json() const
{
  return {{"schema", "bi.gronwall_certificate/1"},
          {"status", to_string(status)},
          {"passed", passed()},
          {"tolerance", tolerance},
          {"hypothesis_margin", hypothesis_margin},
          {"hypothesis_worst_t", hypothesis_worst_t},
          {"bound_margin", bound_margin},
          {"bound_worst_t", bound_worst_t},
          {"bound_gap", bound_gap}};
}

Certificate certify_bound(const GronwallProblem& problem, const Tabulated& U, double tolerance)
{
  require(tolerance >= 0.0 && std::isfinite(tolerance), "tolerance must be nonnegative");
  const auto rhs = hypothesis_rhs(problem, U);
  Certificate c;
  c.tolerance = tolerance;
  c.hypothesis_margin = c.bound_margin = c.bound_gap = kInf;
  for (std::size_t i = 0; i < U.t.size(); ++i) {
    const double h = (rhs[i] * (1.0 + tolerance) - U.values[i]) / rhs[i];
    if (h < c.hypothesis_margin) {
      c.hypothesis_margin = h;
      c.hypothesis_worst_t = U.t[i];
    }
    const double bound = gronwall_bound(problem, U.t[i]);
    const double b = (bound * (1.0 + tolerance) - U.values[i]) / bound;
    if (b < c.bound_margin) {
      c.bound_margin = b;
      c.bound_worst_t = U.t[i];
    }
    c.bound_gap = std::min(c.bound_gap, 1.0 - U.values[i] / bound);
  }
  if (c.hypothesis_margin < 0.0) {
    c.status = CertifyStatus::hypothesis_violated;
  } else if (c.bound_margin < 0.0) {
    c.status = CertifyStatus::bound_violated;
  }
  return c;
}

nlohmann::json CertificationSuite::to_json() const
{
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& d : draws) {
    rows.push_back({{"C0", d.C0},
                    {"C1", d.C1},
                    {"beta", d.beta},
                    {"gamma", d.gamma},
                    {"T", d.T},
                    {"final_increment", d.final_increment},
                    {"certificate", d.certificate.to_json()}});
  }
  return {{"schema", "bi.gronwall_suite/1"},
          {"draws", draws.size()},
          {"passed", passed},
          {"tightest_gap", tightest_gap},
          {"results", rows}};
}

CertificationSuite certification_suite(std::size_t draws, std::uint64_t seed, double tolerance, std::size_t points,
                                       int iterations)
{
  std::mt19937_64 rng(seed);
  auto uniform = [&](double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng); };
  CertificationSuite suite;
  suite.tightest_gap = kInf;
  for (std::size_t k = 0; k < draws; ++k) {
    SuiteDraw d{};
    d.gamma = uniform(0.1, 0.9);
    d.beta = uniform(0.1, 0.9);
    d.C0 = uniform(0.1, 10.0);
    d.C1 = uniform(0.0, 10.0);
    d.T = uniform(0.1, 5.0);
    const auto problem = GronwallProblem::power(d.C0, d.C1, d.beta, d.gamma, d.T);
    const auto fp = fixed_point_iterate(problem, points, iterations);
    d.final_increment = fp.increments.back();
    d.certificate = certify_bound(problem, fp.U, tolerance);
    suite.passed += d.certificate.passed();
    suite.tightest_gap = std::min(suite.tightest_gap, d.certificate.bound_gap);
    suite.draws.push_back(d);
  }
  return suite;
}

nlohmann::json SubstitutionCheck::to_json() const
{
  return {{"schema", "bi.substitution_check/1"},
          {"dim", dim},
          {"q", q},
          {"gamma", gamma},
          {"outer_exponent", outer_exponent},
          {"inner_exponent", inner_exponent},
          {"time_exponent", time_exponent},
          {"exponents_match", exponents_match},
          {"coefficients_match", coefficients_match},
          {"max_relative_defect", max_relative_defect},
          {"passed", passed}};
}

SubstitutionCheck monotonicity_substitution_check(int q, int dim)
{
  require(dim >= 3 && q > 2 * dim, "need N >= 3 and q > 2N");
  using boost::multiprecision::cpp_rational;
  SubstitutionCheck c;
  c.dim = dim;
  c.q = q;
  // the bound with gamma = 1/p = (q-2)/q and C1 = c(rho) t, exponent by exponent
  const cpp_rational gamma(q - 2, q);
  const cpp_rational beta(2 * dim, q);
  const cpp_rational one_minus_gamma = 1 - gamma;
  const cpp_rational outer = 1 / one_minus_gamma;
  // C1 t^{1-beta} with C1 = c t
  const cpp_rational time = (1 - beta) + 1;
  c.gamma = gamma.str();
  c.outer_exponent = outer.str();
  c.inner_exponent = one_minus_gamma.str();
  c.time_exponent = time.str();
  // display: (2/q)^{q/2} [q/2 omega^{2/q} + c/(1-beta) t^{2-beta}]^{q/2}
  const cpp_rational half_q(q, 2), two_over_q(2, q);
  c.exponents_match = outer == half_q && one_minus_gamma == two_over_q && time == 2 - beta;
  // prefactor base (1 - gamma) and the coefficient 1/(1 - gamma) of omega^{1-gamma}
  c.coefficients_match = one_minus_gamma == two_over_q && 1 / one_minus_gamma == half_q;

  const double omega = unit_ball_volume(dim);
  const double g = static_cast<double>(gamma), b = static_cast<double>(beta);
  const double qd = q;
  for (double crho : {1e-3, 0.5, 3.0, 40.0}) {
    for (double t : {1e-4, 0.1, 1.0, 2.5}) {
      const double bound = power_case_bound(omega, crho * t, b, g, t);
      const double display = std::pow(2.0 / qd, qd / 2.0) *
                             std::pow(qd / 2.0 * std::pow(omega, 2.0 / qd) + crho / (1.0 - b) * std::pow(t, 2.0 - b), qd / 2.0);
      c.max_relative_defect = std::max(c.max_relative_defect, std::abs(bound / display - 1.0));
    }
  }
  c.passed = c.exponents_match && c.coefficients_match && c.max_relative_defect <= 1e-13;
  return c;
}

} // namespace bi
