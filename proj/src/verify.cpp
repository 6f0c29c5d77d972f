#include "bi/verify.hpp"

#include "bi/error.hpp"
#include "bi/geometry.hpp"
#include "bi/minimizer.hpp"
#include "bi/quadrature.hpp"

#include <boost/math/interpolators/cardinal_cubic_b_spline.hpp>
#include <boost/math/tools/minima.hpp>
#include <boost/math/tools/roots.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numbers>
#include <random>

namespace bi {

namespace {

constexpr const char* kModule = "verify";
constexpr double kMinV = 1e-3;

void require(bool ok, const char* what)
{
  if (!ok) {
    throw InvalidArgument(kModule, what);
  }
}

void check_estimate_parameters(int dim, double R, double gamma, double C, double q)
{
  require(R > 0.0 && std::isfinite(R), "radius must be positive");
  require(gamma > 0.0 && gamma < 1.0 / dim, "gamma must lie in (0, 1/N)");
  require(C >= 0.0 && std::isfinite(C), "C must be nonnegative");
  require(q > 2.0 * dim && std::isfinite(q), "the estimate needs q > 2N");
}

double sq(double x) { return x * x; }

/// Solid integrals of radial functions over K_R(x0) for a radial potential u,
/// with x0 = a e_1, in polar coordinates about x0.
class LorentzBall
{
public:
  LorentzBall(const RadialProfile& p, double a) : p_(p), a_(a), u0_(p.potential_at(a)) {}

  double radius_at(double t, double c) const { return std::sqrt(std::max(a_ * a_ + t * t + 2.0 * a_ * t * c, 0.0)); }

  /// t at which the ray with cos(angle) = c leaves K_R
  double exit(double R, double c) const
  {
    auto excess = [&](double t) { return t * t - sq(p_.potential_at(radius_at(t, c)) - u0_) - R * R; };
    double lo = R, hi = R;
    double f_lo = excess(lo);
    if (f_lo >= 0.0) {
      return R;
    }
    double f_hi = f_lo;
    while (f_hi < 0.0) {
      lo = hi;
      f_lo = f_hi;
      hi *= 2.0;
      f_hi = excess(hi);
      if (hi > 1e6 * R) {
        throw NumericalFailure(kModule, "Lorentz ball is unbounded along a ray");
      }
    }
    std::uintmax_t iterations = 100;
    auto [x0, x1] = boost::math::tools::toms748_solve(excess, lo, hi, f_lo, f_hi,
                                                      boost::math::tools::eps_tolerance<double>(50), iterations);
    return 0.5 * (x0 + x1);
  }

  template <class F>
  double integrate(double R, F&& f) const
  {
    const int n = p_.dim;
    auto shell = [&](double angle) {
      const double c = std::cos(angle);
      const double top = exit(R, c);
      auto radial = [&](double t) { return f(radius_at(t, c)) * std::pow(t, n - 1); };
      return std::pow(std::sin(angle), n - 2) * quad::gauss_kronrod(radial, 0.0, top, 1e-9, 10).value;
    };
    return unit_sphere_area(n - 1) * quad::gauss_kronrod(shell, 0.0, std::numbers::pi, 1e-8, 10).value;
  }

private:
  const RadialProfile& p_;
  double a_;
  double u0_;
};

/// Cubic spline of a radial function on [lo, hi].
class RadialTable
{
public:
  template <class F>
  RadialTable(double lo, double hi, int points, F&& f) : lo_(lo), hi_(hi)
  {
    std::vector<double> values(points);
    const double step = (hi - lo) / (points - 1);
    for (int k = 0; k < points; ++k) {
      values[k] = f(lo + k * step);
    }
    min_ = *std::min_element(values.begin(), values.end());
    spline_ = std::make_unique<boost::math::interpolators::cardinal_cubic_b_spline<double>>(values.begin(),
                                                                                            values.end(), lo, step);
  }
  double operator()(double r) const { return (*spline_)(std::clamp(r, lo_, hi_)); }
  double min() const { return min_; }

private:
  double lo_, hi_, min_;
  std::unique_ptr<boost::math::interpolators::cardinal_cubic_b_spline<double>> spline_;
};

EstimateReport base_report(std::span<const double> x0, double R, double gamma, double C, double q, int dim)
{
  EstimateReport r;
  r.center.assign(x0.begin(), x0.end());
  r.radius = R;
  r.gamma = gamma;
  r.C = C;
  r.q = q;
  r.beta = 2.0 * dim / q;
  return r;
}

void finish(EstimateReport& r, int dim, double v0, double volume_integral)
{
  const double damp = std::exp(-r.gamma / 4.0);
  r.term_lhs = unit_ball_volume(dim) * std::pow(v0, r.gamma);
  r.term_volume = damp * std::pow(r.radius, -dim) * volume_integral;
  r.term_datum = datum_term(dim, r.q, r.c_rho, r.radius);
  r.term_hessian = r.C * std::pow(r.radius, 2 - dim) * damp * r.hessian_integral;
  r.margin = r.term_lhs - (r.term_volume - r.term_datum + r.term_hessian);
  if (r.min_v < kMinV) {
    throw ConstraintViolation(kModule, "solution is not strictly spacelike on the Lorentz ball (v = " +
                                         std::to_string(r.min_v) + ")");
  }
}

double lorentz_sq(double dist_sq, double du) { return dist_sq - du * du; }

} // namespace

std::vector<char> lorentz_ball_mask(const GridField& u, std::span<const double> x0, double R, double tolerance)
{
  const auto& grid = u.grid();
  const int dim = grid.dim();
  require(x0.size() == static_cast<std::size_t>(dim), "centre has the wrong dimension");
  require(R > 0.0, "radius must be positive");
  const double u0 = interpolate(grid, u.values(), x0);
  std::vector<char> mask(grid.cell_count(), 0);
  std::vector<double> x(dim);
  const auto values = u.values();
  const unsigned corners = grid.corners_per_cell();
  for (std::size_t c = 0; c < grid.cell_count(); ++c) {
    grid.cell_center(c, x);
    double uc = 0.0;
    for (unsigned k = 0; k < corners; ++k) {
      uc += values[grid.cell_bases()[c] + grid.corner_offset(k)];
    }
    uc /= corners;
    double d2 = 0.0;
    for (int i = 0; i < dim; ++i) {
      d2 += sq(x[i] - x0[i]);
    }
    const double du = uc - u0;
    if (std::abs(du) > std::sqrt(d2) * (1.0 + tolerance) + 1e-14) {
      throw ConstraintViolation(kModule, "field is not weakly spacelike: |u(x) - u(x0)| > |x - x0|");
    }
    mask[c] = lorentz_sq(d2, du) < R * R;
  }
  return mask;
}

std::vector<char> euclidean_ball_mask(const BoxGrid& grid, std::span<const double> x0, double R)
{
  require(x0.size() == static_cast<std::size_t>(grid.dim()), "centre has the wrong dimension");
  std::vector<char> mask(grid.cell_count(), 0);
  std::vector<double> x(grid.dim());
  for (std::size_t c = 0; c < grid.cell_count(); ++c) {
    grid.cell_center(c, x);
    double d2 = 0.0;
    for (int i = 0; i < grid.dim(); ++i) {
      d2 += sq(x[i] - x0[i]);
    }
    mask[c] = d2 < R * R;
  }
  return mask;
}

nlohmann::json EstimateReport::to_json() const
{
  return {{"schema", "bi.estimate_report/1"},
          {"center", center},
          {"radius", radius},
          {"gamma", gamma},
          {"C", C},
          {"q", q},
          {"beta", beta},
          {"c_rho", c_rho},
          {"term_lhs", term_lhs},
          {"term_volume", term_volume},
          {"term_datum", term_datum},
          {"term_hessian", term_hessian},
          {"hessian_integral", hessian_integral},
          {"min_v", min_v},
          {"margin", margin}};
}

double datum_term(int dim, double q, double c_rho, double R)
{
  require(q > 2.0 * dim, "the estimate needs q > 2N");
  if (c_rho == 0.0) {
    return 0.0;
  }
  const double beta = 2.0 * dim / q;
  const double p = 0.5 * (q - 2.0);
  const double A = 0.5 * q * std::pow(unit_ball_volume(dim), 2.0 / q);
  const double B = c_rho / (1.0 - beta);
  // (2/q)^p folded into the bracket to keep the power in range
  auto integrand = [&](double s) { return std::pow(s, -beta) * std::pow((A + B * std::pow(s, 2.0 - beta)) * 2.0 / q, p); };
  return c_rho * R * quad::tanh_sinh(integrand, 0.0, R, 1e-12).value;
}

EstimateReport evaluate_estimate(const RadialProfile& u, std::span<const double> x0, double R, double gamma, double C,
                                 double q)
{
  const int dim = u.dim;
  require(x0.size() == static_cast<std::size_t>(dim), "centre has the wrong dimension");
  check_estimate_parameters(dim, R, gamma, C, q);
  auto r = base_report(x0, R, gamma, C, q, dim);
  r.c_rho = 2.25 * sq(u.density.lq_norm(q));
  require(std::isfinite(r.c_rho), "density is not in L^q");
  double a = 0.0;
  for (double x : x0) {
    a += x * x;
  }
  a = std::sqrt(a);
  const LorentzBall ball(u, a);
  const double v0 = u.v_at(a);
  // l(x, x0) >= |x - x0| min v, so K_R lies within R / min v of x0
  const double vmin = *std::min_element(u.v.begin(), u.v.end());
  require(vmin > 0.0, "radial solution is not strictly spacelike");
  const double reach = R / vmin * (1.0 + 1e-6);
  const double lo = std::max(a - reach, 0.0), hi = a + reach;
  const int points = 4001;
  const RadialTable v_table(lo, hi, points, [&](double rad) { return u.v_at(rad); });
  const RadialTable hessian(lo, hi, points, [&](double rad) { return u.hessian_frobenius_sq(rad); });
  r.min_v = std::min(v0, v_table.min());
  const double volume = ball.integrate(R, [&](double rad) { return std::pow(v_table(rad), gamma + 1.0); });
  r.hessian_integral = ball.integrate(0.5 * R, [&](double rad) { return hessian(rad); });
  finish(r, dim, v0, volume);
  return r;
}

EstimateReport evaluate_estimate(const GridField& u, const GridDensity& rho, std::span<const double> x0, double R,
                                 double gamma, double C, double q)
{
  const auto& grid = u.grid();
  const int dim = grid.dim();
  require(rho.grid() == grid, "field and density live on different grids");
  require(x0.size() == static_cast<std::size_t>(dim), "centre has the wrong dimension");
  check_estimate_parameters(dim, R, gamma, C, q);
  auto r = base_report(x0, R, gamma, C, q, dim);
  r.c_rho = 2.25 * sq(rho.lq_norm(q));

  const auto s = cell_gradient_sq(grid, u.values());
  const auto mask = lorentz_ball_mask(u, x0, R);
  const double h = grid.spacing();
  std::vector<double> x(dim);
  // cell containing x0
  std::vector<int> idx(dim);
  for (int i = 0; i < dim; ++i) {
    idx[i] = std::clamp(static_cast<int>(std::floor((x0[i] + grid.extent()) / h)), 0, grid.points() - 2);
  }
  const std::size_t base = grid.node_at(idx);
  const auto& bases = grid.cell_bases();
  const std::size_t home = static_cast<std::size_t>(std::lower_bound(bases.begin(), bases.end(), base) - bases.begin());
  auto v_of = [](double sc) { return std::sqrt(std::max(1.0 - sc, 0.0)); };
  const double v0 = v_of(s[home]);
  r.min_v = v0;

  double volume = 0.0;
  for (std::size_t c = 0; c < grid.cell_count(); ++c) {
    if (!mask[c]) {
      continue;
    }
    std::vector<int> ci(dim);
    grid.node_index(bases[c], ci);
    for (int i = 0; i < dim; ++i) {
      require(ci[i] > 0 && ci[i] < grid.points() - 2, "Lorentz ball reaches the boundary cells");
    }
    const double v = v_of(s[c]);
    r.min_v = std::min(r.min_v, v);
    volume += std::pow(v, gamma + 1.0);
  }
  volume *= grid.cell_volume();

  const double u0 = interpolate(grid, u.values(), x0);
  double hess = 0.0;
  for (std::size_t n = 0; n < grid.node_count(); ++n) {
    grid.node_position(n, x);
    double d2 = 0.0;
    for (int i = 0; i < dim; ++i) {
      d2 += sq(x[i] - x0[i]);
    }
    if (lorentz_sq(d2, u[n] - u0) < 0.25 * R * R) {
      require(!grid.is_boundary(n), "Lorentz ball reaches the boundary nodes");
      hess += hessian_frobenius_sq(u, n);
    }
  }
  r.hessian_integral = hess * grid.cell_volume();
  finish(r, dim, v0, volume);
  return r;
}

RadialProfile mollified_power_solution(int dim, double beta)
{
  require(beta < 0.0 && beta > -1.0, "calibration data use beta in (-1, 0)");
  const auto base = RadialDensity::power(dim, dim - 1.0 - beta, beta, 1.0, 0.25);
  return solve_radial(RadialDensity::mollified(base, 0.1, 201));
}

std::vector<EstimateSample> estimate_samples(std::size_t count, std::uint64_t seed)
{
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<EstimateSample> out(count);
  for (auto& s : out) {
    s.offset = 1.5 * unit(rng);
    s.radius = 0.02 * std::pow(50.0, unit(rng));
  }
  return out;
}

nlohmann::json Calibration::to_json() const
{
  return {{"gamma", gamma}, {"C", C}, {"C_limit", C_limit}, {"instances", instances}};
}

Calibration calibrate_estimate(const std::vector<RadialProfile>& suite, double gamma, double q, int offsets, int radii)
{
  require(!suite.empty(), "calibration suite is empty");
  require(offsets >= 1 && radii >= 2, "calibration lattice is too small");
  Calibration cal;
  cal.gamma = gamma;
  cal.C_limit = std::numeric_limits<double>::infinity();
  for (const auto& p : suite) {
    for (int i = 0; i < offsets; ++i) {
      std::vector<double> x0(p.dim, 0.0);
      x0[0] = offsets == 1 ? 0.0 : 1.5 * i / (offsets - 1);
      for (int j = 0; j < radii; ++j) {
        const double R = 0.02 * std::pow(50.0, static_cast<double>(j) / (radii - 1));
        const auto r = evaluate_estimate(p, x0, R, gamma, 0.0, q);
        ++cal.instances;
        const double unit = std::pow(R, 2 - p.dim) * std::exp(-gamma / 4.0) * r.hessian_integral;
        if (unit > 0.0) {
          cal.C_limit = std::min(cal.C_limit, r.margin / unit);
        }
      }
    }
  }
  cal.C = std::isfinite(cal.C_limit) ? std::max(0.9 * cal.C_limit, 0.0) : 1.0;
  return cal;
}

double talenti_constant(int dim, double k)
{
  require(k > 1.0 && k < dim, "Sobolev exponent must lie in (1, N)");
  const double n = dim;
  const double ratio = std::tgamma(1.0 + n / 2.0) * std::tgamma(n) / (std::tgamma(n / k) * std::tgamma(1.0 + n - n / k));
  return std::pow(std::numbers::pi, -0.5) * std::pow(n, -1.0 / k) * std::pow((k - 1.0) / (n - k), 1.0 - 1.0 / k) *
         std::pow(ratio, 1.0 / n);
}

double morrey_constant(int dim, double s)
{
  require(s > dim, "Morrey exponent must exceed N");
  const double n = dim;
  const double omega = unit_ball_volume(dim);
  const double sp = s / (s - 1.0);
  // |u(x)| <= |u_B| + 2^N/(N omega) int_B |Du| |x-y|^{1-N}, B the unit ball about x
  const double mean = std::pow(omega, -1.0 / s);
  const double kernel = std::pow(n * omega / (n - (n - 1.0) * sp), 1.0 / sp);
  return std::max(mean, std::pow(2.0, n) / (n * omega) * kernel);
}

void SmallDataInput::validate() const
{
  require(dim >= 3, "dimension must be at least 3");
  require(q > 2.0 * dim && std::isfinite(q), "q must exceed 2N");
  const double two_star = 2.0 * dim / (dim + 2.0);
  require(m >= 1.0 && m <= two_star * (1.0 + 1e-15), "m must lie in [1, 2N/(N+2)]");
  require(norm_q >= 0.0 && norm_m >= 0.0 && std::isfinite(norm_q) && std::isfinite(norm_m),
          "norms must be finite and nonnegative");
  require(gamma <= 0.0 || gamma < 1.0 / dim, "gamma must lie in (0, 1/N)");
  require(morrey_s <= 0.0 || morrey_s > dim, "Morrey exponent must exceed N");
}

nlohmann::json SmallDataInput::to_json() const
{
  return {{"dim", dim}, {"m", m}, {"q", q}, {"norm_q", norm_q}, {"norm_m", norm_m}, {"gamma", gamma}, {"morrey_s", morrey_s}};
}

nlohmann::json SmallDataReport::to_json() const
{
  nlohmann::json j{{"schema", "bi.small_data_report/1"},
                   {"input", input.to_json()},
                   {"gamma", gamma},
                   {"beta", beta},
                   {"c_rho", c_rho},
                   {"sobolev_exponent", sobolev_exponent},
                   {"sobolev_constant", sobolev_constant},
                   {"pairing_bound", pairing_bound},
                   {"c1", c1},
                   {"c2", c2},
                   {"volume_term", volume_term},
                   {"datum_term", datum_term},
                   {"lower_bound", lower_bound},
                   {"delta", delta ? nlohmann::json(*delta) : nlohmann::json(nullptr)},
                   {"gradient_bound", gradient_bound ? nlohmann::json(*gradient_bound) : nlohmann::json(nullptr)}};
  if (input.m == 1.0) {
    j["morrey_s"] = morrey_s;
    j["morrey_constant"] = morrey_constant;
    j["m1_smallness"] = m1_smallness;
  }
  return j;
}

SmallDataReport small_data_report(const SmallDataInput& input)
{
  input.validate();
  SmallDataReport r;
  r.input = input;
  const int dim = input.dim;
  const double n = dim, m = input.m, q = input.q;
  const double omega = unit_ball_volume(dim);
  r.gamma = input.gamma > 0.0 ? input.gamma : 1.0 / (2.0 * n);
  r.beta = 2.0 * n / q;
  r.c_rho = 2.25 * sq(input.norm_q);

  if (m > 1.0) {
    r.sobolev_exponent = m * n / ((n + 1.0) * m - n);
    r.sobolev_constant = talenti_constant(dim, r.sobolev_exponent);
    const double m_star = n * m / (n - m);
    r.pairing_bound = std::pow(2.0, ((n + 1.0) * m - n) / (n - m)) * std::pow(r.sobolev_constant * input.norm_m, m_star);
  } else {
    const double s = input.morrey_s > 0.0 ? input.morrey_s : n + 1.0;
    r.morrey_s = s;
    r.sobolev_exponent = n * s / (n + s);
    r.sobolev_constant = talenti_constant(dim, r.sobolev_exponent);
    r.morrey_constant = morrey_constant(dim, s);
    const double cbar = r.morrey_constant * (r.sobolev_constant + 1.0);
    r.m1_smallness = 2.0 * cbar * input.norm_m <= 1.0;
    r.pairing_bound = std::pow(2.0, 1.0 / (s - 1.0)) * std::pow(cbar * input.norm_m, s / (s - 1.0));
  }
  // Steps 1 and 2 at R = 1
  r.c1 = omega + r.pairing_bound;
  r.c2 = std::pow(omega, r.gamma + 2.0) / std::pow(r.c1, 1.0 + r.gamma);

  // Step 3 at R = 1, divided by omega_N
  r.volume_term = std::exp(-r.gamma / 4.0) * std::pow(omega, r.gamma + 1.0) / std::pow(r.c1, 1.0 + r.gamma);
  const double p = 0.5 * (q - 2.0);
  const double first = std::pow(omega, -2.0 / q) / (1.0 - r.beta);
  const double second = std::pow(r.c_rho * 2.0 / q / (1.0 - r.beta), p) / (omega * (q - n - 1.0));
  r.datum_term = r.c_rho == 0.0 ? 0.0 : std::pow(2.0, 0.5 * (q - 4.0)) * r.c_rho * (first + second);
  r.lower_bound = r.volume_term - r.datum_term;
  if (r.lower_bound > 0.0) {
    r.delta = std::pow(r.lower_bound, 1.0 / r.gamma);
    r.gradient_bound = std::sqrt((1.0 - *r.delta) * (1.0 + *r.delta));
  }
  return r;
}

nlohmann::json ThresholdResult::to_json() const
{
  return {{"multiplier", multiplier}, {"c3", c3}, {"report", report.to_json()}};
}

ThresholdResult small_data_threshold(const SmallDataInput& shape)
{
  shape.validate();
  require(shape.norm_q > 0.0 || shape.norm_m > 0.0, "datum shape has zero norms");
  auto at = [&](double t) {
    SmallDataInput in = shape;
    in.norm_q *= t;
    in.norm_m *= t;
    return small_data_report(in);
  };
  double lo = 0.0, hi = 1.0;
  while (at(hi).lower_bound > 0.0) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e300) {
      throw NumericalFailure(kModule, "small-data bound stays positive for every multiplier");
    }
  }
  while (at(lo).lower_bound <= 0.0) {
    hi = lo > 0.0 ? lo : hi;
    lo = (lo > 0.0 ? lo : hi) * 0.5;
    if (lo < 1e-300) {
      throw NumericalFailure(kModule, "small-data bound is never positive");
    }
  }
  for (int k = 0; k < 200 && hi - lo > 1e-14 * hi; ++k) {
    const double mid = 0.5 * (lo + hi);
    (at(mid).lower_bound > 0.0 ? lo : hi) = mid;
  }
  ThresholdResult out;
  out.multiplier = lo;
  out.c3 = lo * (shape.norm_q + shape.norm_m);
  out.report = at(lo);
  return out;
}

RegularizedOperator::RegularizedOperator(double epsilon) : epsilon_(epsilon)
{
  require(epsilon > 0.0 && epsilon < 1.0, "epsilon must lie in (0, 1)");
}

// On [1 - eps, 1 - eps/2] the cutoff is a + d P(t), t = (r - a)/d, with
// P(t) = t + 4t^3 - 7t^4 + 3t^5: P(0) = 0, P'(0) = 1, P''(0) = 0,
// P(1) = 1, P'(1) = P''(1) = 0 and P'(t) = (1 - t)^2 (15t^2 + 2t + 1) >= 0.
double RegularizedOperator::cutoff(double r) const
{
  const double a = 1.0 - epsilon_, d = 0.5 * epsilon_;
  if (r <= a) {
    return r;
  }
  if (r >= a + d) {
    return a + d;
  }
  const double t = (r - a) / d;
  return a + d * t * (1.0 + t * t * (4.0 + t * (-7.0 + 3.0 * t)));
}

double RegularizedOperator::cutoff_derivative(double r) const
{
  const double a = 1.0 - epsilon_, d = 0.5 * epsilon_;
  if (r <= a) {
    return 1.0;
  }
  if (r >= a + d) {
    return 0.0;
  }
  const double t = (r - a) / d;
  return sq(1.0 - t) * (15.0 * t * t + 2.0 * t + 1.0);
}

double RegularizedOperator::f(double r) const
{
  const double c = cutoff(r);
  return 1.0 / std::sqrt((1.0 - c) * (1.0 + c));
}

double RegularizedOperator::f_derivative(double r) const
{
  const double c = cutoff(r);
  return c * cutoff_derivative(r) * std::pow((1.0 - c) * (1.0 + c), -1.5);
}

double RegularizedOperator::growth_ratio(double r, int dim) const
{
  const double fr = f(r);
  const double radial = fr + f_derivative(r) * r;
  return fr + std::sqrt(radial * radial + (dim - 1.0) * fr * fr);
}

double RegularizedOperator::growth_constant(int dim) const
{
  // the ratio only varies on [0, 1 - eps/2]; scan, then refine around the best node
  const double top = 1.0 - 0.5 * epsilon_;
  const int nodes = 4000;
  int best = 0;
  double best_value = 0.0;
  for (int k = 0; k <= nodes; ++k) {
    const double value = growth_ratio(top * k / nodes, dim);
    if (value > best_value) {
      best_value = value;
      best = k;
    }
  }
  const double lo = top * std::max(best - 1, 0) / nodes;
  const double hi = top * std::min(best + 1, nodes) / nodes;
  auto [arg, neg] = boost::math::tools::brent_find_minima([&](double r) { return -growth_ratio(r, dim); }, lo, hi, 50);
  (void)arg;
  return std::max(best_value, -neg);
}

double RegularizedOperator::plateau_bound() const { return 1.0 / std::sqrt(epsilon_ - 0.25 * epsilon_ * epsilon_); }

std::vector<double> a_eps(const RegularizedOperator& op, std::span<const double> z)
{
  double norm = 0.0;
  for (double x : z) {
    norm += x * x;
  }
  const double fr = op.f(std::sqrt(norm));
  std::vector<double> out(z.begin(), z.end());
  for (double& x : out) {
    x *= fr;
  }
  return out;
}

std::vector<double> a_eps_jacobian(const RegularizedOperator& op, std::span<const double> z)
{
  const std::size_t n = z.size();
  double norm = 0.0;
  for (double x : z) {
    norm += x * x;
  }
  norm = std::sqrt(norm);
  const double fr = op.f(norm);
  const double shear = norm > 0.0 ? op.f_derivative(norm) / norm : 0.0;
  std::vector<double> J(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      J[i * n + j] = shear * (z[i] * z[j]) + (i == j ? fr : 0.0);
    }
  }
  return J;
}

nlohmann::json StructureReport::to_json() const
{
  return {{"schema", "bi.structure_report/1"},
          {"epsilon", epsilon},
          {"dim", dim},
          {"samples", samples},
          {"min_ellipticity", min_ellipticity},
          {"max_fd_error", max_fd_error},
          {"max_asymmetry", max_asymmetry},
          {"max_raw_flux_error", max_raw_flux_error},
          {"L_empirical", L_empirical},
          {"L_analytic", L_analytic},
          {"plateau_bound", plateau_bound}};
}

StructureReport check_structure_conditions(const RegularizedOperator& op, std::size_t samples, int dim,
                                           std::uint64_t seed)
{
  require(samples >= 1, "need at least one sample");
  require(dim >= 1, "dimension must be positive");
  StructureReport rep;
  rep.epsilon = op.epsilon();
  rep.dim = dim;
  rep.samples = samples;
  rep.min_ellipticity = std::numeric_limits<double>::infinity();
  rep.plateau_bound = op.plateau_bound();
  rep.L_analytic = op.growth_constant(dim);

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> length(0.0, 2.5);
  const std::size_t n = dim;
  std::vector<double> z(n), lam(n), zp(n), zm(n);
  auto unit_vector = [&](std::vector<double>& w) {
    double s = 0.0;
    for (double& x : w) {
      x = normal(rng);
      s += x * x;
    }
    s = std::sqrt(s);
    for (double& x : w) {
      x /= s;
    }
  };
  for (std::size_t k = 0; k < samples; ++k) {
    unit_vector(z);
    const double r = k == 0 ? 0.0 : length(rng);
    for (double& x : z) {
      x *= r;
    }
    unit_vector(lam);
    const double scale = std::exp(normal(rng));
    for (double& x : lam) {
      x *= scale;
    }
    const auto J = a_eps_jacobian(op, z);

    double quad_form = 0.0, lam_sq = 0.0, frob = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      lam_sq += lam[i] * lam[i];
      for (std::size_t j = 0; j < n; ++j) {
        quad_form += J[i * n + j] * lam[i] * lam[j];
        frob += sq(J[i * n + j]);
        rep.max_asymmetry = std::max(rep.max_asymmetry, std::abs(J[i * n + j] - J[j * n + i]));
      }
    }
    rep.min_ellipticity = std::min(rep.min_ellipticity, quad_form / lam_sq);

    // central differences, column by column
    const double h = 1e-6;
    double jscale = 0.0;
    for (double x : J) {
      jscale = std::max(jscale, std::abs(x));
    }
    for (std::size_t j = 0; j < n; ++j) {
      zp = z;
      zm = z;
      zp[j] += h;
      zm[j] -= h;
      const auto ap = a_eps(op, zp), am = a_eps(op, zm);
      for (std::size_t i = 0; i < n; ++i) {
        const double fd = (ap[i] - am[i]) / (2.0 * h);
        rep.max_fd_error = std::max(rep.max_fd_error, std::abs(fd - J[i * n + j]) / jscale);
      }
    }

    if (r > 0.0) {
      const auto a = a_eps(op, z);
      double anorm = 0.0;
      for (double x : a) {
        anorm += x * x;
      }
      rep.L_empirical = std::max(rep.L_empirical, (std::sqrt(anorm) + std::sqrt(frob) * r) / r);
    }
    if (r <= 1.0 - op.epsilon()) {
      double zz = 0.0;
      for (double x : z) {
        zz += x * x;
      }
      const double raw = 1.0 / std::sqrt(1.0 - zz);
      const auto a = a_eps(op, z);
      for (std::size_t i = 0; i < n; ++i) {
        rep.max_raw_flux_error =
          std::max(rep.max_raw_flux_error, std::abs(a[i] - z[i] * raw) / std::max(std::abs(z[i] * raw), 1e-300));
      }
    }
  }
  if (rep.min_ellipticity < 1.0 - 1e-10) {
    throw NumericalFailure(kModule, "ellipticity violated: (da l, l)/|l|^2 = " + std::to_string(rep.min_ellipticity));
  }
  return rep;
}

nlohmann::json ScalingReport::to_json() const
{
  return {{"schema", "bi.scaling_report/1"},
          {"t", t},
          {"q", q},
          {"dim", dim},
          {"norm_ratio", norm_ratio},
          {"norm_expected", norm_expected},
          {"norm_defect", norm_defect},
          {"energy_ratio", energy_ratio},
          {"energy_expected", energy_expected},
          {"energy_defect", energy_defect},
          {"radial_norm_ratio", radial_norm_ratio},
          {"radial_norm_defect", radial_norm_defect}};
}

GridField random_admissible_field(const BoxGrid& grid, std::uint64_t seed)
{
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uniform(-1.0, 1.0);
  const int dim = grid.dim();
  const double L = grid.extent();
  struct Mode
  {
    std::vector<double> k;
    double phase, amplitude;
  };
  std::vector<Mode> modes(4);
  for (auto& md : modes) {
    md.k.resize(dim);
    for (double& x : md.k) {
      x = 3.0 * uniform(rng) / L;
    }
    md.phase = 3.0 * uniform(rng);
    md.amplitude = uniform(rng);
  }
  GridField u(grid);
  std::vector<double> x(dim);
  for (std::size_t n = 0; n < grid.node_count(); ++n) {
    grid.node_position(n, x);
    double envelope = 1.0;
    for (int i = 0; i < dim; ++i) {
      envelope *= std::cos(0.5 * std::numbers::pi * x[i] / L);
    }
    double wave = 0.0;
    for (const auto& md : modes) {
      double arg = md.phase;
      for (int i = 0; i < dim; ++i) {
        arg += md.k[i] * x[i];
      }
      wave += md.amplitude * std::sin(arg);
    }
    u[n] = L * envelope * wave;
  }
  u = u.with_zero_boundary();
  const double sup = sup_gradient_norm(gradient(u));
  if (sup > 0.0) {
    for (double& v : u.values()) {
      v *= 0.9 / sup;
    }
  }
  return u;
}

ScalingReport scaling_check(const RadialDensity& rho, double t, const BoxGrid& grid, double q, std::uint64_t seed)
{
  require(t > 0.0 && std::isfinite(t), "scaling factor must be positive");
  require(q >= 1.0 && std::isfinite(q), "q must be at least 1");
  require(rho.dim() == grid.dim(), "density and grid dimensions differ");
  const int dim = grid.dim();
  ScalingReport r;
  r.t = t;
  r.q = q;
  r.dim = dim;

  const BoxGrid scaled_grid(dim, grid.extent() * t, grid.points());
  const auto rho_t = rho.scaled(t);
  const auto g = sample_to_grid(rho, grid);
  const auto g_t = sample_to_grid(rho_t, scaled_grid);
  r.norm_expected = std::pow(t, dim - q);
  r.norm_ratio = std::pow(g_t.lq_norm(q) / g.lq_norm(q), q);
  r.norm_defect = std::abs(r.norm_ratio / r.norm_expected - 1.0);
  r.radial_norm_ratio = std::pow(rho_t.lq_norm(q) / rho.lq_norm(q), q);
  r.radial_norm_defect = std::abs(r.radial_norm_ratio / r.norm_expected - 1.0);

  const auto w = random_admissible_field(grid, seed);
  GridField w_t(scaled_grid);
  for (std::size_t n = 0; n < grid.node_count(); ++n) {
    w_t[n] = t * w[n];
  }
  r.energy_expected = std::pow(t, dim);
  r.energy_ratio = energy(w_t, g_t) / energy(w, g);
  r.energy_defect = std::abs(r.energy_ratio / r.energy_expected - 1.0);
  return r;
}

} // namespace bi
