#include "bi/charge.hpp"

#include "bi/error.hpp"
#include "bi/geometry.hpp"
#include "bi/quadrature.hpp"

#include <boost/math/interpolators/cardinal_cubic_b_spline.hpp>
#include <boost/math/special_functions/beta.hpp>

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <functional>
#include <numbers>

namespace bi {

namespace {

template <class... Ts>
struct overloaded : Ts...
{
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

void require(bool ok, const char* what)
{
  if (!ok) {
    throw InvalidArgument("charge", what);
  }
}

// 1 on t <= 0, 0 on t >= 1, C^2 in between
double smooth_fall(double t)
{
  if (t <= 0.0) {
    return 1.0;
  }
  if (t >= 1.0) {
    return 0.0;
  }
  return 1.0 - t * t * t * (10.0 - 15.0 * t + 6.0 * t * t);
}

double integrate_pieces(const quad::Integrand& f, std::vector<double> breaks, double rel_tol, bool endpoint_singular = true)
{
  std::sort(breaks.begin(), breaks.end());
  breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
    if (breaks[i + 1] > breaks[i]) {
      total += endpoint_singular ? quad::tanh_sinh(f, breaks[i], breaks[i + 1], rel_tol).value
                                 : quad::gauss_kronrod(f, breaks[i], breaks[i + 1], rel_tol).value;
    }
  }
  return total;
}

// Fraction of the unit sphere S^{N-1} at distance < t from the point r e_1,
// restricted to the sphere of radius s: the cap cos(theta) > c with
// c = (s^2 + r^2 - t^2) / (2 s r). 1 - c^2 is factored to avoid cancellation.
double cap_fraction(int dim, double s, double r, double t)
{
  const double a = t - s + r, b = t + s - r, c1 = s + r - t, d = s + r + t;
  if (a <= 0.0 || b <= 0.0) {
    return 0.0;
  }
  if (c1 <= 0.0) {
    return 1.0;
  }
  const double x = std::min(1.0, (a * b) / (2.0 * s * r) * (c1 * d) / (2.0 * s * r));
  const double half = 0.5 * boost::math::ibeta(0.5 * (dim - 1), 0.5, x);
  return s * s + r * r >= t * t ? half : 1.0 - half;
}

std::function<double(double)> make_interpolant(const std::vector<double>& table, double step)
{
  auto spline = std::make_shared<boost::math::interpolators::cardinal_cubic_b_spline<double>>(
    table.begin(), table.end(), 0.0, step, 0.0, 0.0);
  return [spline](double r) { return (*spline)(r); };
}

} // namespace

double bump_profile(double r)
{
  if (r >= 1.0 || r <= -1.0) {
    return 0.0;
  }
  return std::exp(-1.0 / (1.0 - r * r));
}

double bump_normalization(int dim)
{
  auto compute = [](int d) {
    double radial =
      quad::gauss_kronrod([d](double s) { return bump_profile(s) * std::pow(s, d - 1); }, 0.0, 1.0, 1e-13).value;
    return unit_sphere_area(d) * radial;
  };
  static std::array<std::atomic<double>, 17> table{};
  if (dim < 1 || dim >= 17) {
    return compute(dim);
  }
  double z = table[dim].load(std::memory_order_relaxed);
  if (z == 0.0) {
    z = compute(dim);
    table[dim].store(z, std::memory_order_relaxed);
  }
  return z;
}

RadialDensity::RadialDensity(int dim, Family family)
  : dim_(dim), family_(std::move(family)), cache_(std::make_shared<Cache>())
{
  require(dim >= 3, "dimension must be at least 3");
}

RadialDensity RadialDensity::zero(int dim) { return RadialDensity(dim, ZeroDensity{}); }

RadialDensity RadialDensity::constant(int dim, double value, double cutoff)
{
  require(std::isfinite(value), "constant density must be finite");
  require(cutoff > 0.0, "cutoff must be positive");
  return RadialDensity(dim, ConstantDensity{value, cutoff});
}

RadialDensity RadialDensity::power(int dim, double amplitude, double exponent, double cutoff, double taper)
{
  require(std::isfinite(amplitude) && std::isfinite(exponent), "power datum parameters must be finite");
  require(cutoff > 0.0 && std::isfinite(cutoff), "power datum cutoff must be positive and finite");
  require(taper >= 0.0 && std::isfinite(taper), "taper width must be nonnegative");
  require(exponent < dim - 1, "power datum exponent must satisfy beta < N - 1 (flux integrable at the origin)");
  return RadialDensity(dim, PowerDatum{amplitude, exponent, cutoff, taper});
}

RadialDensity RadialDensity::bump(int dim, double mass, double radius)
{
  require(std::isfinite(mass), "bump mass must be finite");
  require(radius > 0.0 && std::isfinite(radius), "bump radius must be positive");
  return RadialDensity(dim, BumpDensity{mass, radius});
}

RadialDensity RadialDensity::mollified(const RadialDensity& base, double scale, int table_points)
{
  require(scale > 0.0 && std::isfinite(scale), "mollification scale must be positive");
  require(table_points >= 16, "mollified table needs at least 16 points");
  const double support = base.support_radius();
  require(std::isfinite(support), "mollified radial density needs a compactly supported base");
  const int dim = base.dim();
  const double top = support + scale;
  const double step = top / (table_points - 1);
  const double kernel_norm = 1.0 / (bump_normalization(dim) * std::pow(scale, dim));
  const double ring = (dim - 1) * unit_ball_volume(dim - 1);
  const double sphere = unit_sphere_area(dim);
  const auto theta_rule = quad::gauss_legendre(24);
  auto kernel = [&](double r, double s) {
    // int over S^{N-1} of phi_eps(|r e - s theta|) d theta
    if (r == 0.0 || s == 0.0) {
      return sphere * kernel_norm * bump_profile((r + s) / scale);
    }
    double c = (r * r + s * s - scale * scale) / (2.0 * r * s);
    if (c >= 1.0) {
      return 0.0;
    }
    double theta_max = c <= -1.0 ? std::numbers::pi : std::acos(c);
    double acc = 0.0;
    for (std::size_t k = 0; k < theta_rule.nodes.size(); ++k) {
      double th = 0.5 * theta_max * (theta_rule.nodes[k] + 1.0);
      double d2 = std::max(0.0, r * r + s * s - 2.0 * r * s * std::cos(th));
      acc += theta_rule.weights[k] * bump_profile(std::sqrt(d2) / scale) * std::pow(std::sin(th), dim - 2);
    }
    return ring * kernel_norm * 0.5 * theta_max * acc;
  };
  auto base_breaks = base.breakpoints();
  const bool singular_base = base.origin_power().has_value();
  std::vector<double> table(table_points, 0.0);
  for (int k = 0; k < table_points; ++k) {
    const double r = k * step;
    const double lo = std::max(0.0, r - scale);
    const double hi = std::min(support, r + scale);
    if (hi <= lo) {
      continue;
    }
    std::vector<double> breaks = {lo, hi};
    for (double b : base_breaks) {
      if (b > lo && b < hi) {
        breaks.push_back(b);
      }
    }
    if (scale - r > lo && scale - r < hi) {
      breaks.push_back(scale - r);
    }
    table[k] = integrate_pieces(
      [&](double s) { return s > 0.0 ? base(s) * std::pow(s, dim - 1) * kernel(r, s) : 0.0; }, breaks, 1e-10,
      singular_base && lo == 0.0);
  }
  MollifiedRadial m;
  m.base = std::make_shared<const RadialDensity>(base);
  m.scale = scale;
  m.step = step;
  m.table = std::move(table);
  m.interpolant = make_interpolant(m.table, m.step);
  return RadialDensity(dim, std::move(m));
}

std::string RadialDensity::family_name() const
{
  return std::visit(overloaded{[](const ZeroDensity&) { return "zero"; },
                               [](const ConstantDensity&) { return "constant"; },
                               [](const PowerDatum&) { return "power"; },
                               [](const BumpDensity&) { return "bump"; },
                               [](const MollifiedRadial&) { return "mollified"; }},
                    family_);
}

namespace {

double mollified_value(const MollifiedRadial& m, double r)
{
  if (r >= m.step * (m.table.size() - 1)) {
    return 0.0;
  }
  return m.interpolant(r);
}

} // namespace

double RadialDensity::operator()(double r) const
{
  r = std::abs(r);
  return std::visit(
    overloaded{[](const ZeroDensity&) { return 0.0; },
               [r](const ConstantDensity& c) { return r < c.cutoff ? c.value : 0.0; },
               [r](const PowerDatum& p) {
                 if (r >= p.cutoff + p.taper) {
                   return 0.0;
                 }
                 if (r == 0.0) {
                   if (p.exponent > -1.0) {
                     return p.amplitude == 0.0 ? 0.0 : std::copysign(kInfinity, p.amplitude);
                   }
                   return p.exponent == -1.0 ? p.amplitude : 0.0;
                 }
                 double v = p.amplitude * std::pow(r, -1.0 - p.exponent);
                 if (r >= p.cutoff) {
                   v *= smooth_fall((r - p.cutoff) / p.taper);
                 }
                 return v;
               },
               [this, r](const BumpDensity& b) {
                 return b.mass / (bump_normalization(dim_) * std::pow(b.radius, dim_)) * bump_profile(r / b.radius);
               },
               [r](const MollifiedRadial& m) { return mollified_value(m, r); }},
    family_);
}

double RadialDensity::support_radius() const
{
  return std::visit(overloaded{[](const ZeroDensity&) { return 0.0; },
                               [](const ConstantDensity& c) { return c.value == 0.0 ? 0.0 : c.cutoff; },
                               [](const PowerDatum& p) { return p.amplitude == 0.0 ? 0.0 : p.cutoff + p.taper; },
                               [](const BumpDensity& b) { return b.mass == 0.0 ? 0.0 : b.radius; },
                               [](const MollifiedRadial& m) { return m.step * (m.table.size() - 1); }},
                    family_);
}

std::vector<double> RadialDensity::breakpoints() const
{
  return std::visit(overloaded{[](const ZeroDensity&) { return std::vector<double>{}; },
                               [](const ConstantDensity& c) {
                                 return std::isfinite(c.cutoff) ? std::vector<double>{c.cutoff} : std::vector<double>{};
                               },
                               [](const PowerDatum& p) {
                                 return p.taper > 0.0 ? std::vector<double>{p.cutoff, p.cutoff + p.taper}
                                                      : std::vector<double>{p.cutoff};
                               },
                               [](const BumpDensity& b) { return std::vector<double>{b.radius}; },
                               [](const MollifiedRadial& m) {
                                 return std::vector<double>{m.step * (m.table.size() - 1)};
                               }},
                    family_);
}

double RadialDensity::knot_spacing() const
{
  auto m = std::get_if<MollifiedRadial>(&family_);
  return m ? m->step : 0.0;
}

std::optional<OriginPowerLaw> RadialDensity::origin_power() const
{
  if (auto p = std::get_if<PowerDatum>(&family_)) {
    return OriginPowerLaw{p->amplitude, p->exponent, p->cutoff};
  }
  return std::nullopt;
}

bool RadialDensity::nonnegative() const
{
  return std::visit(overloaded{[](const ZeroDensity&) { return true; },
                               [](const ConstantDensity& c) { return c.value >= 0.0; },
                               [](const PowerDatum& p) { return p.amplitude >= 0.0; },
                               [](const BumpDensity& b) { return b.mass >= 0.0; },
                               [](const MollifiedRadial& m) { return m.base->nonnegative(); }},
                    family_);
}

double RadialDensity::flux(double r) const
{
  if (r <= 0.0) {
    return 0.0;
  }
  const int n = dim_;
  return std::visit(
    overloaded{
      [](const ZeroDensity&) { return 0.0; },
      [r, n](const ConstantDensity& c) { return c.value * std::pow(std::min(r, c.cutoff), n) / n; },
      [this, r, n](const PowerDatum& p) {
        const double e = n - 1 - p.exponent;
        double f = p.amplitude * std::pow(std::min(r, p.cutoff), e) / e;
        if (p.taper > 0.0 && r > p.cutoff) {
          double hi = std::min(r, p.cutoff + p.taper);
          f += quad::gauss_kronrod([&](double s) { return (*this)(s)*std::pow(s, n - 1); }, p.cutoff, hi, 1e-13).value;
        }
        return f;
      },
      [r, n](const BumpDensity& b) {
        double x = std::min(r / b.radius, 1.0);
        double part = quad::gauss_kronrod([n](double s) { return bump_profile(s) * std::pow(s, n - 1); }, 0.0, x,
                                          1e-13)
                        .value;
        return b.mass / bump_normalization(n) * part;
      },
      [this, r, n](const MollifiedRadial& m) {
        double top = std::min(r, m.step * (m.table.size() - 1));
        // panels of a few table steps keep the cubic pieces well resolved
        const int panels = std::max(1, static_cast<int>(std::ceil(top / (8.0 * m.step))));
        double total = 0.0;
        for (int i = 0; i < panels; ++i) {
          double a = top * i / panels, b = top * (i + 1) / panels;
          total += quad::gauss_kronrod([&](double s) { return (*this)(s)*std::pow(s, n - 1); }, a, b, 1e-13).value;
        }
        return total;
      }},
    family_);
}

double RadialDensity::total_flux() const
{
  double support = support_radius();
  if (support == 0.0) {
    return 0.0;
  }
  if (!std::isfinite(support)) {
    return std::copysign(kInfinity, (*this)(1.0));
  }
  return flux(support);
}

double RadialDensity::total_mass() const { return unit_sphere_area(dim_) * total_flux(); }

double RadialDensity::lq_norm(double q) const
{
  require(q >= 1.0, "L^q norm needs q >= 1");
  {
    std::lock_guard lock(cache_->mutex);
    auto it = cache_->norms.find(q);
    if (it != cache_->norms.end()) {
      return it->second;
    }
  }
  double value = compute_lq(q);
  std::lock_guard lock(cache_->mutex);
  cache_->norms[q] = value;
  return value;
}

double RadialDensity::compute_lq(double q) const
{
  const int n = dim_;
  const double area = unit_sphere_area(n);
  const double support = support_radius();
  if (support == 0.0) {
    return 0.0;
  }
  if (std::isinf(q)) {
    if (auto p = std::get_if<PowerDatum>(&family_); p && p->exponent > -1.0) {
      return kInfinity;
    }
    double m = 0.0;
    const double top = std::isfinite(support) ? support : 1.0;
    for (int k = 0; k <= 4000; ++k) {
      m = std::max(m, std::abs((*this)(top * k / 4000.0)));
    }
    return m;
  }
  if (!std::isfinite(support)) {
    return kInfinity;
  }
  auto integrand = [&](double s) { return std::pow(std::abs((*this)(s)), q) * std::pow(s, n - 1); };
  if (auto p = std::get_if<PowerDatum>(&family_)) {
    const double e = n - q * (1.0 + p->exponent);
    if (e <= 0.0) {
      return kInfinity;
    }
    double core = std::pow(std::abs(p->amplitude), q) * std::pow(p->cutoff, e) / e;
    if (p->taper > 0.0) {
      core += quad::gauss_kronrod(integrand, p->cutoff, p->cutoff + p->taper, 1e-13).value;
    }
    return std::pow(area * core, 1.0 / q);
  }
  std::vector<double> breaks = {0.0, support};
  if (auto m = std::get_if<MollifiedRadial>(&family_)) {
    const int panels = static_cast<int>(m->table.size() / 8) + 1;
    for (int i = 1; i < panels; ++i) {
      breaks.push_back(support * i / panels);
    }
  }
  return std::pow(area * integrate_pieces(integrand, breaks, 1e-12), 1.0 / q);
}

RadialDensity RadialDensity::scaled(double t) const
{
  require(t > 0.0 && std::isfinite(t), "scaling factor must be positive");
  const int n = dim_;
  return std::visit(overloaded{[n](const ZeroDensity&) { return zero(n); },
                               [n, t](const ConstantDensity& c) { return constant(n, c.value / t, c.cutoff * t); },
                               [n, t](const PowerDatum& p) {
                                 return power(n, p.amplitude * std::pow(t, p.exponent), p.exponent, p.cutoff * t,
                                              p.taper * t);
                               },
                               [n, t](const BumpDensity& b) { return bump(n, b.mass * std::pow(t, n - 1), b.radius * t); },
                               [n, t](const MollifiedRadial& m) {
                                 MollifiedRadial s;
                                 s.base = std::make_shared<const RadialDensity>(m.base->scaled(t));
                                 s.scale = m.scale * t;
                                 s.step = m.step * t;
                                 s.table = m.table;
                                 for (double& v : s.table) {
                                   v /= t;
                                 }
                                 s.interpolant = make_interpolant(s.table, s.step);
                                 return RadialDensity(n, std::move(s));
                               }},
                    family_);
}

RadialDensity RadialDensity::multiplied(double factor) const
{
  require(std::isfinite(factor), "factor must be finite");
  const int n = dim_;
  return std::visit(overloaded{[n](const ZeroDensity&) { return zero(n); },
                               [n, factor](const ConstantDensity& c) { return constant(n, c.value * factor, c.cutoff); },
                               [n, factor](const PowerDatum& p) {
                                 return power(n, p.amplitude * factor, p.exponent, p.cutoff, p.taper);
                               },
                               [n, factor](const BumpDensity& b) { return bump(n, b.mass * factor, b.radius); },
                               [n, factor](const MollifiedRadial& m) {
                                 MollifiedRadial s = m;
                                 s.base = std::make_shared<const RadialDensity>(m.base->multiplied(factor));
                                 for (double& v : s.table) {
                                   v *= factor;
                                 }
                                 s.interpolant = make_interpolant(s.table, s.step);
                                 return RadialDensity(n, std::move(s));
                               }},
                    family_);
}

nlohmann::json RadialDensity::to_json() const
{
  return std::visit(
    overloaded{[](const ZeroDensity&) { return nlohmann::json{{"family", "zero"}}; },
               [](const ConstantDensity& c) {
                 nlohmann::json j{{"family", "constant"}, {"value", c.value}};
                 j["cutoff"] = std::isfinite(c.cutoff) ? nlohmann::json(c.cutoff) : nlohmann::json("inf");
                 return j;
               },
               [](const PowerDatum& p) {
                 return nlohmann::json{{"family", "power"},
                                       {"amplitude", p.amplitude},
                                       {"exponent", p.exponent},
                                       {"cutoff", p.cutoff},
                                       {"taper", p.taper}};
               },
               [](const BumpDensity& b) { return nlohmann::json{{"family", "bump"}, {"mass", b.mass}, {"radius", b.radius}}; },
               [](const MollifiedRadial& m) {
                 return nlohmann::json{{"family", "mollified"},
                                       {"scale", m.scale},
                                       {"table_points", m.table.size()},
                                       {"base", m.base->to_json()}};
               }},
    family_);
}

RadialDensity RadialDensity::from_json(const nlohmann::json& j, int dim)
{
  try {
    const std::string family = j.at("family").get<std::string>();
    if (family == "zero") {
      return zero(dim);
    }
    if (family == "constant") {
      double cutoff = kInfinity;
      if (j.contains("cutoff") && !j["cutoff"].is_string()) {
        cutoff = j["cutoff"].get<double>();
      }
      return constant(dim, j.at("value").get<double>(), cutoff);
    }
    if (family == "power") {
      double amplitude = j.contains("amplitude") ? j["amplitude"].get<double>()
                                                 : dim - 1 - j.at("exponent").get<double>();
      return power(dim, amplitude, j.at("exponent").get<double>(), j.value("cutoff", 1.0), j.value("taper", 0.0));
    }
    if (family == "bump") {
      return bump(dim, j.at("mass").get<double>(), j.at("radius").get<double>());
    }
    if (family == "mollified") {
      return mollified(from_json(j.at("base"), dim), j.at("scale").get<double>(), j.value("table_points", 801));
    }
    throw InvalidArgument("charge", "unknown density family '" + family + "'");
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument("charge", std::string("malformed density spec: ") + e.what());
  }
}

GridDensity::GridDensity(BoxGrid grid, std::vector<double> values, Kind kind, double scale)
  : grid_(std::move(grid)), values_(std::move(values)), kind_(kind), scale_(scale), cache_(std::make_shared<Cache>())
{
  require(values_.size() == grid_.node_count(), "density value count does not match the grid");
  for (double v : values_) {
    require(std::isfinite(v), "sampled density must be finite");
  }
}

double GridDensity::lq_norm(double q) const
{
  {
    std::lock_guard lock(cache_->mutex);
    auto it = cache_->norms.find(q);
    if (it != cache_->norms.end()) {
      return it->second;
    }
  }
  double value = bi::lq_norm(values_, grid_, q);
  std::lock_guard lock(cache_->mutex);
  cache_->norms[q] = value;
  return value;
}

double GridDensity::total_charge() const
{
  double s = 0.0;
  for (double v : values_) {
    s += v;
  }
  return s * grid_.cell_volume();
}

namespace {

// int over [-a,a]^N of |x|^{-1-beta}, by splitting into 2N pyramids with apex at 0
double origin_voxel_integral(int dim, double a, double beta)
{
  const auto rule = quad::gauss_legendre(dim == 3 ? 40 : 16);
  const int m = dim - 1;
  std::vector<int> idx(m, 0);
  double face = 0.0;
  const std::size_t total = static_cast<std::size_t>(std::pow(rule.nodes.size(), m));
  for (std::size_t k = 0; k < total; ++k) {
    double y2 = 0.0, w = 1.0;
    for (int i = 0; i < m; ++i) {
      y2 += rule.nodes[idx[i]] * rule.nodes[idx[i]];
      w *= rule.weights[idx[i]];
    }
    face += w * std::pow(1.0 + y2, -0.5 * (1.0 + beta));
    for (int i = m - 1; i >= 0; --i) {
      if (++idx[i] < static_cast<int>(rule.nodes.size())) {
        break;
      }
      idx[i] = 0;
    }
  }
  const double e = dim - 1 - beta;
  return 2.0 * dim * std::pow(a, e) / e * face;
}

} // namespace

GridDensity sample_to_grid(const RadialDensity& density, const BoxGrid& grid)
{
  if (density.dim() != grid.dim()) {
    throw InvalidArgument("charge", "density and grid dimensions differ");
  }
  const int dim = grid.dim();
  const double a = 0.5 * grid.spacing();
  const double support = density.support_radius();
  const auto breaks = density.breakpoints();
  const auto power = density.origin_power();
  const bool singular = power && power->exponent > -1.0 && power->amplitude != 0.0;
  if (singular && a * std::sqrt(static_cast<double>(dim)) >= power->valid_up_to) {
    throw InvalidArgument("charge", "grid too coarse: the origin voxel reaches past the power datum cutoff");
  }
  const auto coarse = quad::gauss_legendre(3);
  const auto fine = quad::gauss_legendre(8);
  std::vector<double> values(grid.node_count(), 0.0);
  std::vector<double> x(dim);
  std::vector<int> idx(dim);
  for (std::size_t n = 0; n < grid.node_count(); ++n) {
    grid.node_position(n, x);
    double dmin2 = 0.0, dmax2 = 0.0;
    bool contains_origin = true;
    for (int i = 0; i < dim; ++i) {
      double ax = std::abs(x[i]);
      dmin2 += std::pow(std::max(0.0, ax - a), 2);
      dmax2 += std::pow(ax + a, 2);
      contains_origin = contains_origin && ax < a;
    }
    const double dmin = std::sqrt(dmin2), dmax = std::sqrt(dmax2);
    if (dmin >= support) {
      continue;
    }
    if (singular && contains_origin) {
      values[n] = power->amplitude * origin_voxel_integral(dim, a, power->exponent) / grid.cell_volume();
      continue;
    }
    bool refine = singular && dmin < 4.0 * a;
    for (double b : breaks) {
      refine = refine || (dmin < b && b < dmax);
    }
    const auto& rule = refine ? fine : coarse;
    const int p = static_cast<int>(rule.nodes.size());
    std::fill(idx.begin(), idx.end(), 0);
    std::vector<double> y(dim);
    double acc = 0.0;
    while (true) {
      double w = 1.0, r2 = 0.0;
      for (int i = 0; i < dim; ++i) {
        double yi = x[i] + a * rule.nodes[idx[i]];
        r2 += yi * yi;
        w *= 0.5 * rule.weights[idx[i]];
      }
      acc += w * density(std::sqrt(r2));
      int i = dim - 1;
      for (; i >= 0; --i) {
        if (++idx[i] < p) {
          break;
        }
        idx[i] = 0;
      }
      if (i < 0) {
        break;
      }
    }
    values[n] = acc;
  }
  return GridDensity(grid, std::move(values));
}

GridDensity mollify(const GridDensity& density, int n)
{
  if (n < 1) {
    throw InvalidArgument("charge", "mollification index n must be >= 1");
  }
  const BoxGrid& grid = density.grid();
  const int dim = grid.dim();
  const double eps = 1.0 / n;
  const double h = grid.spacing();
  if (eps < h) {
    throw InvalidArgument("charge", "mollification is sub-resolution: kernel radius 1/n is below the grid spacing");
  }
  const int reach = static_cast<int>(std::floor(eps / h));
  struct Tap
  {
    std::vector<int> offset;
    double weight;
  };
  std::vector<Tap> taps;
  std::vector<int> off(dim, -reach);
  double mass = 0.0;
  while (true) {
    double r2 = 0.0;
    for (int i = 0; i < dim; ++i) {
      r2 += std::pow(off[i] * h, 2);
    }
    double w = bump_profile(std::sqrt(r2) / eps);
    if (w > 0.0) {
      taps.push_back({off, w});
      mass += w;
    }
    int i = dim - 1;
    for (; i >= 0; --i) {
      if (++off[i] <= reach) {
        break;
      }
      off[i] = -reach;
    }
    if (i < 0) {
      break;
    }
  }
  for (auto& t : taps) {
    t.weight /= mass;
  }
  auto in = density.values();
  std::vector<double> out(grid.node_count(), 0.0);
  std::vector<std::ptrdiff_t> shift(taps.size());
  for (std::size_t k = 0; k < taps.size(); ++k) {
    for (int i = 0; i < dim; ++i) {
      shift[k] += static_cast<std::ptrdiff_t>(taps[k].offset[i]) * static_cast<std::ptrdiff_t>(grid.stride(i));
    }
  }
  std::vector<int> idx(dim);
  const int pts = grid.points();
  for (std::size_t node = 0; node < out.size(); ++node) {
    grid.node_index(node, idx);
    bool deep = true;
    for (int i = 0; i < dim; ++i) {
      deep = deep && idx[i] >= reach && idx[i] < pts - reach;
    }
    double acc = 0.0;
    if (deep) {
      const double* base = in.data() + node;
      for (std::size_t k = 0; k < taps.size(); ++k) {
        acc += taps[k].weight * base[-shift[k]];
      }
      out[node] = acc;
      continue;
    }
    for (std::size_t k = 0; k < taps.size(); ++k) {
      bool inside = true;
      for (int i = 0; i < dim; ++i) {
        int j = idx[i] - taps[k].offset[i];
        inside = inside && j >= 0 && j < pts;
      }
      if (inside) {
        acc += taps[k].weight * in[node - shift[k]];
      }
    }
    out[node] = acc;
  }
  return GridDensity(grid, std::move(out), GridDensity::Kind::mollified, eps);
}

GridDensity mollify(const RadialDensity& density, int n, const BoxGrid& grid)
{
  return mollify(sample_to_grid(density, grid), n);
}

double riesz_potential_radial(const RadialDensity& density, double r)
{
  if (!(r >= 0.0) || !std::isfinite(r)) {
    throw InvalidArgument("charge", "Riesz potential needs a finite distance r >= 0");
  }
  const int dim = density.dim();
  const double area = unit_sphere_area(dim);
  const double support = density.support_radius();
  if (support == 0.0) {
    return 0.0;
  }
  if (!std::isfinite(support)) {
    throw NumericalFailure("charge", "Riesz potential diverges: density has unbounded support");
  }
  const double total = std::abs(area * density.total_flux());
  const auto power = density.origin_power();
  // below this radius the integrand's contribution is far under the tolerance
  const double tiny = 1e-60 * (r + support);
  const bool singular = power && power->exponent > -1.0;
  if (r == 0.0) {
    if (power && power->exponent >= 0.0 && power->amplitude != 0.0) {
      throw NumericalFailure("charge", "Riesz potential diverges at the origin for a power datum with beta >= 0");
    }
    std::vector<double> breaks = {0.0, support};
    for (double b : density.breakpoints()) {
      if (b < support) {
        breaks.push_back(b);
      }
    }
    double core = integrate_pieces(
      [&](double t) { return t > tiny ? std::abs(area * density.flux(t)) * std::pow(t, -dim) : 0.0; }, breaks, 1e-10);
    return core + total * std::pow(support, 1 - dim) / (dim - 1);
  }

  auto dbreaks = density.breakpoints();
  auto ball_mass = [&](double t) {
    // mu(B_t(x)) with |x| = r: full shells below t - r plus partial shells
    double inner = t > r ? density.flux(t - r) : 0.0;
    const double lo = std::abs(r - t);
    const double hi = std::min(r + t, support);
    if (hi > lo) {
      std::vector<double> breaks = {lo, hi};
      for (double b : dbreaks) {
        if (b > lo && b < hi) {
          breaks.push_back(b);
        }
      }
      inner += integrate_pieces(
        [&](double s) {
          if (s <= tiny) {
            return 0.0;
          }
          return density(s) * std::pow(s, dim - 1) * cap_fraction(dim, s, r, t);
        },
        breaks, 1e-10, singular && lo < 1e-3 * r);
    }
    return std::abs(area * inner);
  };
  const double top = r + support;
  std::vector<double> breaks = {0.0, r, top};
  for (double b : dbreaks) {
    breaks.push_back(std::abs(r - b));
    breaks.push_back(r + b);
  }
  if (r < support) {
    breaks.push_back(support - r);
  }
  // geometric breaks resolve the t^{-1-beta}-type growth when r is tiny
  for (double b = 4.0 * r; b < top; b *= 4.0) {
    breaks.push_back(b);
  }
  std::vector<double> kept;
  for (double b : breaks) {
    if (b >= 0.0 && b <= top) {
      kept.push_back(b);
    }
  }
  double core = integrate_pieces([&](double t) { return t > tiny ? ball_mass(t) * std::pow(t, -dim) : 0.0; }, kept,
                                 1e-9, false);
  return core + total * std::pow(top, 1 - dim) / (dim - 1);
}

WolffResult wolff_potential_truncated(const GridDensity& density, std::span<const double> x, double r, double alpha,
                                      double q)
{
  const BoxGrid& grid = density.grid();
  const int dim = grid.dim();
  if (x.size() != static_cast<std::size_t>(dim)) {
    throw InvalidArgument("charge", "point dimension does not match the grid");
  }
  if (!(r > 0.0) || !(alpha >= 0.0) || !(alpha < 1.0)) {
    throw InvalidArgument("charge", "Wolff potential needs r > 0 and 0 <= alpha < 1");
  }
  for (int i = 0; i < dim; ++i) {
    if (std::abs(x[i]) + r > grid.extent() * (1.0 + 1e-14)) {
      throw InvalidArgument("charge", "Wolff ball leaves the computational box");
    }
  }
  const double h = grid.spacing();
  const int polar = std::clamp(static_cast<int>(std::ceil(2.0 * r / h)) + 8, 8, dim == 3 ? 96 : 24);
  const quad::SphereRule sphere(dim, polar, 2 * polar);
  const auto rule = quad::gauss_legendre(4);
  const int panels = std::max(16, 4 * static_cast<int>(std::ceil(r / h)));
  const double p = 1.0 / (1.0 - alpha);
  const double expo = (dim - 1 + alpha);
  auto values = density.values();
  std::vector<double> y(dim);
  double acc = 0.0;
  for (int k = 0; k < panels; ++k) {
    for (std::size_t g = 0; g < rule.nodes.size(); ++g) {
      const double u = (k + 0.5 * (rule.nodes[g] + 1.0)) / panels;
      const double s = r * std::pow(u, p);
      double shell = 0.0;
      for (std::size_t d = 0; d < sphere.size(); ++d) {
        auto dir = sphere.direction(d);
        for (int i = 0; i < dim; ++i) {
          y[i] = x[i] + s * dir[i];
        }
        shell += sphere.weight(d) * std::abs(interpolate(grid, values, y));
      }
      acc += 0.5 * rule.weights[g] / panels * shell * (1.0 - std::pow(s / r, expo));
    }
  }
  WolffResult result;
  result.value = std::pow(r, 1.0 - alpha) / ((1.0 - alpha) * expo) * acc;
  const double decay = 1.0 - alpha - dim / q;
  if (q >= 1.0 && decay > 0.0) {
    const double omega = unit_ball_volume(dim);
    result.bound = std::pow(omega, (q - 1.0) / q) * density.lq_norm(q) * std::pow(r, decay) / decay;
  }
  return result;
}

} // namespace bi
