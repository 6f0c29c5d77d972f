#pragma once

#include "bi/fields.hpp"

#include <json.hpp>

#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace bi {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

struct ZeroDensity
{
};

/// rho = value on |x| < cutoff (cutoff may be infinite).
struct ConstantDensity
{
  double value = 0.0;
  double cutoff = kInfinity;
};

/// rho = C r^{-1-beta} on |x| < r0. With taper > 0 the datum is multiplied by
/// a quintic smoothstep falling from 1 to 0 on [r0, r0 + taper] instead of
/// being cut off.
struct PowerDatum
{
  double amplitude = 1.0;
  double exponent = 0.5;
  double cutoff = 1.0;
  double taper = 0.0;
};

/// Smooth compactly supported charge of total `mass`: the normalized
/// exp(-1/(1-|x|^2)) bump scaled to `radius`.
struct BumpDensity
{
  double mass = 1.0;
  double radius = 1.0;
};

class RadialDensity;

/// Base density convolved with the bump kernel of radius `scale`,
/// tabulated on a uniform radial grid.
struct MollifiedRadial
{
  std::shared_ptr<const RadialDensity> base;
  double scale = 0.0;
  double step = 0.0;
  std::vector<double> table;
  std::function<double(double)> interpolant;
};

/// rho(x) = C |x|^{-1-beta} near the origin.
struct OriginPowerLaw
{
  double amplitude;
  double exponent;
  double valid_up_to;
};

/// Analytic radial charge density in dimension N.
class RadialDensity
{
public:
  using Family = std::variant<ZeroDensity, ConstantDensity, PowerDatum, BumpDensity, MollifiedRadial>;

  static RadialDensity zero(int dim);
  static RadialDensity constant(int dim, double value, double cutoff = kInfinity);
  static RadialDensity power(int dim, double amplitude, double exponent, double cutoff, double taper = 0.0);
  static RadialDensity bump(int dim, double mass, double radius);
  static RadialDensity mollified(const RadialDensity& base, double scale, int table_points = 801);

  int dim() const { return dim_; }
  const Family& family() const { return family_; }
  std::string family_name() const;

  double operator()(double r) const;
  /// F(r) = int_0^r s^{N-1} rho(s) ds.
  double flux(double r) const;
  /// F at infinity; infinite for unbounded support with nonzero tail.
  double total_flux() const;
  /// Total charge N omega_N F(inf).
  double total_mass() const;
  /// Radius beyond which rho vanishes (may be infinite).
  double support_radius() const;
  /// Radii where rho or its derivatives jump.
  std::vector<double> breakpoints() const;
  /// Spacing of interpolation knots (piecewise cubic between them), 0 if none.
  double knot_spacing() const;
  std::optional<OriginPowerLaw> origin_power() const;
  bool nonnegative() const;

  /// |rho|_q over R^N, infinite when rho is not in L^q. Cached per q.
  double lq_norm(double q) const;

  /// rho_t(x) = t^{-1} rho(x/t).
  RadialDensity scaled(double t) const;
  /// factor * rho.
  RadialDensity multiplied(double factor) const;

  nlohmann::json to_json() const;
  static RadialDensity from_json(const nlohmann::json& j, int dim);

private:
  RadialDensity(int dim, Family family);
  double compute_lq(double q) const;

  int dim_;
  Family family_;
  struct Cache
  {
    std::mutex mutex;
    std::map<double, double> norms;
  };
  std::shared_ptr<Cache> cache_;
};

/// Normalized bump profile exp(-1/(1-r^2)) on r < 1 and its mass in R^N.
double bump_profile(double r);
double bump_normalization(int dim);

/// Grid-sampled charge: one value per node, the average of rho over the
/// node's voxel [x - h/2, x + h/2]^N.
class GridDensity
{
public:
  enum class Kind { sampled, mollified };

  GridDensity(BoxGrid grid, std::vector<double> values, Kind kind = Kind::sampled, double scale = 0.0);

  const BoxGrid& grid() const { return grid_; }
  std::span<const double> values() const { return values_; }
  Kind kind() const { return kind_; }
  double mollification_scale() const { return scale_; }

  /// Voxel-sum norm (sum |rho|^q h^N)^{1/q}, cached per q.
  double lq_norm(double q) const;
  /// sum rho h^N
  double total_charge() const;

private:
  BoxGrid grid_;
  std::vector<double> values_;
  Kind kind_;
  double scale_;
  struct Cache
  {
    std::mutex mutex;
    std::map<double, double> norms;
  };
  std::shared_ptr<Cache> cache_;
};

GridDensity sample_to_grid(const RadialDensity& density, const BoxGrid& grid);

/// Discrete convolution with the bump kernel of radius 1/n, normalized to unit
/// discrete mass. Throws when 1/n is below the grid spacing.
GridDensity mollify(const GridDensity& density, int n);
GridDensity mollify(const RadialDensity& density, int n, const BoxGrid& grid);

/// I_1(x) = int_0^inf |mu|(B_t(x)) t^{-N} dt at |x| = r for a radial density.
/// Throws NumericalFailure when the integral diverges.
double riesz_potential_radial(const RadialDensity& density, double r);

struct WolffResult
{
  double value = 0.0;
  /// omega^{(q-1)/q} |rho|_q r^{1-alpha-N/q} / (1-alpha-N/q); set when alpha + N/q < 1.
  std::optional<double> bound;
};

/// int_0^r (int_{B_t(x)} |rho_h|) t^{-N-alpha} dt for the multilinear
/// interpolant rho_h of the grid density. The ball must lie inside the box.
WolffResult wolff_potential_truncated(const GridDensity& density, std::span<const double> x, double r,
                                      double alpha, double q);

} // namespace bi
