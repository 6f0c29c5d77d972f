#pragma once

#include "bi/charge.hpp"

#include <json.hpp>

#include <iosfwd>
#include <optional>
#include <vector>

namespace bi {

struct RadialMeshConfig
{
  /// r0; zero picks the density's natural radius.
  double reference_radius = 0.0;
  double min_factor = 1e-8;
  double max_factor = 1e3;
  int points_per_decade = 200;
};

/// Logarithmic mesh from min_factor*r0 to max_factor*r0 with the density's
/// breakpoints inserted as nodes.
std::vector<double> radial_mesh(const RadialDensity& density, const RadialMeshConfig& config = {});
double natural_radius(const RadialDensity& density);

/// F(r_k) = int_0^{r_k} s^{N-1} rho(s) ds at every mesh node.
std::vector<double> cumulative_flux(const RadialDensity& density, const std::vector<double>& mesh);

struct SlopeData
{
  /// g = F r^{1-N}
  std::vector<double> g;
  /// w' = -g / sqrt(1 + g^2)
  std::vector<double> slope;
  /// sqrt(1 - w'^2) = 1 / sqrt(1 + g^2), kept separately to avoid cancellation
  std::vector<double> v;
};
SlopeData slope_from_flux(const std::vector<double>& flux, const std::vector<double>& mesh, int dim);

/// u(r_k) = -int_{r_k}^inf w'(s) ds. Between nodes the slope is evaluated
/// from the exact flux; beyond the last node the far-field expansion of
/// w' ~ -F(inf) r^{1-N} is integrated in closed form.
std::vector<double> integrate_potential(const RadialDensity& density, const std::vector<double>& mesh,
                                        const std::vector<double>& flux);

class RadialProfile
{
public:
  int dim;
  double reference_radius;
  double total_flux;
  RadialDensity density;
  std::vector<double> mesh;
  std::vector<double> rho;
  std::vector<double> flux;
  std::vector<double> g;
  std::vector<double> slope;
  std::vector<double> v;
  std::vector<double> potential;

  double r_min() const { return mesh.front(); }
  double r_max() const { return mesh.back(); }

  /// w'(r) from the exact flux.
  double slope_at(double r) const;
  /// sqrt(1 - w'(r)^2)
  double v_at(double r) const;
  /// u(r): quintic Hermite between nodes, far-field formula beyond r_max.
  double potential_at(double r) const;
  /// w''(r) = -g'(r) / (1 + g^2)^{3/2}
  double second_derivative(double r) const;
  /// sum_{ij} u_ij^2 = w''^2 + (N-1) (w'/r)^2
  double hessian_frobenius_sq(double r) const;
};

RadialProfile solve_radial(const RadialDensity& density, const RadialMeshConfig& config = {});

/// -r^{1-N} (r^{N-1} w'/sqrt(1-w'^2))' by central differences on the mesh;
/// entry k uses nodes k-1, k+1 (end entries are NaN).
std::vector<double> apply_radial_operator(const RadialProfile& profile);

struct OriginClassification
{
  double limit_abs_slope;
  /// sup of q with rho in L^q(B_r0); infinite for bounded data.
  double critical_q;
  bool gradient_degenerate;
  /// |w'| at r_min 10^k used for the extrapolation.
  std::vector<double> samples;

  nlohmann::json to_json() const;
};

OriginClassification classify_origin_regularity(const RadialProfile& profile);

void write_csv(std::ostream& out, const RadialProfile& profile);

} // namespace bi
