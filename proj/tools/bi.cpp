#include "json_config.hpp"

#include "bi/charge.hpp"
#include "bi/error.hpp"
#include "bi/fields.hpp"
#include "bi/grid_io.hpp"
#include "bi/gronwall.hpp"
#include "bi/minimizer.hpp"
#include "bi/plap.hpp"
#include "bi/radial.hpp"
#include "bi/verify.hpp"

#include <CLI11.hpp>
#include <boost/version.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

constexpr const char* kVersion = "1.0.0";

enum ExitCode
{
  kOk = 0,
  kInternal = 1,
  kInvalidConfig = 2,
  kNumericalFailure = 3,
};

/// File name -> contents, written only after the whole command succeeded.
using Artifacts = std::map<std::string, std::string>;

std::string num(double x)
{
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string csv_row(std::initializer_list<double> values)
{
  std::string line;
  for (double v : values) {
    if (!line.empty()) {
      line += ',';
    }
    line += num(v);
  }
  return line + '\n';
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

void invalid(const std::string& what) { throw bi::InvalidArgument("cli", what); }

class Command
{
public:
  Command(CLI::App& app, const std::string& name, const std::string& help) : sub_(app.add_subcommand(name, help))
  {
    sub_->fallthrough();
    option("out", out, "output directory");
    option("seed", seed, "seed for randomized sampling");
  }

  template <class T>
  CLI::Option* option(const std::string& name, T& var, const std::string& help)
  {
    echo_.push_back([name, &var](json& j) { j[name] = var; });
    return sub_->add_option("--" + name, var, help)->capture_default_str();
  }

  CLI::Option* flag(const std::string& name, bool& var, const std::string& help)
  {
    echo_.push_back([name, &var](json& j) { j[name] = var; });
    return sub_->add_flag("--" + name, var, help);
  }

  json echo() const
  {
    json j = json::object();
    for (const auto& e : echo_) {
      e(j);
    }
    return j;
  }

  CLI::App* app() const { return sub_; }
  bool selected() const { return sub_->parsed(); }

  std::string out = "bi-out";
  std::uint64_t seed = 0;
  std::function<Artifacts()> run;

private:
  CLI::App* sub_;
  std::vector<std::function<void(json&)>> echo_;
};

struct DensityOptions
{
  std::string family = "bump";
  int dim = 3;
  double beta = 0.5;
  /// NaN selects N - 1 - beta
  double amplitude = std::numeric_limits<double>::quiet_NaN();
  double cutoff = 1.0;
  double taper = 0.0;
  double mass = 0.5;
  double radius = 0.25;
  double value = 1.0;
  double mollify = 0.0;

  void add(Command& c)
  {
    c.option("density", family, "zero, constant, power or bump")
      ->check(CLI::IsMember({"zero", "constant", "power", "bump"}));
    c.option("dim", dim, "space dimension");
    c.option("beta", beta, "power datum exponent: rho = C r^{-1-beta}");
    c.option("amplitude", amplitude, "power datum amplitude C (default N - 1 - beta)");
    c.option("cutoff", cutoff, "support radius of the power or constant datum");
    c.option("taper", taper, "smooth taper width after the power cutoff");
    c.option("mass", mass, "bump total charge");
    c.option("radius", radius, "bump radius");
    c.option("value", value, "constant datum value");
    c.option("mollify", mollify, "radial mollification scale (0 keeps the datum)");
  }

  bi::RadialDensity build() const
  {
    json j{{"family", family}};
    if (family == "power") {
      j["exponent"] = beta;
      if (std::isfinite(amplitude)) {
        j["amplitude"] = amplitude;
      }
      j["cutoff"] = cutoff;
      j["taper"] = taper;
    } else if (family == "bump") {
      j["mass"] = mass;
      j["radius"] = radius;
    } else if (family == "constant") {
      j["value"] = value;
      j["cutoff"] = cutoff;
    }
    auto d = bi::RadialDensity::from_json(j, dim);
    if (mollify < 0.0) {
      invalid("mollify must be >= 0");
    }
    return mollify > 0.0 ? bi::RadialDensity::mollified(d, mollify) : d;
  }
};

struct GridOptions
{
  int points = 33;
  double box = 1.0;
  /// discrete mollification at radius 1/n, 0 for plain voxel sampling
  int mollify_grid = 0;

  void add(Command& c)
  {
    c.option("grid", points, "nodes per axis (odd)");
    c.option("box", box, "half-width of the computational box");
    c.option("mollify-grid", mollify_grid, "discrete mollification at radius 1/n (0 = off)");
  }

  bi::BoxGrid grid(int dim) const { return bi::BoxGrid(dim, box, points); }

  bi::GridDensity sample(const bi::RadialDensity& d, const bi::BoxGrid& grid) const
  {
    if (mollify_grid < 0) {
      invalid("mollify-grid must be >= 0");
    }
    return mollify_grid > 0 ? bi::mollify(d, mollify_grid, grid) : bi::sample_to_grid(d, grid);
  }
};

struct EnergyOptions
{
  int max_iterations = 2000;
  std::string step_rule = "line_search";
  double initial_step = 1.0;
  double tolerance = 1e-14;
  double margin = 1e-6;

  void add(Command& c)
  {
    c.option("max-iterations", max_iterations, "descent iteration cap");
    c.option("step-rule", step_rule, "fixed, backtracking or line_search")
      ->check(CLI::IsMember({"fixed", "backtracking", "line_search"}));
    c.option("initial-step", initial_step, "initial step length");
    c.option("tolerance", tolerance, "relative energy decrease at which to stop");
    c.option("margin", margin, "smallest admissible sqrt(1 - |grad u|^2)");
  }

  bi::EnergyConfig build() const
  {
    auto c = bi::EnergyConfig::from_json({{"max_iterations", max_iterations},
                                          {"step_rule", step_rule},
                                          {"initial_step", initial_step},
                                          {"tolerance", tolerance},
                                          {"margin", margin}});
    c.validate();
    return c;
  }
};

bi::GridField radial_field(const bi::BoxGrid& grid, const bi::RadialProfile& prof, bool boundary_only)
{
  bi::GridField u(grid);
  std::vector<double> x(grid.dim());
  for (std::size_t n = 0; n < grid.node_count(); ++n) {
    if (boundary_only && !grid.is_boundary(n)) {
      continue;
    }
    grid.node_position(n, x);
    double r2 = 0.0;
    for (double c : x) {
      r2 += c * c;
    }
    u[n] = prof.potential_at(std::sqrt(r2));
  }
  return u;
}

/// Values along the first axis through the centre.
std::vector<std::size_t> axis_nodes(const bi::BoxGrid& grid)
{
  std::vector<int> idx(grid.dim(), grid.points() / 2);
  std::vector<std::size_t> nodes;
  for (int i = 0; i < grid.points(); ++i) {
    idx[0] = i;
    nodes.push_back(grid.node_at(idx));
  }
  return nodes;
}

// ---------------------------------------------------------------------------

struct SolveRadial
{
  DensityOptions density;
  bi::RadialMeshConfig mesh;

  void add(Command& c)
  {
    density.family = "power";
    density.add(c);
    c.option("reference-radius", mesh.reference_radius, "mesh reference radius (0 = natural)");
    c.option("min-factor", mesh.min_factor, "innermost node / reference radius");
    c.option("max-factor", mesh.max_factor, "outermost node / reference radius");
    c.option("points-per-decade", mesh.points_per_decade, "logarithmic mesh density");
    c.run = [this] { return run(); };
  }

  Artifacts run() const
  {
    if (mesh.points_per_decade < 2 || !(mesh.min_factor > 0.0) || !(mesh.max_factor > mesh.min_factor)) {
      invalid("radial mesh needs points-per-decade >= 2 and 0 < min-factor < max-factor");
    }
    const auto rho = density.build();
    const auto prof = bi::solve_radial(rho, mesh);
    const auto cls = bi::classify_origin_regularity(prof);

    json result{{"schema", "bi.radial_result/1"},
                {"dim", prof.dim},
                {"density", rho.to_json()},
                {"reference_radius", prof.reference_radius},
                {"total_flux", prof.total_flux},
                {"mesh_points", prof.mesh.size()},
                {"r_min", prof.r_min()},
                {"r_max", prof.r_max()},
                {"classification", cls.to_json()}};
    if (const auto law = rho.origin_power()) {
      // w'/sqrt(1 - w'^2) = -C r^{-beta} / (N - 1 - beta) while the power law holds
      const double k = law->amplitude / (prof.dim - 1 - law->exponent);
      double worst = 0.0;
      for (std::size_t i = 0; i < prof.mesh.size() && prof.mesh[i] <= law->valid_up_to; ++i) {
        const double expect = -k * std::pow(prof.mesh[i], -law->exponent);
        worst = std::max(worst, std::abs(prof.slope[i] / prof.v[i] - expect) / std::abs(expect));
      }
      result["origin_law_relative_defect"] = worst;
    }
    std::ostringstream csv;
    bi::write_csv(csv, prof);
    return {{"profile.csv", csv.str()}, {"result.json", dump(result)}};
  }
};

struct SolveGrid
{
  DensityOptions density;
  GridOptions grid;
  EnergyOptions energy;
  std::string boundary = "zero";

  void add(Command& c)
  {
    density.add(c);
    grid.add(c);
    energy.add(c);
    c.option("boundary", boundary, "zero, or the exact radial potential as boundary trace")
      ->check(CLI::IsMember({"zero", "radial"}));
    c.run = [this] { return run(); };
  }

  Artifacts run() const
  {
    const auto rho_r = density.build();
    const auto g = grid.grid(density.dim);
    const auto config = energy.build();
    const auto rho = grid.sample(rho_r, g);

    std::optional<bi::RadialProfile> prof;
    std::optional<bi::GridField> exact;
    if (boundary == "radial") {
      prof = bi::solve_radial(rho_r);
      exact = radial_field(g, *prof, false);
    }
    const auto res = exact ? bi::minimize(rho, config, radial_field(g, *prof, true)) : bi::minimize(rho, config);

    json result = res.diagnostics();
    result.erase("energy_history");
    result["schema"] = "bi.grid_result/1";
    result["density"] = rho_r.to_json();
    result["grid"] = {{"dim", g.dim()}, {"points", g.points()}, {"extent", g.extent()}};
    result["boundary"] = boundary;
    result["energy_config"] = config.to_json();
    if (exact) {
      double err = 0.0;
      for (std::size_t n = 0; n < g.node_count(); ++n) {
        err = std::max(err, std::abs(res.field[n] - (*exact)[n]));
      }
      result["radial_sup_error"] = err;
    }

    std::string slice = exact ? "x,u,u_radial\n" : "x,u\n";
    std::vector<double> x(g.dim());
    for (std::size_t n : axis_nodes(g)) {
      g.node_position(n, x);
      slice += exact ? csv_row({x[0], res.field[n], (*exact)[n]}) : csv_row({x[0], res.field[n]});
    }
    std::string history = "iteration,energy\n";
    for (std::size_t i = 0; i < res.energy_history.size(); ++i) {
      history += std::to_string(i) + "," + num(res.energy_history[i]) + "\n";
    }
    std::ostringstream field;
    bi::write_binary(field, res.field);
    return {{"result.json", dump(result)},
            {"slice.csv", slice},
            {"energy.csv", history},
            {"field.bigf", field.str()}};
  }
};

struct SeriesSweepCmd
{
  DensityOptions density;
  GridOptions grid;
  EnergyOptions energy;
  std::vector<int> orders{1, 2, 4, 8, 16};

  void add(Command& c)
  {
    density.add(c);
    grid.add(c);
    energy.add(c);
    c.option("orders", orders, "truncation orders k")->delimiter(',');
    c.run = [this] { return run(); };
  }

  Artifacts run() const
  {
    if (orders.empty()) {
      invalid("at least one order is required");
    }
    int top = 0;
    for (int k : orders) {
      if (k < 1) {
        invalid("orders must be >= 1");
      }
      top = std::max(top, k);
    }
    const auto rho_r = density.build();
    const auto g = grid.grid(density.dim);
    const auto config = energy.build();
    const auto rho = grid.sample(rho_r, g);

    const auto sweep = bi::series_sweep(rho, orders, config);
    json rows = json::array();
    bool nonincreasing = true;
    for (std::size_t i = 0; i < sweep.rows.size(); ++i) {
      const auto& r = sweep.rows[i];
      rows.push_back({{"k", r.k},
                      {"energy", r.energy},
                      {"sup_gradient", r.sup_gradient},
                      {"distance", r.distance},
                      {"converged", r.converged}});
      if (i > 0 && r.k > sweep.rows[i - 1].k && r.distance > sweep.rows[i - 1].distance) {
        nonincreasing = false;
      }
    }
    json full = sweep.full.diagnostics();
    full.erase("energy_history");
    json result{{"schema", "bi.series_sweep/1"},
                {"density", rho_r.to_json()},
                {"grid", {{"dim", g.dim()}, {"points", g.points()}, {"extent", g.extent()}}},
                {"coefficients", bi::series_coefficients(top).exact},
                {"born_infeld", full},
                {"rows", rows},
                {"distance_nonincreasing", nonincreasing}};
    std::ostringstream csv;
    bi::write_sweep_csv(csv, sweep);
    return {{"sweep.csv", csv.str()}, {"sweep.json", dump(result)}};
  }
};

struct VerifyEstimate
{
  const Command* cmd = nullptr;
  int dim = 3;
  std::vector<double> betas{-0.25, -0.5, -0.75};
  std::size_t samples = 20;
  double q = 0.0;
  double gamma = 0.0;
  double C = 0.0;
  int offsets = 13;
  int radii = 13;

  void add(Command& c)
  {
    cmd = &c;
    c.option("dim", dim, "space dimension");
    c.option("beta", betas, "exponents of the mollified power data, each in (-1, 0)")->delimiter(',');
    c.option("samples", samples, "sampled (x0, R) pairs per solution");
    c.option("q", q, "integrability exponent (0 = 7N)");
    c.option("gamma", gamma, "exponent gamma (0 = 1/(2N))");
    c.option("C", C, "estimate constant (0 = calibrate)");
    c.option("offsets", offsets, "calibration lattice size in |x0|");
    c.option("radii", radii, "calibration lattice size in R");
    c.run = [this] { return run(); };
  }

  Artifacts run() const
  {
    const double qq = q > 0.0 ? q : 7.0 * dim;
    const double gg = gamma > 0.0 ? gamma : 1.0 / (2.0 * dim);
    if (betas.empty() || samples == 0 || offsets < 2 || radii < 2 || C < 0.0) {
      invalid("need at least one beta, samples > 0, a 2x2 calibration lattice and C >= 0");
    }
    for (double b : betas) {
      if (!(b > -1.0 && b < 0.0)) {
        invalid("beta must lie in (-1, 0)");
      }
    }
    std::vector<bi::RadialProfile> suite;
    for (double b : betas) {
      suite.push_back(bi::mollified_power_solution(dim, b));
    }
    json calibration = nullptr;
    double constant = C;
    if (constant == 0.0) {
      const auto cal = bi::calibrate_estimate(suite, gg, qq, offsets, radii);
      calibration = cal.to_json();
      constant = cal.C;
    }

    const auto pairs = bi::estimate_samples(samples, cmd->seed);
    std::string csv = "beta,offset,radius,lhs,volume,datum,hessian,margin\n";
    json profiles = json::array();
    double worst = std::numeric_limits<double>::infinity();
    for (std::size_t p = 0; p < suite.size(); ++p) {
      json reports = json::array();
      double low = std::numeric_limits<double>::infinity();
      for (const auto& s : pairs) {
        std::vector<double> x0(dim, 0.0);
        x0[0] = s.offset;
        const auto r = bi::evaluate_estimate(suite[p], x0, s.radius, gg, constant, qq);
        reports.push_back(r.to_json());
        low = std::min(low, r.margin);
        csv += csv_row({betas[p], s.offset, s.radius, r.term_lhs, r.term_volume, r.term_datum, r.term_hessian, r.margin});
      }
      worst = std::min(worst, low);
      profiles.push_back({{"beta", betas[p]}, {"min_margin", low}, {"reports", reports}});
    }

    // u = 0, rho = 0 at R = 1
    const auto zero = bi::solve_radial(bi::RadialDensity::zero(dim));
    const std::vector<double> origin(dim, 0.0);
    const auto trivial = bi::evaluate_estimate(zero, origin, 1.0, gg, constant, qq);

    json result{{"schema", "bi.estimate_suite/1"},
                {"dim", dim},
                {"q", qq},
                {"gamma", gg},
                {"C", constant},
                {"calibration", calibration},
                {"profiles", profiles},
                {"min_margin", worst},
                {"all_nonnegative", worst >= 0.0},
                {"trivial_margin", trivial.margin}};
    return {{"estimate.json", dump(result)}, {"margins.csv", csv}};
  }
};

struct SmallData
{
  bi::SmallDataInput input;
  bool threshold = false;
  bool from_density = false;
  DensityOptions density;

  void add(Command& c)
  {
    c.option("m", input.m, "second integrability exponent m >= 1");
    c.option("q", input.q, "integrability exponent q > N");
    c.option("norm-q", input.norm_q, "|rho|_q");
    c.option("norm-m", input.norm_m, "|rho|_m");
    c.option("gamma", input.gamma, "exponent gamma (0 = 1/(2N))");
    c.option("morrey-s", input.morrey_s, "Morrey exponent for m = 1 (0 = N + 1)");
    c.flag("threshold", threshold, "bisect for the largest admissible multiple of the norms");
    c.flag("from-density", from_density, "take the norms from the density flags");
    density.add(c);
    c.run = [this] { return run(); };
  }

  Artifacts run() const
  {
    auto in = input;
    in.dim = density.dim;
    if (from_density) {
      const auto rho = density.build();
      in.norm_q = rho.lq_norm(in.q);
      in.norm_m = rho.lq_norm(in.m);
    }
    in.validate();
    json result{{"schema", "bi.small_data_run/1"}, {"report", bi::small_data_report(in).to_json()}};
    if (threshold) {
      result["threshold"] = bi::small_data_threshold(in).to_json();
    }
    return {{"small_data.json", dump(result)}};
  }
};

struct Gronwall
{
  const Command* cmd = nullptr;
  double C0 = 1.0, C1 = 1.0, beta = 0.5, gamma = 0.5, T = 1.0;
  std::string problem_path;
  std::size_t points = 2048;
  int iterations = 20;
  double tolerance = 1e-4;
  std::size_t suite = 0;
  int substitution_q = 0;
  int substitution_dim = 3;

  void add(Command& c)
  {
    cmd = &c;
    c.option("C0", C0, "constant term");
    c.option("C1", C1, "weight amplitude: Psi(s) = C1 s^{-beta}");
    c.option("beta", beta, "weight exponent in (0, 1)");
    c.option("gamma", gamma, "growth exponent g(k) = k^gamma, in (0, 1)");
    c.option("T", T, "time horizon");
    c.option("problem", problem_path, "JSON problem with tabulated Psi or g (overrides the power parameters)");
    c.option("points", points, "fixed-point mesh nodes");
    c.option("iterations", iterations, "fixed-point iterations");
    c.option("tolerance", tolerance, "relative certification tolerance");
    c.option("suite", suite, "number of random power-case draws to certify (0 = none)");
    c.option("substitution-q", substitution_q, "run the exact exponent substitution check for this q (0 = none)");
    c.option("substitution-dim", substitution_dim, "dimension for the substitution check");
    c.run = [this] { return run(); };
  }

  bi::GronwallProblem problem() const
  {
    if (problem_path.empty()) {
      return bi::GronwallProblem::power(C0, C1, beta, gamma, T);
    }
    std::ifstream in(problem_path);
    if (!in) {
      invalid("cannot read problem file " + problem_path);
    }
    json j;
    try {
      in >> j;
    } catch (const json::exception& e) {
      invalid(std::string("problem file is not valid JSON: ") + e.what());
    }
    return bi::GronwallProblem::from_json(j);
  }

  Artifacts run() const
  {
    const auto p = problem();
    if (points < 3 || iterations < 1 || !(tolerance >= 0.0)) {
      invalid("need points >= 3, iterations >= 1 and tolerance >= 0");
    }
    if (substitution_q != 0 && (substitution_q <= 2 * substitution_dim || substitution_dim < 2)) {
      invalid("substitution check needs q > 2N and N >= 2");
    }
    const auto* power = std::get_if<bi::PowerWeight>(&p.weight());
    const auto* growth = std::get_if<bi::PowerGrowth>(&p.growth());

    const auto fp = bi::fixed_point_iterate(p, points, iterations);
    const auto cert = bi::certify_bound(p, fp.U, tolerance);
    std::string csv = power && growth ? "t,bound,closed_form,fixed_point\n" : "t,bound,fixed_point\n";
    for (std::size_t i = 0; i < fp.U.t.size(); ++i) {
      const double t = fp.U.t[i];
      const double b = bi::gronwall_bound(p, t);
      csv += power && growth
               ? csv_row({t, b, bi::power_case_bound(p.C0(), power->C1, power->beta, growth->gamma, t), fp.U.values[i]})
               : csv_row({t, b, fp.U.values[i]});
    }

    json certificate = cert.to_json();
    certificate["problem"] = p.to_json();
    certificate["increments"] = fp.increments;
    Artifacts out{{"bound.csv", csv}, {"certificate.json", dump(certificate)}};
    if (suite > 0) {
      out["suite.json"] = dump(bi::certification_suite(suite, cmd->seed, tolerance, points, iterations).to_json());
    }
    if (substitution_q != 0) {
      out["substitution.json"] = dump(bi::monotonicity_substitution_check(substitution_q, substitution_dim).to_json());
    }
    return out;
  }
};

struct ScalingCheck
{
  const Command* cmd = nullptr;
  DensityOptions density;
  GridOptions grid;
  std::vector<double> ts{0.5, 2.0};
  double q = 7.0;

  void add(Command& c)
  {
    cmd = &c;
    density.add(c);
    grid.add(c);
    c.option("t", ts, "scale factors")->delimiter(',');
    c.option("q", q, "Lebesgue exponent");
    c.run = [this] { return run(); };
  }

  Artifacts run() const
  {
    if (ts.empty()) {
      invalid("at least one scale factor is required");
    }
    for (double t : ts) {
      if (!(t > 0.0)) {
        invalid("scale factors must be positive");
      }
    }
    const auto rho = density.build();
    const auto g = grid.grid(density.dim);
    json reports = json::array();
    std::string csv = "t,norm_ratio,norm_expected,norm_defect,energy_ratio,energy_expected,energy_defect,radial_norm_defect\n";
    double worst = 0.0;
    for (double t : ts) {
      const auto r = bi::scaling_check(rho, t, g, q, cmd->seed);
      reports.push_back(r.to_json());
      csv += csv_row({t, r.norm_ratio, r.norm_expected, r.norm_defect, r.energy_ratio, r.energy_expected,
                      r.energy_defect, r.radial_norm_defect});
      worst = std::max({worst, r.norm_defect, r.energy_defect, r.radial_norm_defect});
    }
    json result{{"schema", "bi.scaling_run/1"},
                {"density", rho.to_json()},
                {"reports", reports},
                {"max_defect", worst}};
    return {{"scaling.json", dump(result)}, {"scaling.csv", csv}};
  }
};

// ---------------------------------------------------------------------------

int fail(int code, const std::string& kind, const std::string& module, const std::string& message)
{
  json err{{"schema", "bi.error/1"}, {"error", kind}, {"module", module}, {"message", message}, {"exit_code", code}};
  std::cerr << err.dump() << std::endl;
  return code;
}

void check_writable(const fs::path& dir)
{
  std::error_code ec;
  fs::create_directories(dir, ec);
  const auto probe = dir / ".bi-write-probe";
  std::ofstream f(probe);
  if (ec || !f) {
    invalid("output directory " + dir.string() + " is not writable");
  }
  f.close();
  fs::remove(probe, ec);
}

std::string utc_now()
{
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

} // namespace

int main(int argc, char** argv)
{
  CLI::App app{"Born-Infeld electrostatics: solvers and verification runs", "bi"};
  app.config_formatter(std::make_shared<bi::cli::JsonConfig>(&app));
  app.set_config("--config", "", "JSON file of option values; command-line flags take precedence");
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  std::vector<std::unique_ptr<Command>> commands;
  auto make = [&](const char* name, const char* help) -> Command& {
    commands.push_back(std::make_unique<Command>(app, name, help));
    return *commands.back();
  };
  SolveRadial solve_radial;
  SolveGrid solve_grid;
  SeriesSweepCmd series_sweep;
  VerifyEstimate verify_estimate;
  SmallData small_data;
  Gronwall gronwall;
  ScalingCheck scaling;
  solve_radial.add(make("solve-radial", "exact radial solution, profile CSV and origin classification"));
  solve_grid.add(make("solve-grid", "grid minimizer of the Born-Infeld energy"));
  series_sweep.add(make("series-sweep", "truncated p-Laplacian series minimizers against the full energy"));
  verify_estimate.add(make("verify-estimate", "calibrate and certify the local v-estimate on radial solutions"));
  small_data.add(make("small-data", "explicit small-data bound on v and its threshold"));
  gronwall.add(make("gronwall", "Gronwall-Bihari bound, fixed-point certificate and suite"));
  scaling.add(make("scaling-check", "scaling identities for norms and energy"));

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail(kInvalidConfig, "invalid_config", "cli", e.what());
  }

  Command* cmd = nullptr;
  for (auto& c : commands) {
    if (c->selected()) {
      cmd = c.get();
    }
  }

  const auto start = std::chrono::steady_clock::now();
  const std::string started_at = utc_now();
  const fs::path dir(cmd->out);
  const bool fresh = !fs::exists(dir);
  // a failed run leaves no trace, not even the directory it created
  auto abort = [&](int code, const std::string& kind, const std::string& module, const std::string& message) {
    std::error_code ec;
    if (fresh && fs::is_empty(dir, ec)) {
      fs::remove(dir, ec);
    }
    return fail(code, kind, module, message);
  };
  Artifacts artifacts;
  try {
    check_writable(dir);
    artifacts = cmd->run();
  } catch (const bi::InvalidArgument& e) {
    return abort(kInvalidConfig, "invalid_config", e.module(), e.what());
  } catch (const bi::NumericalFailure& e) {
    return abort(kNumericalFailure, "numerical_failure", e.module(), e.what());
  } catch (const std::exception& e) {
    return abort(kInternal, "internal", "cli", e.what());
  }
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  json listing = json::array();
  for (const auto& [name, contents] : artifacts) {
    std::ofstream f(dir / name, std::ios::binary);
    f << contents;
    if (!f) {
      return fail(kInternal, "io", "cli", "failed to write " + (dir / name).string());
    }
    listing.push_back({{"name", name}, {"bytes", contents.size()}});
  }
  json manifest{{"schema", "bi.manifest/1"},
                {"command", cmd->app()->get_name()},
                {"config", cmd->echo()},
                {"versions",
                 {{"bi", kVersion},
                  {"boost", BOOST_LIB_VERSION},
                  {"cli11", CLI11_VERSION},
                  {"nlohmann_json",
                   std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." + std::to_string(NLOHMANN_JSON_VERSION_MINOR) +
                     "." + std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
                  {"compiler", __VERSION__}}},
                {"started_at", started_at},
                {"wall_time_seconds", wall},
                {"artifacts", listing}};
  std::ofstream(dir / "manifest.json") << dump(manifest);
  return kOk;
}
