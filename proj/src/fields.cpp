#include "bi/fields.hpp"

#include "bi/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace bi {

namespace {

std::size_t ipow(std::size_t base, int exp)
{
  std::size_t r = 1;
  for (int i = 0; i < exp; ++i) {
    r *= base;
  }
  return r;
}

} // namespace

BoxGrid::BoxGrid(int dim, double extent, int points_per_axis)
  : dim_(dim), extent_(extent), points_(points_per_axis)
{
  if (dim < 3) {
    throw InvalidArgument("fields", "grid dimension must be at least 3");
  }
  if (!(extent > 0.0) || !std::isfinite(extent)) {
    throw InvalidArgument("fields", "box half-width must be positive and finite");
  }
  if (points_per_axis < 9 || points_per_axis % 2 == 0) {
    throw InvalidArgument("fields", "points per axis must be odd and >= 9");
  }
  spacing_ = 2.0 * extent / (points_per_axis - 1);
  cell_volume_ = std::pow(spacing_, dim);
  node_count_ = ipow(points_, dim);
  cell_count_ = ipow(points_ - 1, dim);
  strides_.assign(dim, 1);
  for (int i = dim - 2; i >= 0; --i) {
    strides_[i] = strides_[i + 1] * points_;
  }
  corner_offsets_.resize(1u << dim);
  for (unsigned k = 0; k < (1u << dim); ++k) {
    std::size_t off = 0;
    for (int i = 0; i < dim; ++i) {
      if (k & (1u << i)) {
        off += strides_[i];
      }
    }
    corner_offsets_[k] = off;
  }
  cell_bases_.resize(cell_count_);
  std::vector<int> idx(dim, 0);
  for (std::size_t c = 0; c < cell_count_; ++c) {
    cell_bases_[c] = node_at(idx);
    for (int i = dim - 1; i >= 0; --i) {
      if (++idx[i] < points_ - 1) {
        break;
      }
      idx[i] = 0;
    }
  }
}

void BoxGrid::node_index(std::size_t node, std::span<int> idx) const
{
  for (int i = 0; i < dim_; ++i) {
    idx[i] = static_cast<int>((node / strides_[i]) % points_);
  }
}

std::size_t BoxGrid::node_at(std::span<const int> idx) const
{
  std::size_t n = 0;
  for (int i = 0; i < dim_; ++i) {
    n += static_cast<std::size_t>(idx[i]) * strides_[i];
  }
  return n;
}

void BoxGrid::node_position(std::size_t node, std::span<double> x) const
{
  for (int i = 0; i < dim_; ++i) {
    x[i] = coordinate(static_cast<int>((node / strides_[i]) % points_));
  }
}

bool BoxGrid::is_boundary(std::size_t node) const
{
  for (int i = 0; i < dim_; ++i) {
    auto k = (node / strides_[i]) % points_;
    if (k == 0 || k == static_cast<std::size_t>(points_ - 1)) {
      return true;
    }
  }
  return false;
}

double BoxGrid::trapezoid_weight(std::size_t node) const
{
  double w = 1.0;
  for (int i = 0; i < dim_; ++i) {
    auto k = (node / strides_[i]) % points_;
    if (k == 0 || k == static_cast<std::size_t>(points_ - 1)) {
      w *= 0.5;
    }
  }
  return w;
}

void BoxGrid::cell_center(std::size_t cell, std::span<double> x) const
{
  node_position(cell_bases_[cell], x);
  for (int i = 0; i < dim_; ++i) {
    x[i] += 0.5 * spacing_;
  }
}

GridField::GridField(BoxGrid grid) : grid_(std::move(grid)), values_(grid_.node_count(), 0.0) {}

GridField::GridField(BoxGrid grid, std::vector<double> values)
  : grid_(std::move(grid)), values_(std::move(values))
{
  if (values_.size() != grid_.node_count()) {
    throw InvalidArgument("fields", "value count does not match the grid");
  }
  for (double v : values_) {
    if (!std::isfinite(v)) {
      throw InvalidArgument("fields", "grid field values must be finite");
    }
  }
}

bool GridField::has_zero_boundary() const
{
  for (std::size_t n = 0; n < values_.size(); ++n) {
    if (grid_.is_boundary(n) && values_[n] != 0.0) {
      return false;
    }
  }
  return true;
}

GridField GridField::with_zero_boundary() const
{
  GridField out = *this;
  for (std::size_t n = 0; n < values_.size(); ++n) {
    if (grid_.is_boundary(n)) {
      out.values_[n] = 0.0;
    }
  }
  return out;
}

GradientField::GradientField(BoxGrid grid) : grid_(std::move(grid))
{
  std::size_t faces = grid_.node_count() / grid_.points() * (grid_.points() - 1);
  components_.assign(grid_.dim(), std::vector<double>(faces, 0.0));
}

std::vector<int> GradientField::extents(int axis) const
{
  std::vector<int> e(grid_.dim(), grid_.points());
  e[axis] = grid_.points() - 1;
  return e;
}

std::size_t GradientField::face_index(int axis, std::span<const int> face) const
{
  std::size_t n = 0;
  for (int i = 0; i < grid_.dim(); ++i) {
    int extent = (i == axis) ? grid_.points() - 1 : grid_.points();
    n = n * extent + face[i];
  }
  return n;
}

double GradientField::at(int axis, std::span<const int> face) const
{
  return components_[axis][face_index(axis, face)];
}

GradientField gradient(const GridField& field)
{
  const BoxGrid& grid = field.grid();
  GradientField g(grid);
  const int dim = grid.dim();
  const double inv_h = 1.0 / grid.spacing();
  auto u = field.values();
  std::vector<int> idx(dim);
  for (int axis = 0; axis < dim; ++axis) {
    auto& comp = g.components_[axis];
    std::size_t f = 0;
    std::fill(idx.begin(), idx.end(), 0);
    // iterate faces of this component in row-major order of its extents
    while (true) {
      std::size_t n = grid.node_at(idx);
      comp[f++] = (u[n + grid.stride(axis)] - u[n]) * inv_h;
      int i = dim - 1;
      for (; i >= 0; --i) {
        int extent = (i == axis) ? grid.points() - 1 : grid.points();
        if (++idx[i] < extent) {
          break;
        }
        idx[i] = 0;
      }
      if (i < 0) {
        break;
      }
    }
  }
  return g;
}

std::vector<double> cell_gradient_sq(const GradientField& g)
{
  const BoxGrid& grid = g.grid();
  const int dim = grid.dim();
  const double edge_weight = 1.0 / static_cast<double>(1u << (dim - 1));
  std::vector<double> out(grid.cell_count(), 0.0);
  std::vector<int> base(dim);
  std::vector<int> face(dim);
  for (std::size_t c = 0; c < grid.cell_count(); ++c) {
    grid.node_index(grid.cell_bases()[c], base);
    double s = 0.0;
    for (int axis = 0; axis < dim; ++axis) {
      for (unsigned k = 0; k < grid.corners_per_cell(); ++k) {
        if (k & (1u << axis)) {
          continue;
        }
        for (int i = 0; i < dim; ++i) {
          face[i] = base[i] + ((k >> i) & 1u);
        }
        double d = g.at(axis, face);
        s += d * d;
      }
    }
    out[c] = s * edge_weight;
  }
  return out;
}

std::vector<double> cell_gradient_sq(const BoxGrid& grid, std::span<const double> u)
{
  const int dim = grid.dim();
  const unsigned corners = grid.corners_per_cell();
  const double inv_h2 = 1.0 / (grid.spacing() * grid.spacing());
  const double edge_weight = 1.0 / static_cast<double>(1u << (dim - 1));
  std::vector<double> out(grid.cell_count());
  const auto& bases = grid.cell_bases();
  for (std::size_t c = 0; c < bases.size(); ++c) {
    const double* p = u.data() + bases[c];
    double s = 0.0;
    for (int axis = 0; axis < dim; ++axis) {
      const unsigned bit = 1u << axis;
      const std::size_t step = grid.stride(axis);
      for (unsigned k = 0; k < corners; ++k) {
        if (k & bit) {
          continue;
        }
        const std::size_t off = grid.corner_offset(k);
        double d = p[off + step] - p[off];
        s += d * d;
      }
    }
    out[c] = s * inv_h2 * edge_weight;
  }
  return out;
}

std::vector<double> cell_gradient_dot(const BoxGrid& grid, std::span<const double> a, std::span<const double> b)
{
  const int dim = grid.dim();
  const unsigned corners = grid.corners_per_cell();
  const double scale = 1.0 / (grid.spacing() * grid.spacing() * static_cast<double>(1u << (dim - 1)));
  std::vector<double> out(grid.cell_count());
  const auto& bases = grid.cell_bases();
  for (std::size_t c = 0; c < bases.size(); ++c) {
    const double* p = a.data() + bases[c];
    const double* q = b.data() + bases[c];
    double s = 0.0;
    for (int axis = 0; axis < dim; ++axis) {
      const unsigned bit = 1u << axis;
      const std::size_t step = grid.stride(axis);
      for (unsigned k = 0; k < corners; ++k) {
        if (k & bit) {
          continue;
        }
        const std::size_t off = grid.corner_offset(k);
        s += (p[off + step] - p[off]) * (q[off + step] - q[off]);
      }
    }
    out[c] = s * scale;
  }
  return out;
}

std::vector<double> weighted_gradient_transpose(const BoxGrid& grid, std::span<const double> weights,
                                                std::span<const double> u)
{
  const int dim = grid.dim();
  const unsigned corners = grid.corners_per_cell();
  const double scale = 1.0 / (grid.spacing() * grid.spacing() * static_cast<double>(1u << (dim - 1)));
  std::vector<double> out(grid.node_count(), 0.0);
  const auto& bases = grid.cell_bases();
  for (std::size_t c = 0; c < bases.size(); ++c) {
    const double w = weights[c] * scale;
    if (w == 0.0) {
      continue;
    }
    const double* p = u.data() + bases[c];
    double* r = out.data() + bases[c];
    for (int axis = 0; axis < dim; ++axis) {
      const unsigned bit = 1u << axis;
      const std::size_t step = grid.stride(axis);
      for (unsigned k = 0; k < corners; ++k) {
        if (k & bit) {
          continue;
        }
        const std::size_t off = grid.corner_offset(k);
        const double d = w * (p[off + step] - p[off]);
        r[off + step] += d;
        r[off] -= d;
      }
    }
  }
  return out;
}

double sup_gradient_norm(const GradientField& g)
{
  auto sq = cell_gradient_sq(g);
  double m = 0.0;
  for (double s : sq) {
    m = std::max(m, s);
  }
  return std::sqrt(m);
}

std::vector<double> v_from_gradient_sq(std::span<const double> cell_sq)
{
  constexpr double limit = (1.0 + kConstraintTolerance) * (1.0 + kConstraintTolerance);
  std::vector<double> v(cell_sq.size());
  for (std::size_t c = 0; c < cell_sq.size(); ++c) {
    double s = cell_sq[c];
    if (s > limit) {
      throw ConstraintViolation("fields", "cell gradient norm " + std::to_string(std::sqrt(s)) +
                                            " exceeds 1 in cell " + std::to_string(c));
    }
    v[c] = s >= 1.0 ? 0.0 : std::sqrt(1.0 - s);
  }
  return v;
}

std::vector<double> v_field(const GradientField& g) { return v_from_gradient_sq(cell_gradient_sq(g)); }

double lq_norm(std::span<const double> values, const BoxGrid& grid, double q)
{
  if (!(q >= 1.0)) {
    throw InvalidArgument("fields", "L^q norm needs q >= 1");
  }
  if (std::isinf(q)) {
    double m = 0.0;
    for (double v : values) {
      m = std::max(m, std::abs(v));
    }
    return m;
  }
  double m = 0.0;
  for (double v : values) {
    m = std::max(m, std::abs(v));
  }
  if (m == 0.0) {
    return 0.0;
  }
  // scale by the max to avoid overflow for large q
  double sum = 0.0;
  for (double v : values) {
    sum += std::pow(std::abs(v) / m, q);
  }
  return m * std::pow(sum * grid.cell_volume(), 1.0 / q);
}

double hessian_frobenius_sq(const GridField& field, std::size_t node)
{
  const BoxGrid& grid = field.grid();
  const int dim = grid.dim();
  const double h = grid.spacing();
  auto u = field.values();
  double total = 0.0;
  for (int i = 0; i < dim; ++i) {
    const std::size_t si = grid.stride(i);
    double dii = (u[node + si] - 2.0 * u[node] + u[node - si]) / (h * h);
    total += dii * dii;
    for (int j = i + 1; j < dim; ++j) {
      const std::size_t sj = grid.stride(j);
      double dij = (u[node + si + sj] - u[node + si - sj] - u[node - si + sj] + u[node - si - sj]) /
                   (4.0 * h * h);
      total += 2.0 * dij * dij;
    }
  }
  return total;
}

double w22_seminorm_ball(const GridField& field, std::span<const double> center, double radius)
{
  const BoxGrid& grid = field.grid();
  const int dim = grid.dim();
  if (center.size() != static_cast<std::size_t>(dim) || !(radius > 0.0)) {
    throw InvalidArgument("fields", "invalid ball for W22 seminorm");
  }
  const double inner = grid.extent() - 2.0 * grid.spacing();
  for (int i = 0; i < dim; ++i) {
    if (std::abs(center[i]) + radius > inner + 1e-12 * grid.extent()) {
      throw InvalidArgument("fields", "ball touches the boundary layer of width 2h");
    }
  }
  std::vector<double> x(dim);
  double sum = 0.0;
  for (std::size_t n = 0; n < grid.node_count(); ++n) {
    grid.node_position(n, x);
    double r2 = 0.0;
    for (int i = 0; i < dim; ++i) {
      r2 += (x[i] - center[i]) * (x[i] - center[i]);
    }
    if (r2 < radius * radius) {
      sum += hessian_frobenius_sq(field, n);
    }
  }
  return std::sqrt(sum * grid.cell_volume());
}

double interpolate(const BoxGrid& grid, std::span<const double> nodal, std::span<const double> x)
{
  const int dim = grid.dim();
  std::vector<int> base(dim);
  std::vector<double> frac(dim);
  for (int i = 0; i < dim; ++i) {
    double t = (x[i] + grid.extent()) / grid.spacing();
    int k = static_cast<int>(std::floor(t));
    k = std::clamp(k, 0, grid.points() - 2);
    base[i] = k;
    frac[i] = std::clamp(t - k, 0.0, 1.0);
  }
  std::size_t b = grid.node_at(base);
  double value = 0.0;
  for (unsigned k = 0; k < grid.corners_per_cell(); ++k) {
    double w = 1.0;
    for (int i = 0; i < dim; ++i) {
      w *= (k & (1u << i)) ? frac[i] : 1.0 - frac[i];
    }
    if (w != 0.0) {
      value += w * nodal[b + grid.corner_offset(k)];
    }
  }
  return value;
}

} // namespace bi
