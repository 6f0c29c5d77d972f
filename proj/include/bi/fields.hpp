#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace bi {

/// Uniform grid on the box [-extent, extent]^dim with an odd number of nodes
/// per axis, so the origin is a node. Nodes are stored row-major (last axis
/// fastest). Cells are indexed by their lowest-corner node.
class BoxGrid
{
public:
  BoxGrid(int dim, double extent, int points_per_axis);

  int dim() const { return dim_; }
  double extent() const { return extent_; }
  int points() const { return points_; }
  double spacing() const { return spacing_; }
  /// h^N
  double cell_volume() const { return cell_volume_; }

  std::size_t node_count() const { return node_count_; }
  std::size_t cell_count() const { return cell_count_; }
  std::size_t stride(int axis) const { return strides_[axis]; }

  double coordinate(int index) const { return -extent_ + spacing_ * index; }
  /// Multi-index of a node.
  void node_index(std::size_t node, std::span<int> idx) const;
  std::size_t node_at(std::span<const int> idx) const;
  void node_position(std::size_t node, std::span<double> x) const;
  bool is_boundary(std::size_t node) const;
  /// Trapezoidal weight of a node (1 in the interior, halved per boundary axis).
  double trapezoid_weight(std::size_t node) const;

  /// Base node of every cell, in cell order.
  const std::vector<std::size_t>& cell_bases() const { return cell_bases_; }
  /// Offset of cell corner k (bit i of k selects +1 along axis i).
  std::size_t corner_offset(unsigned k) const { return corner_offsets_[k]; }
  unsigned corners_per_cell() const { return 1u << dim_; }
  void cell_center(std::size_t cell, std::span<double> x) const;

  bool operator==(const BoxGrid& other) const
  {
    return dim_ == other.dim_ && extent_ == other.extent_ && points_ == other.points_;
  }

private:
  int dim_;
  double extent_;
  int points_;
  double spacing_;
  double cell_volume_;
  std::size_t node_count_;
  std::size_t cell_count_;
  std::vector<std::size_t> strides_;
  std::vector<std::size_t> cell_bases_;
  std::vector<std::size_t> corner_offsets_;
};

/// Nodal scalar field. Boundary values are fixed data: zero for fields in the
/// discrete energy space, or a prescribed far-field trace.
class GridField
{
public:
  explicit GridField(BoxGrid grid);
  GridField(BoxGrid grid, std::vector<double> values);

  const BoxGrid& grid() const { return grid_; }
  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }
  double& operator[](std::size_t i) { return values_[i]; }

  /// True when every boundary node is exactly zero.
  bool has_zero_boundary() const;
  /// Copy with the boundary nodes set to zero.
  GridField with_zero_boundary() const;

private:
  BoxGrid grid_;
  std::vector<double> values_;
};

/// Staggered forward differences. Component i lives on the faces between
/// nodes x and x + h e_i; its extents are points-1 along axis i and points
/// along every other axis.
class GradientField
{
public:
  const BoxGrid& grid() const { return grid_; }
  std::span<const double> component(int axis) const { return components_[axis]; }
  /// Extents of component `axis`.
  std::vector<int> extents(int axis) const;
  double at(int axis, std::span<const int> face) const;

private:
  friend GradientField gradient(const GridField& field);
  explicit GradientField(BoxGrid grid);
  std::size_t face_index(int axis, std::span<const int> face) const;

  BoxGrid grid_;
  std::vector<std::vector<double>> components_;
};

GradientField gradient(const GridField& field);

/// Squared cell gradient |grad u|_c^2 = sum_i mean over the cell's i-edges of
/// (D_i u)^2, one value per cell.
std::vector<double> cell_gradient_sq(const GradientField& g);
/// Same quantity straight from nodal values.
std::vector<double> cell_gradient_sq(const BoxGrid& grid, std::span<const double> nodal);

/// Per-cell pairing <grad a, grad b>_c, the polarization of cell_gradient_sq.
std::vector<double> cell_gradient_dot(const BoxGrid& grid, std::span<const double> a, std::span<const double> b);

/// Nodal gradient of (1/2) sum_c weights_c |grad u|_c^2 with the weights held
/// fixed. Entries at boundary nodes are filled too; callers with a fixed
/// boundary discard them.
std::vector<double> weighted_gradient_transpose(const BoxGrid& grid, std::span<const double> weights,
                                                std::span<const double> u);

double sup_gradient_norm(const GradientField& g);

/// Tolerance on |grad u| <= 1 checks.
inline constexpr double kConstraintTolerance = 1e-12;

/// v = sqrt(1 - |grad u|^2) per cell. Throws ConstraintViolation when a cell
/// norm exceeds 1 by more than kConstraintTolerance.
std::vector<double> v_field(const GradientField& g);
std::vector<double> v_from_gradient_sq(std::span<const double> cell_sq);

/// (sum |f|^q h^N)^{1/q} over the supplied values.
double lq_norm(std::span<const double> values, const BoxGrid& grid, double q);

/// Discrete W^{2,2} seminorm over the nodes inside a ball, using central
/// second differences. The ball must stay 2h inside the box.
double w22_seminorm_ball(const GridField& field, std::span<const double> center, double radius);

/// Sum of squared Hessian entries at an interior node (central differences).
double hessian_frobenius_sq(const GridField& field, std::size_t node);

/// Multilinear interpolation of nodal values at an arbitrary point in the box.
double interpolate(const BoxGrid& grid, std::span<const double> nodal, std::span<const double> x);

} // namespace bi
