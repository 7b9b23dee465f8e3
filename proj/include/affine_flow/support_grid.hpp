#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "affine_flow/error.hpp"

namespace affine_flow {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline constexpr double kTolOrder = 1e-10;
inline constexpr double kTolConvexity = 1e-8;
inline constexpr int kMinResolution = 5;

enum class SolitonKind { Sphere, Ellipsoid, Paraboloid, Calabi };

inline std::string to_string(SolitonKind k) {
  switch (k) {
    case SolitonKind::Sphere: return "sphere";
    case SolitonKind::Ellipsoid: return "ellipsoid";
    case SolitonKind::Paraboloid: return "paraboloid";
    case SolitonKind::Calabi: return "calabi";
  }
  return "unknown";
}

/// Ambient affine map x -> A x + b applied to a soliton body.
struct AffineMap {
  Matrix A;
  Vector b;
};

/// A closed-form self-similar solution, optionally moved by an affine map.
///
/// `r0` is the initial radius for spheres; `t0` is the (negative) soliton
/// time at flow time zero for the ancient ellipsoid. Paraboloid and Calabi
/// take no parameters.
struct SolitonSpec {
  SolitonKind kind = SolitonKind::Sphere;
  int n = 1;
  double r0 = 1.0;
  double t0 = -1.0;
  std::optional<AffineMap> transform;

  void validate() const {
    if (n < 1 || n > 3) throw Error(ErrorKind::Validation, "soliton dimension must be 1..3");
    if (kind == SolitonKind::Sphere && !(r0 > 0.0 && std::isfinite(r0)))
      throw Error(ErrorKind::Validation, "sphere radius r0 must be positive");
    if (kind == SolitonKind::Ellipsoid && !(t0 < 0.0))
      throw Error(ErrorKind::Validation, "ellipsoid time offset t0 must be negative");
    if (transform) {
      if (transform->A.rows() != n + 1 || transform->A.cols() != n + 1 || transform->b.size() != n + 1)
        throw Error(ErrorKind::Validation, "soliton transform has wrong shape");
    }
  }
};

enum class BoundaryKind { Fixed, ExactSoliton };

/// Boundary treatment of the solver. Exact-soliton data at flow time t is
/// value_scale * s_soliton(y, time_scale * t), which expresses parabolic
/// rescalings of a catalog entry.
struct BoundaryMode {
  BoundaryKind kind = BoundaryKind::Fixed;
  std::optional<SolitonSpec> soliton;  // required for ExactSoliton
  double value_scale = 1.0;
  double time_scale = 1.0;

  static BoundaryMode fixed() { return {}; }
  static BoundaryMode exact(SolitonSpec spec) { return {BoundaryKind::ExactSoliton, std::move(spec), 1.0, 1.0}; }
};

struct Axis {
  double lower = -1.0;
  double upper = 1.0;
  int count = kMinResolution;

  double spacing() const { return (upper - lower) / (count - 1); }
  double coordinate(int i) const { return lower + (upper - lower) * i / (count - 1); }
  bool operator==(const Axis&) const = default;
};

/// Node layout of a hyperplane-slice window, n in {1, 2}. Nodes are stored
/// row-major with the first axis slowest.
struct GridGeometry {
  int n = 1;
  std::array<Axis, 2> axes{};

  static GridGeometry line(double lo, double hi, int count) {
    GridGeometry g;
    g.n = 1;
    g.axes[0] = {lo, hi, count};
    g.axes[1] = {0.0, 0.0, 1};
    return g;
  }
  static GridGeometry square(double lo, double hi, int count) {
    GridGeometry g;
    g.n = 2;
    g.axes[0] = {lo, hi, count};
    g.axes[1] = {lo, hi, count};
    return g;
  }

  std::size_t size() const {
    return n == 1 ? static_cast<std::size_t>(axes[0].count)
                  : static_cast<std::size_t>(axes[0].count) * axes[1].count;
  }
  std::size_t index(int i, int j = 0) const {
    return n == 1 ? static_cast<std::size_t>(i) : static_cast<std::size_t>(i) * axes[1].count + j;
  }
  std::array<int, 2> multi_index(std::size_t k) const {
    if (n == 1) return {static_cast<int>(k), 0};
    return {static_cast<int>(k / axes[1].count), static_cast<int>(k % axes[1].count)};
  }
  std::array<double, 2> point(std::size_t k) const {
    const auto [i, j] = multi_index(k);
    return {axes[0].coordinate(i), n == 2 ? axes[1].coordinate(j) : 0.0};
  }
  bool is_boundary(std::size_t k) const {
    const auto [i, j] = multi_index(k);
    if (i == 0 || i == axes[0].count - 1) return true;
    return n == 2 && (j == 0 || j == axes[1].count - 1);
  }
  double min_spacing() const {
    return n == 1 ? axes[0].spacing() : std::min(axes[0].spacing(), axes[1].spacing());
  }

  void validate() const {
    if (n != 1 && n != 2) throw Error(ErrorKind::Validation, "grid dimension must be 1 or 2");
    for (int a = 0; a < n; ++a) {
      if (axes[a].count < kMinResolution)
        throw Error(ErrorKind::Validation, "resolution must be at least 5 per axis");
      if (!(axes[a].upper > axes[a].lower) || !std::isfinite(axes[a].lower) || !std::isfinite(axes[a].upper))
        throw Error(ErrorKind::Validation, "axis bounds must be finite with upper > lower");
    }
  }

  bool operator==(const GridGeometry& o) const {
    if (n != o.n || axes[0] != o.axes[0]) return false;
    return n == 1 || axes[1] == o.axes[1];
  }
};

/// Discretized slice support function s(y, t), the solver state.
struct SupportGrid {
  GridGeometry geometry;
  std::vector<double> values;
  double time = 0.0;
  BoundaryMode boundary;

  SupportGrid() = default;
  SupportGrid(GridGeometry g, double t, BoundaryMode mode = {})
      : geometry(g), values(g.size(), 0.0), time(t), boundary(std::move(mode)) {}

  int n() const { return geometry.n; }
  std::size_t size() const { return values.size(); }
  double& operator[](std::size_t k) { return values[k]; }
  double operator[](std::size_t k) const { return values[k]; }

  template <class F>
  static SupportGrid from_function(const GridGeometry& g, double t, F&& f, BoundaryMode mode = {}) {
    SupportGrid grid(g, t, std::move(mode));
    for (std::size_t k = 0; k < g.size(); ++k) {
      const auto y = g.point(k);
      grid.values[k] = g.n == 1 ? f(std::array<double, 1>{y[0]}) : f(std::array<double, 2>{y[0], y[1]});
    }
    return grid;
  }

  /// Centered-difference Hessian at an interior node, packed as {s11, s12, s22}
  /// (s12 = s22 = 0 when n == 1).
  std::array<double, 3> hessian(std::size_t k) const {
    if (geometry.is_boundary(k)) throw Error(ErrorKind::Index, "Hessian requested at a boundary node");
    const double h1 = geometry.axes[0].spacing();
    if (n() == 1) {
      return {(values[k + 1] - 2.0 * values[k] + values[k - 1]) / (h1 * h1), 0.0, 0.0};
    }
    const double h2 = geometry.axes[1].spacing();
    const std::size_t stride = geometry.axes[1].count;
    const double s11 = (values[k + stride] - 2.0 * values[k] + values[k - stride]) / (h1 * h1);
    const double s22 = (values[k + 1] - 2.0 * values[k] + values[k - 1]) / (h2 * h2);
    const double s12 = (values[k + stride + 1] - values[k + stride - 1] - values[k - stride + 1] +
                        values[k - stride - 1]) /
                       (4.0 * h1 * h2);
    return {s11, s12, s22};
  }

  /// Centered-difference gradient at an interior node.
  std::array<double, 2> gradient(std::size_t k) const {
    if (geometry.is_boundary(k)) throw Error(ErrorKind::Index, "gradient requested at a boundary node");
    const double h1 = geometry.axes[0].spacing();
    if (n() == 1) return {(values[k + 1] - values[k - 1]) / (2.0 * h1), 0.0};
    const double h2 = geometry.axes[1].spacing();
    const std::size_t stride = geometry.axes[1].count;
    return {(values[k + stride] - values[k - stride]) / (2.0 * h1), (values[k + 1] - values[k - 1]) / (2.0 * h2)};
  }

  void validate() const {
    geometry.validate();
    if (values.size() != geometry.size()) throw Error(ErrorKind::Validation, "value count does not match grid");
    for (double v : values)
      if (!std::isfinite(v)) throw Error(ErrorKind::Validation, "grid values must be finite");
  }
};

/// Eigenvalues of a packed symmetric Hessian, ascending.
inline std::array<double, 2> hessian_eigenvalues(const std::array<double, 3>& H, int n) {
  if (n == 1) return {H[0], H[0]};
  const double mean = 0.5 * (H[0] + H[2]);
  const double diff = 0.5 * (H[0] - H[2]);
  const double rad = std::sqrt(diff * diff + H[1] * H[1]);
  return {mean - rad, mean + rad};
}

/// Discrete convexity: every interior Hessian has eigenvalues >= -tol.
/// Returns the index of the first violating node, if any.
inline std::optional<std::size_t> find_convexity_violation(const SupportGrid& grid, double tol = kTolConvexity) {
  for (std::size_t k = 0; k < grid.size(); ++k) {
    if (grid.geometry.is_boundary(k)) continue;
    const auto ev = hessian_eigenvalues(grid.hessian(k), grid.n());
    if (ev[0] < -tol) return k;
  }
  return std::nullopt;
}

}  // namespace affine_flow
