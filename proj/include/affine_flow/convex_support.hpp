#pragma once

// Support functions of convex bodies: evaluation over point samples,
// probe-based duality membership, ordering of support grids and exhaustion
// limits, and the action of affine maps.

#include <cmath>
#include <cstddef>
#include <fstream>
#include <functional>
#include <istream>
#include <limits>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "affine_flow/error.hpp"
#include "affine_flow/support_grid.hpp"

namespace affine_flow {

/// Evaluator Y -> s(Y) on ambient directions; may return +infinity.
using SupportFunction = std::function<double(const Vector&)>;

/// Finite point set standing for a convex body (V-representation).
class ConvexBodySample {
 public:
  ConvexBodySample(std::vector<Vector> points) : points_(std::move(points)) {
    if (points_.empty()) throw Error(ErrorKind::InvalidInput, "convex body sample is empty");
    dim_ = static_cast<int>(points_.front().size());
    if (dim_ < 1) throw Error(ErrorKind::InvalidInput, "points must have at least one coordinate");
    for (const auto& p : points_) {
      if (p.size() != dim_) throw Error(ErrorKind::InvalidInput, "points have inconsistent dimensions");
      if (!p.allFinite()) throw Error(ErrorKind::InvalidInput, "points must have finite coordinates");
    }
  }

  int ambient_dim() const { return dim_; }
  const std::vector<Vector>& points() const { return points_; }

  ConvexBodySample transformed(const Matrix& A, const Vector& b) const {
    std::vector<Vector> out;
    out.reserve(points_.size());
    for (const auto& p : points_) out.push_back(A * p + b);
    return ConvexBodySample(std::move(out));
  }

 private:
  std::vector<Vector> points_;
  int dim_ = 0;
};

inline double support_value(const ConvexBodySample& body, const Vector& direction) {
  if (direction.size() != body.ambient_dim())
    throw Error(ErrorKind::InvalidInput, "direction dimension does not match the body");
  if (!direction.allFinite()) throw Error(ErrorKind::InvalidInput, "direction must be finite");
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& p : body.points()) best = std::max(best, p.dot(direction));
  return best;
}

inline SupportFunction support_of(ConvexBodySample body) {
  return [body = std::move(body)](const Vector& Y) { return support_value(body, Y); };
}

/// Support function of the Euclidean ball, r |Y| + <c, Y>.
inline SupportFunction ball_support(double radius, Vector center) {
  return [radius, center = std::move(center)](const Vector& Y) { return radius * Y.norm() + center.dot(Y); };
}

/// Slice direction Y = (y^1, ..., y^n, -1).
inline Vector slice_direction(std::span<const double> y) {
  Vector Y(static_cast<Eigen::Index>(y.size()) + 1);
  for (std::size_t i = 0; i < y.size(); ++i) Y[static_cast<Eigen::Index>(i)] = y[i];
  Y[static_cast<Eigen::Index>(y.size())] = -1.0;
  return Y;
}

enum class Membership { Inside, Outside, Undetermined };

/// Approximate Legendre-duality membership test: x lies in the body iff
/// <x, Y> <= s(Y) for every direction; this only checks the given probes, so
/// `Inside` is a certificate relative to the probe set. `Undetermined` is
/// returned when no probe has a finite support value.
inline Membership membership_by_duality(const SupportFunction& support, const Vector& x,
                                        const std::vector<Vector>& probes) {
  if (probes.empty()) throw Error(ErrorKind::InvalidInput, "probe set is empty");
  bool informative = false;
  for (const auto& Y : probes) {
    if (Y.size() != x.size()) throw Error(ErrorKind::InvalidInput, "probe dimension mismatch");
    if (Y.norm() == 0.0) throw Error(ErrorKind::InvalidInput, "probe directions must be nonzero");
    const double s = support(Y);
    if (!std::isfinite(s)) continue;
    informative = true;
    if (x.dot(Y) > s) return Membership::Outside;
  }
  return informative ? Membership::Inside : Membership::Undetermined;
}

/// All nonzero vectors of {-1, 0, 1}^d.
inline std::vector<Vector> lattice_directions(int d) {
  std::vector<Vector> out;
  int total = 1;
  for (int i = 0; i < d; ++i) total *= 3;
  for (int code = 0; code < total; ++code) {
    Vector v(d);
    int c = code;
    for (int i = 0; i < d; ++i) {
      v[i] = static_cast<double>(c % 3 - 1);
      c /= 3;
    }
    if (v.squaredNorm() > 0) out.push_back(v);
  }
  return out;
}

inline double affine_image_support(const SupportFunction& support, const Matrix& A, const Vector& b,
                                   const Vector& Y) {
  return support(A.transpose() * Y) + b.dot(Y);
}

inline void require_compatible(const SupportGrid& a, const SupportGrid& b, bool check_time = true) {
  if (!(a.geometry == b.geometry) || a.values.size() != b.values.size())
    throw Error(ErrorKind::IncompatibleGrids, "grids have different geometry");
  if (check_time && a.time != b.time) throw Error(ErrorKind::IncompatibleGrids, "grids are at different times");
}

struct ContainmentResult {
  bool contained = true;
  std::size_t witness = 0;   // node with the largest s1 - s2
  double violation = 0.0;    // max(s1 - s2) over nodes; <= tol when contained
};

/// Node-wise support ordering s1 <= s2 + tol, i.e. body 1 inside body 2.
inline ContainmentResult containment_order(const SupportGrid& s1, const SupportGrid& s2,
                                           double tol = kTolOrder) {
  require_compatible(s1, s2);
  ContainmentResult r;
  r.violation = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < s1.size(); ++k) {
    const double d = s1[k] - s2[k];
    if (d > r.violation) {
      r.violation = d;
      r.witness = k;
    }
  }
  r.contained = r.violation <= tol;
  return r;
}

struct ExhaustionReport {
  bool monotone = true;
  double max_gap = 0.0;
  std::size_t gap_node = 0;
};

inline ExhaustionReport exhaustion_limit_check(const std::vector<SupportGrid>& sequence, const SupportGrid& target,
                                               double tol = kTolOrder) {
  if (sequence.size() < 2) throw Error(ErrorKind::InvalidInput, "exhaustion sequence needs at least two grids");
  for (const auto& g : sequence) require_compatible(g, target, false);
  ExhaustionReport r;
  for (std::size_t i = 0; i + 1 < sequence.size(); ++i) {
    for (std::size_t k = 0; k < target.size(); ++k) {
      if (sequence[i + 1][k] < sequence[i][k] - tol) r.monotone = false;
    }
  }
  const auto& last = sequence.back();
  for (std::size_t k = 0; k < target.size(); ++k) {
    const double gap = std::abs(target[k] - last[k]);
    if (gap > r.max_gap) {
      r.max_gap = gap;
      r.gap_node = k;
    }
  }
  return r;
}

/// Slice grid of an arbitrary support function at Y = (y, -1).
inline SupportGrid support_grid_of(const SupportFunction& support, const GridGeometry& g, double t = 0.0) {
  SupportGrid grid(g, t);
  for (std::size_t k = 0; k < g.size(); ++k) {
    const auto y = g.point(k);
    grid[k] = support(slice_direction(std::span<const double>(y.data(), g.n)));
  }
  return grid;
}

/// Whitespace-separated point cloud, one point per line. Blank lines and
/// lines starting with '#' are skipped.
inline ConvexBodySample parse_points(std::istream& in, int expected_dim = 0) {
  std::vector<Vector> pts;
  std::string line;
  int line_no = 0;
  int dim = expected_dim;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream ls(line);
    std::vector<double> coords;
    std::string tok;
    while (ls >> tok) {
      try {
        std::size_t used = 0;
        coords.push_back(std::stod(tok, &used));
        if (used != tok.size()) throw std::invalid_argument(tok);
      } catch (const std::exception&) {
        throw Error(ErrorKind::Parse, "line " + std::to_string(line_no) + ": bad coordinate '" + tok + "'");
      }
    }
    if (dim == 0) dim = static_cast<int>(coords.size());
    if (static_cast<int>(coords.size()) != dim)
      throw Error(ErrorKind::Parse, "line " + std::to_string(line_no) + ": expected " + std::to_string(dim) +
                                        " coordinates, got " + std::to_string(coords.size()));
    pts.push_back(Eigen::Map<Vector>(coords.data(), dim));
  }
  if (pts.empty()) throw Error(ErrorKind::InvalidInput, "point file contains no points");
  return ConvexBodySample(std::move(pts));
}

inline ConvexBodySample load_points(const std::string& path, int expected_dim = 0) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open point file " + path);
  return parse_points(in, expected_dim);
}

}  // namespace affine_flow
