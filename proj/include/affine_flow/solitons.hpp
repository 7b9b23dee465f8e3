#pragma once

// Closed-form self-similar solutions of the slice support-function flow
//   d/dt s(y, t) = -(det D^2 s)^(-1/(n+2)).
//
// Shrinking sphere, ancient ellipsoid (sphere in the normalized gauge with
// extinction at t = 0), translating paraboloid and Calabi's expanding orthant
// solution. Formulas are generic in the scalar type so they can be evaluated
// on doubles or on Taylor jets.

#include <charconv>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "affine_flow/error.hpp"
#include "affine_flow/support_grid.hpp"
#include "affine_flow/taylor_jet.hpp"

namespace affine_flow {

/// (2n + 2) / (n + 2): the time exponent of the sphere radius law.
inline double sphere_rate(int n) { return (2.0 * n + 2.0) / (n + 2.0); }

inline double extinction_time(double r0, int n) {
  if (!(r0 > 0.0)) throw Error(ErrorKind::InvalidInput, "r0 must be positive");
  const double a = sphere_rate(n);
  return std::pow(r0, a) / a;
}

inline double sphere_radius(double r0, int n, double t) {
  if (t < 0.0) throw Error(ErrorKind::Domain, "sphere radius requested at negative time");
  const double a = sphere_rate(n);
  const double base = std::pow(r0, a) - a * t;
  if (!(base > 0.0)) throw Error(ErrorKind::Extinct, "sphere is extinct at t = " + std::to_string(t), t);
  return std::pow(base, 1.0 / a);
}

inline double ellipsoid_support(std::span<const double> y, double t, int n) {
  if (!(t < 0.0)) throw Error(ErrorKind::Domain, "ellipsoid soliton is defined for t < 0");
  double q = 1.0;
  for (double v : y) q += v * v;
  const double a = sphere_rate(n);
  return std::pow(-a * t, 1.0 / a) * std::sqrt(q);
}

inline double paraboloid_support(std::span<const double> y, double t) {
  double q = 0.0;
  for (double v : y) q += v * v;
  return 0.5 * q - t;
}

/// c_n = (n + 1)^(1/2) (2 / (n + 2))^((n + 2)/2).
inline double calabi_constant(int n) { return std::sqrt(n + 1.0) * std::pow(2.0 / (n + 2.0), 0.5 * (n + 2.0)); }

inline double calabi_level(double t, int n) {
  if (t < 0.0) throw Error(ErrorKind::Domain, "Calabi level requested at negative time");
  return calabi_constant(n) * std::pow(t, 0.5 * (n + 2.0));
}

/// Support of {x >= 0, prod x^i >= calabi_level(t)} for an ambient direction
/// Y of length n + 1; +infinity if any component is positive.
inline double calabi_support(std::span<const double> Y, double t, int n) {
  const double level = calabi_level(t, n);
  double prod = 1.0;
  for (double v : Y) {
    if (v > 0.0) return std::numeric_limits<double>::infinity();
    prod *= -v;
  }
  return -(n + 1.0) * std::pow(level * prod, 1.0 / (n + 1.0));
}

inline double soliton_extinction_time(const SolitonSpec& spec) {
  switch (spec.kind) {
    case SolitonKind::Sphere: return extinction_time(spec.r0, spec.n);
    case SolitonKind::Ellipsoid: return -spec.t0;
    default: return std::numeric_limits<double>::infinity();
  }
}

namespace detail {

inline double domain_value(double) { return std::numeric_limits<double>::infinity(); }
inline Jet domain_value(const Jet&) {
  throw Error(ErrorKind::Domain, "soliton support is infinite at this direction");
}

}  // namespace detail

/// Homogeneous-of-degree-one support of the untransformed soliton body at an
/// ambient direction Z (length n + 1), flow time t.
template <class T>
T soliton_support_homogeneous(const SolitonSpec& spec, std::span<const T> Z, const T& t) {
  using std::pow;
  using std::sqrt;
  const int n = spec.n;
  const double a = sphere_rate(n);
  switch (spec.kind) {
    case SolitonKind::Sphere:
    case SolitonKind::Ellipsoid: {
      T radius = spec.kind == SolitonKind::Sphere ? std::pow(spec.r0, a) - a * t : -a * (spec.t0 + t);
      if (!(value_of(radius) > 0.0))
        throw Error(ErrorKind::Extinct, "soliton is extinct", value_of(t));
      radius = pow(radius, 1.0 / a);
      T norm2 = Z[0] * Z[0];
      for (int i = 1; i <= n; ++i) norm2 = norm2 + Z[i] * Z[i];
      return radius * sqrt(norm2);
    }
    case SolitonKind::Paraboloid: {
      const T& last = Z[n];
      if (!(value_of(last) < 0.0)) return detail::domain_value(last);
      T q = Z[0] * Z[0];
      for (int i = 1; i < n; ++i) q = q + Z[i] * Z[i];
      return q / (-2.0 * last) + t * last;
    }
    case SolitonKind::Calabi: {
      if (value_of(t) < 0.0) throw Error(ErrorKind::Domain, "Calabi soliton requires t >= 0");
      for (int i = 0; i <= n; ++i)
        if (value_of(Z[i]) > 0.0) return detail::domain_value(Z[i]);
      if (value_of(t) == 0.0) return 0.0 * t;
      T prod = -Z[0];
      for (int i = 1; i <= n; ++i) prod = prod * (-Z[i]);
      if (value_of(prod) == 0.0) return 0.0 * prod;
      const T level = calabi_constant(n) * pow(t, 0.5 * (n + 2.0));
      return -(n + 1.0) * pow(level * prod, 1.0 / (n + 1.0));
    }
  }
  throw Error(ErrorKind::InvalidInput, "unknown soliton kind");
}

/// Slice support s(y, t) = s_body((y, -1), t), including the optional affine
/// transform s_{AK+b}(Y) = s_K(A^T Y) + <b, Y>.
template <class T>
T soliton_slice_support(const SolitonSpec& spec, std::span<const T> y, const T& t) {
  const int n = spec.n;
  std::vector<T> Y(y.begin(), y.end());
  Y.push_back(0.0 * t - 1.0);
  if (!spec.transform) return soliton_support_homogeneous<T>(spec, std::span<const T>(Y), t);
  const Matrix& A = spec.transform->A;
  const Vector& b = spec.transform->b;
  std::vector<T> Z;
  Z.reserve(n + 1);
  T shift = 0.0 * t;
  for (int r = 0; r <= n; ++r) {
    T acc = 0.0 * t;
    for (int c = 0; c <= n; ++c) acc = acc + A(c, r) * Y[c];
    Z.push_back(acc);
    shift = shift + b[r] * Y[r];
  }
  return soliton_support_homogeneous<T>(spec, std::span<const T>(Z), t) + shift;
}

inline double soliton_slice_support(const SolitonSpec& spec, std::span<const double> y, double t) {
  return soliton_slice_support<double>(spec, y, t);
}

/// Fill a solver grid from the closed form at time t. The returned grid
/// carries an exact-soliton boundary mode for the same spec.
inline SupportGrid soliton_support_grid(const SolitonSpec& spec, const GridGeometry& geometry, double t) {
  spec.validate();
  if (spec.n != geometry.n) throw Error(ErrorKind::InvalidInput, "soliton dimension does not match the grid");
  SupportGrid grid(geometry, t, BoundaryMode::exact(spec));
  for (std::size_t k = 0; k < geometry.size(); ++k) {
    const auto y = geometry.point(k);
    const double v = soliton_slice_support(spec, std::span<const double>(y.data(), geometry.n), t);
    if (!std::isfinite(v))
      throw Error(ErrorKind::Domain, "soliton support is infinite at grid node " + std::to_string(k));
    grid[k] = v;
  }
  return grid;
}

/// Residual d/dt s + (det D^2 s)^(-1/(n+2)) by exact Taylor differentiation.
inline double soliton_pde_residual(const SolitonSpec& spec, std::span<const double> y, double t) {
  const int n = spec.n;
  std::vector<double> base(y.begin(), y.end());
  base.push_back(t);
  auto vars = Jet::variables(base, 2);
  const Jet s = soliton_slice_support<Jet>(spec, std::span<const Jet>(vars.data(), n), vars[n]);
  Matrix H(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) H(i, j) = s.partial({i, j});
  const double det = H.determinant();
  if (!(det > 0.0)) throw Error(ErrorKind::DegenerateHessian, "soliton Hessian is not positive definite");
  return s.partial({n}) + std::pow(det, -1.0 / (n + 2.0));
}

/// Same residual by fourth-order central differences in y and t.
inline double soliton_pde_residual_fd(const SolitonSpec& spec, std::span<const double> y, double t,
                                      double h = 1e-3) {
  const int n = spec.n;
  std::vector<double> p(y.begin(), y.end());
  auto eval = [&](const std::vector<double>& q, double tt) {
    return soliton_slice_support(spec, std::span<const double>(q.data(), n), tt);
  };
  static constexpr double w1[5] = {1.0 / 12, -8.0 / 12, 0.0, 8.0 / 12, -1.0 / 12};
  static constexpr double w2[5] = {-1.0 / 12, 16.0 / 12, -30.0 / 12, 16.0 / 12, -1.0 / 12};
  double st = 0.0;
  for (int a = 0; a < 5; ++a) st += w1[a] * eval(p, t + (a - 2) * h);
  st /= h;
  Matrix H(n, n);
  for (int i = 0; i < n; ++i) {
    double acc = 0.0;
    for (int a = 0; a < 5; ++a) {
      auto q = p;
      q[i] += (a - 2) * h;
      acc += w2[a] * eval(q, t);
    }
    H(i, i) = acc / (h * h);
    for (int j = i + 1; j < n; ++j) {
      double mixed = 0.0;
      for (int a = 0; a < 5; ++a)
        for (int b = 0; b < 5; ++b) {
          if (w1[a] == 0.0 || w1[b] == 0.0) continue;
          auto q = p;
          q[i] += (a - 2) * h;
          q[j] += (b - 2) * h;
          mixed += w1[a] * w1[b] * eval(q, t);
        }
      H(i, j) = H(j, i) = mixed / (h * h);
    }
  }
  return st + std::pow(H.determinant(), -1.0 / (n + 2.0));
}

/// Parse `sphere(r0)`, `ellipsoid(t0)`, `paraboloid`, `calabi`.
inline SolitonSpec parse_soliton(const std::string& text, int n) {
  SolitonSpec spec;
  spec.n = n;
  std::string name = text;
  std::vector<double> args;
  const auto open = text.find('(');
  if (open != std::string::npos) {
    const auto close = text.rfind(')');
    if (close == std::string::npos || close < open)
      throw Error(ErrorKind::Parse, "unbalanced parentheses in soliton '" + text + "'");
    name = text.substr(0, open);
    std::string inner = text.substr(open + 1, close - open - 1);
    std::size_t pos = 0;
    while (pos < inner.size()) {
      const auto comma = inner.find(',', pos);
      const std::string tok = inner.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
      try {
        args.push_back(std::stod(tok));
      } catch (const std::exception&) {
        throw Error(ErrorKind::Parse, "bad soliton parameter '" + tok + "'");
      }
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }
  }
  auto expect = [&](std::size_t count) {
    if (args.size() != count)
      throw Error(ErrorKind::Parse, "soliton '" + name + "' takes " + std::to_string(count) + " parameter(s)");
  };
  if (name == "sphere") {
    spec.kind = SolitonKind::Sphere;
    if (args.empty()) args.push_back(1.0);
    expect(1);
    spec.r0 = args[0];
  } else if (name == "ellipsoid") {
    spec.kind = SolitonKind::Ellipsoid;
    expect(1);
    spec.t0 = args[0];
  } else if (name == "paraboloid") {
    spec.kind = SolitonKind::Paraboloid;
    expect(0);
  } else if (name == "calabi") {
    spec.kind = SolitonKind::Calabi;
    expect(0);
  } else {
    throw Error(ErrorKind::Parse, "unknown soliton '" + name + "'");
  }
  spec.validate();
  return spec;
}

namespace detail {

inline std::string shortest(double x) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

}  // namespace detail

inline std::string format_soliton(const SolitonSpec& spec) {
  switch (spec.kind) {
    case SolitonKind::Sphere: return "sphere(" + detail::shortest(spec.r0) + ")";
    case SolitonKind::Ellipsoid: return "ellipsoid(" + detail::shortest(spec.t0) + ")";
    case SolitonKind::Paraboloid: return "paraboloid";
    case SolitonKind::Calabi: return "calabi";
  }
  return "unknown";
}

}  // namespace affine_flow
