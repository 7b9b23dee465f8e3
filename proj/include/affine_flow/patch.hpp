#pragma once

// Parametrized hypersurface patches F: R^n -> R^(n+1) with derivatives up to
// third order, plus the built-in oracle registry.
//
// Oracle implementations must be safe for concurrent evaluation: every
// method is const and touches no shared mutable state.

#include <cmath>
#include <functional>
#include <memory>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "affine_flow/error.hpp"
#include "affine_flow/solitons.hpp"
#include "affine_flow/support_grid.hpp"
#include "affine_flow/taylor_jet.hpp"

namespace affine_flow {

/// F and all partial derivatives up to order three at one parameter point.
struct PatchDerivatives {
  int n = 0;
  Vector F;
  std::vector<Vector> d1;  // [i]
  std::vector<Vector> d2;  // [i * n + j]
  std::vector<Vector> d3;  // [(i * n + j) * n + k]

  const Vector& first(int i) const { return d1[i]; }
  const Vector& second(int i, int j) const { return d2[i * n + j]; }
  const Vector& third(int i, int j, int k) const { return d3[(i * n + j) * n + k]; }
};

class PatchOracle {
 public:
  virtual ~PatchOracle() = default;

  virtual int dim() const = 0;
  virtual Vector point(std::span<const double> x) const = 0;
  virtual PatchDerivatives derivatives(std::span<const double> x) const = 0;
  virtual bool in_domain(std::span<const double> x) const = 0;
  virtual std::string name() const = 0;

  /// Single partial derivative along the listed variables (order 0..3).
  Vector derivative(std::span<const double> x, std::span<const int> vars) const {
    const auto d = derivatives(x);
    switch (vars.size()) {
      case 0: return d.F;
      case 1: return d.first(vars[0]);
      case 2: return d.second(vars[0], vars[1]);
      case 3: return d.third(vars[0], vars[1], vars[2]);
      default: throw Error(ErrorKind::InvalidInput, "patch derivatives are available up to order 3");
    }
  }
};

using PatchPtr = std::shared_ptr<const PatchOracle>;

/// Patch given by a generic coordinate map `Map`, differentiated exactly via
/// third-order jets. `Map` provides
///   template <class T> std::vector<T> operator()(std::span<const T> x) const;
///   bool in_domain(std::span<const double> x) const;
template <class Map>
class JetPatch final : public PatchOracle {
 public:
  JetPatch(int n, Map map, std::string name) : n_(n), map_(std::move(map)), name_(std::move(name)) {}

  int dim() const override { return n_; }
  std::string name() const override { return name_; }
  bool in_domain(std::span<const double> x) const override { return map_.in_domain(x); }

  Vector point(std::span<const double> x) const override {
    require_domain(x);
    const auto v = map_(x);
    return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
  }

  PatchDerivatives derivatives(std::span<const double> x) const override {
    require_domain(x);
    const auto vars = Jet::variables(x, 3);
    const std::vector<Jet> comps = map_(std::span<const Jet>(vars));
    const int m = static_cast<int>(comps.size());
    PatchDerivatives d;
    d.n = n_;
    d.F = Vector(m);
    d.d1.assign(n_, Vector(m));
    d.d2.assign(n_ * n_, Vector(m));
    d.d3.assign(n_ * n_ * n_, Vector(m));
    for (int c = 0; c < m; ++c) {
      d.F[c] = comps[c].value();
      for (int i = 0; i < n_; ++i) {
        d.d1[i][c] = comps[c].partial({i});
        for (int j = 0; j < n_; ++j) {
          d.d2[i * n_ + j][c] = comps[c].partial({i, j});
          for (int k = 0; k < n_; ++k) d.d3[(i * n_ + j) * n_ + k][c] = comps[c].partial({i, j, k});
        }
      }
    }
    return d;
  }

 private:
  void require_domain(std::span<const double> x) const {
    if (static_cast<int>(x.size()) != n_) throw Error(ErrorKind::InvalidInput, "parameter dimension mismatch");
    if (!map_.in_domain(x)) throw Error(ErrorKind::Domain, "parameter point outside the " + name_ + " patch");
  }

  int n_;
  Map map_;
  std::string name_;
};

template <class Map>
PatchPtr make_jet_patch(int n, Map map, std::string name) {
  return std::make_shared<JetPatch<Map>>(n, std::move(map), std::move(name));
}

/// Fourth-order central-difference wrapper: derivatives come from point
/// evaluations of the wrapped patch only.
class FiniteDifferencePatch final : public PatchOracle {
 public:
  explicit FiniteDifferencePatch(PatchPtr base, double step = 1e-3) : base_(std::move(base)), h_(step) {}

  int dim() const override { return base_->dim(); }
  std::string name() const override { return base_->name() + "[fd]"; }
  bool in_domain(std::span<const double> x) const override {
    const int n = dim();
    std::vector<double> p(x.begin(), x.end());
    for (int i = 0; i < n; ++i)
      for (int s : {-3, 3}) {
        p[i] = x[i] + s * h_;
        if (!base_->in_domain(p)) return false;
        p[i] = x[i];
      }
    return base_->in_domain(x);
  }
  Vector point(std::span<const double> x) const override { return base_->point(x); }

  PatchDerivatives derivatives(std::span<const double> x) const override {
    if (!in_domain(x)) throw Error(ErrorKind::Domain, "finite-difference stencil leaves the patch domain");
    const int n = dim();
    static constexpr double w1[5] = {1.0 / 12, -8.0 / 12, 0.0, 8.0 / 12, -1.0 / 12};
    static constexpr double w2[5] = {-1.0 / 12, 16.0 / 12, -30.0 / 12, 16.0 / 12, -1.0 / 12};
    static constexpr double w3[7] = {1.0 / 8, -1.0, 13.0 / 8, 0.0, -13.0 / 8, 1.0, -1.0 / 8};
    auto at = [&](std::initializer_list<std::pair<int, double>> shifts) {
      std::vector<double> p(x.begin(), x.end());
      for (auto [i, s] : shifts) p[i] += s;
      return base_->point(p);
    };
    PatchDerivatives d;
    d.n = n;
    d.F = base_->point(x);
    const Eigen::Index m = d.F.size();
    d.d1.assign(n, Vector::Zero(m));
    d.d2.assign(n * n, Vector::Zero(m));
    d.d3.assign(n * n * n, Vector::Zero(m));
    for (int i = 0; i < n; ++i) {
      for (int a = 0; a < 5; ++a)
        if (w1[a] != 0.0) d.d1[i] += w1[a] * at({{i, (a - 2) * h_}});
      d.d1[i] /= h_;
    }
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        Vector acc = Vector::Zero(m);
        if (i == j) {
          for (int a = 0; a < 5; ++a) acc += w2[a] * at({{i, (a - 2) * h_}});
        } else {
          for (int a = 0; a < 5; ++a)
            for (int b = 0; b < 5; ++b)
              if (w1[a] != 0.0 && w1[b] != 0.0) acc += w1[a] * w1[b] * at({{i, (a - 2) * h_}, {j, (b - 2) * h_}});
        }
        d.d2[i * n + j] = acc / (h_ * h_);
      }
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k) {
          Vector acc = Vector::Zero(m);
          if (i == j && j == k) {
            for (int a = 0; a < 7; ++a)
              if (w3[a] != 0.0) acc += w3[a] * at({{i, (a - 3) * h_}});
          } else if (i == j || j == k || i == k) {
            const int rep = (i == j) ? i : (j == k ? j : i);
            const int single = (i == j) ? k : (j == k ? i : j);
            for (int a = 0; a < 5; ++a)
              for (int b = 0; b < 5; ++b)
                if (w1[b] != 0.0) acc += w2[a] * w1[b] * at({{rep, (a - 2) * h_}, {single, (b - 2) * h_}});
          } else {
            for (int a = 0; a < 5; ++a)
              for (int b = 0; b < 5; ++b)
                for (int c = 0; c < 5; ++c)
                  if (w1[a] != 0.0 && w1[b] != 0.0 && w1[c] != 0.0)
                    acc += w1[a] * w1[b] * w1[c] *
                           at({{i, (a - 2) * h_}, {j, (b - 2) * h_}, {k, (c - 2) * h_}});
          }
          d.d3[(i * n + j) * n + k] = acc / (h_ * h_ * h_);
        }
    return d;
  }

 private:
  PatchPtr base_;
  double h_;
};

/// Phi o F for the ambient affine map Phi(p) = M p + b.
class TransformedPatch final : public PatchOracle {
 public:
  TransformedPatch(PatchPtr base, Matrix M, Vector b) : base_(std::move(base)), M_(std::move(M)), b_(std::move(b)) {}

  int dim() const override { return base_->dim(); }
  std::string name() const override { return "affine(" + base_->name() + ")"; }
  bool in_domain(std::span<const double> x) const override { return base_->in_domain(x); }
  Vector point(std::span<const double> x) const override { return M_ * base_->point(x) + b_; }
  PatchDerivatives derivatives(std::span<const double> x) const override {
    auto d = base_->derivatives(x);
    d.F = M_ * d.F + b_;
    for (auto& v : d.d1) v = M_ * v;
    for (auto& v : d.d2) v = M_ * v;
    for (auto& v : d.d3) v = M_ * v;
    return d;
  }

 private:
  PatchPtr base_;
  Matrix M_;
  Vector b_;
};

// ---------------------------------------------------------------------------
// Built-in coordinate maps

namespace maps {

/// Graph x -> (x, sigma * sqrt(alpha + sum beta_i x_i^2)).
struct SqrtQuadricGraph {
  double sigma = 1.0;
  double alpha = 1.0;
  std::vector<double> beta;

  template <class T>
  std::vector<T> operator()(std::span<const T> x) const {
    using std::sqrt;
    std::vector<T> out(x.begin(), x.end());
    T q = beta[0] * x[0] * x[0];
    for (std::size_t i = 1; i < x.size(); ++i) q = q + beta[i] * x[i] * x[i];
    out.push_back(sigma * sqrt(q + alpha));
    return out;
  }
  bool in_domain(std::span<const double> x) const {
    double q = alpha;
    for (std::size_t i = 0; i < x.size(); ++i) q += beta[i] * x[i] * x[i];
    return q > 1e-12 * std::abs(alpha);
  }
};

/// Graph x -> (x, sum_m c_m x^e_m).
struct PolynomialGraph {
  int n = 1;
  std::vector<std::vector<int>> exponents;
  std::vector<double> coefficients;

  template <class T>
  std::vector<T> operator()(std::span<const T> x) const {
    std::vector<T> out(x.begin(), x.end());
    T f = 0.0 * x[0];
    for (std::size_t m = 0; m < coefficients.size(); ++m) {
      T term = 0.0 * x[0] + coefficients[m];
      for (int i = 0; i < n; ++i)
        for (int p = 0; p < exponents[m][i]; ++p) term = term * x[i];
      f = f + term;
    }
    out.push_back(f);
    return out;
  }
  bool in_domain(std::span<const double>) const { return true; }
};

/// Inverse-Gauss-map parametrization from a slice support function:
/// F(y) = (grad s, y . grad s - s). `Support` provides
///   template <class T> T operator()(std::span<const T> y) const;
///   bool in_domain(std::span<const double> y) const;
template <class Support>
struct SupportParametrization {
  Support support;

  std::vector<double> operator()(std::span<const double> y) const {
    // values need gradients, so go through a first-order jet
    const auto vars = Jet::variables(y, 1);
    const Jet s = support(std::span<const Jet>(vars));
    const int n = static_cast<int>(y.size());
    std::vector<double> out(n + 1);
    double last = -s.value();
    for (int i = 0; i < n; ++i) {
      out[i] = s.partial({i});
      last += y[i] * out[i];
    }
    out[n] = last;
    return out;
  }

  std::vector<Jet> operator()(std::span<const Jet> y) const {
    // lift to one order higher so that F = ds keeps third-order accuracy
    const int n = static_cast<int>(y.size());
    const int order = y[0].order();
    std::vector<double> base(n);
    for (int i = 0; i < n; ++i) base[i] = y[i].value();
    const auto lifted = Jet::variables(base, order + 1);
    const Jet s = support(std::span<const Jet>(lifted));
    std::vector<Jet> out;
    Jet last = -s.truncated(order);
    for (int i = 0; i < n; ++i) {
      out.push_back(s.differentiate(i));
      last = last + y[i] * out.back();
    }
    out.push_back(last);
    return out;
  }

  bool in_domain(std::span<const double> y) const { return support.in_domain(y); }
};

/// Slice support of a soliton at a fixed flow time.
struct SolitonSlice {
  SolitonSpec spec;
  double t = 0.0;

  template <class T>
  T operator()(std::span<const T> y) const {
    return soliton_slice_support<T>(spec, y, 0.0 * y[0] + t);
  }
  bool in_domain(std::span<const double> y) const {
    try {
      return std::isfinite(soliton_slice_support(spec, y, t));
    } catch (const Error&) {
      return false;
    }
  }
};

}  // namespace maps

template <class Support>
PatchPtr make_support_patch(int n, Support support, std::string name) {
  return make_jet_patch(n, maps::SupportParametrization<Support>{std::move(support)}, std::move(name));
}

inline PatchPtr soliton_patch(const SolitonSpec& spec, double t) {
  return make_support_patch(spec.n, maps::SolitonSlice{spec, t}, format_soliton(spec));
}

/// Graph patches centered at the lowest point, oriented with inward normal
/// pointing up.
inline PatchPtr sphere_oracle(double r, int n = 2) {
  if (!(r > 0)) throw Error(ErrorKind::InvalidInput, "sphere radius must be positive");
  return make_jet_patch(n, maps::SqrtQuadricGraph{-1.0, r * r, std::vector<double>(n, -1.0)},
                        "sphere(" + std::to_string(r) + ")");
}

/// Lower half of x^2/a^2 + y^2/b^2 + z^2/c^2 = 1 (n = 2), or of
/// x^2/a^2 + z^2/c^2 = 1 when b is omitted (n = 1).
inline PatchPtr ellipsoid_oracle(std::vector<double> semi_axes) {
  const int n = static_cast<int>(semi_axes.size()) - 1;
  if (n < 1 || n > 2) throw Error(ErrorKind::InvalidInput, "ellipsoid takes 2 or 3 semi-axes");
  for (double v : semi_axes)
    if (!(v > 0)) throw Error(ErrorKind::InvalidInput, "ellipsoid semi-axes must be positive");
  const double c = semi_axes.back();
  std::vector<double> beta;
  for (int i = 0; i < n; ++i) beta.push_back(-(c * c) / (semi_axes[i] * semi_axes[i]));
  return make_jet_patch(n, maps::SqrtQuadricGraph{-1.0, c * c, beta}, "ellipsoid");
}

inline PatchPtr paraboloid_oracle(int n = 2) {
  maps::PolynomialGraph p;
  p.n = n;
  for (int i = 0; i < n; ++i) {
    std::vector<int> e(n, 0);
    e[i] = 2;
    p.exponents.push_back(e);
    p.coefficients.push_back(0.5);
  }
  return make_jet_patch(n, p, "paraboloid");
}

/// Upper sheet x^(n+1) = sqrt(1 + |x|^2).
inline PatchPtr hyperboloid_oracle(int n = 2) {
  return make_jet_patch(n, maps::SqrtQuadricGraph{1.0, 1.0, std::vector<double>(n, 1.0)}, "hyperboloid");
}

inline PatchPtr polynomial_oracle(int n, std::vector<std::vector<int>> exponents, std::vector<double> coefficients) {
  if (exponents.size() != coefficients.size())
    throw Error(ErrorKind::InvalidInput, "polynomial needs one coefficient per monomial");
  for (const auto& e : exponents)
    if (static_cast<int>(e.size()) != n) throw Error(ErrorKind::InvalidInput, "monomial exponent arity mismatch");
  return make_jet_patch(n, maps::PolynomialGraph{n, std::move(exponents), std::move(coefficients)}, "polynomial");
}

/// Registry lookup from text: `sphere(r)`, `ellipsoid(a,b,c)`, `paraboloid`,
/// `hyperboloid`, `polynomial(e1,..,en,c; ...)`. `n` applies to the
/// dimension-generic names; an optional trailing `[fd]` or `[fd=h]` selects
/// finite-difference mode.
inline PatchPtr make_oracle(const std::string& text, int n = 2) {
  std::string spec = text;
  std::optional<double> fd_step;
  if (const auto lb = spec.rfind('['); lb != std::string::npos && spec.back() == ']') {
    const std::string mode = spec.substr(lb + 1, spec.size() - lb - 2);
    spec = spec.substr(0, lb);
    if (mode == "fd") {
      fd_step = 1e-3;
    } else if (mode.rfind("fd=", 0) == 0) {
      fd_step = std::stod(mode.substr(3));
    } else {
      throw Error(ErrorKind::Parse, "unknown oracle mode '" + mode + "'");
    }
  }
  std::string name = spec;
  std::string inner;
  if (const auto open = spec.find('('); open != std::string::npos) {
    const auto close = spec.rfind(')');
    if (close == std::string::npos || close < open) throw Error(ErrorKind::Parse, "unbalanced parentheses");
    name = spec.substr(0, open);
    inner = spec.substr(open + 1, close - open - 1);
  }
  auto numbers = [](const std::string& s) {
    std::vector<double> out;
    std::string cleaned = s;
    for (char& ch : cleaned)
      if (ch == ',') ch = ' ';
    std::istringstream in(cleaned);
    std::string tok;
    while (in >> tok) {
      try {
        out.push_back(std::stod(tok));
      } catch (const std::exception&) {
        throw Error(ErrorKind::Parse, "bad oracle parameter '" + tok + "'");
      }
    }
    return out;
  };
  PatchPtr patch;
  if (name == "sphere") {
    const auto a = numbers(inner);
    patch = sphere_oracle(a.empty() ? 1.0 : a[0], n);
  } else if (name == "ellipsoid") {
    patch = ellipsoid_oracle(numbers(inner));
  } else if (name == "paraboloid") {
    patch = paraboloid_oracle(n);
  } else if (name == "hyperboloid") {
    patch = hyperboloid_oracle(n);
  } else if (name == "polynomial") {
    std::vector<std::vector<int>> exps;
    std::vector<double> coefs;
    std::istringstream terms(inner);
    std::string term;
    while (std::getline(terms, term, ';')) {
      const auto v = numbers(term);
      if (v.empty()) continue;
      if (static_cast<int>(v.size()) != n + 1)
        throw Error(ErrorKind::Parse, "polynomial term needs n exponents and a coefficient");
      std::vector<int> e;
      for (int i = 0; i < n; ++i) e.push_back(static_cast<int>(v[i]));
      exps.push_back(e);
      coefs.push_back(v[n]);
    }
    patch = polynomial_oracle(n, exps, coefs);
  } else {
    throw Error(ErrorKind::Parse, "unknown oracle '" + name + "'");
  }
  if (fd_step) patch = std::make_shared<FiniteDifferencePatch>(patch, *fd_step);
  return patch;
}

}  // namespace affine_flow
