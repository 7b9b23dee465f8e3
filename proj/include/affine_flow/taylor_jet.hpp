#pragma once

// Truncated multivariate Taylor arithmetic ("jets").
//
// A Jet holds the Taylor coefficients of a scalar function of `dim`
// variables about a fixed base point, truncated at total degree `order`.
// Arithmetic and elementary functions propagate the expansion exactly up to
// the truncation order, so partial derivatives up to that order come out at
// machine precision. Patches and soliton formulas are written once as generic
// code and evaluated either on doubles or on jets.

#include <array>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <mutex>
#include <span>
#include <vector>

namespace affine_flow {

inline constexpr int kMaxJetDim = 4;
inline constexpr int kMaxJetOrder = 4;

namespace detail {

struct MonomialTable {
  int dim = 0;
  int order = 0;
  std::vector<std::array<int, kMaxJetDim>> exponents;
  std::vector<int> degree;
  // (lhs, rhs, product) index triples with deg(lhs) + deg(rhs) <= order.
  std::vector<std::array<int, 3>> products;

  int index_of(const std::array<int, kMaxJetDim>& e) const {
    for (std::size_t k = 0; k < exponents.size(); ++k) {
      if (exponents[k] == e) return static_cast<int>(k);
    }
    return -1;
  }
};

inline MonomialTable build_table(int dim, int order) {
  MonomialTable t;
  t.dim = dim;
  t.order = order;
  // graded ordering: degree 0 first, then degree 1 (one per variable), ...
  for (int deg = 0; deg <= order; ++deg) {
    std::array<int, kMaxJetDim> e{};
    // enumerate compositions of deg into dim parts
    auto recurse = [&](auto&& self, int var, int remaining) -> void {
      if (var == dim - 1) {
        e[var] = remaining;
        t.exponents.push_back(e);
        t.degree.push_back(deg);
        e[var] = 0;
        return;
      }
      for (int k = remaining; k >= 0; --k) {
        e[var] = k;
        self(self, var + 1, remaining - k);
      }
      e[var] = 0;
    };
    if (dim == 0) {
      if (deg == 0) {
        t.exponents.push_back(e);
        t.degree.push_back(0);
      }
      continue;
    }
    recurse(recurse, 0, deg);
  }
  const int count = static_cast<int>(t.exponents.size());
  for (int a = 0; a < count; ++a) {
    for (int b = 0; b < count; ++b) {
      if (t.degree[a] + t.degree[b] > order) continue;
      std::array<int, kMaxJetDim> e{};
      for (int v = 0; v < kMaxJetDim; ++v) e[v] = t.exponents[a][v] + t.exponents[b][v];
      t.products.push_back({a, b, t.index_of(e)});
    }
  }
  return t;
}

inline const MonomialTable& table(int dim, int order) {
  assert(dim >= 0 && dim <= kMaxJetDim && order >= 0 && order <= kMaxJetOrder);
  static std::array<std::array<MonomialTable, kMaxJetOrder + 1>, kMaxJetDim + 1> tables;
  static std::once_flag once;
  std::call_once(once, [] {
    for (int d = 0; d <= kMaxJetDim; ++d)
      for (int k = 0; k <= kMaxJetOrder; ++k) tables[d][k] = build_table(d, k);
  });
  return tables[dim][order];
}

inline double factorial(int k) {
  double f = 1.0;
  for (int i = 2; i <= k; ++i) f *= i;
  return f;
}

}  // namespace detail

class Jet {
 public:
  Jet() = default;

  Jet(int dim, int order, double constant = 0.0)
      : table_(&detail::table(dim, order)), coeff_(table_->exponents.size(), 0.0) {
    coeff_[0] = constant;
  }

  /// The coordinate function x_i expanded about `base`.
  static Jet variable(int dim, int order, int i, double base) {
    Jet j(dim, order, base);
    if (order >= 1) j.coeff_[1 + i] = 1.0;
    return j;
  }

  /// Seed a full coordinate vector.
  static std::vector<Jet> variables(std::span<const double> base, int order) {
    const int dim = static_cast<int>(base.size());
    std::vector<Jet> out;
    out.reserve(base.size());
    for (int i = 0; i < dim; ++i) out.push_back(variable(dim, order, i, base[i]));
    return out;
  }

  int dim() const { return table_->dim; }
  int order() const { return table_->order; }
  double value() const { return coeff_[0]; }

  /// Partial derivative for the given multiplicities, e.g. {2,1} -> d^3/dx0^2 dx1.
  double derivative(std::span<const int> multiplicity) const {
    std::array<int, kMaxJetDim> e{};
    int deg = 0;
    double scale = 1.0;
    for (std::size_t v = 0; v < multiplicity.size(); ++v) {
      e[v] = multiplicity[v];
      deg += multiplicity[v];
      scale *= detail::factorial(multiplicity[v]);
    }
    if (deg > order()) return 0.0;
    const int idx = table_->index_of(e);
    return idx < 0 ? 0.0 : coeff_[idx] * scale;
  }

  /// Partial derivative along a list of variable indices, e.g. {0,0,1}.
  double partial(std::initializer_list<int> vars) const {
    return partial(std::span<const int>(vars.begin(), vars.size()));
  }
  double partial(std::span<const int> vars) const {
    std::array<int, kMaxJetDim> m{};
    for (int v : vars) ++m[v];
    return derivative(std::span<const int>(m.data(), dim()));
  }

  Jet& operator+=(const Jet& o) {
    for (std::size_t k = 0; k < coeff_.size(); ++k) coeff_[k] += o.coeff_[k];
    return *this;
  }
  Jet& operator-=(const Jet& o) {
    for (std::size_t k = 0; k < coeff_.size(); ++k) coeff_[k] -= o.coeff_[k];
    return *this;
  }
  Jet& operator*=(double c) {
    for (double& x : coeff_) x *= c;
    return *this;
  }
  Jet& operator+=(double c) {
    coeff_[0] += c;
    return *this;
  }

  friend Jet operator+(Jet a, const Jet& b) { return a += b; }
  friend Jet operator-(Jet a, const Jet& b) { return a -= b; }
  friend Jet operator+(Jet a, double c) { return a += c; }
  friend Jet operator+(double c, Jet a) { return a += c; }
  friend Jet operator-(Jet a, double c) { return a += -c; }
  friend Jet operator-(double c, const Jet& a) { return (-a) + c; }
  friend Jet operator*(Jet a, double c) { return a *= c; }
  friend Jet operator*(double c, Jet a) { return a *= c; }
  friend Jet operator/(Jet a, double c) { return a *= 1.0 / c; }
  friend Jet operator-(Jet a) { return a *= -1.0; }

  friend Jet operator*(const Jet& a, const Jet& b) {
    Jet out(a.dim(), a.order());
    for (const auto& [i, j, k] : a.table_->products) out.coeff_[k] += a.coeff_[i] * b.coeff_[j];
    return out;
  }
  friend Jet operator/(const Jet& a, const Jet& b) { return a * reciprocal(b); }
  friend Jet operator/(double c, const Jet& b) { return c * reciprocal(b); }

  /// f(a) given the normalized Taylor coefficients f^(k)(a0)/k!, k = 0..order.
  static Jet compose(const Jet& a, std::span<const double> taylor) {
    Jet delta = a;
    delta.coeff_[0] = 0.0;
    Jet acc(a.dim(), a.order(), taylor[a.order()]);
    for (int k = a.order() - 1; k >= 0; --k) {
      acc = acc * delta;
      acc.coeff_[0] += taylor[k];
    }
    return acc;
  }

  friend Jet reciprocal(const Jet& a) {
    std::array<double, kMaxJetOrder + 1> c{};
    const double x = a.value();
    double p = 1.0 / x;
    for (int k = 0; k <= a.order(); ++k) {
      c[k] = (k % 2 == 0 ? 1.0 : -1.0) * p;
      p /= x;
    }
    return compose(a, c);
  }

  friend Jet pow(const Jet& a, double exponent) {
    std::array<double, kMaxJetOrder + 1> c{};
    const double x = a.value();
    double binom = 1.0;
    for (int k = 0; k <= a.order(); ++k) {
      c[k] = binom * std::pow(x, exponent - k);
      binom *= (exponent - k) / (k + 1);
    }
    return compose(a, c);
  }

  /// Exact partial derivative d/dx_i as a jet of one lower order.
  Jet differentiate(int i) const {
    assert(order() >= 1);
    Jet out(dim(), order() - 1);
    const auto& lower = *out.table_;
    for (std::size_t k = 0; k < lower.exponents.size(); ++k) {
      auto e = lower.exponents[k];
      const int m = e[i] + 1;
      e[i] = m;
      out.coeff_[k] = m * coeff_[table_->index_of(e)];
    }
    return out;
  }

  /// Drop all terms above `new_order`.
  Jet truncated(int new_order) const {
    assert(new_order <= order());
    Jet out(dim(), new_order);
    // graded ordering makes the lower-order table a prefix of this one
    for (std::size_t k = 0; k < out.coeff_.size(); ++k) out.coeff_[k] = coeff_[k];
    return out;
  }

  friend Jet sqrt(const Jet& a) { return pow(a, 0.5); }

  friend Jet exp(const Jet& a) {
    std::array<double, kMaxJetOrder + 1> c{};
    const double e = std::exp(a.value());
    for (int k = 0; k <= a.order(); ++k) c[k] = e / detail::factorial(k);
    return compose(a, c);
  }

  friend Jet log(const Jet& a) {
    std::array<double, kMaxJetOrder + 1> c{};
    const double x = a.value();
    c[0] = std::log(x);
    double p = x;
    for (int k = 1; k <= a.order(); ++k) {
      c[k] = (k % 2 == 1 ? 1.0 : -1.0) / (k * p);
      p *= x;
    }
    return compose(a, c);
  }

 private:
  const detail::MonomialTable* table_ = nullptr;
  std::vector<double> coeff_;
};

/// Scalar helpers so generic formulas compile for both double and Jet.
inline double value_of(double x) { return x; }
inline double value_of(const Jet& x) { return x.value(); }

}  // namespace affine_flow
