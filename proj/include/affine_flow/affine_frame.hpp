#pragma once

// Equiaffine invariants of a strictly convex patch: affine metric g, affine
// normal xi, cubic form C, affine shape operator A, and residual checks of the
// structure equations
//   d_ij F = g_ij xi + (Gamma^k_ij + C^k_ij) F_k,   d_i xi = -A^k_i F_k.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "affine_flow/error.hpp"
#include "affine_flow/patch.hpp"

namespace affine_flow {

inline constexpr double kDefaultFrameStep = 1e-3;

struct EuclideanData {
  int n = 0;
  PatchDerivatives d;
  Matrix gbar;  // <F_i, F_j>
  Matrix h;     // <F_ij, nu>, positive definite
  Vector nu;    // unit inward normal
  double K = 0; // det h / det gbar
};

inline EuclideanData euclidean_data(const PatchOracle& patch, std::span<const double> x) {
  EuclideanData e;
  e.n = patch.dim();
  const int n = e.n;
  e.d = patch.derivatives(x);
  Matrix T(n + 1, n);
  for (int i = 0; i < n; ++i) T.col(i) = e.d.first(i);
  Eigen::JacobiSVD<Matrix> svd(T);
  const auto& sv = svd.singularValues();
  if (!(sv[n - 1] > 1e-12 * std::max(1.0, sv[0])))
    throw Error(ErrorKind::ImmersionFailure, "tangent vectors are linearly dependent", sv[n - 1]);
  e.gbar = T.transpose() * T;
  // unit normal: orthogonal complement of the tangent space
  Eigen::HouseholderQR<Matrix> qr(T);
  Matrix Q = qr.householderQ() * Matrix::Identity(n + 1, n + 1);
  e.nu = Q.col(n);
  e.h = Matrix(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) e.h(i, j) = e.d.second(i, j).dot(e.nu);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(e.h);
  const Vector ev = eig.eigenvalues();
  const double scale = std::max(std::abs(ev[0]), std::abs(ev[n - 1]));
  const double tiny = 1e-12 * std::max(scale, 1e-300);
  if (ev[0] > tiny) {
    // already inward
  } else if (ev[n - 1] < -tiny) {
    e.nu = -e.nu;
    e.h = -e.h;
  } else {
    throw Error(ErrorKind::ConvexityFailure, "second fundamental form is not definite", ev[0] * ev[n - 1]);
  }
  e.K = e.h.determinant() / e.gbar.determinant();
  return e;
}

namespace detail {

/// d_i h_jk and d_i gbar_jk alongside d_i ln K.
struct EuclideanFirstVariation {
  std::vector<Matrix> dh;     // [i]
  std::vector<Matrix> dgbar;  // [i]
  Vector dlogK;
};

inline EuclideanFirstVariation euclidean_variation(const EuclideanData& e) {
  const int n = e.n;
  EuclideanFirstVariation v;
  v.dlogK = Vector::Zero(n);
  const Matrix gbar_inv = e.gbar.inverse();
  const Matrix h_inv = e.h.inverse();
  Matrix T(n + 1, n);
  for (int i = 0; i < n; ++i) T.col(i) = e.d.first(i);
  for (int i = 0; i < n; ++i) {
    // Weingarten: d_i nu = -h_il gbar^lm F_m
    const Vector dnu = -T * (gbar_inv * e.h.row(i).transpose());
    Matrix dh(n, n), dg(n, n);
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        dh(j, k) = e.d.third(i, j, k).dot(e.nu) + e.d.second(j, k).dot(dnu);
        dg(j, k) = e.d.second(i, j).dot(e.d.first(k)) + e.d.first(j).dot(e.d.second(i, k));
      }
    v.dlogK[i] = (h_inv * dh).trace() - (gbar_inv * dg).trace();
    v.dh.push_back(dh);
    v.dgbar.push_back(dg);
  }
  return v;
}

}  // namespace detail

/// xi = -g^{ki} d_i(ln phi) F_k + phi nu with phi = K^(1/(n+2)), g = h / phi.
inline Vector affine_normal(const PatchOracle& patch, std::span<const double> x) {
  const auto e = euclidean_data(patch, x);
  const int n = e.n;
  const auto var = detail::euclidean_variation(e);
  const double phi = std::pow(e.K, 1.0 / (n + 2));
  const Vector dlogphi = var.dlogK / (n + 2.0);
  const Matrix g_inv = phi * e.h.inverse();
  Vector xi = phi * e.nu;
  const Vector coeff = g_inv * dlogphi;
  for (int k = 0; k < n; ++k) xi -= coeff[k] * e.d.first(k);
  return xi;
}

/// Affine invariants at one point. Tensors with several indices are stored
/// flat: C(i, j, k) -> C[(i * n + j) * n + k].
struct AffineFrame {
  int n = 0;
  Matrix g;
  Matrix g_inv;
  double phi = 0;
  double K = 0;
  Vector xi;
  Vector nu;
  Matrix A_mixed;             // A^k_i stored at (k, i)
  Matrix A;                   // A_ij = g_jk A^k_i
  std::vector<double> C;      // C_ijk, all indices lowered
  std::vector<double> C_up;   // C^k_ij stored at (i, j, k)
  std::vector<double> Gamma;  // Gamma^k_ij stored at (i, j, k)
  double H = 0;
  double C_norm_sq = 0;
  PatchDerivatives d;
  // diagnostics of the extraction itself
  double metric_defect = 0;     // max |xi-component of F_ij - g_ij|
  double equiaffine_defect = 0; // max |xi-component of d_i xi|
  double volume_defect = 0;     // |det g - det(F_1..F_n, xi)^2| / det g

  double c(int i, int j, int k) const { return C[(i * n + j) * n + k]; }
  double c_up(int i, int j, int k) const { return C_up[(i * n + j) * n + k]; }
  double gamma(int i, int j, int k) const { return Gamma[(i * n + j) * n + k]; }
};

inline AffineFrame affine_frame_at(const PatchOracle& patch, std::span<const double> x,
                                   double h_fd = kDefaultFrameStep) {
  const auto e = euclidean_data(patch, x);
  const int n = e.n;
  const auto var = detail::euclidean_variation(e);
  AffineFrame f;
  f.n = n;
  f.d = e.d;
  f.K = e.K;
  f.nu = e.nu;
  f.phi = std::pow(e.K, 1.0 / (n + 2));
  f.g = e.h / f.phi;
  f.g_inv = f.g.inverse();
  const Vector dlogphi = var.dlogK / (n + 2.0);
  f.xi = f.phi * e.nu;
  {
    const Vector coeff = f.g_inv * dlogphi;
    for (int k = 0; k < n; ++k) f.xi -= coeff[k] * e.d.first(k);
  }

  // frame {F_1, ..., F_n, xi}
  Matrix B(n + 1, n + 1);
  for (int k = 0; k < n; ++k) B.col(k) = e.d.first(k);
  B.col(n) = f.xi;
  Eigen::JacobiSVD<Matrix> svd(B);
  const double cond = svd.singularValues()[0] / svd.singularValues()[n];
  if (!(cond < 1e12)) throw Error(ErrorKind::Conditioning, "tangent frame is ill-conditioned", cond);
  const Eigen::PartialPivLU<Matrix> lu(B);

  // d_i g_jk from d_i h and d_i phi
  std::vector<Matrix> dg(n);
  for (int i = 0; i < n; ++i) dg[i] = (var.dh[i] - dlogphi[i] * e.h) / f.phi;

  f.Gamma.assign(n * n * n, 0.0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        double acc = 0;
        for (int l = 0; l < n; ++l) acc += f.g_inv(k, l) * (dg[i](j, l) + dg[j](i, l) - dg[l](i, j));
        f.Gamma[(i * n + j) * n + k] = 0.5 * acc;
      }

  // connection coefficients of the affine normal: d_ij F = a_ij xi + G^k_ij F_k
  f.C_up.assign(n * n * n, 0.0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const Vector coef = lu.solve(e.d.second(i, j));
      f.metric_defect = std::max(f.metric_defect, std::abs(coef[n] - f.g(i, j)));
      for (int k = 0; k < n; ++k) f.C_up[(i * n + j) * n + k] = coef[k] - f.Gamma[(i * n + j) * n + k];
    }
  f.C.assign(n * n * n, 0.0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        double acc = 0;
        for (int l = 0; l < n; ++l) acc += f.g(k, l) * f.C_up[(i * n + j) * n + l];
        f.C[(i * n + j) * n + k] = acc;
      }
  f.C_norm_sq = 0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        double raised = 0;
        for (int a = 0; a < n; ++a)
          for (int b = 0; b < n; ++b)
            for (int c = 0; c < n; ++c) raised += f.g_inv(i, a) * f.g_inv(j, b) * f.g_inv(k, c) * f.c(a, b, c);
        f.C_norm_sq += raised * f.c(i, j, k);
      }

  // d_i xi by fourth-order central differences of the affine normal
  f.A_mixed = Matrix::Zero(n, n);
  std::vector<double> p(x.begin(), x.end());
  static constexpr double w1[5] = {1.0 / 12, -8.0 / 12, 0.0, 8.0 / 12, -1.0 / 12};
  for (int i = 0; i < n; ++i) {
    Vector dxi = Vector::Zero(n + 1);
    for (int a = 0; a < 5; ++a) {
      if (w1[a] == 0.0) continue;
      p[i] = x[i] + (a - 2) * h_fd;
      if (!patch.in_domain(p)) throw Error(ErrorKind::Domain, "affine-normal stencil leaves the patch domain");
      dxi += w1[a] * affine_normal(patch, p);
    }
    p[i] = x[i];
    dxi /= h_fd;
    const Vector coef = lu.solve(dxi);
    f.equiaffine_defect = std::max(f.equiaffine_defect, std::abs(coef[n]));
    for (int k = 0; k < n; ++k) f.A_mixed(k, i) = -coef[k];
  }
  f.A = f.A_mixed.transpose() * f.g;  // A_ij = A^k_i g_kj
  f.H = f.A_mixed.trace();
  const double detg = f.g.determinant();
  f.volume_defect = std::abs(detg - std::pow(B.determinant(), 2)) / detg;
  return f;
}

struct StructureReport {
  double apolarity = 0;      // max_k |g^ij C_ijk|
  double laplace = 0;        // |xi - Delta F / n|
  double codazzi_A = 0;
  double codazzi_C = 0;
  double volume = 0;         // relative volume-form defect
  double symmetry_C = 0;     // max over index permutations, relative
  double symmetry_A = 0;
  double metric = 0;         // consistency of the xi-component of d_ij F with g
  double equiaffine = 0;     // xi-component of d_i xi
  double C_norm_sq = 0;

  double max_residual() const {
    return std::max({apolarity, laplace, codazzi_A, codazzi_C, volume});
  }
};

inline StructureReport check_structure(const PatchOracle& patch, std::span<const double> x,
                                       double h_fd = kDefaultFrameStep) {
  const int n = patch.dim();
  // frames at x and at +-h, +-2h along every axis
  const double step = 2.0 * h_fd;
  std::vector<double> p(x.begin(), x.end());
  for (int i = 0; i < n; ++i)
    for (int s : {-3, 3}) {
      p[i] = x[i] + s * step;
      if (!patch.in_domain(p)) throw Error(ErrorKind::Domain, "structure-check stencil leaves the patch domain");
      p[i] = x[i];
    }
  const AffineFrame f = affine_frame_at(patch, x, h_fd);
  StructureReport r;
  r.C_norm_sq = f.C_norm_sq;
  r.volume = f.volume_defect;
  r.metric = f.metric_defect;
  r.equiaffine = f.equiaffine_defect;

  for (int k = 0; k < n; ++k) {
    double tr = 0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) tr += f.g_inv(i, j) * f.c(i, j, k);
    r.apolarity = std::max(r.apolarity, std::abs(tr));
  }

  Vector lap = Vector::Zero(n + 1);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      Vector cov = f.d.second(i, j);
      for (int k = 0; k < n; ++k) cov -= f.gamma(i, j, k) * f.d.first(k);
      lap += f.g_inv(i, j) * cov;
    }
  r.laplace = (f.xi - lap / n).norm();

  double cscale = 1e-300, ascale = 1e-300;
  for (double v : f.C) cscale = std::max(cscale, std::abs(v));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      ascale = std::max(ascale, std::abs(f.A(i, j)));
      r.symmetry_A = std::max(r.symmetry_A, std::abs(f.A(i, j) - f.A(j, i)));
      for (int k = 0; k < n; ++k) {
        const double c = f.c(i, j, k);
        for (double o : {f.c(i, k, j), f.c(j, i, k), f.c(j, k, i), f.c(k, i, j), f.c(k, j, i)})
          r.symmetry_C = std::max(r.symmetry_C, std::abs(c - o));
      }
    }
  r.symmetry_C /= std::max(cscale, 1.0);
  r.symmetry_A /= std::max(ascale, 1.0);

  // parameter derivatives of A^k_j and C_ijl from neighbouring frames
  static constexpr double w1[5] = {1.0 / 12, -8.0 / 12, 0.0, 8.0 / 12, -1.0 / 12};
  std::vector<Matrix> dA(n, Matrix::Zero(n, n));
  std::vector<std::vector<double>> dC(n, std::vector<double>(n * n * n, 0.0));
  for (int i = 0; i < n; ++i) {
    for (int a = 0; a < 5; ++a) {
      if (w1[a] == 0.0) continue;
      p[i] = x[i] + (a - 2) * step;
      const AffineFrame nb = affine_frame_at(patch, p, h_fd);
      dA[i] += w1[a] * nb.A_mixed;
      for (std::size_t m = 0; m < nb.C.size(); ++m) dC[i][m] += w1[a] * nb.C[m];
    }
    p[i] = x[i];
    dA[i] /= step;
    for (double& v : dC[i]) v /= step;
  }

  // A^k_{j,i} = d_i A^k_j + Gamma^k_il A^l_j - Gamma^l_ij A^k_l
  auto covA = [&](int k, int j, int i) {
    double v = dA[i](k, j);
    for (int l = 0; l < n; ++l) v += f.gamma(i, l, k) * f.A_mixed(l, j) - f.gamma(i, j, l) * f.A_mixed(k, l);
    return v;
  };
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        double rhs = 0;
        for (int l = 0; l < n; ++l) rhs += f.A_mixed(l, i) * f.c_up(l, j, k) - f.A_mixed(l, j) * f.c_up(l, i, k);
        r.codazzi_A = std::max(r.codazzi_A, std::abs(covA(k, j, i) - covA(k, i, j) - rhs));
      }

  // C_ijl,k = d_k C_ijl - Gamma^m_ki C_mjl - Gamma^m_kj C_iml - Gamma^m_kl C_ijm
  auto covC = [&](int i, int j, int l, int k) {
    double v = dC[k][(i * n + j) * n + l];
    for (int m = 0; m < n; ++m)
      v -= f.gamma(k, i, m) * f.c(m, j, l) + f.gamma(k, j, m) * f.c(i, m, l) + f.gamma(k, l, m) * f.c(i, j, m);
    return v;
  };
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l) {
          const double rhs = 0.5 * (f.g(i, j) * f.A(k, l) - f.g(i, k) * f.A(j, l) + f.g(l, j) * f.A(k, i) -
                                    f.g(l, k) * f.A(j, i));
          r.codazzi_C = std::max(r.codazzi_C, std::abs(covC(i, j, l, k) - covC(i, k, l, j) - rhs));
        }
  return r;
}

/// One-parameter family of patches F(., t) in flow parametrization (fixed
/// parameter = fixed Euclidean normal), valid for t in (t_min, t_max).
struct PatchFamily {
  std::function<PatchPtr(double)> at;
  double t_min = -std::numeric_limits<double>::infinity();
  double t_max = std::numeric_limits<double>::infinity();
};

inline PatchFamily soliton_family(const SolitonSpec& spec) {
  PatchFamily fam;
  fam.at = [spec](double t) { return soliton_patch(spec, t); };
  fam.t_max = soliton_extinction_time(spec);
  if (spec.kind == SolitonKind::Calabi) fam.t_min = 0.0;
  if (spec.kind == SolitonKind::Ellipsoid) fam.t_max = -spec.t0;
  return fam;
}

struct EvolutionReport {
  double support_speed = 0;  // |d_t s + phi|
  double curvature = 0;      // |d_t K - H K|
  double phi = 0;            // |d_t phi - H phi / (n+2)|
  double max_residual() const { return std::max({support_speed, curvature, phi}); }
};

/// Time-difference check of d_t s = -phi, d_t K = H K, d_t phi = H phi/(n+2)
/// at fixed parameter x, where s = -<F, nu> is the Euclidean support value.
inline EvolutionReport evolution_identity_check(const PatchFamily& family, std::span<const double> x, double t,
                                                double dt = 1e-4, double h_fd = kDefaultFrameStep) {
  if (!(t - 2 * dt > family.t_min) || !(t + 2 * dt < family.t_max))
    throw Error(ErrorKind::Stencil, "time stencil leaves the family's valid interval", t);
  struct Sample {
    double s, K, phi;
  };
  auto sample = [&](double tt) {
    const auto patch = family.at(tt);
    const auto e = euclidean_data(*patch, x);
    return Sample{-e.d.F.dot(e.nu), e.K, std::pow(e.K, 1.0 / (e.n + 2))};
  };
  static constexpr double w1[5] = {1.0 / 12, -8.0 / 12, 0.0, 8.0 / 12, -1.0 / 12};
  double ds = 0, dK = 0, dphi = 0;
  for (int a = 0; a < 5; ++a) {
    if (w1[a] == 0.0) continue;
    const auto smp = sample(t + (a - 2) * dt);
    ds += w1[a] * smp.s;
    dK += w1[a] * smp.K;
    dphi += w1[a] * smp.phi;
  }
  ds /= dt;
  dK /= dt;
  dphi /= dt;
  const auto patch = family.at(t);
  const auto f = affine_frame_at(*patch, x, h_fd);
  EvolutionReport r;
  r.support_speed = std::abs(ds + f.phi);
  r.curvature = std::abs(dK - f.H * f.K);
  r.phi = std::abs(dphi - f.H * f.phi / (f.n + 2.0));
  return r;
}

}  // namespace affine_flow
