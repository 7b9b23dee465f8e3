#pragma once

// Runtime estimates over flow trajectories: cubic-form decay, the speed
// envelope q = -d/dt s / (s - r/2), a Pogorelov-type quantity on bowls and
// the containment order between two runs.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "affine_flow/affine_frame.hpp"
#include "affine_flow/convex_support.hpp"
#include "affine_flow/error.hpp"
#include "affine_flow/flow.hpp"
#include "affine_flow/monitor_report.hpp"
#include "affine_flow/patch.hpp"
#include "affine_flow/support_grid.hpp"

namespace affine_flow {

// ---------------------------------------------------------------------------
// Local polynomial reconstruction

/// Degree-4 least-squares fit of a grid around one node, in coordinates
/// scaled by the cell size. Usable as a support function for patches.
struct LocalPolynomial {
  int n = 1;
  std::array<double, 2> center{};
  std::array<double, 2> scale{1.0, 1.0};
  std::vector<std::array<int, 2>> exponents;
  std::vector<double> coefficients;

  template <class T>
  T operator()(std::span<const T> y) const {
    std::array<T, 2> z{(y[0] - center[0]) / scale[0], 0.0 * y[0]};
    if (n == 2) z[1] = (y[1] - center[1]) / scale[1];
    T acc = 0.0 * y[0];
    for (std::size_t m = 0; m < exponents.size(); ++m) {
      T term = 0.0 * y[0] + coefficients[m];
      for (int a = 0; a < n; ++a)
        for (int p = 0; p < exponents[m][a]; ++p) term = term * z[a];
      acc = acc + term;
    }
    return acc;
  }
  bool in_domain(std::span<const double>) const { return true; }
};

inline constexpr int kFitDegree = 4;

inline int fit_half_width(int n) { return n == 1 ? 4 : 3; }

inline LocalPolynomial fit_local_polynomial(const SupportGrid& grid, std::size_t node) {
  const auto& g = grid.geometry;
  const int n = g.n;
  const int w = fit_half_width(n);
  const auto [ci, cj] = g.multi_index(node);
  if (ci - w < 0 || ci + w >= g.axes[0].count || (n == 2 && (cj - w < 0 || cj + w >= g.axes[1].count)))
    throw Error(ErrorKind::Stencil, "fit window leaves the grid at node " + std::to_string(node));
  LocalPolynomial p;
  p.n = n;
  p.center = g.point(node);
  p.scale = {g.axes[0].spacing(), n == 2 ? g.axes[1].spacing() : 1.0};
  for (int d = 0; d <= kFitDegree; ++d)
    for (int e = d; e >= 0; --e) {
      if (n == 1 && e != d) continue;
      p.exponents.push_back({e, d - e});
    }
  std::vector<std::array<int, 2>> offsets;
  for (int di = -w; di <= w; ++di)
    for (int dj = (n == 2 ? -w : 0); dj <= (n == 2 ? w : 0); ++dj) offsets.push_back({di, dj});
  Matrix M(offsets.size(), p.exponents.size());
  Vector rhs(offsets.size());
  for (std::size_t r = 0; r < offsets.size(); ++r) {
    for (std::size_t m = 0; m < p.exponents.size(); ++m)
      M(r, m) = std::pow(offsets[r][0], p.exponents[m][0]) * std::pow(offsets[r][1], p.exponents[m][1]);
    rhs[r] = grid[g.index(ci + offsets[r][0], cj + offsets[r][1])];
  }
  const Vector coef = M.colPivHouseholderQr().solve(rhs);
  p.coefficients.assign(coef.data(), coef.data() + coef.size());
  return p;
}

// ---------------------------------------------------------------------------
// Cubic-form decay

struct CubicDecayOptions {
  double t_lo = 0.0;
  double t_hi = std::numeric_limits<double>::infinity();
  int stride = 8;
  double slack = 0.5;
  // restricts samples to max_a |y^a| <= inner_radius
  double inner_radius = std::numeric_limits<double>::infinity();
};

/// n (n+2) / (2 t).
inline double cubic_decay_bound(int n, double t) {
  if (!(t > 0.0)) throw Error(ErrorKind::Domain, "cubic decay bound needs t > 0");
  return n * (n + 2.0) / (2.0 * t);
}

/// |C|^2 at sampled interior nodes via local degree-4 reconstruction and the
/// affine frame. Time is measured from the first snapshot. Nodes where the
/// frame cannot be extracted are excluded and counted.
inline MonitorReport cubic_decay_monitor(const FlowTrajectory& traj, const CubicDecayOptions& opt = {}) {
  MonitorReport rep;
  rep.name = "cubic_decay";
  rep.slack = opt.slack;
  if (traj.snapshots.empty()) {
    rep.applicable = false;
    rep.note = "empty trajectory";
    return rep;
  }
  const double origin = traj.snapshots.front().time;
  double worst = 0.0;
  for (const auto& grid : traj.snapshots) {
    const double t = grid.time - origin;
    if (!(t > 0.0) || t < opt.t_lo || t > opt.t_hi) continue;
    const auto& g = grid.geometry;
    const int w = fit_half_width(g.n);
    double sup = 0.0;
    bool any = false;
    for (int i = w; i + w < g.axes[0].count; i += opt.stride) {
      for (int j = (g.n == 2 ? w : 0); j <= (g.n == 2 ? g.axes[1].count - 1 - w : 0); j += opt.stride) {
        const std::size_t k = g.index(i, j);
        const auto y = g.point(k);
        if (std::max(std::abs(y[0]), std::abs(y[1])) > opt.inner_radius) continue;
        try {
          const auto patch = make_support_patch(g.n, fit_local_polynomial(grid, k), "local fit");
          const auto frame = affine_frame_at(*patch, std::span<const double>(y.data(), g.n));
          if (!std::isfinite(frame.C_norm_sq)) throw Error(ErrorKind::Conditioning, "non-finite |C|^2");
          sup = std::max(sup, frame.C_norm_sq);
          any = true;
        } catch (const Error&) {
          ++rep.excluded;
        }
      }
    }
    if (!any) continue;
    const double bound = cubic_decay_bound(g.n, t);
    rep.samples.push_back({t, sup, bound});
    worst = std::max(worst, sup / bound);
  }
  rep.worst_ratio = worst;
  if (rep.samples.empty()) {
    rep.applicable = false;
    rep.note = "no snapshot in the sampling window";
  }
  rep.pass = rep.applicable && worst <= 1.0 + opt.slack;
  rep.parameters = {{"samples", static_cast<double>(rep.samples.size())}, {"excluded", double(rep.excluded)}};
  return rep;
}

// ---------------------------------------------------------------------------
// Speed envelope

/// -n / (2n + 2).
inline double andrews_exponent(int n) { return -n / (2.0 * n + 2.0); }

/// Smallest a, b >= 0 (minimal sum of a + b t_k^p over the samples) with
/// a + b t_k^p >= q_k for every k. Two-variable LP solved over its vertices.
struct EnvelopeFit {
  double a = 0.0;
  double b = 0.0;
  double exponent = 0.0;
  double slope = 0.0;  // least-squares log-log slope of the envelope
};

inline EnvelopeFit fit_envelope(const std::vector<double>& t, const std::vector<double>& q, double p) {
  if (t.size() != q.size() || t.empty()) throw Error(ErrorKind::InvalidInput, "envelope fit needs matched samples");
  const std::size_t m = t.size();
  std::vector<double> u(m);
  for (std::size_t k = 0; k < m; ++k) {
    if (!(t[k] > 0.0)) throw Error(ErrorKind::Domain, "envelope samples need t > 0");
    u[k] = std::pow(t[k], p);
  }
  double usum = 0.0;
  for (double v : u) usum += v;
  auto feasible = [&](double a, double b) {
    if (a < 0.0 || b < 0.0) return false;
    for (std::size_t k = 0; k < m; ++k)
      if (a + b * u[k] < q[k] * (1.0 - 1e-12) - 1e-300) return false;
    return true;
  };
  EnvelopeFit best;
  best.exponent = p;
  double best_cost = std::numeric_limits<double>::infinity();
  auto consider = [&](double a, double b) {
    if (!feasible(a, b)) return;
    const double cost = m * a + b * usum;
    if (cost < best_cost) {
      best_cost = cost;
      best.a = a;
      best.b = b;
    }
  };
  const double qmax = *std::max_element(q.begin(), q.end());
  consider(std::max(qmax, 0.0), 0.0);
  double bmax = 0.0;
  for (std::size_t k = 0; k < m; ++k) bmax = std::max(bmax, q[k] / u[k]);
  consider(0.0, bmax);
  for (std::size_t j = 0; j < m; ++j)
    for (std::size_t k = j + 1; k < m; ++k) {
      if (u[j] == u[k]) continue;
      const double b = (q[j] - q[k]) / (u[j] - u[k]);
      consider(q[j] - b * u[j], b);
    }
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t k = 0; k < m; ++k) {
    const double x = std::log(t[k]);
    const double y = std::log(best.a + best.b * u[k]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double denom = m * sxx - sx * sx;
  best.slope = denom > 0.0 ? (m * sxy - sx * sy) / denom : 0.0;
  return best;
}

struct AndrewsOptions {
  double tolerance = 0.15;
};

/// q on sphere-restricted values sigma = s / sqrt(1 + |y|^2): q = -d/dt sigma /
/// (sigma - r/2), with d/dt from snapshot differences. The per-time sample is
/// the maximum over interior nodes. The hypothesis sigma >= r can only be
/// checked on the directions the window covers.
inline MonitorReport andrews_speed_monitor(const FlowTrajectory& traj, double r, const AndrewsOptions& opt = {}) {
  if (!(r > 0.0)) throw Error(ErrorKind::InvalidInput, "r must be positive");
  MonitorReport rep;
  rep.name = "andrews_speed";
  rep.slack = opt.tolerance;
  const auto& snaps = traj.snapshots;
  if (snaps.size() < 2) {
    rep.applicable = false;
    rep.note = "needs at least two snapshots";
    return rep;
  }
  const auto& g = snaps.front().geometry;
  const int n = g.n;
  const double p = andrews_exponent(n);
  bool below_r = false;
  std::vector<double> ts, qs;
  for (std::size_t j = 0; j < snaps.size(); ++j) {
    const std::size_t lo = j == 0 ? 0 : j - 1;
    const std::size_t hi = j + 1 == snaps.size() ? j : j + 1;
    const double span_t = snaps[hi].time - snaps[lo].time;
    double qmax = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < g.size(); ++k) {
      if (g.is_boundary(k)) continue;
      const auto y = g.point(k);
      const double norm = std::sqrt(1.0 + y[0] * y[0] + (n == 2 ? y[1] * y[1] : 0.0));
      const double sigma = snaps[j][k] / norm;
      if (sigma < 0.5 * r)
        throw Error(ErrorKind::Domain, "s < r/2 at node " + std::to_string(k) + ", t = " + std::to_string(snaps[j].time));
      if (sigma < r) below_r = true;
      const double dsigma = (snaps[hi][k] - snaps[lo][k]) / (span_t * norm);
      qmax = std::max(qmax, -dsigma / (sigma - 0.5 * r));
    }
    if (snaps[j].time > 0.0) {
      ts.push_back(snaps[j].time);
      qs.push_back(qmax);
    }
  }
  if (below_r) {
    rep.applicable = false;
    rep.note = "hypothesis s >= r fails on the sampled directions";
    return rep;
  }
  if (ts.size() < 2) {
    rep.applicable = false;
    rep.note = "needs two samples with t > 0";
    return rep;
  }
  const auto fit = fit_envelope(ts, qs, p);
  double worst = 0.0;
  for (std::size_t k = 0; k < ts.size(); ++k) {
    const double bound = fit.a + fit.b * std::pow(ts[k], p);
    rep.samples.push_back({ts[k], qs[k], bound});
    worst = std::max(worst, qs[k] / bound);
  }
  rep.worst_ratio = worst;
  rep.pass = std::abs(fit.slope - p) <= opt.tolerance;
  rep.parameters = {{"a", fit.a}, {"b", fit.b}, {"exponent", p}, {"slope", fit.slope}};
  return rep;
}

// ---------------------------------------------------------------------------
// Pogorelov-type quantity on bowls

struct GhField {
  std::vector<double> w;  // nan where not evaluated
  double max_value = 0.0;
  std::size_t max_node = 0;
  bool strictly_interior = false;  // max sits at a node with u < 0 away from the bowl rim
};

/// w = |u| u_bb exp(u_b^2 / 2) at interior nodes with u <= 0, b a unit vector.
/// With `require_nonpositive`, an interior node with u > tol is an error.
inline GhField gh_quantity(const SupportGrid& u, std::span<const double> beta, bool require_nonpositive = true,
                           double tol = kTolOrder) {
  const auto& g = u.geometry;
  const int n = g.n;
  if (static_cast<int>(beta.size()) != n) throw Error(ErrorKind::InvalidInput, "beta has the wrong dimension");
  double bn = 0.0;
  for (double b : beta) bn += b * b;
  if (std::abs(bn - 1.0) > 1e-12) throw Error(ErrorKind::InvalidInput, "beta must be a unit vector");
  GhField f;
  f.w.assign(u.size(), NAN);
  bool found = false;
  for (std::size_t k = 0; k < u.size(); ++k) {
    if (g.is_boundary(k)) continue;
    if (u[k] > tol && require_nonpositive)
      throw Error(ErrorKind::Precondition, "u > 0 at interior node " + std::to_string(k), u[k]);
    if (!(u[k] <= 0.0)) continue;
    const auto H = u.hessian(k);
    const auto grad = u.gradient(k);
    const double b0 = beta[0], b1 = n == 2 ? beta[1] : 0.0;
    const double ub = grad[0] * b0 + grad[1] * b1;
    const double ubb = n == 1 ? H[0] * b0 * b0 : H[0] * b0 * b0 + 2.0 * H[1] * b0 * b1 + H[2] * b1 * b1;
    f.w[k] = std::abs(u[k]) * ubb * std::exp(0.5 * ub * ub);
    if (!found || f.w[k] > f.max_value) {
      f.max_value = f.w[k];
      f.max_node = k;
      found = true;
    }
  }
  if (found) {
    // interior means every grid neighbour of the maximizer is inside the bowl
    const auto [i, j] = g.multi_index(f.max_node);
    bool inside = f.max_value > 0.0;
    for (int di = -1; di <= 1 && inside; ++di)
      for (int dj = (n == 2 ? -1 : 0); dj <= (n == 2 ? 1 : 0) && inside; ++dj) {
        const std::size_t nb = g.index(i + di, j + dj);
        inside = u[nb] < 0.0 || (require_nonpositive && !g.is_boundary(nb));
      }
    f.strictly_interior = inside;
  }
  return f;
}

/// u = s - cap with an affine cap ell(y) = c0 + <c, y>.
inline SupportGrid bowl_function(const SupportGrid& s, double c0, std::span<const double> c) {
  SupportGrid u = s;
  for (std::size_t k = 0; k < s.size(); ++k) {
    const auto y = s.geometry.point(k);
    double ell = c0;
    for (int i = 0; i < s.n(); ++i) ell += c[i] * y[i];
    u[k] = s[k] - ell;
  }
  return u;
}

struct GhOptions {
  double growth_limit = 10.0;
};

/// Tracks max w over the bowls {s(., t) < cap} along a trajectory. The bowl
/// must stay off the window boundary so that u vanishes on its rim.
inline MonitorReport gh_monitor(const FlowTrajectory& traj, double c0, std::span<const double> c,
                                std::span<const double> beta, const GhOptions& opt = {}) {
  MonitorReport rep;
  rep.name = "gh_quantity";
  rep.slack = 0.0;
  double first = 0.0;
  bool all_interior = true;
  for (const auto& s : traj.snapshots) {
    const auto u = bowl_function(s, c0, c);
    for (std::size_t k = 0; k < u.size(); ++k)
      if (u.geometry.is_boundary(k) && u[k] <= 0.0)
        throw Error(ErrorKind::Precondition, "bowl reaches the window boundary at t = " + std::to_string(s.time));
    const auto f = gh_quantity(u, beta, false);
    if (f.max_value <= 0.0) continue;
    if (rep.samples.empty()) first = f.max_value;
    all_interior = all_interior && f.strictly_interior;
    rep.samples.push_back({s.time, f.max_value, opt.growth_limit * first});
  }
  if (rep.samples.empty()) {
    rep.applicable = false;
    rep.note = "bowl is empty at every snapshot";
    return rep;
  }
  for (const auto& smp : rep.samples) rep.worst_ratio = std::max(rep.worst_ratio, smp.value / smp.bound);
  rep.pass = rep.worst_ratio <= 1.0 && all_interior;
  rep.parameters = {{"first_max", first}, {"strictly_interior", all_interior ? 1.0 : 0.0}};
  return rep;
}

// ---------------------------------------------------------------------------
// Containment

/// Asserts s1 <= s2 + tol at every snapshot. worst_ratio = max violation / tol.
inline MonitorReport containment_monitor(const FlowTrajectory& inner, const FlowTrajectory& outer,
                                         double tol = kTolOrder) {
  if (inner.snapshots.size() != outer.snapshots.size())
    throw Error(ErrorKind::IncompatibleGrids, "trajectories have different snapshot counts");
  MonitorReport rep;
  rep.name = "containment";
  rep.slack = 0.0;
  for (std::size_t j = 0; j < inner.snapshots.size(); ++j) {
    const auto& a = inner.snapshots[j];
    const auto& b = outer.snapshots[j];
    require_compatible(a, b);
    const auto order = containment_order(a, b, tol);
    if (j == 0 && !order.contained)
      throw Error(ErrorKind::Precondition, "initial grids are not ordered", order.violation);
    const double violation = std::max(0.0, order.violation);
    rep.samples.push_back({a.time, violation, tol});
    rep.worst_ratio = std::max(rep.worst_ratio, violation / tol);
  }
  rep.pass = rep.worst_ratio <= 1.0;
  rep.parameters = {{"max_violation", rep.worst_ratio * tol}};
  return rep;
}

// ---------------------------------------------------------------------------
// Config-driven monitors

inline std::vector<TrajectoryMonitor> monitors_from_flags(const FlowConfig& config) {
  std::vector<TrajectoryMonitor> out;
  if (config.monitors.cubic_decay) {
    CubicDecayOptions opt;
    opt.stride = config.monitors.sample_stride;
    opt.inner_radius = config.monitors.inner_radius;
    out.push_back([opt](const FlowTrajectory& t) { return cubic_decay_monitor(t, opt); });
  }
  if (config.monitors.andrews_r) {
    const double r = *config.monitors.andrews_r;
    out.push_back([r](const FlowTrajectory& t) {
      try {
        return andrews_speed_monitor(t, r);
      } catch (const Error& e) {
        MonitorReport rep;
        rep.name = "andrews_speed";
        rep.applicable = false;
        rep.note = e.what();
        return rep;
      }
    });
  }
  return out;
}

inline FlowTrajectory run_monitored(const FlowConfig& config) { return run(config, monitors_from_flags(config)); }

}  // namespace affine_flow
