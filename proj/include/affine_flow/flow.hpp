#pragma once

// Explicit solver for the slice support-function flow
//   d/dt s(y, t) = -(det D^2 s)^(-1/(n+2)),   n in {1, 2},
// on a rectangular window with Dirichlet data.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "affine_flow/convex_support.hpp"
#include "affine_flow/error.hpp"
#include "affine_flow/monitor_report.hpp"
#include "affine_flow/snapshot_csv.hpp"
#include "affine_flow/solitons.hpp"
#include "affine_flow/support_grid.hpp"

namespace affine_flow {

inline constexpr double kDefaultDetFloor = 1e-10;
inline constexpr double kDefaultDtSafety = 0.25;

enum class InitialKind { Soliton, Points, GridFile, PerturbedSphere };

/// Initial data. PerturbedSphere is r0 sqrt(1+|y|^2) (1 + amplitude b(y))
/// with the C^2 bump b = (1 - |y|^2 / bump_radius^2)^3 on its support.
struct InitialCondition {
  InitialKind kind = InitialKind::Soliton;
  SolitonSpec soliton;
  std::string path;
  double r0 = 1.0;
  double amplitude = 0.0;
  double bump_radius = 1.0;
  double scale = 1.0;
};

struct MonitorFlags {
  bool cubic_decay = false;
  std::optional<double> andrews_r;
  int sample_stride = 8;
  double inner_radius = std::numeric_limits<double>::infinity();
};

struct FlowConfig {
  GridGeometry geometry;
  InitialCondition initial;
  BoundaryMode boundary;
  double t_start = 0.0;
  double t_end = 1.0;
  double dt_safety = kDefaultDtSafety;
  std::optional<double> snapshot_every;
  double det_floor = kDefaultDetFloor;
  MonitorFlags monitors;

  int n() const { return geometry.n; }

  double snapshot_interval() const { return snapshot_every.value_or(t_end - t_start); }

  std::size_t snapshot_count() const {
    if (t_end == t_start) return 1;
    const double ratio = (t_end - t_start) / snapshot_interval();
    return static_cast<std::size_t>(std::ceil(ratio - 1e-9)) + 1;
  }

  double snapshot_time(std::size_t j) const {
    if (j + 1 >= snapshot_count()) return t_end;
    return t_start + static_cast<double>(j) * snapshot_interval();
  }

  void validate() const {
    geometry.validate();
    auto finite = [](double v) { return std::isfinite(v); };
    if (!finite(t_start) || t_start < 0.0) throw Error(ErrorKind::Validation, "t_start must be finite and >= 0");
    if (!finite(t_end) || t_end < t_start) throw Error(ErrorKind::Validation, "t_end must be finite and >= t_start");
    if (!(dt_safety > 0.0 && dt_safety <= 1.0)) throw Error(ErrorKind::Validation, "dt_safety must lie in (0, 1]");
    if (!(det_floor > 0.0) || !finite(det_floor)) throw Error(ErrorKind::Validation, "det_floor must be positive");
    if (snapshot_every && !(*snapshot_every > 0.0 && finite(*snapshot_every)))
      throw Error(ErrorKind::Validation, "snapshot_every must be positive");
    if (!(monitors.inner_radius > 0.0)) throw Error(ErrorKind::Validation, "monitors.inner_radius must be positive");
    if (monitors.sample_stride < 1) throw Error(ErrorKind::Validation, "monitors.sample_stride must be >= 1");
    if (monitors.andrews_r && !(*monitors.andrews_r > 0.0))
      throw Error(ErrorKind::Validation, "monitors.andrews_r must be positive");
    if (!(initial.scale > 0.0) || !finite(initial.scale))
      throw Error(ErrorKind::Validation, "initial scale must be positive");
    auto check_spec = [&](const SolitonSpec& spec, const char* field) {
      if (spec.n != n()) throw Error(ErrorKind::Validation, std::string(field) + ": dimension does not match n");
      spec.validate();
      if (spec.transform && std::abs(spec.transform->A.determinant()) < 1e-12)
        throw Error(ErrorKind::Validation, std::string(field) + ": transform matrix is singular");
    };
    switch (initial.kind) {
      case InitialKind::Soliton: check_spec(initial.soliton, "initial"); break;
      case InitialKind::Points:
      case InitialKind::GridFile:
        if (initial.path.empty()) throw Error(ErrorKind::Validation, "initial: file path is empty");
        break;
      case InitialKind::PerturbedSphere:
        if (!(initial.r0 > 0.0)) throw Error(ErrorKind::Validation, "initial: r0 must be positive");
        if (!(std::abs(initial.amplitude) < 1.0)) throw Error(ErrorKind::Validation, "initial: |amplitude| must be < 1");
        if (!(initial.bump_radius > 0.0)) throw Error(ErrorKind::Validation, "initial: bump radius must be positive");
        break;
    }
    if (boundary.kind == BoundaryKind::ExactSoliton) {
      if (!boundary.soliton) throw Error(ErrorKind::Validation, "boundary: exact mode needs a soliton");
      check_spec(*boundary.soliton, "boundary");
      if (!(boundary.value_scale > 0.0 && boundary.time_scale > 0.0))
        throw Error(ErrorKind::Validation, "boundary: scales must be positive");
    }
  }
};

enum class EventKind { Clamp, DtRejected, Extinct, Error };

inline std::string to_string(EventKind k) {
  switch (k) {
    case EventKind::Clamp: return "clamp";
    case EventKind::DtRejected: return "dt_rejected";
    case EventKind::Extinct: return "extinct";
    case EventKind::Error: return "error";
  }
  return "unknown";
}

/// One log entry. Clamps are aggregated per step: `node` is the first clamped
/// node and `count` the number of clamped nodes in that step.
struct FlowEvent {
  double t = 0.0;
  EventKind kind = EventKind::Clamp;
  std::size_t node = 0;
  std::size_t count = 1;
  std::string detail;
};

// ---------------------------------------------------------------------------
// Pointwise operator

/// Clamped local quantities at one interior node.
struct NodeState {
  double det = 0.0;
  double speed = 0.0;
  double diffusion = 0.0;  // sum_k D_kk / h_k^2
  double min_eigenvalue = 0.0;
  bool clamped = false;
};

/// Node state from a packed Hessian {s11, s12, s22} and cell sizes.
inline NodeState node_state(const std::array<double, 3>& H, int n, double h1, double h2, double det_floor,
                            std::size_t k) {
  const double floor = n == 1 ? det_floor : std::sqrt(det_floor);
  NodeState st;
  if (!std::isfinite(H[0]) || !std::isfinite(H[1]) || !std::isfinite(H[2]))
    throw Error(ErrorKind::DegenerateHessian, "non-finite Hessian at node " + std::to_string(k));
  if (n == 1) {
    st.min_eigenvalue = H[0];
    st.clamped = H[0] < floor;
    const double a = std::max(H[0], floor);
    st.det = a;
    const double root = std::cbrt(a);
    st.speed = -1.0 / root;
    st.diffusion = 1.0 / (3.0 * root * a * h1 * h1);
  } else {
    double a = H[0], b = H[1], c = H[2];
    const auto ev = hessian_eigenvalues(H, 2);
    st.min_eigenvalue = ev[0];
    if (ev[0] < floor) {
      st.clamped = true;
      const double l1 = std::max(ev[0], floor), l2 = std::max(ev[1], floor);
      // unit eigenvector of the larger eigenvalue
      double vx = b, vy = ev[1] - a;
      if (std::abs(ev[1] - c) + std::abs(b) > std::abs(vx) + std::abs(vy)) {
        vx = ev[1] - c;
        vy = b;
      }
      const double norm = std::hypot(vx, vy);
      if (norm > 0.0) {
        vx /= norm;
        vy /= norm;
      } else {
        vx = 1.0;
        vy = 0.0;
      }
      a = l1 + (l2 - l1) * vx * vx;
      b = (l2 - l1) * vx * vy;
      c = l1 + (l2 - l1) * vy * vy;
    }
    st.det = a * c - b * b;
    if (st.clamped) st.det = std::max(st.det, det_floor);
    const double root = std::sqrt(std::sqrt(st.det));
    st.speed = -1.0 / root;
    st.diffusion = (c / (h1 * h1) + a / (h2 * h2)) / (4.0 * root * st.det);
  }
  if (!std::isfinite(st.det) || !(st.det >= det_floor * (1.0 - 1e-12)) || !std::isfinite(st.speed))
    throw Error(ErrorKind::DegenerateHessian, "Hessian determinant below det_floor at node " + std::to_string(k),
                st.det);
  return st;
}

inline NodeState evaluate_node(const SupportGrid& grid, std::size_t k, double det_floor = kDefaultDetFloor) {
  const auto& g = grid.geometry;
  return node_state(grid.hessian(k), g.n, g.axes[0].spacing(), g.n == 2 ? g.axes[1].spacing() : 1.0, det_floor, k);
}

/// Determinant of the centered-difference Hessian after eigenvalue clamping.
inline double hessian_det(const SupportGrid& grid, std::size_t node, double det_floor = kDefaultDetFloor,
                          std::vector<FlowEvent>* events = nullptr) {
  const auto st = evaluate_node(grid, node, det_floor);
  if (st.clamped && events) events->push_back({grid.time, EventKind::Clamp, node, 1, "eigenvalue clamp"});
  return st.det;
}

/// -(det)^(-1/(n+2)), always negative.
inline double speed(const SupportGrid& grid, std::size_t node, double det_floor = kDefaultDetFloor) {
  return evaluate_node(grid, node, det_floor).speed;
}

// ---------------------------------------------------------------------------
// Whole-grid evaluation and stepping

/// One pass over the interior: node states plus the stability bound.
struct GridEvaluation {
  std::vector<double> det;    // nan on the boundary
  std::vector<double> speed;  // nan on the boundary
  double stable_dt = std::numeric_limits<double>::infinity();  // before dt_safety
  double min_eigenvalue = std::numeric_limits<double>::infinity();
  std::size_t min_eigenvalue_node = 0;
  std::size_t clamps = 0;
  std::size_t first_clamp = 0;
};

/// Reuses the buffers of `ev`.
inline void evaluate_grid(const SupportGrid& grid, double det_floor, GridEvaluation& ev) {
  ev.det.assign(grid.size(), NAN);
  ev.speed.assign(grid.size(), NAN);
  ev.stable_dt = std::numeric_limits<double>::infinity();
  ev.min_eigenvalue = std::numeric_limits<double>::infinity();
  ev.min_eigenvalue_node = 0;
  ev.clamps = 0;
  ev.first_clamp = 0;
  const auto& g = grid.geometry;
  const auto& s = grid.values;
  const double h1 = g.axes[0].spacing();
  const double h2 = g.n == 2 ? g.axes[1].spacing() : 1.0;
  const int rows = g.axes[0].count;
  const int cols = g.n == 2 ? g.axes[1].count : 1;
  const std::size_t stride = static_cast<std::size_t>(cols);
  for (int i = 1; i + 1 < rows; ++i) {
    for (int j = (g.n == 2 ? 1 : 0); j < (g.n == 2 ? cols - 1 : 1); ++j) {
      const std::size_t k = g.index(i, j);
      std::array<double, 3> H{};
      if (g.n == 1) {
        H[0] = (s[k + 1] - 2.0 * s[k] + s[k - 1]) / (h1 * h1);
      } else {
        H[0] = (s[k + stride] - 2.0 * s[k] + s[k - stride]) / (h1 * h1);
        H[2] = (s[k + 1] - 2.0 * s[k] + s[k - 1]) / (h2 * h2);
        H[1] = (s[k + stride + 1] - s[k + stride - 1] - s[k - stride + 1] + s[k - stride - 1]) / (4.0 * h1 * h2);
    }
    const auto st = node_state(H, g.n, h1, h2, det_floor, k);
    ev.det[k] = st.det;
    ev.speed[k] = st.speed;
    ev.stable_dt = std::min(ev.stable_dt, 1.0 / (2.0 * st.diffusion));
    if (st.min_eigenvalue < ev.min_eigenvalue) {
      ev.min_eigenvalue = st.min_eigenvalue;
      ev.min_eigenvalue_node = k;
    }
    if (st.clamped && ev.clamps++ == 0) ev.first_clamp = k;
    }
  }
}

inline GridEvaluation evaluate_grid(const SupportGrid& grid, double det_floor = kDefaultDetFloor) {
  GridEvaluation ev;
  evaluate_grid(grid, det_floor, ev);
  return ev;
}

/// dt_safety * min over interior nodes of 1 / (2 sum_k D_kk / h_k^2), with
/// D = det^(-1/(n+2)) (D^2 s)^(-1) / (n+2). Equals h^2 / (2 tr D) on square cells.
inline double stable_dt(const SupportGrid& grid, double dt_safety = kDefaultDtSafety,
                        double det_floor = kDefaultDetFloor) {
  return dt_safety * evaluate_grid(grid, det_floor).stable_dt;
}

inline double boundary_value(const BoundaryMode& mode, std::span<const double> y, double t) {
  if (!mode.soliton) throw Error(ErrorKind::InvalidInput, "exact-soliton boundary without a soliton");
  const double v = mode.value_scale * soliton_slice_support(*mode.soliton, y, mode.time_scale * t);
  if (!std::isfinite(v)) throw Error(ErrorKind::Domain, "boundary soliton support is infinite");
  return v;
}

/// Boundary node indices in storage order.
inline std::vector<std::size_t> boundary_nodes(const GridGeometry& g) {
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < g.size(); ++k)
    if (g.is_boundary(k)) out.push_back(k);
  return out;
}

inline void apply_boundary(SupportGrid& grid, const std::vector<std::size_t>& nodes) {
  if (grid.boundary.kind != BoundaryKind::ExactSoliton) return;
  for (std::size_t k : nodes) {
    const auto y = grid.geometry.point(k);
    grid[k] = boundary_value(grid.boundary, std::span<const double>(y.data(), grid.n()), grid.time);
  }
}

inline void apply_boundary(SupportGrid& grid) { apply_boundary(grid, boundary_nodes(grid.geometry)); }

namespace detail {

inline void advance_in_place(SupportGrid& grid, const GridEvaluation& ev, double dt,
                             const std::vector<std::size_t>& boundary) {
  for (std::size_t k = 0; k < grid.size(); ++k)
    if (!std::isnan(ev.speed[k])) grid[k] += dt * ev.speed[k];
  grid.time += dt;
  apply_boundary(grid, boundary);
}

inline SupportGrid advance(const SupportGrid& grid, const GridEvaluation& ev, double dt) {
  SupportGrid out = grid;
  advance_in_place(out, ev, dt, boundary_nodes(grid.geometry));
  return out;
}

}  // namespace detail

/// One explicit Euler step. Rejects dt above the stability bound.
inline SupportGrid step(const SupportGrid& grid, double dt, double dt_safety = kDefaultDtSafety,
                        double det_floor = kDefaultDetFloor, std::vector<FlowEvent>* events = nullptr) {
  grid.validate();
  if (!(dt > 0.0)) throw Error(ErrorKind::InvalidInput, "dt must be positive");
  const auto ev = evaluate_grid(grid, det_floor);
  const double limit = dt_safety * ev.stable_dt;
  if (dt > limit * (1.0 + 1e-12)) {
    if (events) events->push_back({grid.time, EventKind::DtRejected, 0, 1, "dt exceeds stable_dt"});
    throw Error(ErrorKind::DtTooLarge, "dt exceeds stable_dt", limit);
  }
  if (ev.clamps && events)
    events->push_back({grid.time, EventKind::Clamp, ev.first_clamp, ev.clamps, "eigenvalue clamp"});
  auto out = detail::advance(grid, ev, dt);
  if (const auto bad = find_convexity_violation(out))
    throw Error(ErrorKind::ConvexityFailure, "discrete convexity lost at node " + std::to_string(*bad));
  return out;
}

/// max over interior nodes of s minus the tangent plane at the centre node.
/// Tends to zero as the body collapses to a point.
inline double supporting_gap(const SupportGrid& grid) {
  const auto& g = grid.geometry;
  const std::size_t c = g.index(g.axes[0].count / 2, g.n == 2 ? g.axes[1].count / 2 : 0);
  const auto grad = grid.gradient(c);
  const auto yc = g.point(c);
  double gap = -std::numeric_limits<double>::infinity();
  const int rows = g.axes[0].count;
  const int cols = g.n == 2 ? g.axes[1].count : 1;
  for (int i = 1; i + 1 < rows; ++i) {
    const double base = grid[c] + grad[0] * (g.axes[0].coordinate(i) - yc[0]);
    if (g.n == 1) {
      gap = std::max(gap, grid[g.index(i)] - base);
      continue;
    }
    for (int j = 1; j + 1 < cols; ++j)
      gap = std::max(gap, grid[g.index(i, j)] - base - grad[1] * (g.axes[1].coordinate(j) - yc[1]));
  }
  return gap;
}

inline double extinction_threshold(const GridGeometry& g) { return 10.0 * g.min_spacing() * g.min_spacing(); }

// ---------------------------------------------------------------------------
// Runs

inline SupportGrid initial_grid(const FlowConfig& config) {
  const auto& g = config.geometry;
  const auto& init = config.initial;
  const double t = config.t_start;
  SupportGrid grid;
  switch (init.kind) {
    case InitialKind::Soliton:
      grid = soliton_support_grid(init.soliton, g, t);
      break;
    case InitialKind::Points:
      grid = support_grid_of(support_of(load_points(init.path, g.n + 1)), g, t);
      break;
    case InitialKind::GridFile:
      grid = read_snapshot_csv(init.path, g);
      break;
    case InitialKind::PerturbedSphere:
      grid = SupportGrid::from_function(g, t, [&](auto y) {
        double q = 0.0;
        for (double v : y) q += v * v;
        const double u = std::max(0.0, 1.0 - q / (init.bump_radius * init.bump_radius));
        return init.r0 * std::sqrt(1.0 + q) * (1.0 + init.amplitude * u * u * u);
      });
      break;
  }
  for (double& v : grid.values) v *= init.scale;
  grid.time = t;
  grid.boundary = config.boundary;
  if (!grid.values.empty())
    for (double v : grid.values)
      if (!std::isfinite(v)) throw Error(ErrorKind::Domain, "initial support is not finite on the window");
  return grid;
}

enum class RunStatus { Completed, Extinct, Error };

inline std::string to_string(RunStatus s) {
  switch (s) {
    case RunStatus::Completed: return "completed";
    case RunStatus::Extinct: return "extinct";
    case RunStatus::Error: return "error";
  }
  return "unknown";
}

struct FlowTrajectory {
  std::vector<SupportGrid> snapshots;
  std::vector<std::vector<double>> det_fields;    // per snapshot; empty if unavailable
  std::vector<std::vector<double>> speed_fields;  // per snapshot; empty if unavailable
  std::vector<MonitorReport> monitor_records;
  std::vector<FlowEvent> events;
  RunStatus status = RunStatus::Completed;
  std::optional<ErrorKind> error;
  std::string message;
  std::size_t steps = 0;
  std::size_t clamp_count = 0;

  std::vector<double> times() const {
    std::vector<double> t;
    for (const auto& s : snapshots) t.push_back(s.time);
    return t;
  }
};

using TrajectoryMonitor = std::function<MonitorReport(const FlowTrajectory&)>;

/// Advance the configured flow to t_end, recording snapshots on the cadence
/// t_start + j * snapshot_every (the last one exactly at t_end). Step failures
/// end the run with a partial trajectory and an error record; monitors are
/// evaluated on whatever was recorded.
inline FlowTrajectory run(const FlowConfig& config, const std::vector<TrajectoryMonitor>& monitors = {}) {
  config.validate();
  FlowTrajectory traj;
  SupportGrid grid = initial_grid(config);
  if (const auto bad = find_convexity_violation(grid))
    throw Error(ErrorKind::Precondition, "initial grid is not discretely convex at node " + std::to_string(*bad));

  const std::size_t count = config.snapshot_count();
  std::size_t next = 0;
  const double threshold = extinction_threshold(config.geometry);
  GridEvaluation ev;
  const auto boundary = boundary_nodes(config.geometry);
  try {
    while (true) {
      evaluate_grid(grid, config.det_floor, ev);
      if (ev.min_eigenvalue < -kTolConvexity)
        throw Error(ErrorKind::ConvexityFailure,
                    "discrete convexity lost at node " + std::to_string(ev.min_eigenvalue_node), ev.min_eigenvalue);
      if (next < count && grid.time == config.snapshot_time(next)) {
        traj.snapshots.push_back(grid);
        traj.det_fields.push_back(ev.det);
        traj.speed_fields.push_back(ev.speed);
        ++next;
      }
      if (next >= count) break;
      if (supporting_gap(grid) < threshold) {
        traj.status = RunStatus::Extinct;
        traj.events.push_back({grid.time, EventKind::Extinct, 0, 1, "supporting gap below 10 h^2"});
        break;
      }
      if (ev.clamps) {
        traj.clamp_count += ev.clamps;
        traj.events.push_back({grid.time, EventKind::Clamp, ev.first_clamp, ev.clamps, "eigenvalue clamp"});
      }
      const double target = config.snapshot_time(next);
      const double dt_max = config.dt_safety * ev.stable_dt;
      const bool lands = target - grid.time <= dt_max;
      detail::advance_in_place(grid, ev, lands ? target - grid.time : dt_max, boundary);
      if (lands) grid.time = target;
      ++traj.steps;
    }
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::Extinct) {
      traj.status = RunStatus::Extinct;
      traj.events.push_back({grid.time, EventKind::Extinct, 0, 1, e.what()});
    } else {
      traj.status = RunStatus::Error;
      traj.error = e.kind();
      traj.message = e.what();
      traj.events.push_back({grid.time, EventKind::Error, 0, 1, e.what()});
    }
  }
  for (const auto& m : monitors) traj.monitor_records.push_back(m(traj));
  return traj;
}

/// Points F = (grad s, y . grad s - s) of the evolving hypersurface, one per
/// interior node.
inline ConvexBodySample recover_points(const SupportGrid& grid) {
  grid.validate();
  std::vector<Vector> pts;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    if (grid.geometry.is_boundary(k)) continue;
    const auto grad = grid.gradient(k);
    const auto y = grid.geometry.point(k);
    Vector p(grid.n() + 1);
    double dot = 0.0;
    for (int i = 0; i < grid.n(); ++i) {
      p[i] = grad[i];
      dot += y[i] * grad[i];
    }
    p[grid.n()] = dot - grid[k];
    pts.push_back(std::move(p));
  }
  return ConvexBodySample(std::move(pts));
}

struct ScalingReport {
  double lambda = 1.0;
  double exponent = 0.0;  // (2n+2)/(n+2)
  double max_discrepancy = 0.0;
  std::size_t pairs = 0;
  RunStatus base_status = RunStatus::Completed;
  RunStatus scaled_status = RunStatus::Completed;
};

/// Compare the flow of lambda K with the rescaled flow of K:
/// s_{lambda K}(lambda^a t) = lambda s_K(t), a = (2n+2)/(n+2).
inline ScalingReport scaling_law_check(const FlowConfig& config, double lambda) {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) throw Error(ErrorKind::InvalidInput, "lambda must be positive");
  ScalingReport rep;
  rep.lambda = lambda;
  rep.exponent = sphere_rate(config.n());
  const double tau = std::pow(lambda, rep.exponent);
  FlowConfig scaled = config;
  scaled.initial.scale *= lambda;
  scaled.t_start = config.t_start * tau;
  scaled.t_end = config.t_end * tau;
  scaled.snapshot_every = config.snapshot_interval() * tau;
  if (config.t_end == config.t_start) scaled.snapshot_every.reset();
  scaled.boundary.value_scale *= lambda;
  scaled.boundary.time_scale /= tau;

  const auto base = run(config);
  const auto other = run(scaled);
  rep.base_status = base.status;
  rep.scaled_status = other.status;
  rep.pairs = std::min(base.snapshots.size(), other.snapshots.size());
  for (std::size_t j = 0; j < rep.pairs; ++j) {
    const auto& a = base.snapshots[j];
    const auto& b = other.snapshots[j];
    for (std::size_t k = 0; k < a.size(); ++k)
      rep.max_discrepancy = std::max(rep.max_discrepancy, std::abs(b[k] - lambda * a[k]));
  }
  return rep;
}

}  // namespace affine_flow
