// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "affine_flow/io.hpp"

namespace af = affine_flow;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(int id, const std::string& title, const std::function<Outcome()>& body) {
  const auto start = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (!o.pass) ++failures;
  std::printf("%s criterion %d: %s | %s | %.1f s\n", o.pass ? "PASS" : "FAIL", id, title.c_str(), o.detail.c_str(),
              secs);
  std::fflush(stdout);
}

void note(const std::string& text) {
  std::printf("     note: %s\n", text.c_str());
  std::fflush(stdout);
}

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::string fmt(const char* f, double a, double b) {
  char buf[160];
  std::snprintf(buf, sizeof buf, f, a, b);
  return buf;
}

std::string fmt(const char* f, double a, double b, double c) {
  char buf[200];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

af::FlowConfig exact_config(const af::SolitonSpec& spec, const af::GridGeometry& g, double t_end) {
  af::FlowConfig c;
  c.geometry = g;
  c.initial.soliton = spec;
  c.boundary = af::BoundaryMode::exact(spec);
  c.t_end = t_end;
  return c;
}

af::SolitonSpec ball(double r, int n, const af::Vector& center) {
  auto spec = af::parse_soliton("sphere(1)", n);
  spec.r0 = r;
  spec.transform = af::AffineMap{af::Matrix::Identity(n + 1, n + 1), center};
  return spec;
}

double sphere_relative_error(const af::SupportGrid& s, double r) {
  double worst = 0.0;
  for (std::size_t k = 0; k < s.size(); ++k) {
    if (s.geometry.is_boundary(k)) continue;
    const auto y = s.geometry.point(k);
    const double exact = r * std::sqrt(1.0 + y[0] * y[0] + (s.n() == 2 ? y[1] * y[1] : 0.0));
    worst = std::max(worst, std::abs(s[k] - exact) / exact);
  }
  return worst;
}

// four-point Lagrange interpolation on a uniform 1-d grid
double interpolate(const af::SupportGrid& s, double y) {
  const auto& ax = s.geometry.axes[0];
  const double h = ax.spacing();
  int i = static_cast<int>(std::floor((y - ax.lower) / h));
  i = std::clamp(i - 1, 0, ax.count - 4);
  double acc = 0.0;
  for (int a = 0; a < 4; ++a) {
    double w = 1.0;
    for (int b = 0; b < 4; ++b)
      if (b != a) w *= (y - ax.coordinate(i + b)) / (ax.coordinate(i + a) - ax.coordinate(i + b));
    acc += w * s[s.geometry.index(i + a)];
  }
  return acc;
}

Outcome criterion1() {
  const double T = af::extinction_time(1.0, 1);
  const double t = 0.5 * T;
  const auto spec = af::parse_soliton("sphere(1)", 1);
  const auto start = std::chrono::steady_clock::now();
  const auto coarse = af::run(exact_config(spec, af::GridGeometry::line(-3.0, 3.0, 257), t));
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const auto fine = af::run(exact_config(spec, af::GridGeometry::line(-3.0, 3.0, 513), t));
  const double r = af::sphere_radius(1.0, 1, t);
  const double e1 = sphere_relative_error(coarse.snapshots.back(), r);
  const double e2 = sphere_relative_error(fine.snapshots.back(), r);
  const bool ok = coarse.status == af::RunStatus::Completed && fine.status == af::RunStatus::Completed &&
                  coarse.snapshots.back().time == t && e1 <= 1e-2 && secs <= 60.0 && e1 / e2 >= 3.0;
  return {ok, fmt("rel err 257 nodes %.3e (<= 1e-2), refinement ratio %.2f (>= 3), runtime %.2f s (<= 60)", e1,
                  e1 / e2, secs)};
}

Outcome criterion2() {
  const double T = af::extinction_time(1.0, 2);
  auto c = exact_config(af::parse_soliton("sphere(1)", 2), af::GridGeometry::square(-2.0, 2.0, 129), 0.8 * T);
  c.snapshot_every = 0.8 * T / 16;
  const auto start = std::chrono::steady_clock::now();
  const auto traj = af::run(c);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const std::size_t centre = c.geometry.index(64, 64);
  double worst = 0.0;
  for (const auto& s : traj.snapshots) {
    const double r = af::sphere_radius(1.0, 2, s.time);
    worst = std::max(worst, std::abs(s[centre] - r) / r);
  }
  const bool ok = traj.status == af::RunStatus::Completed && traj.snapshots.size() == 17 && worst <= 0.02 &&
                  secs <= 600.0;
  return {ok, fmt("max rel err of s(0,t) over %g snapshots %.3e (<= 2e-2), runtime %.1f s (<= 600)",
                  static_cast<double>(traj.snapshots.size()), worst, secs)};
}

Outcome criterion3() {
  const auto spec = af::parse_soliton("paraboloid", 2);
  auto c = exact_config(spec, af::GridGeometry::square(-1.0, 1.0, 33), 1.0);
  c.snapshot_every = 0.05;
  const auto traj = af::run(c);
  double worst = 0.0;
  for (const auto& s : traj.snapshots)
    for (std::size_t k = 0; k < s.size(); ++k) {
      if (s.geometry.is_boundary(k)) continue;
      const auto y = s.geometry.point(k);
      worst = std::max(worst, std::abs(s[k] - (0.5 * (y[0] * y[0] + y[1] * y[1]) - s.time)));
    }
  const bool ok = traj.status == af::RunStatus::Completed && traj.snapshots.back().time == 1.0 && worst <= 1e-3;
  return {ok, fmt("max interior abs err over t in [0,1] %.3e (<= 1e-3)", worst)};
}

Outcome criterion4() {
  const auto spec = af::parse_soliton("calabi", 1);
  const double lo = -1.0, hi = -0.05;
  auto c = exact_config(spec, af::GridGeometry::line(lo, hi, 129), 1.0);
  c.t_start = 0.05;
  c.snapshot_every = 0.05;
  const auto traj = af::run(c);
  const double c1 = af::calabi_constant(1);
  const double q = 0.25 * (hi - lo);
  double worst = 0.0;
  std::size_t compared = 0;
  for (const auto& s : traj.snapshots) {
    if (s.time < 0.2 - 1e-12) continue;
    ++compared;
    for (std::size_t k = 0; k < s.size(); ++k) {
      const double y = s.geometry.point(k)[0];
      if (y < lo + q || y > hi - q) continue;
      const double exact = -2.0 * std::sqrt(c1 * std::pow(s.time, 1.5) * std::abs(y));
      worst = std::max(worst, std::abs(s[k] - exact) / std::abs(exact));
    }
  }
  const bool ok = traj.status == af::RunStatus::Completed && compared >= 16 && worst <= 0.05;
  return {ok, fmt("max rel err on the middle half for t in [0.2,1] %.3e (<= 5e-2), c1 = %.6f", worst, c1)};
}

Outcome criterion5() {
  const double T = af::extinction_time(1.0, 1);
  const double t = 0.3 * T;
  af::Matrix A(2, 2);
  A << 1.0, 0.5, 0.0, 1.0;
  const auto disk = af::parse_soliton("sphere(1)", 1);
  auto sheared = disk;
  sheared.transform = af::AffineMap{A, af::Vector::Zero(2)};
  // flow then shear: s_B(y) = (1 - y/2) s_A(y / (1 - y/2))
  const auto a = af::run(exact_config(disk, af::GridGeometry::line(-3.0, 3.0, 257), t));
  // shear then flow
  const auto b = af::run(exact_config(sheared, af::GridGeometry::line(-1.0, 1.0, 257), t));
  const auto& sa = a.snapshots.back();
  const auto& sb = b.snapshots.back();
  double worst = 0.0;
  for (std::size_t k = 0; k < sb.size(); ++k) {
    const double y = sb.geometry.point(k)[0];
    const double w = 1.0 - 0.5 * y;
    const double pushed = w * interpolate(sa, y / w);
    worst = std::max(worst, std::abs(sb[k] - pushed) / std::abs(pushed));
  }
  const bool ok = a.status == af::RunStatus::Completed && b.status == af::RunStatus::Completed && worst <= 0.02;
  return {ok, fmt("max rel discrepancy at t = 0.3 T: %.3e (<= 2e-2)", worst)};
}

Outcome criterion6() {
  const double T = af::extinction_time(1.0, 1);
  af::FlowConfig c;
  c.geometry = af::GridGeometry::line(-3.0, 3.0, 257);
  c.initial.kind = af::InitialKind::PerturbedSphere;
  c.initial.amplitude = 0.1;
  c.boundary = af::BoundaryMode::exact(af::parse_soliton("sphere(1)", 1));
  c.t_end = 0.6 * T;
  c.snapshot_every = 0.05 * T;
  const auto traj = af::run(c);
  af::CubicDecayOptions opt;
  opt.t_lo = 0.1 * T - 1e-12;
  opt.t_hi = 0.6 * T + 1e-12;
  opt.stride = 4;
  const auto m = af::cubic_decay_monitor(traj, opt);
  const bool ok = traj.status == af::RunStatus::Completed && m.applicable && m.samples.size() == 11 &&
                  m.worst_ratio <= 1.5 && m.excluded == 0;
  return {ok, fmt("n=1, %g sampled times, worst |C|^2 / bound %.3e (<= 1.5), excluded %g",
                  static_cast<double>(m.samples.size()), m.worst_ratio, static_cast<double>(m.excluded))};
}

void criterion6_surface_note() {
  const double T = af::extinction_time(1.0, 2);
  af::FlowConfig c;
  c.geometry = af::GridGeometry::square(-2.0, 2.0, 65);
  c.initial.kind = af::InitialKind::PerturbedSphere;
  c.initial.amplitude = 0.1;
  c.boundary = af::BoundaryMode::exact(af::parse_soliton("sphere(1)", 2));
  c.t_end = 0.6 * T;
  c.snapshot_every = 0.1 * T;
  const auto traj = af::run(c);
  af::CubicDecayOptions opt;
  opt.t_lo = 0.1 * T - 1e-12;
  opt.stride = 4;
  opt.inner_radius = 1.3;
  const auto m = af::cubic_decay_monitor(traj, opt);
  note(fmt("n=2 perturbed sphere on [-2,2]^2, 65^2 nodes, samples with |y^a| <= 1.3: worst |C|^2 / bound %.3e, "
           "first |C|^2 %.3e, last |C|^2 %.3e",
           m.worst_ratio, m.samples.empty() ? NAN : m.samples.front().value,
           m.samples.empty() ? NAN : m.samples.back().value));
}

Outcome criterion7() {
  std::mt19937 rng(20240607);
  std::uniform_real_distribution<double> R(0.4, 0.8), L(1.0, 2.0), U(-1.0, 1.0);
  const auto g = af::GridGeometry::line(-2.0, 2.0, 129);
  double worst = 0.0;
  int pairs = 0, violations = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const double r = R(rng), lambda = L(rng);
    af::Vector center(2);
    do {
      center << 0.5 * r * U(rng), 0.5 * r * U(rng);
    } while (center.norm() >= 0.5 * r);
    const double t_end = 0.9 * af::extinction_time(r, 1);
    auto inner = exact_config(ball(r, 1, center), g, t_end);
    auto outer = exact_config(ball(lambda * r, 1, lambda * center), g, t_end);
    inner.snapshot_every = outer.snapshot_every = t_end / 10;
    const auto a = af::run(inner);
    const auto b = af::run(outer);
    if (a.status != af::RunStatus::Completed || b.status != af::RunStatus::Completed) {
      ++violations;
      continue;
    }
    const auto m = af::containment_monitor(a, b, af::kTolOrder);
    worst = std::max(worst, m.parameter("max_violation"));
    if (!m.pass) ++violations;
    ++pairs;
  }
  return {pairs == 20 && violations == 0,
          fmt("%g pairs, %g with violations > 1e-10, max violation %.3e", pairs, violations, worst)};
}

Outcome criterion8() {
  const std::vector<std::string> oracles{"sphere(1)", "ellipsoid(2,2,1)", "paraboloid", "hyperboloid"};
  const std::vector<std::vector<double>> points{{0.0, 0.0}, {0.2, -0.1}, {-0.3, 0.25}, {0.35, 0.3}};
  double residual = 0.0, csq = 0.0;
  for (const auto& name : oracles) {
    const auto patch = af::make_oracle(name, 2);
    for (const auto& x : points) {
      const auto r = af::check_structure(*patch, x);
      residual = std::max(residual, r.max_residual());
      csq = std::max(csq, r.C_norm_sq);
    }
  }
  return {residual <= 1e-6 && csq <= 1e-10,
          fmt("max structure residual %.3e (<= 1e-6), max |C|^2 %.3e (<= 1e-10)", residual, csq)};
}

Outcome criterion9() {
  const auto rep = af::verify_solitons(100);
  double worst = 0.0;
  for (const auto& c : rep.checks) worst = std::max(worst, c.value);
  return {rep.pass(), fmt("%g catalog checks at 100 samples each, worst residual %.3e (<= 1e-6)",
                          static_cast<double>(rep.checks.size()), worst)};
}

Outcome criterion10() {
  bool ok = true;
  std::string detail;
  for (int n : {1, 2}) {
    const double T = af::extinction_time(1.0, n);
    const auto g = n == 1 ? af::GridGeometry::line(-1.0, 1.0, 33) : af::GridGeometry::square(-1.0, 1.0, 17);
    std::vector<double> times;
    for (int k = 1; k <= 40; ++k) times.push_back(0.6 * T * k / 40.0);
    const auto traj = af::exact_trajectory(af::parse_soliton("sphere(1)", n), g, times);
    const auto m = af::andrews_speed_monitor(traj, 0.5);
    ok = ok && m.applicable && m.pass;
    detail += fmt("n=%g slope %.3f vs exponent %.3f; ", n, m.parameter("slope"), af::andrews_exponent(n));
  }
  return {ok, detail + "tolerance 0.15"};
}

void criterion10_orthant_note() {
  for (int n : {1, 2}) {
    auto spec = af::parse_soliton("calabi", n);
    af::Vector b = af::Vector::Zero(n + 1);
    b[n] = -20.0;
    spec.transform = af::AffineMap{af::Matrix::Identity(n + 1, n + 1), b};
    std::vector<double> times;
    for (int k = 0; k < 40; ++k) times.push_back(1e-3 * std::pow(1.2, k));
    const auto g = n == 1 ? af::GridGeometry::line(-1.0, -0.1, 33) : af::GridGeometry::square(-1.0, -0.1, 17);
    const auto m = af::andrews_speed_monitor(af::exact_trajectory(spec, g, times), 1.0);
    note(fmt("translated orthant expander n=%g: fitted slope %.3f vs exponent %.3f", n, m.parameter("slope"),
             af::andrews_exponent(n)));
  }
}

}  // namespace

int main() {
  report(1, "sphere shrinkage n=1", criterion1);
  report(2, "sphere shrinkage n=2", criterion2);
  report(3, "paraboloid translator n=2", criterion3);
  report(4, "orthant expander n=1", criterion4);
  report(5, "affine equivariance under shear", criterion5);
  report(6, "cubic form decay", criterion6);
  criterion6_surface_note();
  report(7, "maximum principle on nested pairs", criterion7);
  report(8, "structure equations on quadrics", criterion8);
  report(9, "soliton PDE residuals", criterion9);
  report(10, "speed envelope exponent on spheres", criterion10);
  criterion10_orthant_note();
  std::printf("%d of 10 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
