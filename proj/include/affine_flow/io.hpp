#pragma once

// Configuration documents, run artifacts and the verification suites behind
// the command-line tool.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "affine_flow/affine_frame.hpp"
#include "affine_flow/error.hpp"
#include "affine_flow/estimates.hpp"
#include "affine_flow/flow.hpp"
#include "affine_flow/patch.hpp"
#include "affine_flow/snapshot_csv.hpp"
#include "affine_flow/solitons.hpp"

namespace affine_flow {

using Json = nlohmann::ordered_json;

inline constexpr const char* kOutputRootEnv = "AFFINE_FLOW_OUTPUT_ROOT";

// ---------------------------------------------------------------------------
// Equality (for round-trip checks)

inline bool operator==(const AffineMap& a, const AffineMap& b) { return a.A == b.A && a.b == b.b; }

inline bool operator==(const SolitonSpec& a, const SolitonSpec& b) {
  if (a.kind != b.kind || a.n != b.n || a.transform != b.transform) return false;
  if (a.kind == SolitonKind::Sphere && a.r0 != b.r0) return false;
  if (a.kind == SolitonKind::Ellipsoid && a.t0 != b.t0) return false;
  return true;
}

inline bool operator==(const BoundaryMode& a, const BoundaryMode& b) {
  return a.kind == b.kind && a.soliton == b.soliton && a.value_scale == b.value_scale &&
         a.time_scale == b.time_scale;
}

inline bool operator==(const InitialCondition& a, const InitialCondition& b) {
  if (a.kind != b.kind || a.scale != b.scale) return false;
  switch (a.kind) {
    case InitialKind::Soliton: return a.soliton == b.soliton;
    case InitialKind::Points:
    case InitialKind::GridFile: return a.path == b.path;
    case InitialKind::PerturbedSphere:
      return a.r0 == b.r0 && a.amplitude == b.amplitude && a.bump_radius == b.bump_radius;
  }
  return false;
}

inline bool operator==(const MonitorFlags& a, const MonitorFlags& b) {
  return a.cubic_decay == b.cubic_decay && a.andrews_r == b.andrews_r && a.sample_stride == b.sample_stride &&
         a.inner_radius == b.inner_radius;
}

inline bool operator==(const FlowConfig& a, const FlowConfig& b) {
  return a.geometry == b.geometry && a.initial == b.initial && a.boundary == b.boundary && a.t_start == b.t_start &&
         a.t_end == b.t_end && a.dt_safety == b.dt_safety && a.snapshot_every == b.snapshot_every &&
         a.det_floor == b.det_floor && a.monitors == b.monitors;
}

// ---------------------------------------------------------------------------
// Config documents

namespace detail {

inline int line_of(const std::string& text, std::size_t byte) {
  int line = 1;
  for (std::size_t i = 0; i < std::min(byte, text.size()); ++i)
    if (text[i] == '\n') ++line;
  return line;
}

inline Error field_error(const std::string& field, const std::string& what) {
  return Error(ErrorKind::Validation, "config field '" + field + "': " + what);
}

inline double number(const Json& j, const std::string& field) {
  if (!j.is_number()) throw field_error(field, "expected a number");
  return j.get<double>();
}

inline int integer(const Json& j, const std::string& field) {
  if (!j.is_number_integer()) throw field_error(field, "expected an integer");
  return j.get<int>();
}

inline Json transform_to_json(const AffineMap& m) {
  Json A = Json::array();
  for (Eigen::Index r = 0; r < m.A.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < m.A.cols(); ++c) row.push_back(m.A(r, c));
    A.push_back(row);
  }
  Json b = Json::array();
  for (Eigen::Index i = 0; i < m.b.size(); ++i) b.push_back(m.b[i]);
  return Json{{"A", A}, {"b", b}};
}

inline AffineMap transform_from_json(const Json& j, int n, const std::string& field) {
  if (!j.is_object()) throw field_error(field, "expected an object with keys A and b");
  for (const auto& [key, _] : j.items())
    if (key != "A" && key != "b") throw field_error(field + "." + key, "unknown key");
  const int d = n + 1;
  AffineMap m{Matrix::Identity(d, d), Vector::Zero(d)};
  if (j.contains("A")) {
    const auto& A = j["A"];
    if (!A.is_array() || static_cast<int>(A.size()) != d) throw field_error(field + ".A", "expected a square matrix");
    for (int r = 0; r < d; ++r) {
      if (!A[r].is_array() || static_cast<int>(A[r].size()) != d)
        throw field_error(field + ".A", "expected a square matrix");
      for (int c = 0; c < d; ++c) m.A(r, c) = number(A[r][c], field + ".A");
    }
  }
  if (j.contains("b")) {
    const auto& b = j["b"];
    if (!b.is_array() || static_cast<int>(b.size()) != d) throw field_error(field + ".b", "wrong length");
    for (int i = 0; i < d; ++i) m.b[i] = number(b[i], field + ".b");
  }
  return m;
}

inline std::vector<double> call_arguments(const std::string& text, const std::string& field) {
  const auto open = text.find('(');
  const auto close = text.rfind(')');
  if (open == std::string::npos || close == std::string::npos || close < open)
    throw field_error(field, "expected name(arguments)");
  std::vector<double> out;
  std::stringstream ss(text.substr(open + 1, close - open - 1));
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(tok, &used));
    } catch (const std::exception&) {
      throw field_error(field, "bad argument '" + tok + "'");
    }
  }
  return out;
}

inline std::string resolve(const std::string& path, const std::string& base_dir) {
  if (base_dir.empty() || std::filesystem::path(path).is_absolute()) return path;
  return (std::filesystem::path(base_dir) / path).lexically_normal().string();
}

inline std::string format_initial(const InitialCondition& init) {
  switch (init.kind) {
    case InitialKind::Soliton: return format_soliton(init.soliton);
    case InitialKind::Points: return "points:" + init.path;
    case InitialKind::GridFile: return "grid:" + init.path;
    case InitialKind::PerturbedSphere:
      return "perturbed_sphere(" + shortest(init.r0) + "," + shortest(init.amplitude) + "," +
             shortest(init.bump_radius) + ")";
  }
  return "";
}

inline InitialCondition parse_initial(const std::string& text, int n, const std::string& base_dir) {
  InitialCondition init;
  if (text.rfind("points:", 0) == 0) {
    init.kind = InitialKind::Points;
    init.path = resolve(text.substr(7), base_dir);
  } else if (text.rfind("grid:", 0) == 0) {
    init.kind = InitialKind::GridFile;
    init.path = resolve(text.substr(5), base_dir);
  } else if (text.rfind("perturbed_sphere", 0) == 0) {
    init.kind = InitialKind::PerturbedSphere;
    const auto args = call_arguments(text, "initial");
    if (args.size() < 2 || args.size() > 3)
      throw field_error("initial", "perturbed_sphere takes (r0, amplitude[, bump_radius])");
    init.r0 = args[0];
    init.amplitude = args[1];
    if (args.size() == 3) init.bump_radius = args[2];
  } else {
    try {
      init.soliton = parse_soliton(text, n);
    } catch (const Error& e) {
      throw field_error("initial", e.what());
    }
  }
  return init;
}

}  // namespace detail

inline Json emit_config(const FlowConfig& c) {
  Json j;
  j["n"] = c.n();
  if (c.n() == 1) {
    j["bounds"] = {c.geometry.axes[0].lower, c.geometry.axes[0].upper};
    j["resolution"] = c.geometry.axes[0].count;
  } else {
    j["bounds"] = {Json{c.geometry.axes[0].lower, c.geometry.axes[0].upper},
                   Json{c.geometry.axes[1].lower, c.geometry.axes[1].upper}};
    j["resolution"] = {c.geometry.axes[0].count, c.geometry.axes[1].count};
  }
  j["initial"] = detail::format_initial(c.initial);
  if (c.initial.kind == InitialKind::Soliton && c.initial.soliton.transform)
    j["initial_transform"] = detail::transform_to_json(*c.initial.soliton.transform);
  if (c.initial.scale != 1.0) j["initial_scale"] = c.initial.scale;
  j["boundary"] = c.boundary.kind == BoundaryKind::Fixed ? "fixed" : "exact";
  if (c.boundary.kind == BoundaryKind::ExactSoliton && c.boundary.soliton) {
    j["boundary_soliton"] = format_soliton(*c.boundary.soliton);
    if (c.boundary.soliton->transform)
      j["boundary_transform"] = detail::transform_to_json(*c.boundary.soliton->transform);
    if (c.boundary.value_scale != 1.0) j["boundary_value_scale"] = c.boundary.value_scale;
    if (c.boundary.time_scale != 1.0) j["boundary_time_scale"] = c.boundary.time_scale;
  }
  j["t_start"] = c.t_start;
  j["t_end"] = c.t_end;
  j["dt_safety"] = c.dt_safety;
  if (c.snapshot_every)
    j["snapshot_every"] = *c.snapshot_every;
  else
    j["snapshot_every"] = nullptr;
  j["det_floor"] = c.det_floor;
  Json m;
  m["cubic_decay"] = c.monitors.cubic_decay;
  if (c.monitors.andrews_r)
    m["andrews_r"] = *c.monitors.andrews_r;
  else
    m["andrews_r"] = nullptr;
  m["sample_stride"] = c.monitors.sample_stride;
  if (std::isfinite(c.monitors.inner_radius))
    m["inner_radius"] = c.monitors.inner_radius;
  else
    m["inner_radius"] = nullptr;
  j["monitors"] = m;
  return j;
}

/// Strict conversion: unknown keys are rejected by name. Relative file paths
/// in `initial` are resolved against `base_dir`.
inline FlowConfig config_from_json(const Json& j, const std::string& base_dir = "") {
  using detail::field_error;
  using detail::number;
  if (!j.is_object()) throw Error(ErrorKind::Validation, "config must be an object");
  static const std::vector<std::string> known{"n",
                                              "bounds",
                                              "resolution",
                                              "initial",
                                              "initial_transform",
                                              "initial_scale",
                                              "boundary",
                                              "boundary_soliton",
                                              "boundary_transform",
                                              "boundary_value_scale",
                                              "boundary_time_scale",
                                              "t_start",
                                              "t_end",
                                              "dt_safety",
                                              "snapshot_every",
                                              "det_floor",
                                              "monitors"};
  for (const auto& [key, _] : j.items())
    if (std::find(known.begin(), known.end(), key) == known.end())
      throw Error(ErrorKind::Validation, "unknown config key '" + key + "'");
  for (const char* req : {"n", "bounds", "resolution", "initial", "t_end"})
    if (!j.contains(req)) throw field_error(req, "required");

  FlowConfig c;
  const int n = detail::integer(j["n"], "n");
  if (n != 1 && n != 2) throw field_error("n", "must be 1 or 2");

  // bounds: [lo, hi] or [[lo, hi], [lo, hi]]; resolution: N or [N1, N2]
  std::array<std::array<double, 2>, 2> bounds{};
  const auto& jb = j["bounds"];
  if (!jb.is_array() || jb.size() != 2) throw field_error("bounds", "expected [lo, hi] or one [lo, hi] per axis");
  for (int a = 0; a < n; ++a) {
    const Json& pair = jb[0].is_number() ? jb : jb[a];
    if (!pair.is_array() || pair.size() != 2) throw field_error("bounds", "expected [lo, hi]");
    bounds[a] = {number(pair[0], "bounds"), number(pair[1], "bounds")};
  }
  std::array<int, 2> res{};
  const auto& jr = j["resolution"];
  for (int a = 0; a < n; ++a) {
    if (jr.is_number())
      res[a] = detail::integer(jr, "resolution");
    else if (jr.is_array() && static_cast<int>(jr.size()) == n)
      res[a] = detail::integer(jr[a], "resolution");
    else
      throw field_error("resolution", "expected an integer or one per axis");
  }
  c.geometry.n = n;
  for (int a = 0; a < 2; ++a) c.geometry.axes[a] = a < n ? Axis{bounds[a][0], bounds[a][1], res[a]} : Axis{0, 0, 1};
  try {
    c.geometry.validate();
  } catch (const Error& e) {
    throw field_error("resolution/bounds", e.what());
  }

  if (!j["initial"].is_string()) throw field_error("initial", "expected a string");
  c.initial = detail::parse_initial(j["initial"].get<std::string>(), n, base_dir);
  if (j.contains("initial_transform")) {
    if (c.initial.kind != InitialKind::Soliton) throw field_error("initial_transform", "only valid for solitons");
    c.initial.soliton.transform = detail::transform_from_json(j["initial_transform"], n, "initial_transform");
  }
  if (j.contains("initial_scale")) c.initial.scale = number(j["initial_scale"], "initial_scale");

  const std::string boundary = j.contains("boundary") ? (j["boundary"].is_string() ? j["boundary"].get<std::string>()
                                                                                   : std::string("?"))
                                                      : std::string("fixed");
  if (boundary == "fixed") {
    c.boundary = BoundaryMode::fixed();
    for (const char* k : {"boundary_soliton", "boundary_transform", "boundary_value_scale", "boundary_time_scale"})
      if (j.contains(k)) throw field_error(k, "only valid with boundary = exact");
  } else if (boundary == "exact") {
    SolitonSpec spec;
    if (j.contains("boundary_soliton")) {
      if (!j["boundary_soliton"].is_string()) throw field_error("boundary_soliton", "expected a string");
      try {
        spec = parse_soliton(j["boundary_soliton"].get<std::string>(), n);
      } catch (const Error& e) {
        throw field_error("boundary_soliton", e.what());
      }
      if (j.contains("boundary_transform"))
        spec.transform = detail::transform_from_json(j["boundary_transform"], n, "boundary_transform");
    } else if (c.initial.kind == InitialKind::Soliton) {
      if (j.contains("boundary_transform")) throw field_error("boundary_transform", "needs boundary_soliton");
      spec = c.initial.soliton;
    } else if (c.initial.kind == InitialKind::PerturbedSphere) {
      if (j.contains("boundary_transform")) throw field_error("boundary_transform", "needs boundary_soliton");
      spec = parse_soliton("sphere(" + detail::shortest(c.initial.r0) + ")", n);
    } else {
      throw field_error("boundary_soliton", "required for exact boundary with file initial data");
    }
    c.boundary = BoundaryMode::exact(spec);
    if (j.contains("boundary_value_scale"))
      c.boundary.value_scale = number(j["boundary_value_scale"], "boundary_value_scale");
    if (j.contains("boundary_time_scale"))
      c.boundary.time_scale = number(j["boundary_time_scale"], "boundary_time_scale");
  } else {
    throw field_error("boundary", "expected \"fixed\" or \"exact\"");
  }

  if (j.contains("t_start")) c.t_start = number(j["t_start"], "t_start");
  c.t_end = number(j["t_end"], "t_end");
  if (!(c.t_end > 0.0) && !(c.t_end == c.t_start)) throw field_error("t_end", "must be positive");
  if (j.contains("dt_safety")) c.dt_safety = number(j["dt_safety"], "dt_safety");
  if (j.contains("snapshot_every") && !j["snapshot_every"].is_null())
    c.snapshot_every = number(j["snapshot_every"], "snapshot_every");
  if (j.contains("det_floor")) c.det_floor = number(j["det_floor"], "det_floor");

  if (j.contains("monitors")) {
    const auto& m = j["monitors"];
    if (!m.is_object()) throw field_error("monitors", "expected an object");
    for (const auto& [key, val] : m.items()) {
      if (key == "cubic_decay") {
        if (!val.is_boolean()) throw field_error("monitors.cubic_decay", "expected a boolean");
        c.monitors.cubic_decay = val.get<bool>();
      } else if (key == "andrews_r") {
        if (!val.is_null()) c.monitors.andrews_r = number(val, "monitors.andrews_r");
      } else if (key == "sample_stride") {
        c.monitors.sample_stride = detail::integer(val, "monitors.sample_stride");
      } else if (key == "inner_radius") {
        if (!val.is_null()) c.monitors.inner_radius = number(val, "monitors.inner_radius");
      } else {
        throw Error(ErrorKind::Validation, "unknown config key 'monitors." + key + "'");
      }
    }
  }

  try {
    c.validate();
  } catch (const Error& e) {
    throw Error(ErrorKind::Validation, std::string("config: ") + e.what());
  }
  return c;
}

/// Parse a JSON config document; syntax errors report the line.
inline FlowConfig parse_config(const std::string& text, const std::string& base_dir = "") {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorKind::Parse, "config line " + std::to_string(detail::line_of(text, e.byte ? e.byte - 1 : 0)) +
                                      ": " + e.what());
  }
  return config_from_json(j, base_dir);
}

inline std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline FlowConfig load_config(const std::string& path) {
  return parse_config(read_text(path), std::filesystem::path(path).parent_path().string());
}

// ---------------------------------------------------------------------------
// Run artifacts

inline Json monitor_to_json(const MonitorReport& r) {
  Json params = Json::object();
  for (const auto& [k, v] : r.parameters) params[k] = v;
  Json samples = Json::array();
  for (const auto& s : r.samples) samples.push_back({s.t, s.value, s.bound});
  return Json{{"name", r.name},         {"pass", r.pass},       {"applicable", r.applicable},
              {"worst_ratio", r.worst_ratio}, {"slack", r.slack}, {"excluded", r.excluded},
              {"note", r.note},         {"parameters", params}, {"samples", samples}};
}

inline std::string snapshot_file_name(std::size_t j) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "snapshot_%04zu.csv", j);
  return buf;
}

/// Deterministic trajectory summary (no wall-clock data).
inline Json summary_json(const FlowConfig& config, const FlowTrajectory& traj) {
  Json j;
  j["config"] = emit_config(config);
  j["status"] = to_string(traj.status);
  if (traj.error)
    j["error"] = Json{{"kind", std::string(to_string(*traj.error))}, {"message", traj.message}};
  else
    j["error"] = nullptr;
  j["steps"] = traj.steps;
  j["clamp_count"] = traj.clamp_count;
  j["times"] = traj.times();
  Json files = Json::array();
  for (std::size_t k = 0; k < traj.snapshots.size(); ++k) files.push_back(snapshot_file_name(k));
  j["snapshots"] = files;
  Json events = Json::array();
  for (const auto& e : traj.events)
    events.push_back({{"t", e.t}, {"kind", to_string(e.kind)}, {"node", e.node}, {"count", e.count},
                      {"detail", e.detail}});
  j["events"] = events;
  Json monitors = Json::array();
  for (const auto& m : traj.monitor_records) monitors.push_back(monitor_to_json(m));
  j["monitors"] = monitors;
  return j;
}

struct RunManifest {
  Json config;
  std::vector<std::string> artifacts;
  double wall_clock_seconds = 0.0;
  RunStatus status = RunStatus::Completed;
  std::optional<ErrorKind> error;
  bool monitors_pass = true;

  bool ok() const { return status != RunStatus::Error && monitors_pass; }

  Json to_json() const {
    std::string st = to_string(status);
    if (error) st += "(" + std::string(to_string(*error)) + ")";
    return Json{{"config", config},
                {"artifacts", artifacts},
                {"wall_clock_seconds", wall_clock_seconds},
                {"status", st},
                {"monitors_pass", monitors_pass}};
  }
};

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorKind::Io, "write failed: " + path.string());
}

/// Run the configured flow and write snapshot CSVs, summary.json and
/// manifest.json into `out_dir`.
inline RunManifest cmd_flow(const std::string& config_path, const std::string& out_dir) {
  const auto start = std::chrono::steady_clock::now();
  const FlowConfig config = load_config(config_path);
  const auto traj = run_monitored(config);
  std::filesystem::create_directories(out_dir);
  RunManifest man;
  man.config = emit_config(config);
  man.status = traj.status;
  man.error = traj.error;
  const std::filesystem::path dir(out_dir);
  for (std::size_t k = 0; k < traj.snapshots.size(); ++k) {
    const auto path = dir / snapshot_file_name(k);
    write_snapshot_csv(path.string(), traj.snapshots[k], traj.det_fields[k], traj.speed_fields[k]);
    man.artifacts.push_back(path.string());
  }
  const auto summary = dir / "summary.json";
  write_text(summary, summary_json(config, traj).dump(2) + "\n");
  man.artifacts.push_back(summary.string());
  for (const auto& m : traj.monitor_records)
    if (m.applicable && !m.pass) man.monitors_pass = false;
  man.wall_clock_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  write_text(dir / "manifest.json", man.to_json().dump(2) + "\n");
  return man;
}

// ---------------------------------------------------------------------------
// Verification suites

struct CheckResult {
  std::string name;
  double value = 0.0;
  double threshold = 0.0;
  bool pass = false;
};

struct VerifyReport {
  std::string suite;
  std::vector<CheckResult> checks;

  bool pass() const {
    for (const auto& c : checks)
      if (!c.pass) return false;
    return !checks.empty();
  }

  void add(std::string name, double value, double threshold) {
    checks.push_back({std::move(name), value, threshold, std::isfinite(value) && value <= threshold});
  }

  Json to_json() const {
    Json arr = Json::array();
    for (const auto& c : checks)
      arr.push_back({{"name", c.name}, {"value", c.value}, {"threshold", c.threshold}, {"pass", c.pass}});
    return Json{{"suite", suite}, {"pass", pass()}, {"checks", arr}};
  }
};

namespace detail {

inline std::string point_label(std::span<const double> x) {
  std::string s = "(";
  for (std::size_t i = 0; i < x.size(); ++i) s += (i ? "," : "") + shortest(x[i]);
  return s + ")";
}

}  // namespace detail

inline VerifyReport verify_structure() {
  VerifyReport rep{"structure", {}};
  const std::vector<std::string> oracles{"sphere(1)", "ellipsoid(2,2,1)", "paraboloid", "hyperboloid"};
  const std::vector<std::array<double, 2>> points{{0.0, 0.0}, {0.2, -0.1}, {-0.3, 0.25}};
  for (const auto& name : oracles) {
    const auto patch = make_oracle(name, 2);
    for (const auto& x : points) {
      const std::string tag = name + "@" + detail::point_label(x);
      const auto r = check_structure(*patch, x);
      rep.add(tag + ":apolarity", r.apolarity, 1e-6);
      rep.add(tag + ":laplace", r.laplace, 1e-6);
      rep.add(tag + ":codazzi_A", r.codazzi_A, 1e-6);
      rep.add(tag + ":codazzi_C", r.codazzi_C, 1e-6);
      rep.add(tag + ":volume", r.volume, 1e-8);
      rep.add(tag + ":symmetry_C", r.symmetry_C, 1e-10);
      rep.add(tag + ":C_norm_sq", r.C_norm_sq, 1e-10);
    }
  }
  return rep;
}

/// Catalog entries with the sampling box used for residual sweeps.
struct CatalogEntry {
  SolitonSpec spec;
  std::array<double, 2> y_range;
  std::array<double, 2> t_range;
};

inline std::vector<CatalogEntry> soliton_catalog() {
  std::vector<CatalogEntry> out;
  for (int n : {1, 2}) {
    const double T = extinction_time(1.0, n);
    out.push_back({parse_soliton("sphere(1)", n), {-2.0, 2.0}, {0.0, 0.9 * T}});
    out.push_back({parse_soliton("ellipsoid(-1)", n), {-2.0, 2.0}, {0.0, 0.9}});
    out.push_back({parse_soliton("paraboloid", n), {-2.0, 2.0}, {0.0, 2.0}});
    out.push_back({parse_soliton("calabi", n), {-2.0, -0.1}, {0.1, 2.0}});
  }
  return out;
}

inline std::string catalog_label(const SolitonSpec& spec) {
  return format_soliton(spec) + "[n=" + std::to_string(spec.n) + "]";
}

inline VerifyReport verify_solitons(int samples = 100, unsigned seed = 20240601) {
  VerifyReport rep{"solitons", {}};
  std::mt19937 rng(seed);
  for (const auto& entry : soliton_catalog()) {
    std::uniform_real_distribution<double> Y(entry.y_range[0], entry.y_range[1]);
    std::uniform_real_distribution<double> T(entry.t_range[0], entry.t_range[1]);
    double jet = 0.0, fd = 0.0;
    for (int s = 0; s < samples; ++s) {
      std::vector<double> y(entry.spec.n);
      for (double& v : y) v = Y(rng);
      const double t = T(rng);
      jet = std::max(jet, std::abs(soliton_pde_residual(entry.spec, y, t)));
      fd = std::max(fd, std::abs(soliton_pde_residual_fd(entry.spec, y, t)));
    }
    rep.add(catalog_label(entry.spec) + ":residual_analytic", jet, 1e-6);
    rep.add(catalog_label(entry.spec) + ":residual_fd", fd, 1e-6);
  }
  return rep;
}

/// Trajectory of closed-form snapshots, no solver involved.
inline FlowTrajectory exact_trajectory(const SolitonSpec& spec, const GridGeometry& g, const std::vector<double>& times) {
  FlowTrajectory traj;
  for (double t : times) traj.snapshots.push_back(soliton_support_grid(spec, g, t));
  return traj;
}

inline VerifyReport verify_monitors() {
  VerifyReport rep{"monitors", {}};
  {
    FlowConfig c;
    c.geometry = GridGeometry::line(-3.0, 3.0, 129);
    c.initial.kind = InitialKind::PerturbedSphere;
    c.initial.amplitude = 0.1;
    c.boundary = BoundaryMode::exact(parse_soliton("sphere(1)", 1));
    const double T = extinction_time(1.0, 1);
    c.t_end = 0.6 * T;
    c.snapshot_every = 0.1 * T;
    CubicDecayOptions opt;
    opt.t_lo = 0.1 * T;
    opt.stride = 4;
    const auto m = cubic_decay_monitor(run(c), opt);
    rep.add("cubic_decay:worst_ratio", m.applicable ? m.worst_ratio : NAN, 1.0 + opt.slack);
  }
  {
    FlowConfig c;
    c.geometry = GridGeometry::line(-2.0, 2.0, 65);
    c.initial.soliton = parse_soliton("sphere(0.8)", 1);
    c.boundary = BoundaryMode::exact(c.initial.soliton);
    c.t_end = 0.9 * extinction_time(0.8, 1);
    c.snapshot_every = c.t_end / 10;
    FlowConfig d = c;
    d.initial.soliton = parse_soliton("sphere(1)", 1);
    d.boundary = BoundaryMode::exact(d.initial.soliton);
    const auto m = containment_monitor(run(c), run(d));
    rep.add("containment:max_violation", m.parameter("max_violation"), kTolOrder);
  }
  {
    FlowConfig c;
    c.geometry = GridGeometry::line(-2.0, 2.0, 129);
    c.initial.soliton = parse_soliton("sphere(1)", 1);
    c.boundary = BoundaryMode::exact(c.initial.soliton);
    c.t_end = 0.3;
    c.snapshot_every = 0.03;
    const std::array<double, 1> slope{0.0}, beta{1.0};
    const auto m = gh_monitor(run(c), 1.3, slope, beta);
    rep.add("gh_quantity:growth_ratio", m.applicable ? m.worst_ratio : NAN, 1.0);
    rep.add("gh_quantity:interior_max", m.parameter("strictly_interior") == 1.0 ? 0.0 : 1.0, 0.0);
  }
  {
    // expanding orthant solution lifted by a translation: speed ~ t^(-1/4)
    SolitonSpec spec = parse_soliton("calabi", 1);
    spec.transform = AffineMap{Matrix::Identity(2, 2), Vector{{0.0, -20.0}}};
    std::vector<double> times;
    for (int k = 1; k <= 40; ++k) times.push_back(1e-3 * std::pow(1.2, k));
    const auto traj = exact_trajectory(spec, GridGeometry::line(-1.0, -0.1, 33), times);
    const auto m = andrews_speed_monitor(traj, 1.0);
    rep.add("andrews_speed:calabi_slope_error", std::abs(m.parameter("slope") - andrews_exponent(1)), 0.15);
  }
  return rep;
}

inline VerifyReport cmd_verify(const std::string& suite) {
  if (suite == "structure") return verify_structure();
  if (suite == "solitons") return verify_solitons();
  if (suite == "monitors") return verify_monitors();
  throw Error(ErrorKind::InvalidInput, "unknown verify suite '" + suite + "'");
}

}  // namespace affine_flow
