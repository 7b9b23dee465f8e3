#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "affine_flow/io.hpp"

namespace af = affine_flow;
namespace fs = std::filesystem;

namespace {

class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = fs::temp_directory_path() /
            ("affine_flow_io_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

int run_cli(const std::string& args, std::string* out = nullptr) {
  const std::string cmd = std::string(AFFINE_FLOW_CLI) + " " + args;
  std::string captured;
  FILE* pipe = ::popen((cmd + " 2>/dev/null").c_str(), "r");
  if (!pipe) return -1;
  char buf[4096];
  while (std::size_t got = std::fread(buf, 1, sizeof buf, pipe)) captured.append(buf, got);
  const int status = ::pclose(pipe);
  if (out) *out = captured;
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string message_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const af::Error& e) {
    return e.what();
  }
  return "";
}

const char* kMinimal = R"J({"n": 1, "bounds": [-2, 2], "resolution": 33, "initial": "sphere(1)", "t_end": 0.3})J";

}  // namespace

TEST(LoadConfig, MinimalConfigFillsDefaults) {
  const auto c = af::parse_config(kMinimal);
  EXPECT_EQ(c.n(), 1);
  EXPECT_EQ(c.geometry, af::GridGeometry::line(-2.0, 2.0, 33));
  EXPECT_EQ(c.initial.kind, af::InitialKind::Soliton);
  EXPECT_EQ(c.initial.soliton.kind, af::SolitonKind::Sphere);
  EXPECT_EQ(c.boundary.kind, af::BoundaryKind::Fixed);
  EXPECT_EQ(c.t_start, 0.0);
  EXPECT_EQ(c.t_end, 0.3);
  EXPECT_EQ(c.dt_safety, af::kDefaultDtSafety);
  EXPECT_EQ(c.det_floor, af::kDefaultDetFloor);
  EXPECT_FALSE(c.snapshot_every.has_value());
  EXPECT_EQ(c.snapshot_count(), 2u);
  EXPECT_FALSE(c.monitors.cubic_decay);
}

TEST(LoadConfig, NegativeEndTimeNamesField) {
  const std::string msg = message_of([] {
    af::parse_config(R"J({"n": 1, "bounds": [-2, 2], "resolution": 33, "initial": "sphere(1)", "t_end": -1})J");
  });
  EXPECT_NE(msg.find("validation"), std::string::npos);
  EXPECT_NE(msg.find("t_end"), std::string::npos);
}

TEST(LoadConfig, UnknownKeyRejectedByName) {
  const std::string msg = message_of([] {
    af::parse_config(
        R"J({"n": 1, "bounds": [-2, 2], "resolution": 33, "initial": "sphere(1)", "t_end": 0.3, "solverr": 1})J");
  });
  EXPECT_NE(msg.find("solverr"), std::string::npos);
  const std::string nested = message_of([] {
    af::parse_config(R"J({"n": 1, "bounds": [-2, 2], "resolution": 33, "initial": "sphere(1)", "t_end": 0.3,
                         "monitors": {"cubic": true}})J");
  });
  EXPECT_NE(nested.find("monitors.cubic"), std::string::npos);
}

TEST(LoadConfig, SyntaxErrorReportsLine) {
  try {
    af::parse_config("{\n  \"n\": 1,\n  \"bounds\": [-2, 2]\n  \"resolution\": 33\n}");
    FAIL();
  } catch (const af::Error& e) {
    EXPECT_EQ(e.kind(), af::ErrorKind::Parse);
    EXPECT_NE(std::string(e.what()).find("line 4"), std::string::npos) << e.what();
  }
}

TEST(LoadConfig, FieldErrors) {
  const std::vector<std::pair<std::string, std::string>> cases{
      {R"J({"n": 3, "bounds": [-2, 2], "resolution": 33, "initial": "sphere(1)", "t_end": 0.3})J", "'n'"},
      {R"J({"n": 1, "bounds": [-2, 2], "resolution": 3, "initial": "sphere(1)", "t_end": 0.3})J", "resolution"},
      {R"J({"n": 1, "bounds": [-2, 2], "resolution": 33, "initial": "torus", "t_end": 0.3})J", "initial"},
      {R"J({"n": 1, "bounds": [-2, 2], "resolution": 33, "initial": "sphere(1)", "t_end": "x"})J", "t_end"},
      {R"J({"n": 1, "bounds": [-2, 2], "resolution": 33, "initial": "sphere(1)", "t_end": 0.3,
           "boundary": "periodic"})J", "boundary"},
      {R"J({"n": 1, "bounds": [-2, 2], "resolution": 33, "initial": "sphere(1)", "t_end": 0.3,
           "dt_safety": 2})J", "dt_safety"},
      {R"J({"n": 1, "bounds": [-2, 2], "resolution": 33, "t_end": 0.3})J", "initial"},
      {R"J({"n": 1, "bounds": [-2, 2], "resolution": 33, "initial": "sphere(1)", "t_end": 0.3,
           "initial_transform": {"A": [[1, 0], [0]]}})J", "initial_transform.A"},
  };
  for (const auto& [text, field] : cases) {
    const std::string msg = message_of([&] { af::parse_config(text); });
    EXPECT_NE(msg.find(field), std::string::npos) << text << " -> " << msg;
  }
}

TEST(LoadConfig, RoundTrip) {
  const std::vector<std::string> docs{
      kMinimal,
      R"J({"n": 2, "bounds": [[-2, 2], [-1, 1.5]], "resolution": [17, 21], "initial": "perturbed_sphere(1.5, 0.05, 0.8)",
          "boundary": "exact", "t_end": 0.4, "snapshot_every": 0.1, "dt_safety": 0.2,
          "monitors": {"cubic_decay": true, "inner_radius": 1.2, "sample_stride": 3, "andrews_r": 0.4}})J",
      R"J({"n": 1, "bounds": [-1, -0.05], "resolution": 65, "initial": "calabi", "boundary": "exact",
          "t_start": 0.05, "t_end": 1.0, "snapshot_every": 0.0123456789012345678})J",
      R"J({"n": 1, "bounds": [-1, 1], "resolution": 33, "initial": "sphere(0.7)",
          "initial_transform": {"A": [[1, 0.5], [0, 1]], "b": [0.1, -0.2]}, "initial_scale": 1.25,
          "boundary": "exact", "boundary_soliton": "sphere(0.7)",
          "boundary_transform": {"A": [[1, 0.5], [0, 1]], "b": [0.1, -0.2]},
          "boundary_value_scale": 1.25, "boundary_time_scale": 0.7, "t_end": 0.1, "det_floor": 1e-12})J",
      R"J({"n": 1, "bounds": [-1, 1], "resolution": 33, "initial": "grid:/some/where/s.csv", "t_end": 0.1,
          "boundary": "exact", "boundary_soliton": "ellipsoid(-0.5)"})J",
  };
  for (const auto& doc : docs) {
    const auto c = af::parse_config(doc);
    const auto emitted = af::emit_config(c).dump(2);
    const auto back = af::parse_config(emitted);
    EXPECT_TRUE(back == c) << emitted;
    EXPECT_EQ(af::emit_config(back).dump(2), emitted);
  }
}

TEST(LoadConfig, RelativePathsResolveAgainstConfigDirectory) {
  TempDir dir;
  write_file(dir / "pts.txt", "1 0\n-1 0\n0 1\n0 -1\n");
  write_file(dir / "c.json",
             R"J({"n": 1, "bounds": [-0.5, 0.5], "resolution": 9, "initial": "points:pts.txt", "t_end": 0.0})J");
  const auto c = af::load_config((dir / "c.json").string());
  EXPECT_EQ(c.initial.kind, af::InitialKind::Points);
  EXPECT_EQ(fs::path(c.initial.path), (dir / "pts.txt").lexically_normal());
  EXPECT_THROW(af::load_config((dir / "missing.json").string()), af::Error);
}

TEST(SnapshotCsv, HeaderColumnsAndRoundTrip) {
  EXPECT_EQ(af::csv_header(1), "t,y1,s,det_hess,speed");
  EXPECT_EQ(af::csv_header(2), "t,y1,y2,s,det_hess,speed");
  for (const auto& g : {af::GridGeometry::line(-1.0, 1.0, 9), af::GridGeometry::square(-1.0, 1.0, 7)}) {
    auto grid = af::soliton_support_grid(af::parse_soliton("sphere(1)", g.n), g, 0.1);
    const auto ev = af::evaluate_grid(grid);
    std::stringstream ss;
    af::write_snapshot_csv(ss, grid, ev.det, ev.speed);
    std::string line;
    std::getline(ss, line);
    EXPECT_EQ(line, af::csv_header(g.n));
    std::size_t rows = 0;
    while (std::getline(ss, line)) {
      EXPECT_EQ(static_cast<int>(std::count(line.begin(), line.end(), ',')) + 1, 4 + g.n);
      ++rows;
    }
    EXPECT_EQ(rows, g.size());
    ss.clear();
    ss.seekg(0);
    const auto back = af::read_snapshot_csv(ss, g);
    EXPECT_EQ(back.values, grid.values);
    EXPECT_EQ(back.time, grid.time);
  }
}

TEST(SnapshotCsv, SeventeenDigitsRoundTrip) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> U(-1e3, 1e3);
  for (int k = 0; k < 1000; ++k) {
    const double x = U(rng) * std::pow(10.0, static_cast<int>(rng() % 40) - 20);
    EXPECT_EQ(std::stod(af::format_double(x)), x);
  }
  EXPECT_EQ(af::format_double(NAN), "nan");
}

TEST(SnapshotCsv, ReadErrors) {
  const auto g = af::GridGeometry::line(-1.0, 1.0, 5);
  std::stringstream bad_header("t,y,s\n");
  EXPECT_THROW(af::read_snapshot_csv(bad_header, g), af::Error);
  std::stringstream short_file("t,y1,s,det_hess,speed\n0,-1,1,nan,nan\n");
  EXPECT_THROW(af::read_snapshot_csv(short_file, g), af::Error);
  std::stringstream bad_number("t,y1,s,det_hess,speed\n0,-1,abc,nan,nan\n");
  try {
    af::read_snapshot_csv(bad_number, g);
    FAIL();
  } catch (const af::Error& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
}

TEST(CmdFlow, ManifestListsSnapshotsAndIsDeterministic) {
  TempDir dir;
  write_file(dir / "sphere.json",
             R"J({"n": 1, "bounds": [-2, 2], "resolution": 33, "initial": "sphere(1)", "boundary": "exact",
                 "t_end": 0.3, "snapshot_every": 0.07})J");
  const auto a = af::cmd_flow((dir / "sphere.json").string(), (dir / "a").string());
  const auto b = af::cmd_flow((dir / "sphere.json").string(), (dir / "b").string());
  EXPECT_TRUE(a.ok());
  const std::size_t expected = static_cast<std::size_t>(std::ceil(0.3 / 0.07)) + 1;
  std::size_t csvs = 0;
  for (const auto& p : a.artifacts) {
    EXPECT_TRUE(fs::exists(p)) << p;
    if (fs::path(p).extension() == ".csv") ++csvs;
  }
  EXPECT_EQ(csvs, expected);
  EXPECT_EQ(af::read_text((dir / "a" / "summary.json").string()), af::read_text((dir / "b" / "summary.json").string()));
  for (std::size_t j = 0; j < expected; ++j) {
    const std::string name = af::snapshot_file_name(j);
    EXPECT_EQ(af::read_text((dir / "a" / name).string()), af::read_text((dir / "b" / name).string()));
  }
  const auto summary = af::Json::parse(af::read_text((dir / "a" / "summary.json").string()));
  EXPECT_EQ(summary["status"], "completed");
  EXPECT_EQ(summary["times"].size(), expected);
  const auto manifest = af::Json::parse(af::read_text((dir / "a" / "manifest.json").string()));
  EXPECT_EQ(manifest["status"], "completed");
  EXPECT_TRUE(manifest.contains("wall_clock_seconds"));
}

TEST(CmdFlow, CalabiRunHasNoClampEvents) {
  TempDir dir;
  write_file(dir / "calabi.json",
             R"J({"n": 1, "bounds": [-1, -0.05], "resolution": 65, "initial": "calabi", "boundary": "exact",
                 "t_start": 0.05, "t_end": 1.0, "snapshot_every": 0.25})J");
  const auto man = af::cmd_flow((dir / "calabi.json").string(), (dir / "out").string());
  EXPECT_EQ(man.status, af::RunStatus::Completed);
  const auto summary = af::Json::parse(af::read_text((dir / "out" / "summary.json").string()));
  EXPECT_EQ(summary["clamp_count"], 0);
  for (const auto& e : summary["events"]) EXPECT_NE(e["kind"], "clamp");
}

TEST(CmdFlow, RunErrorGivesPartialManifest) {
  TempDir dir;
  // sphere boundary data goes extinct; an unscaled window forces an error path
  write_file(dir / "bad.json",
             R"J({"n": 1, "bounds": [-2, 2], "resolution": 33, "initial": "sphere(1)", "boundary": "exact",
                 "boundary_soliton": "sphere(0.5)", "t_end": 0.5, "snapshot_every": 0.1})J");
  const auto man = af::cmd_flow((dir / "bad.json").string(), (dir / "out").string());
  EXPECT_NE(man.status, af::RunStatus::Completed);
  EXPECT_TRUE(fs::exists(dir / "out" / "manifest.json"));
  EXPECT_FALSE(man.artifacts.empty());
}

TEST(CmdVerify, SuitesAndUnknownName) {
  const auto s = af::cmd_verify("structure");
  EXPECT_TRUE(s.pass());
  EXPECT_GT(s.checks.size(), 10u);
  EXPECT_TRUE(af::cmd_verify("solitons").pass());
  EXPECT_THROW(af::cmd_verify("xyz"), af::Error);
}

TEST(Cli, ExitStatusContract) {
  EXPECT_NE(run_cli("verify xyz"), 0);
  EXPECT_EQ(run_cli("verify structure"), 0);
  std::string out;
  EXPECT_EQ(run_cli("soliton eval 'sphere(1)' --t 0.375 --y 0", &out), 0);
  const auto j = af::Json::parse(out);
  EXPECT_NEAR(j["s"].get<double>(), std::pow(0.5, 0.75), 1e-15);
  EXPECT_EQ(run_cli("geometry check 'sphere(1)' --at 0.1 0.2"), 0);
  EXPECT_NE(run_cli("geometry check 'polynomial(2,0,1; 0,2,-1)' --at 0.1 0.2"), 0);
  EXPECT_NE(run_cli("frobnicate"), 0);
}

TEST(Cli, FlowRunUsesOutputRootEnvironment) {
  TempDir dir;
  write_file(dir / "mini.json", kMinimal);
  EXPECT_EQ(run_cli("flow run " + (dir / "mini.json").string() + " -o " + (dir / "explicit").string()), 0);
  EXPECT_TRUE(fs::exists(dir / "explicit" / "manifest.json"));
  const std::string env = std::string(af::kOutputRootEnv) + "=" + (dir / "root").string();
  const std::string cmd = env + " " + AFFINE_FLOW_CLI + " flow run " + (dir / "mini.json").string() + " >/dev/null";
  EXPECT_EQ(std::system(cmd.c_str()), 0);
  EXPECT_TRUE(fs::exists(dir / "root" / "mini" / "summary.json"));
  write_file(dir / "broken.json", R"J({"n": 1, "t_end": 0.3})J");
  EXPECT_NE(run_cli("flow run " + (dir / "broken.json").string() + " -o " + (dir / "x").string()), 0);
}
