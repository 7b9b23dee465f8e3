#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "affine_flow/io.hpp"

namespace af = affine_flow;

namespace {

std::string default_output_dir(const std::string& config_path) {
  const char* root = std::getenv(af::kOutputRootEnv);
  const std::filesystem::path base = root && *root ? root : "runs";
  return (base / std::filesystem::path(config_path).stem()).string();
}

int flow_run(const std::string& config, std::string out) {
  if (out.empty()) out = default_output_dir(config);
  const auto man = af::cmd_flow(config, out);
  std::cout << man.to_json().dump(2) << '\n';
  return man.ok() ? 0 : 1;
}

int soliton_eval(const std::string& name, int n, double t, const std::vector<double>& y) {
  const auto spec = af::parse_soliton(name, n);
  if (static_cast<int>(y.size()) != n)
    throw af::Error(af::ErrorKind::InvalidInput, "--y needs exactly " + std::to_string(n) + " coordinates");
  af::Json out{{"soliton", af::format_soliton(spec)},
               {"n", n},
               {"t", t},
               {"y", y},
               {"s", af::soliton_slice_support(spec, y, t)},
               {"pde_residual", af::soliton_pde_residual(spec, y, t)}};
  std::cout << out.dump(2) << '\n';
  return 0;
}

int geometry_check(const std::string& oracle, const std::vector<double>& x) {
  const auto patch = af::make_oracle(oracle, static_cast<int>(x.size()));
  const bool fd = oracle.find("[fd") != std::string::npos;
  const auto r = af::check_structure(*patch, x);
  const double c_limit = fd ? 1e-4 : 1e-10;
  const bool pass = fd ? r.C_norm_sq <= c_limit : r.max_residual() <= 1e-6 && r.symmetry_C <= 1e-10;
  af::Json out{{"oracle", oracle},
               {"at", x},
               {"mode", fd ? "finite-difference" : "analytic"},
               {"apolarity", r.apolarity},
               {"laplace", r.laplace},
               {"codazzi_A", r.codazzi_A},
               {"codazzi_C", r.codazzi_C},
               {"volume", r.volume},
               {"symmetry_C", r.symmetry_C},
               {"symmetry_A", r.symmetry_A},
               {"metric", r.metric},
               {"equiaffine", r.equiaffine},
               {"C_norm_sq", r.C_norm_sq},
               {"pass", pass}};
  std::cout << out.dump(2) << '\n';
  return pass ? 0 : 1;
}

int verify(const std::string& suite) {
  const auto rep = af::cmd_verify(suite);
  std::cout << rep.to_json().dump(2) << '\n';
  return rep.pass() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Affine normal flow of convex curves and surfaces"};
  app.require_subcommand(1);

  auto* flow = app.add_subcommand("flow", "Solver runs");
  flow->require_subcommand(1);
  auto* flow_run_cmd = flow->add_subcommand("run", "Run a flow config and write snapshots");
  std::string config, out;
  flow_run_cmd->add_option("config", config, "Config file (JSON)")->required()->check(CLI::ExistingFile);
  flow_run_cmd->add_option("-o,--output", out, "Output directory");

  auto* soliton = app.add_subcommand("soliton", "Closed-form solutions");
  soliton->require_subcommand(1);
  auto* eval = soliton->add_subcommand("eval", "Evaluate a catalog soliton");
  std::string name;
  int n = 1;
  double t = 0.0;
  std::vector<double> y;
  eval->add_option("name", name, "sphere(r0) | ellipsoid(t0) | paraboloid | calabi")->required();
  eval->add_option("--t", t, "Flow time")->required();
  eval->add_option("--y", y, "Slice coordinates")->required();
  eval->add_option("--n", n, "Dimension")->check(CLI::Range(1, 2));

  auto* geometry = app.add_subcommand("geometry", "Affine structure of oracle patches");
  geometry->require_subcommand(1);
  auto* check = geometry->add_subcommand("check", "Structure-equation residuals at a point");
  std::string oracle;
  std::vector<double> at;
  check->add_option("oracle", oracle, "Oracle name, optionally suffixed [fd]")->required();
  check->add_option("--at", at, "Parameter point")->required();

  auto* verify_cmd = app.add_subcommand("verify", "Built-in verification suites");
  std::string suite;
  verify_cmd->add_option("suite", suite, "structure | solitons | monitors")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (flow_run_cmd->parsed()) return flow_run(config, out);
    if (eval->parsed()) {
      if (!eval->count("--n")) n = static_cast<int>(y.size());
      return soliton_eval(name, n, t, y);
    }
    if (check->parsed()) return geometry_check(oracle, at);
    if (verify_cmd->parsed()) return verify(suite);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 2;
}
