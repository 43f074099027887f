#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "chdbc/runner.hpp"
#include "chdbc/version.hpp"

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw chdbc::IoError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw chdbc::IoError("read failed for " + path);
  return ss.str();
}

void dump_operators(int n_cells, const std::string& dir) {
  namespace fs = std::filesystem;
  const chdbc::Mesh mesh = chdbc::make_unit_square_mesh(n_cells);
  const chdbc::Operators ops = chdbc::assemble_operators(mesh);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw chdbc::IoError("cannot create " + dir);
  auto write = [&dir](const char* name, auto&& writer) {
    const fs::path path = fs::path(dir) / name;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw chdbc::IoError("cannot open " + path.string());
    writer(out);
    if (!out) throw chdbc::IoError("write failed for " + path.string());
  };
  write("A.mtx", [&](std::ostream& o) { chdbc::write_matrix_market(o, ops.A); });
  write("M.mtx", [&](std::ostream& o) { chdbc::write_matrix_market_diagonal(o, ops.M); });
  write("A_gamma.mtx", [&](std::ostream& o) { chdbc::write_matrix_market(o, ops.A_gamma); });
  write("M_gamma.mtx", [&](std::ostream& o) { chdbc::write_matrix_market_diagonal(o, ops.M_gamma); });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cahn-Hilliard solver with dynamic boundary conditions"};
  app.require_subcommand(1);

  std::string config_path;
  std::string output_dir;
  bool vtk = false;

  CLI::App* run = app.add_subcommand("run", "run one simulation from a config file");
  run->add_option("config", config_path, "key = value config file")->required();
  run->add_option("--output-dir", output_dir, "override the config's output_dir");
  run->add_flag("--vtk", vtk, "also write legacy ASCII VTK snapshots");

  CLI::App* sweep = app.add_subcommand("sweep", "run a K-refinement sweep and print the table");
  sweep->add_option("config", config_path, "sweep config file (run keys + K_list)")->required();
  sweep->add_option("--output-dir", output_dir, "override the config's output_dir");

  int n_cells = 1;
  std::string dump_dir = ".";
  CLI::App* dump = app.add_subcommand("assemble-dump", "write the P1 operators in MatrixMarket form");
  dump->add_option("--n-cells", n_cells, "cells per axis")->required();
  dump->add_option("--output-dir", dump_dir, "target directory (default .)");

  CLI::App* version = app.add_subcommand("version", "print name and version");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;  // help/version exits cleanly, bad usage is a config error
  }

  try {
    if (version->parsed()) {
      std::cout << chdbc::project_name << " " << chdbc::project_version << "\n";
      return 0;
    }
    if (run->parsed()) {
      chdbc::RunConfig cfg = chdbc::parse_run_config(read_file(config_path));
      if (!output_dir.empty()) cfg.output_dir = output_dir;
      const chdbc::RunRecord rec = chdbc::run_simulation(cfg, vtk);
      const chdbc::StepStats& last = rec.stats.back();
      std::cout << "completed " << cfg.n_steps << " steps, E_total = " << last.energy.total
                << ", mass_bulk = " << last.mass_bulk << "\n";
      if (!cfg.output_dir.empty()) std::cout << "wrote " << cfg.output_dir << "\n";
      return 0;
    }
    if (sweep->parsed()) {
      chdbc::SweepConfig cfg = chdbc::parse_sweep_config(read_file(config_path));
      if (!output_dir.empty()) cfg.base.output_dir = output_dir;
      const chdbc::SweepResult result = chdbc::run_sweep(cfg);
      std::cout << chdbc::detail::sweep_csv(result.rows, true);
      if (!cfg.base.output_dir.empty()) std::cout << "wrote " << cfg.base.output_dir << "\n";
      return 0;
    }
    if (dump->parsed()) {
      dump_operators(n_cells, dump_dir);
      std::cout << "wrote operators for n_cells = " << n_cells << " to " << dump_dir << "\n";
      return 0;
    }
  } catch (const chdbc::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const chdbc::InverseOutOfRangeError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const chdbc::StepFailedError& e) {
    std::cerr << "solver failure at step " << e.step << ": " << e.what() << "\n";
    return 3;
  } catch (const chdbc::SolverError& e) {
    std::cerr << "solver failure: " << e.what() << "\n";
    return 3;
  } catch (const chdbc::IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
