#ifndef CHDBC_RUNNER_HPP
#define CHDBC_RUNNER_HPP

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "chdbc/config.hpp"
#include "chdbc/diagnostics.hpp"
#include "chdbc/stepper.hpp"

namespace chdbc {

inline void validate_config(const RunConfig& c) { detail::validate_run_config(c); }

// Nodal interpolants of the built-in initial data. The random datum draws one
// value per node in node-id order from a fixed 64-bit generator; the mapping
// to [lo, hi) uses the top 53 bits directly so the stream is reproducible for
// a given seed within this code base.
inline Vec make_initial_bulk(const InitialDataSpec& d, const Mesh& mesh) {
  const int n = mesh.n_nodes();
  Vec u(n);
  switch (d.kind) {
    case InitialKind::step_x:
      for (int i = 0; i < n; ++i) u[i] = mesh.nodes[i].x > 0.5 ? 1.0 : -1.0;
      break;
    case InitialKind::sine_product: {
      const double pi = std::acos(-1.0);
      for (int i = 0; i < n; ++i)
        u[i] = std::sin(4.0 * pi * mesh.nodes[i].x) * std::cos(4.0 * pi * mesh.nodes[i].y);
      break;
    }
    case InitialKind::uniform_random: {
      std::mt19937_64 eng(d.seed);
      for (int i = 0; i < n; ++i)
        u[i] = d.lo + (d.hi - d.lo) * ((eng() >> 11) * 0x1.0p-53);
      break;
    }
  }
  return u;
}

struct StepStats {
  int step = 0;
  double time = 0;
  EnergyParts energy;
  double mass_bulk = 0;
  double mass_surf = 0;
  int newton_iters = 0;
  double residual_inf = 0;
};

struct RunRecord {
  RunConfig config;
  std::vector<StepStats> stats;  // steps 0..N
  Vec u0, v0;                    // v0 only for the Robin model
  FieldSeries u_series;          // steps 1..N
  FieldSeries v_series;          // steps 1..N, Robin only
};

namespace detail {

inline std::string csv_num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.16e", x);
  return buf;
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << content;
  if (!out) throw IoError("write failed for " + path.string());
}

inline std::string step_csv(const RunRecord& rec) {
  std::string s =
      "step,time,E_bulk_grad,E_bulk_pot,E_surf_grad,E_surf_pot,E_penalty,E_total,"
      "mass_bulk,mass_surf,newton_iters,residual_inf\n";
  for (const StepStats& st : rec.stats) {
    s += std::to_string(st.step);
    s += ',' + csv_num(st.time);
    s += ',' + csv_num(st.energy.bulk_grad);
    s += ',' + csv_num(st.energy.bulk_pot);
    s += ',' + csv_num(st.energy.surf_grad);
    s += ',' + csv_num(st.energy.surf_pot);
    s += ',' + csv_num(st.energy.penalty);
    s += ',' + csv_num(st.energy.total);
    s += ',' + csv_num(st.mass_bulk);
    s += ',' + csv_num(st.mass_surf);
    s += ',' + std::to_string(st.newton_iters);
    s += ',' + csv_num(st.residual_inf);
    s += '\n';
  }
  return s;
}

inline std::string bulk_snapshot_csv(const Mesh& mesh, const Vec& u) {
  std::string s = "x,y,u\n";
  for (int i = 0; i < mesh.n_nodes(); ++i)
    s += csv_num(mesh.nodes[i].x) + ',' + csv_num(mesh.nodes[i].y) + ',' + csv_num(u[i]) + '\n';
  return s;
}

inline std::string surface_snapshot_csv(const Mesh& mesh, const Vec& v) {
  std::string s = "x,y,v\n";
  for (int b = 0; b < mesh.n_bnd(); ++b) {
    const Node& p = mesh.nodes[mesh.boundary_nodes[b]];
    s += csv_num(p.x) + ',' + csv_num(p.y) + ',' + csv_num(v[b]) + '\n';
  }
  return s;
}

inline std::string bulk_vtk(const Mesh& mesh, const Vec& u) {
  std::string s = "# vtk DataFile Version 3.0\nbulk order parameter\nASCII\n";
  s += "DATASET UNSTRUCTURED_GRID\n";
  s += "POINTS " + std::to_string(mesh.n_nodes()) + " double\n";
  for (const Node& p : mesh.nodes)
    s += csv_num(p.x) + ' ' + csv_num(p.y) + " 0\n";
  const size_t m = mesh.tris.size();
  s += "CELLS " + std::to_string(m) + ' ' + std::to_string(4 * m) + '\n';
  for (const Tri& t : mesh.tris)
    s += "3 " + std::to_string(t.v[0]) + ' ' + std::to_string(t.v[1]) + ' ' +
         std::to_string(t.v[2]) + '\n';
  s += "CELL_TYPES " + std::to_string(m) + '\n';
  for (size_t k = 0; k < m; ++k) s += "5\n";
  s += "POINT_DATA " + std::to_string(mesh.n_nodes()) + "\nSCALARS u double 1\nLOOKUP_TABLE default\n";
  for (int i = 0; i < mesh.n_nodes(); ++i) s += csv_num(u[i]) + '\n';
  return s;
}

inline std::string snapshot_name(const char* field, int step, const char* ext) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s_%06d.%s", field, step, ext);
  return buf;
}

// Shared trajectory driver; mesh and operators are built once by the caller so
// sweeps can reuse them across runs.
inline RunRecord run_on(const RunConfig& c, const Mesh& mesh, const Operators& ops,
                        bool write_vtk) {
  validate_run_config(c);
  const ModelParams params = make_model_params(c);
  RunRecord rec;
  rec.config = c;
  rec.u_series.tau = c.tau;
  rec.v_series.tau = c.tau;
  rec.u0 = make_initial_bulk(c.initial_data, mesh);

  const int nb = mesh.n_bnd();
  auto surface_mass = [&](const Vec& w) { return ops.M_gamma.dot(w); };
  auto bulk_mass = [&](const Vec& u) { return ops.M.dot(u); };

  auto record = [&](int step, const EnergyParts& e, double mb, double ms, int iters, double resid) {
    StepStats st;
    st.step = step;
    st.time = step * c.tau;
    st.energy = e;
    st.mass_bulk = mb;
    st.mass_surf = ms;
    st.newton_iters = iters;
    st.residual_inf = resid;
    rec.stats.push_back(st);
  };

  if (c.model == ModelKind::robin) {
    rec.v0.resize(nb);
    const Vec trace = restrict_to_boundary(mesh, rec.u0);
    for (int b = 0; b < nb; ++b) rec.v0[b] = params.H.inverse_on_I(trace[b]);
    RobinState state{rec.u0, rec.v0, Vec::Zero(mesh.n_nodes()), Vec::Zero(nb)};
    record(0, energy_robin(state.U, state.V, params, ops, mesh), bulk_mass(state.U),
           surface_mass(state.V), 0, 0.0);
    RobinStepper stepper(mesh, ops, params);
    for (int k = 1; k <= c.n_steps; ++k) {
      try {
        state = stepper.step(state);
      } catch (const StepFailedError&) {
        throw;
      } catch (const SolverError& e) {
        throw StepFailedError(k, e.what());
      }
      record(k, energy_robin(state.U, state.V, params, ops, mesh), bulk_mass(state.U),
             surface_mass(state.V), stepper.last_newton().iterations,
             stepper.last_newton().residual_norm);
      rec.u_series.snapshots.push_back(state.U);
      rec.v_series.snapshots.push_back(state.V);
    }
  } else {
    LimitState state{rec.u0, Vec::Zero(mesh.n_nodes()), Vec::Zero(nb)};
    record(0, energy_limit(state.U, params, ops, mesh), bulk_mass(state.U),
           surface_mass(restrict_to_boundary(mesh, state.U)), 0, 0.0);
    LimitStepper stepper(mesh, ops, params);
    for (int k = 1; k <= c.n_steps; ++k) {
      try {
        state = stepper.step(state);
      } catch (const StepFailedError&) {
        throw;
      } catch (const SolverError& e) {
        throw StepFailedError(k, e.what());
      }
      record(k, energy_limit(state.U, params, ops, mesh), bulk_mass(state.U),
             surface_mass(restrict_to_boundary(mesh, state.U)), stepper.last_newton().iterations,
             stepper.last_newton().residual_norm);
      rec.u_series.snapshots.push_back(state.U);
    }
  }

  if (!c.output_dir.empty()) {
    namespace fs = std::filesystem;
    const fs::path dir(c.output_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory " + dir.string());
    write_file(dir / "steps.csv", step_csv(rec));
    if (c.snapshot_every > 0) {
      auto field_at = [&](int k) -> const Vec& {
        return k == 0 ? rec.u0 : rec.u_series.snapshots[k - 1];
      };
      for (int k = 0; k <= c.n_steps; k += c.snapshot_every) {
        write_file(dir / snapshot_name("u", k, "csv"), bulk_snapshot_csv(mesh, field_at(k)));
        if (write_vtk) write_file(dir / snapshot_name("u", k, "vtk"), bulk_vtk(mesh, field_at(k)));
        if (c.model == ModelKind::robin) {
          const Vec& v = k == 0 ? rec.v0 : rec.v_series.snapshots[k - 1];
          write_file(dir / snapshot_name("v", k, "csv"), surface_snapshot_csv(mesh, v));
        }
      }
    }
  }
  return rec;
}

}  // namespace detail

inline RunRecord run_simulation(const RunConfig& c, bool write_vtk = false) {
  const Mesh mesh = make_unit_square_mesh(c.n_cells);
  const Operators ops = assemble_operators(mesh);
  return detail::run_on(c, mesh, ops, write_vtk);
}

struct SweepResult {
  std::vector<ErrorTableRow> rows;
};

namespace detail {

inline std::string sweep_csv(const std::vector<ErrorTableRow>& rows, bool display) {
  auto num = [display](double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, display ? "%.2e" : "%.16e", x);
    return std::string(buf);
  };
  auto opt = [&](const std::optional<double>& x) { return x ? num(*x) : std::string(); };
  std::string s =
      "K,err_L2H1_bulk,eoc,err_L4L2_bulk,eoc,err_L2SigmaT,eoc,err_L2H1_surf,eoc,err_L4L2_surf,eoc\n";
  for (const ErrorTableRow& r : rows) {
    s += num(r.K);
    s += ',' + num(r.err_l2h1_bulk) + ',' + opt(r.eoc_l2h1_bulk);
    s += ',' + num(r.err_l4l2_bulk) + ',' + opt(r.eoc_l4l2_bulk);
    s += ',' + num(r.err_l2_sigma_t) + ',' + opt(r.eoc_l2_sigma_t);
    s += ',' + num(r.err_l2h1_surf) + ',' + opt(r.eoc_l2h1_surf);
    s += ',' + num(r.err_l4l2_surf) + ',' + opt(r.eoc_l4l2_surf);
    s += '\n';
  }
  return s;
}

}  // namespace detail

inline SweepResult run_sweep(const SweepConfig& s) {
  const Mesh mesh = make_unit_square_mesh(s.base.n_cells);
  const Operators ops = assemble_operators(mesh);

  RunConfig inner = s.base;
  inner.output_dir.clear();
  inner.snapshot_every = 0;

  FieldSeries ref_u, ref_v;
  if (s.reference_is_limit) {
    RunConfig ref = inner;
    ref.model = ModelKind::limit;
    const RunRecord rec = detail::run_on(ref, mesh, ops, false);
    ref_u = rec.u_series;
    ref_v.tau = rec.u_series.tau;
    for (const Vec& u : rec.u_series.snapshots)
      ref_v.snapshots.push_back((restrict_to_boundary(mesh, u).array() - s.base.beta) /
                                s.base.alpha);
  } else {
    RunConfig ref = inner;
    ref.K = s.reference_K;
    const RunRecord rec = detail::run_on(ref, mesh, ops, false);
    ref_u = rec.u_series;
    ref_v = rec.v_series;
  }

  std::vector<SurfaceCoupledSeries> runs;
  runs.reserve(s.K_list.size());
  for (double K : s.K_list) {
    RunConfig rc = inner;
    rc.K = K;
    RunRecord rec = detail::run_on(rc, mesh, ops, false);
    runs.push_back({K, std::move(rec.u_series), std::move(rec.v_series)});
  }

  const Transmission H = transmission_by_label(s.base.transmission, s.base.alpha, s.base.beta);
  SweepResult result{error_table(ref_u, ref_v, runs, H, ops, mesh)};

  if (!s.base.output_dir.empty()) {
    namespace fs = std::filesystem;
    const fs::path dir(s.base.output_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory " + dir.string());
    detail::write_file(dir / "sweep.csv", detail::sweep_csv(result.rows, false));
    detail::write_file(dir / "sweep_display.csv", detail::sweep_csv(result.rows, true));
  }
  return result;
}

}  // namespace chdbc

#endif
