#ifndef CHDBC_DIAGNOSTICS_HPP
#define CHDBC_DIAGNOSTICS_HPP

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "chdbc/model.hpp"
#include "chdbc/newton.hpp"

namespace chdbc {

// A time series of spatial fields, one snapshot per time step 1..N. Together
// with the step size it carries everything the discrete-in-time norms need.
struct FieldSeries {
  double tau = 0;
  std::vector<Vec> snapshots;
};

// l^p(0,T; L^2) norm with the lumped mass: tau^(1/p) (sum_k (f_k' M f_k)^(p/2))^(1/p).
inline double lp_l2_norm(const FieldSeries& s, int p, const Vec& mass) {
  if (p != 2 && p != 4) throw std::invalid_argument("lp_l2_norm: p must be 2 or 4");
  if (s.tau <= 0) throw std::invalid_argument("lp_l2_norm: tau must be positive");
  double acc = 0;
  for (const Vec& f : s.snapshots) {
    const double m = lumped_inner_product(f, f, mass);
    acc += (p == 2) ? m : m * m;
  }
  return std::pow(s.tau * acc, 1.0 / p);
}

// l^2(0,T; H^1) norm: sqrt(tau sum_k [f_k' M f_k + f_k' A f_k]).
inline double l2_h1_norm(const FieldSeries& s, const Vec& mass, const SpMat& stiffness) {
  if (s.tau <= 0) throw std::invalid_argument("l2_h1_norm: tau must be positive");
  double acc = 0;
  for (const Vec& f : s.snapshots) {
    if (f.size() != stiffness.rows()) throw std::invalid_argument("l2_h1_norm: dimension mismatch");
    acc += lumped_inner_product(f, f, mass) + f.dot(stiffness * f);
  }
  return std::sqrt(s.tau * acc);
}

// Experimental order of convergence between two rows of a refinement table.
inline double eoc(double err1, double err2, double K1, double K2) {
  if (err1 <= 0 || err2 <= 0 || K1 <= 0 || K2 <= 0 || K1 == K2)
    throw std::invalid_argument("eoc: errors and parameters must be positive, K1 != K2");
  return std::log(err1 / err2) / std::log(K1 / K2);
}

struct ErrorTableRow {
  double K = 0;
  double err_l2h1_bulk = 0;
  double err_l4l2_bulk = 0;
  double err_l2_sigma_t = 0;
  double err_l2h1_surf = 0;
  double err_l4l2_surf = 0;
  std::optional<double> eoc_l2h1_bulk, eoc_l4l2_bulk, eoc_l2_sigma_t, eoc_l2h1_surf, eoc_l4l2_surf;
};

struct SurfaceCoupledSeries {
  double K = 0;
  FieldSeries u;  // bulk
  FieldSeries v;  // surface, compressed boundary indexing
};

// Convergence table of Robin runs against a reference trajectory. The
// reference is a (u, v) pair: for a limit reference the caller reconstructs
// v = (u|_Gamma - beta)/alpha; for a Robin reference both fields come straight
// from the run. The defect column measures u - H(v) on the boundary, which for
// the affine transmission is u - (alpha v + beta).
inline std::vector<ErrorTableRow> error_table(const FieldSeries& ref_u, const FieldSeries& ref_v,
                                              const std::vector<SurfaceCoupledSeries>& runs,
                                              const Transmission& H, const Operators& ops,
                                              const Mesh& mesh) {
  const size_t N = ref_u.snapshots.size();
  if (N == 0 || ref_v.snapshots.size() != N)
    throw std::invalid_argument("error_table: reference series empty or inconsistent");
  for (size_t r = 1; r < runs.size(); ++r)
    if (!(runs[r].K < runs[r - 1].K))
      throw std::invalid_argument("error_table: K values must be strictly descending");
  std::vector<ErrorTableRow> rows;
  rows.reserve(runs.size());
  for (const auto& run : runs) {
    if (run.u.snapshots.size() != N || run.v.snapshots.size() != N ||
        run.u.tau != ref_u.tau)
      throw std::invalid_argument("error_table: run series inconsistent with reference");
    FieldSeries du{run.u.tau, {}}, dv{run.u.tau, {}}, defect{run.u.tau, {}};
    du.snapshots.reserve(N);
    dv.snapshots.reserve(N);
    defect.snapshots.reserve(N);
    for (size_t k = 0; k < N; ++k) {
      du.snapshots.push_back(run.u.snapshots[k] - ref_u.snapshots[k]);
      dv.snapshots.push_back(run.v.snapshots[k] - ref_v.snapshots[k]);
      Vec d = restrict_to_boundary(mesh, run.u.snapshots[k]);
      for (int b = 0; b < d.size(); ++b) d[b] -= H.value(run.v.snapshots[k][b]);
      defect.snapshots.push_back(std::move(d));
    }
    ErrorTableRow row;
    row.K = run.K;
    row.err_l2h1_bulk = l2_h1_norm(du, ops.M, ops.A);
    row.err_l4l2_bulk = lp_l2_norm(du, 4, ops.M);
    row.err_l2_sigma_t = lp_l2_norm(defect, 2, ops.M_gamma);
    row.err_l2h1_surf = l2_h1_norm(dv, ops.M_gamma, ops.A_gamma);
    row.err_l4l2_surf = lp_l2_norm(dv, 4, ops.M_gamma);
    if (!rows.empty()) {
      const ErrorTableRow& prev = rows.back();
      row.eoc_l2h1_bulk = eoc(prev.err_l2h1_bulk, row.err_l2h1_bulk, prev.K, row.K);
      row.eoc_l4l2_bulk = eoc(prev.err_l4l2_bulk, row.err_l4l2_bulk, prev.K, row.K);
      row.eoc_l2_sigma_t = eoc(prev.err_l2_sigma_t, row.err_l2_sigma_t, prev.K, row.K);
      row.eoc_l2h1_surf = eoc(prev.err_l2h1_surf, row.err_l2h1_surf, prev.K, row.K);
      row.eoc_l4l2_surf = eoc(prev.err_l4l2_surf, row.err_l4l2_surf, prev.K, row.K);
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

// Solves the lumped Neumann problem A theta = M phi subject to the discrete
// mean-zero constraint sum_i M_ii theta_i = 0 via one bordered (Lagrange)
// system; phi must itself have lumped mean zero or the Neumann problem is
// unsolvable.
inline Vec solve_neumann(const Vec& phi, const Vec& mass, const SpMat& stiffness) {
  const Eigen::Index n = phi.size();
  if (mass.size() != n || stiffness.rows() != n || stiffness.cols() != n)
    throw std::invalid_argument("solve_neumann: dimension mismatch");
  const double mean = mass.dot(phi);
  const double norm = std::sqrt(lumped_inner_product(phi, phi, mass));
  if (std::abs(mean) > 1e-10 * norm)
    throw MeanNotZeroError("solve_neumann: lumped mean " + std::to_string(mean) +
                           " is not zero relative to the field norm");
  std::vector<Triplet> trip;
  trip.reserve(stiffness.nonZeros() + 2 * n);
  for (int k = 0; k < stiffness.outerSize(); ++k)
    for (SpMat::InnerIterator it(stiffness, k); it; ++it)
      trip.emplace_back(it.row(), it.col(), it.value());
  for (Eigen::Index i = 0; i < n; ++i) {
    trip.emplace_back(i, n, mass[i]);
    trip.emplace_back(n, i, mass[i]);
  }
  SpMat B(n + 1, n + 1);
  B.setFromTriplets(trip.begin(), trip.end());
  Eigen::SparseLU<SpMat> lu(B);
  if (lu.info() != Eigen::Success)
    throw std::runtime_error("solve_neumann: bordered system factorization failed");
  Vec rhs(n + 1);
  rhs.head(n) = mass.cwiseProduct(phi);
  rhs[n] = 0;
  const Vec sol = lu.solve(rhs);
  return sol.head(n);
}

// Discrete H^1-dual (Neumann) norm: sqrt(theta' A theta) with A theta = M phi.
inline double neumann_dual_norm(const Vec& phi, const Vec& mass, const SpMat& stiffness) {
  const Vec theta = solve_neumann(phi, mass, stiffness);
  return std::sqrt(theta.dot(stiffness * theta));
}

// Dual norm of a bulk/surface pair, the natural norm of the coupled flow.
inline double h0dual_norm(const Vec& phi_bulk, const Vec& phi_surf, const Operators& ops) {
  const double b = neumann_dual_norm(phi_bulk, ops.M, ops.A);
  const double s = neumann_dual_norm(phi_surf, ops.M_gamma, ops.A_gamma);
  return std::sqrt(b * b + s * s);
}

}  // namespace chdbc

#endif
