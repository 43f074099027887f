#ifndef CHDBC_STEPPER_HPP
#define CHDBC_STEPPER_HPP

#include <utility>
#include <vector>

#include "chdbc/model.hpp"
#include "chdbc/newton.hpp"

namespace chdbc {

// One fully discrete state of the Robin system: bulk order parameter U,
// surface order parameter V, chemical potentials Xi (bulk) and Phi (surface).
// Surface fields use compressed boundary indexing.
struct RobinState {
  Vec U, V, Xi, Phi;
};

// The limit system carries no separate surface order parameter: the trace of U
// plays that role through u = alpha v + beta.
struct LimitState {
  Vec U, Xi, Phi;
};

namespace detail {

inline Vec pack(const RobinState& s) {
  Vec x(s.U.size() + s.V.size() + s.Xi.size() + s.Phi.size());
  x << s.U, s.V, s.Xi, s.Phi;
  return x;
}

inline RobinState unpack_robin(const Vec& x, int n, int nb) {
  return {x.segment(0, n), x.segment(n, nb), x.segment(n + nb, n), x.segment(2 * n + nb, nb)};
}

inline Vec pack(const LimitState& s) {
  Vec x(s.U.size() + s.Xi.size() + s.Phi.size());
  x << s.U, s.Xi, s.Phi;
  return x;
}

inline LimitState unpack_limit(const Vec& x, int n, int nb) {
  return {x.segment(0, n), x.segment(n, n), x.segment(2 * n, nb)};
}

}  // namespace detail

// Residual of the implicit Euler step for the Robin system, stacked as
//   (i)   M (U - U_prev) + tau A Xi
//   (ii)  Mg (V - V_prev) + tau Ag Phi
//   (iii) eps A U + eps^-1 F - M Xi + K^-1 Mg (U|_Gamma - H(V))   [trace rows]
//   (iv)  kappa delta Ag V + delta^-1 G - Mg Phi + K^-1 J
// The penalty contributions are evaluated difference-first: at small K the two
// stacked K^-1 terms are individually huge and cancel, so forming
// K^-1 Mg_bb (U_i - H(V_b)) directly is what keeps the converged residual at
// the 1e-11 tolerance.
inline Vec robin_residual(const RobinState& next, const RobinState& prev, const ModelParams& p,
                          const Operators& ops, const Mesh& mesh) {
  const int n = mesh.n_nodes();
  const int nb = mesh.n_bnd();
  if (next.U.size() != n || next.V.size() != nb || next.Xi.size() != n || next.Phi.size() != nb ||
      prev.U.size() != n || prev.V.size() != nb)
    throw std::invalid_argument("robin_residual: dimension mismatch");
  const NonlinearTerms t = eval_nonlinearities(next.U, next.V, p, ops, mesh);
  Vec r(2 * n + 2 * nb);
  r.segment(0, n) = ops.M.cwiseProduct(next.U - prev.U) + p.tau * (ops.A * next.Xi);
  r.segment(n, nb) = ops.M_gamma.cwiseProduct(next.V - prev.V) + p.tau * (ops.A_gamma * next.Phi);
  Vec blk = p.eps * (ops.A * next.U) + t.F / p.eps - ops.M.cwiseProduct(next.Xi);
  for (int b = 0; b < nb; ++b) {
    const int i = mesh.boundary_nodes[b];
    blk[i] += ops.M_gamma[b] * (next.U[i] - p.H.value(next.V[b])) / p.K;
  }
  r.segment(n + nb, n) = blk;
  r.segment(2 * n + nb, nb) = p.kappa * p.delta * (ops.A_gamma * next.V) + t.G / p.delta -
                              ops.M_gamma.cwiseProduct(next.Phi) + t.J / p.K;
  return r;
}

// Jacobian of robin_residual in the unknowns (U, V, Xi, Phi). Every structural
// entry is inserted even when its value is currently zero, so the sparsity
// pattern never changes between calls.
inline SpMat robin_jacobian(const RobinState& s, const ModelParams& p, const Operators& ops,
                            const Mesh& mesh) {
  const int n = mesh.n_nodes();
  const int nb = mesh.n_bnd();
  const int off_v = n, off_xi = n + nb, off_phi = 2 * n + nb;
  std::vector<Triplet> trip;
  trip.reserve(4 * ops.A.nonZeros() + 8 * nb + 2 * n);

  for (int i = 0; i < n; ++i) trip.emplace_back(i, i, ops.M[i]);                     // (i) wrt U
  for (int k = 0; k < ops.A.outerSize(); ++k)
    for (SpMat::InnerIterator it(ops.A, k); it; ++it) {
      trip.emplace_back(it.row(), off_xi + it.col(), p.tau * it.value());            // (i) wrt Xi
      trip.emplace_back(off_xi + it.row(), it.col(), p.eps * it.value());            // (iii) wrt U
    }
  for (int b = 0; b < nb; ++b) trip.emplace_back(off_v + b, off_v + b, ops.M_gamma[b]);  // (ii) wrt V
  for (int k = 0; k < ops.A_gamma.outerSize(); ++k)
    for (SpMat::InnerIterator it(ops.A_gamma, k); it; ++it) {
      trip.emplace_back(off_v + it.row(), off_phi + it.col(), p.tau * it.value());   // (ii) wrt Phi
      trip.emplace_back(off_phi + it.row(), off_v + it.col(),
                        p.kappa * p.delta * it.value());                             // (iv) wrt V
    }
  for (int i = 0; i < n; ++i) {
    trip.emplace_back(off_xi + i, i, ops.M[i] * p.F.deriv2(s.U[i]) / p.eps);         // (iii) wrt U
    trip.emplace_back(off_xi + i, off_xi + i, -ops.M[i]);                            // (iii) wrt Xi
  }
  for (int b = 0; b < nb; ++b) {
    const int i = mesh.boundary_nodes[b];
    const double mg = ops.M_gamma[b];
    const double v = s.V[b];
    const double h = p.H.value(v), h1 = p.H.deriv1(v), h2 = p.H.deriv2(v);
    trip.emplace_back(off_xi + i, i, mg / p.K);                                      // (iii) penalty wrt U
    trip.emplace_back(off_xi + i, off_v + b, -mg * h1 / p.K);                        // (iii) penalty wrt V
    trip.emplace_back(off_phi + b, i, -mg * h1 / p.K);                               // (iv) J wrt U
    trip.emplace_back(off_phi + b, off_v + b,
                      mg * p.G.deriv2(v) / p.delta +
                          mg * (h2 * (h - s.U[i]) + h1 * h1) / p.K);                 // (iv) wrt V
    trip.emplace_back(off_phi + b, off_phi + b, -mg);                                // (iv) wrt Phi
  }
  SpMat J(2 * n + 2 * nb, 2 * n + 2 * nb);
  J.setFromTriplets(trip.begin(), trip.end());
  return J;
}

// Residual of the implicit Euler step for the limit system, stacked as
//   (i)   M (U - U_prev) + tau A Xi
//   (ii)  Mg (U - U_prev)|_Gamma + tau Ag Phi
//   (iii) eps A U + (kappa delta / alpha^2) Ag U|_Gamma + eps^-1 F - M Xi
//         + (alpha delta)^-1 Gt - alpha^-2 Mg Phi                 [trace rows]
inline Vec limit_residual(const LimitState& next, const LimitState& prev, const ModelParams& p,
                          const Operators& ops, const Mesh& mesh) {
  const int n = mesh.n_nodes();
  const int nb = mesh.n_bnd();
  if (next.U.size() != n || next.Xi.size() != n || next.Phi.size() != nb || prev.U.size() != n)
    throw std::invalid_argument("limit_residual: dimension mismatch");
  Vec r(2 * n + nb);
  r.segment(0, n) = ops.M.cwiseProduct(next.U - prev.U) + p.tau * (ops.A * next.Xi);
  const Vec w = restrict_to_boundary(mesh, next.U);
  const Vec w_prev = restrict_to_boundary(mesh, prev.U);
  r.segment(n, nb) = ops.M_gamma.cwiseProduct(w - w_prev) + p.tau * (ops.A_gamma * next.Phi);
  Vec fvec(n);
  for (int i = 0; i < n; ++i) fvec[i] = ops.M[i] * p.F.deriv1(next.U[i]);
  Vec blk = p.eps * (ops.A * next.U) + fvec / p.eps - ops.M.cwiseProduct(next.Xi);
  const Vec gt = eval_limit_nonlinearity(next.U, p, ops, mesh);
  const Vec surf = p.kappa * p.delta / (p.alpha * p.alpha) * (ops.A_gamma * w) +
                   gt / (p.alpha * p.delta) -
                   ops.M_gamma.cwiseProduct(next.Phi) / (p.alpha * p.alpha);
  for (int b = 0; b < nb; ++b) blk[mesh.boundary_nodes[b]] += surf[b];
  r.segment(n + nb, n) = blk;
  return r;
}

inline SpMat limit_jacobian(const LimitState& s, const ModelParams& p, const Operators& ops,
                            const Mesh& mesh) {
  const int n = mesh.n_nodes();
  const int nb = mesh.n_bnd();
  const int off_xi = n, off_phi = 2 * n, off_r2 = n, off_r3 = n + nb;
  const double a2 = p.alpha * p.alpha;
  std::vector<Triplet> trip;
  trip.reserve(3 * ops.A.nonZeros() + 6 * nb + 3 * n);

  for (int i = 0; i < n; ++i) trip.emplace_back(i, i, ops.M[i]);                     // (i) wrt U
  for (int k = 0; k < ops.A.outerSize(); ++k)
    for (SpMat::InnerIterator it(ops.A, k); it; ++it) {
      trip.emplace_back(it.row(), off_xi + it.col(), p.tau * it.value());            // (i) wrt Xi
      trip.emplace_back(off_r3 + it.row(), it.col(), p.eps * it.value());            // (iii) wrt U
    }
  for (int b = 0; b < nb; ++b) {
    const int i = mesh.boundary_nodes[b];
    trip.emplace_back(off_r2 + b, i, ops.M_gamma[b]);                                // (ii) wrt U
    trip.emplace_back(off_r3 + i, off_phi + b, -ops.M_gamma[b] / a2);                // (iii) wrt Phi
    const double w = (s.U[i] - p.beta) / p.alpha;
    trip.emplace_back(off_r3 + i, i, ops.M_gamma[b] * p.G.deriv2(w) / (a2 * p.delta));
  }
  for (int k = 0; k < ops.A_gamma.outerSize(); ++k)
    for (SpMat::InnerIterator it(ops.A_gamma, k); it; ++it) {
      trip.emplace_back(off_r2 + it.row(), off_phi + it.col(), p.tau * it.value());  // (ii) wrt Phi
      trip.emplace_back(off_r3 + mesh.boundary_nodes[it.row()], mesh.boundary_nodes[it.col()],
                        p.kappa * p.delta / a2 * it.value());                        // (iii) wrt U
    }
  for (int i = 0; i < n; ++i) {
    trip.emplace_back(off_r3 + i, i, ops.M[i] * p.F.deriv2(s.U[i]) / p.eps);         // (iii) wrt U
    trip.emplace_back(off_r3 + i, off_xi + i, -ops.M[i]);                            // (iii) wrt Xi
  }
  SpMat J(2 * n + nb, 2 * n + nb);
  J.setFromTriplets(trip.begin(), trip.end());
  return J;
}

// Advances one implicit Euler step, warm starting Newton from the previous
// state. Keep one stepper alive for a whole trajectory: the Newton solver then
// reuses its symbolic factorization across all steps.
class RobinStepper {
 public:
  RobinStepper(const Mesh& mesh, const Operators& ops, const ModelParams& params,
               NewtonConfig newton = {})
      : mesh_(mesh), ops_(ops), p_(params), solver_(newton) {
    validate(p_);
  }

  RobinState step(const RobinState& prev) {
    const int n = mesh_.n_nodes();
    const int nb = mesh_.n_bnd();
    auto residual = [&](const Vec& x) {
      return robin_residual(detail::unpack_robin(x, n, nb), prev, p_, ops_, mesh_);
    };
    auto jacobian = [&](const Vec& x) {
      return robin_jacobian(detail::unpack_robin(x, n, nb), p_, ops_, mesh_);
    };
    last_ = solver_.solve(residual, jacobian, detail::pack(prev));
    return detail::unpack_robin(last_.x, n, nb);
  }

  const NewtonResult& last_newton() const { return last_; }

 private:
  const Mesh& mesh_;
  const Operators& ops_;
  ModelParams p_;
  NewtonSolver solver_;
  NewtonResult last_;
};

class LimitStepper {
 public:
  LimitStepper(const Mesh& mesh, const Operators& ops, const ModelParams& params,
               NewtonConfig newton = {})
      : mesh_(mesh), ops_(ops), p_(params), solver_(newton) {
    validate(p_);
  }

  LimitState step(const LimitState& prev) {
    const int n = mesh_.n_nodes();
    const int nb = mesh_.n_bnd();
    auto residual = [&](const Vec& x) {
      return limit_residual(detail::unpack_limit(x, n, nb), prev, p_, ops_, mesh_);
    };
    auto jacobian = [&](const Vec& x) {
      return limit_jacobian(detail::unpack_limit(x, n, nb), p_, ops_, mesh_);
    };
    last_ = solver_.solve(residual, jacobian, detail::pack(prev));
    return detail::unpack_limit(last_.x, n, nb);
  }

  const NewtonResult& last_newton() const { return last_; }

 private:
  const Mesh& mesh_;
  const Operators& ops_;
  ModelParams p_;
  NewtonSolver solver_;
  NewtonResult last_;
};

inline RobinState robin_step(const RobinState& prev, const ModelParams& p, const Operators& ops,
                             const Mesh& mesh, NewtonConfig newton = {}) {
  RobinStepper stepper(mesh, ops, p, newton);
  return stepper.step(prev);
}

inline LimitState limit_step(const LimitState& prev, const ModelParams& p, const Operators& ops,
                             const Mesh& mesh, NewtonConfig newton = {}) {
  LimitStepper stepper(mesh, ops, p, newton);
  return stepper.step(prev);
}

}  // namespace chdbc

#endif
