#ifndef CHDBC_MODEL_HPP
#define CHDBC_MODEL_HPP

#include <stdexcept>

#include "chdbc/operators.hpp"
#include "chdbc/potentials.hpp"

namespace chdbc {

enum class ModelKind { robin, limit };

// Everything a time step needs to know about the continuous problem. K and the
// transmission H only matter for the Robin model; alpha/beta drive the limit
// model's trace relation u = alpha v + beta (and the affine H).
struct ModelParams {
  ModelKind kind = ModelKind::robin;
  double eps = 1.0;
  double delta = 1.0;
  double kappa = 1.0;
  double tau = 1e-5;
  double K = 0.1;
  double alpha = 1.0;
  double beta = 0.0;
  ScalarFunction F = double_well();
  ScalarFunction G = double_well();
  Transmission H = affine_transmission(1.0, 0.0);
};

inline void validate(const ModelParams& p) {
  if (p.eps <= 0 || p.delta <= 0) throw std::invalid_argument("model: eps and delta must be positive");
  if (p.kappa < 0) throw std::invalid_argument("model: kappa must be nonnegative");
  if (p.tau <= 0) throw std::invalid_argument("model: tau must be positive");
  if (p.kind == ModelKind::robin && p.K <= 0)
    throw std::invalid_argument("model: K must be positive for the Robin model");
  if (p.kind == ModelKind::limit && p.alpha == 0)
    throw std::invalid_argument("model: alpha must be nonzero for the limit model");
}

// Mass-weighted nonlinear terms of the Robin system. All surface vectors use
// compressed boundary indexing; J couples the bulk trace to the surface field.
struct NonlinearTerms {
  Vec F;  // F_i     = M_ii F'(U_i)
  Vec G;  // G_b     = Mg_bb G'(V_b)
  Vec H;  // H_b     = Mg_bb H(V_b)
  Vec J;  // J_b     = Mg_bb H'(V_b) (H(V_b) - U|_Gamma_b)
};

inline NonlinearTerms eval_nonlinearities(const Vec& U, const Vec& V, const ModelParams& p,
                                          const Operators& ops, const Mesh& mesh) {
  const int n = mesh.n_nodes();
  const int nb = mesh.n_bnd();
  if (U.size() != n || V.size() != nb)
    throw std::invalid_argument("eval_nonlinearities: dimension mismatch");
  NonlinearTerms t;
  t.F.resize(n);
  for (int i = 0; i < n; ++i) t.F[i] = ops.M[i] * p.F.deriv1(U[i]);
  t.G.resize(nb);
  t.H.resize(nb);
  t.J.resize(nb);
  for (int b = 0; b < nb; ++b) {
    const double v = V[b];
    const double u_trace = U[mesh.boundary_nodes[b]];
    t.G[b] = ops.M_gamma[b] * p.G.deriv1(v);
    t.H[b] = ops.M_gamma[b] * p.H.value(v);
    t.J[b] = ops.M_gamma[b] * p.H.deriv1(v) * (p.H.value(v) - u_trace);
  }
  return t;
}

// Limit-model surface potential term: Gt_b = Mg_bb G'((U|_Gamma_b - beta)/alpha).
inline Vec eval_limit_nonlinearity(const Vec& U, const ModelParams& p, const Operators& ops,
                                   const Mesh& mesh) {
  const int nb = mesh.n_bnd();
  if (U.size() != mesh.n_nodes())
    throw std::invalid_argument("eval_limit_nonlinearity: dimension mismatch");
  Vec g(nb);
  for (int b = 0; b < nb; ++b) {
    const double w = (U[mesh.boundary_nodes[b]] - p.beta) / p.alpha;
    g[b] = ops.M_gamma[b] * p.G.deriv1(w);
  }
  return g;
}

struct EnergyParts {
  double bulk_grad = 0;
  double bulk_pot = 0;
  double surf_grad = 0;
  double surf_pot = 0;
  double penalty = 0;
  double total = 0;
};

// Gradient parts use the stiffness forms; potential and penalty parts use the
// lumped nodal quadrature, matching the discrete gradient-flow structure.
inline EnergyParts energy_robin(const Vec& U, const Vec& V, const ModelParams& p,
                                const Operators& ops, const Mesh& mesh) {
  EnergyParts e;
  e.bulk_grad = 0.5 * p.eps * U.dot(ops.A * U);
  for (int i = 0; i < mesh.n_nodes(); ++i) e.bulk_pot += ops.M[i] * p.F.value(U[i]);
  e.bulk_pot /= p.eps;
  e.surf_grad = 0.5 * p.delta * p.kappa * V.dot(ops.A_gamma * V);
  for (int b = 0; b < mesh.n_bnd(); ++b) {
    e.surf_pot += ops.M_gamma[b] * p.G.value(V[b]);
    const double defect = p.H.value(V[b]) - U[mesh.boundary_nodes[b]];
    e.penalty += ops.M_gamma[b] * defect * defect;
  }
  e.surf_pot /= p.delta;
  e.penalty /= 2.0 * p.K;
  e.total = e.bulk_grad + e.bulk_pot + e.surf_grad + e.surf_pot + e.penalty;
  return e;
}

inline EnergyParts energy_limit(const Vec& U, const ModelParams& p, const Operators& ops,
                                const Mesh& mesh) {
  EnergyParts e;
  e.bulk_grad = 0.5 * p.eps * U.dot(ops.A * U);
  for (int i = 0; i < mesh.n_nodes(); ++i) e.bulk_pot += ops.M[i] * p.F.value(U[i]);
  e.bulk_pot /= p.eps;
  const Vec w = restrict_to_boundary(mesh, U);
  e.surf_grad = 0.5 * p.delta * p.kappa / (p.alpha * p.alpha) * w.dot(ops.A_gamma * w);
  for (int b = 0; b < mesh.n_bnd(); ++b)
    e.surf_pot += ops.M_gamma[b] * p.G.value((w[b] - p.beta) / p.alpha);
  e.surf_pot /= p.delta;
  e.total = e.bulk_grad + e.bulk_pot + e.surf_grad + e.surf_pot;
  return e;
}

}  // namespace chdbc

#endif
