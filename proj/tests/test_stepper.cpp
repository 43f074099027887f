#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <random>
#include <set>

#include "chdbc/stepper.hpp"
#include "support/fd_jacobian.hpp"

using chdbc::assemble_operators;
using chdbc::LimitState;
using chdbc::make_unit_square_mesh;
using chdbc::Mesh;
using chdbc::ModelKind;
using chdbc::ModelParams;
using chdbc::Operators;
using chdbc::RobinState;
using chdbc::Vec;

namespace {

ModelParams robin_params() {
  ModelParams p;
  p.kind = ModelKind::robin;
  p.eps = 0.1;
  p.delta = 0.1;
  p.kappa = 1.0;
  p.tau = 1e-4;
  p.K = 0.5;
  p.alpha = 1.0;
  p.beta = 0.0;
  return p;
}

Vec sine_product_interpolant(const Mesh& mesh, double amplitude, double freq) {
  const double pi = std::acos(-1.0);
  Vec u(mesh.n_nodes());
  for (int i = 0; i < mesh.n_nodes(); ++i)
    u[i] = amplitude * std::sin(freq * pi * mesh.nodes[i].x) *
           std::cos(freq * pi * mesh.nodes[i].y);
  return u;
}

RobinState random_robin_state(const Mesh& mesh, std::mt19937& eng) {
  std::uniform_real_distribution<double> du(-1.5, 1.5);
  std::uniform_real_distribution<double> dm(-2.0, 2.0);
  RobinState s;
  s.U.resize(mesh.n_nodes());
  s.V.resize(mesh.n_bnd());
  s.Xi.resize(mesh.n_nodes());
  s.Phi.resize(mesh.n_bnd());
  for (int i = 0; i < s.U.size(); ++i) s.U[i] = du(eng);
  for (int i = 0; i < s.V.size(); ++i) s.V[i] = du(eng);
  for (int i = 0; i < s.Xi.size(); ++i) s.Xi[i] = dm(eng);
  for (int i = 0; i < s.Phi.size(); ++i) s.Phi[i] = dm(eng);
  return s;
}

}  // namespace

TEST_CASE("the pure phase is a fixed point of the Robin step") {
  const Mesh mesh = make_unit_square_mesh(2);
  const Operators ops = assemble_operators(mesh);
  ModelParams p = robin_params();
  p.eps = p.delta = 1.0;
  p.tau = 1e-3;
  const RobinState s{Vec::Ones(mesh.n_nodes()), Vec::Ones(mesh.n_bnd()),
                     Vec::Zero(mesh.n_nodes()), Vec::Zero(mesh.n_bnd())};
  const Vec r = chdbc::robin_residual(s, s, p, ops, mesh);
  CHECK(r.lpNorm<Eigen::Infinity>() <= 1e-14);

  chdbc::RobinStepper stepper(mesh, ops, p);
  const RobinState next = stepper.step(s);
  CHECK(stepper.last_newton().iterations == 0);
  CHECK((next.U - s.U).lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("limit residual at a constant off-well state") {
  const Mesh mesh = make_unit_square_mesh(3);
  const Operators ops = assemble_operators(mesh);
  ModelParams p;
  p.kind = ModelKind::limit;
  p.eps = 1.0;
  p.delta = 1.0;
  p.kappa = 1.0;
  p.tau = 1e-4;
  p.alpha = 2.0;
  p.beta = -4.0;
  const int n = mesh.n_nodes(), nb = mesh.n_bnd();
  // (U - beta)/alpha = 1 kills the surface potential term; F'(-2) = -6 stays.
  const LimitState s{Vec::Constant(n, -2.0), Vec::Zero(n), Vec::Zero(nb)};
  const Vec r = chdbc::limit_residual(s, s, p, ops, mesh);
  CHECK(r.segment(0, n).lpNorm<Eigen::Infinity>() <= 1e-13);
  CHECK(r.segment(n, nb).lpNorm<Eigen::Infinity>() <= 1e-13);
  for (int i = 0; i < n; ++i)
    CHECK(r[n + nb + i] == Catch::Approx(-6.0 * ops.M[i]).margin(1e-13));
}

TEST_CASE("robin jacobian matches finite differences for every transmission") {
  const Mesh mesh = make_unit_square_mesh(3);
  const Operators ops = assemble_operators(mesh);
  std::mt19937 eng(101);
  for (const char* label : {"affine", "sin", "cos3p2"}) {
    ModelParams p = robin_params();
    p.alpha = 1.3;
    p.beta = 0.25;
    p.H = chdbc::transmission_by_label(label, p.alpha, p.beta);
    const RobinState prev = random_robin_state(mesh, eng);
    for (int trial = 0; trial < 5; ++trial) {
      const RobinState at = random_robin_state(mesh, eng);
      const Vec x = chdbc::detail::pack(at);
      auto residual = [&](const Vec& y) {
        return chdbc::robin_residual(chdbc::detail::unpack_robin(y, mesh.n_nodes(), mesh.n_bnd()),
                                     prev, p, ops, mesh);
      };
      const chdbc::SpMat J = chdbc::robin_jacobian(at, p, ops, mesh);
      CHECK(chdbc_test::jacobian_fd_error(residual, J, x, eng, 3) <= 1e-6);
    }
  }
}

TEST_CASE("limit jacobian matches finite differences") {
  const Mesh mesh = make_unit_square_mesh(3);
  const Operators ops = assemble_operators(mesh);
  ModelParams p;
  p.kind = ModelKind::limit;
  p.eps = 0.2;
  p.delta = 0.3;
  p.kappa = 0.7;
  p.tau = 1e-3;
  p.alpha = 2.0;
  p.beta = -4.0;
  std::mt19937 eng(211);
  std::uniform_real_distribution<double> du(-2.5, -1.5);
  std::uniform_real_distribution<double> dm(-2.0, 2.0);
  const int n = mesh.n_nodes(), nb = mesh.n_bnd();
  LimitState prev;
  prev.U = Vec::NullaryExpr(n, [&](Eigen::Index) { return du(eng); });
  prev.Xi = Vec::Zero(n);
  prev.Phi = Vec::Zero(nb);
  for (int trial = 0; trial < 5; ++trial) {
    LimitState at;
    at.U = Vec::NullaryExpr(n, [&](Eigen::Index) { return du(eng); });
    at.Xi = Vec::NullaryExpr(n, [&](Eigen::Index) { return dm(eng); });
    at.Phi = Vec::NullaryExpr(nb, [&](Eigen::Index) { return dm(eng); });
    const Vec x = chdbc::detail::pack(at);
    auto residual = [&](const Vec& y) {
      return chdbc::limit_residual(chdbc::detail::unpack_limit(y, n, nb), prev, p, ops, mesh);
    };
    const chdbc::SpMat J = chdbc::limit_jacobian(at, p, ops, mesh);
    CHECK(chdbc_test::jacobian_fd_error(residual, J, x, eng, 3) <= 1e-6);
  }
}

TEST_CASE("jacobian sparsity pattern is state independent") {
  const Mesh mesh = make_unit_square_mesh(3);
  const Operators ops = assemble_operators(mesh);
  ModelParams p = robin_params();
  p.H = chdbc::sin_transmission();
  std::mt19937 eng(5);
  chdbc::SpMat J1 = chdbc::robin_jacobian(random_robin_state(mesh, eng), p, ops, mesh);
  chdbc::SpMat J2 = chdbc::robin_jacobian(random_robin_state(mesh, eng), p, ops, mesh);
  J1.makeCompressed();
  J2.makeCompressed();
  REQUIRE(J1.nonZeros() == J2.nonZeros());
  for (Eigen::Index k = 0; k < J1.nonZeros(); ++k)
    CHECK(J1.innerIndexPtr()[k] == J2.innerIndexPtr()[k]);
  for (int k = 0; k <= J1.outerSize(); ++k)
    CHECK(J1.outerIndexPtr()[k] == J2.outerIndexPtr()[k]);
}

TEST_CASE("perturbing one interior value only touches its stencil") {
  const Mesh mesh = make_unit_square_mesh(4);
  const Operators ops = assemble_operators(mesh);
  const ModelParams p = robin_params();
  std::mt19937 eng(17);
  const RobinState prev = random_robin_state(mesh, eng);
  RobinState at = random_robin_state(mesh, eng);
  const int n = mesh.n_nodes(), nb = mesh.n_bnd();
  const int c = 2 * (4 + 1) + 2;  // interior node (2,2)
  REQUIRE(mesh.chi[c] == 0);

  const Vec r0 = chdbc::robin_residual(at, prev, p, ops, mesh);
  at.U[c] += 0.37;
  const Vec r1 = chdbc::robin_residual(at, prev, p, ops, mesh);
  std::set<int> allowed = {c};  // block (i) row c
  for (chdbc::SpMat::InnerIterator it(ops.A, c); it; ++it)
    allowed.insert(n + nb + it.row());  // block (iii): row c and its neighbours
  allowed.insert(n + nb + c);
  for (int row = 0; row < r0.size(); ++row) {
    if (r0[row] != r1[row]) CHECK(allowed.count(row) == 1);
  }
}

TEST_CASE("limit jacobian U block is symmetric") {
  const Mesh mesh = make_unit_square_mesh(3);
  const Operators ops = assemble_operators(mesh);
  ModelParams p;
  p.kind = ModelKind::limit;
  p.eps = 0.5;
  p.delta = 0.4;
  p.kappa = 1.2;
  p.tau = 1e-3;
  p.alpha = 1.7;
  p.beta = 0.3;
  const int n = mesh.n_nodes(), nb = mesh.n_bnd();
  std::mt19937 eng(23);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  LimitState s;
  s.U = Vec::NullaryExpr(n, [&](Eigen::Index) { return dist(eng); });
  s.Xi = Vec::NullaryExpr(n, [&](Eigen::Index) { return dist(eng); });
  s.Phi = Vec::NullaryExpr(nb, [&](Eigen::Index) { return dist(eng); });
  const Eigen::MatrixXd J = Eigen::MatrixXd(chdbc::limit_jacobian(s, p, ops, mesh));
  const Eigen::MatrixXd S = J.block(n + nb, 0, n, n);
  CHECK((S - S.transpose()).cwiseAbs().maxCoeff() <= 1e-13);
}

TEST_CASE("mass conservation and energy decay along a Robin trajectory") {
  const Mesh mesh = make_unit_square_mesh(8);
  const Operators ops = assemble_operators(mesh);
  const ModelParams p = robin_params();
  RobinState s;
  s.U = sine_product_interpolant(mesh, 1.0, 4.0);
  s.V = chdbc::restrict_to_boundary(mesh, s.U);  // H = id
  s.Xi = Vec::Zero(mesh.n_nodes());
  s.Phi = Vec::Zero(mesh.n_bnd());

  const double mass_bulk0 = ops.M.dot(s.U);
  const double mass_surf0 = ops.M_gamma.dot(s.V);
  double e_prev = chdbc::energy_robin(s.U, s.V, p, ops, mesh).total;
  chdbc::RobinStepper stepper(mesh, ops, p);
  for (int k = 0; k < 10; ++k) {
    s = stepper.step(s);
    CHECK(std::abs(ops.M.dot(s.U) - mass_bulk0) <= 1e-9 * (1.0 + std::abs(mass_bulk0)));
    CHECK(std::abs(ops.M_gamma.dot(s.V) - mass_surf0) <= 1e-9 * (1.0 + std::abs(mass_surf0)));
    const double e = chdbc::energy_robin(s.U, s.V, p, ops, mesh).total;
    CHECK(e <= e_prev + 1e-9 * (1.0 + std::abs(e_prev)));
    e_prev = e;
  }
}

TEST_CASE("mass conservation and energy decay along a limit trajectory") {
  const Mesh mesh = make_unit_square_mesh(8);
  const Operators ops = assemble_operators(mesh);
  ModelParams p;
  p.kind = ModelKind::limit;
  p.eps = 0.1;
  p.delta = 0.1;
  p.kappa = 1.0;
  p.tau = 1e-4;
  p.alpha = 1.5;
  p.beta = 0.3;
  LimitState s;
  s.U = sine_product_interpolant(mesh, 1.0, 4.0);
  s.Xi = Vec::Zero(mesh.n_nodes());
  s.Phi = Vec::Zero(mesh.n_bnd());

  const double mass_bulk0 = ops.M.dot(s.U);
  const double mass_surf0 = ops.M_gamma.dot(chdbc::restrict_to_boundary(mesh, s.U));
  double e_prev = chdbc::energy_limit(s.U, p, ops, mesh).total;
  chdbc::LimitStepper stepper(mesh, ops, p);
  for (int k = 0; k < 10; ++k) {
    s = stepper.step(s);
    CHECK(std::abs(ops.M.dot(s.U) - mass_bulk0) <= 1e-9 * (1.0 + std::abs(mass_bulk0)));
    const double ms = ops.M_gamma.dot(chdbc::restrict_to_boundary(mesh, s.U));
    CHECK(std::abs(ms - mass_surf0) <= 1e-9 * (1.0 + std::abs(mass_surf0)));
    const double e = chdbc::energy_limit(s.U, p, ops, mesh).total;
    CHECK(e <= e_prev + 1e-9 * (1.0 + std::abs(e_prev)));
    e_prev = e;
  }
}

TEST_CASE("one tiny implicit Euler step is consistent") {
  const Mesh mesh = make_unit_square_mesh(8);
  const Operators ops = assemble_operators(mesh);
  ModelParams p = robin_params();
  p.eps = p.delta = 1.0;
  p.K = 1.0;
  RobinState s;
  s.U = sine_product_interpolant(mesh, 0.1, 1.0);
  s.V = chdbc::restrict_to_boundary(mesh, s.U);
  s.Xi = Vec::Zero(mesh.n_nodes());
  s.Phi = Vec::Zero(mesh.n_bnd());

  p.tau = 1e-8;
  const Vec du8 = chdbc::robin_step(s, p, ops, mesh).U - s.U;
  // |du/dt| ~ 2e3 for this datum, so one 1e-8 step moves ~2e-5.
  CHECK(du8.lpNorm<Eigen::Infinity>() <= 5e-5);
  CHECK(du8.lpNorm<Eigen::Infinity>() >= 1e-6);

  // First-order consistency: a step a tenth as long moves a tenth as far.
  p.tau = 1e-9;
  const Vec du9 = chdbc::robin_step(s, p, ops, mesh).U - s.U;
  CHECK((du8 - 10.0 * du9).lpNorm<Eigen::Infinity>() <=
        0.05 * du8.lpNorm<Eigen::Infinity>() + 1e-14);
}

TEST_CASE("the Robin step approaches the limit step as K vanishes") {
  const Mesh mesh = make_unit_square_mesh(8);
  const Operators ops = assemble_operators(mesh);
  ModelParams p = robin_params();
  p.eps = p.delta = 0.1;
  p.tau = 1e-5;
  p.K = 1e-6;

  const Vec u0 = sine_product_interpolant(mesh, 1.0, 4.0);
  RobinState rs{u0, chdbc::restrict_to_boundary(mesh, u0), Vec::Zero(mesh.n_nodes()),
                Vec::Zero(mesh.n_bnd())};
  const RobinState r_next = chdbc::robin_step(rs, p, ops, mesh);

  ModelParams pl = p;
  pl.kind = ModelKind::limit;
  LimitState ls{u0, Vec::Zero(mesh.n_nodes()), Vec::Zero(mesh.n_bnd())};
  const LimitState l_next = chdbc::limit_step(ls, pl, ops, mesh);

  CHECK((r_next.U - l_next.U).lpNorm<Eigen::Infinity>() <= 1e-4);
}

TEST_CASE("free step functions agree with the stepper classes") {
  const Mesh mesh = make_unit_square_mesh(4);
  const Operators ops = assemble_operators(mesh);
  ModelParams p = robin_params();
  p.H = chdbc::sin_transmission();
  const Vec u0 = sine_product_interpolant(mesh, 0.8, 4.0);
  Vec v0(mesh.n_bnd());
  for (int b = 0; b < mesh.n_bnd(); ++b)
    v0[b] = p.H.inverse_on_I(u0[mesh.boundary_nodes[b]]);
  const RobinState s{u0, v0, Vec::Zero(mesh.n_nodes()), Vec::Zero(mesh.n_bnd())};

  chdbc::RobinStepper stepper(mesh, ops, p);
  const RobinState a = stepper.step(s);
  const RobinState b = chdbc::robin_step(s, p, ops, mesh);
  CHECK((a.U - b.U).lpNorm<Eigen::Infinity>() == 0.0);
  CHECK((a.V - b.V).lpNorm<Eigen::Infinity>() == 0.0);
  CHECK((a.Xi - b.Xi).lpNorm<Eigen::Infinity>() == 0.0);
  CHECK((a.Phi - b.Phi).lpNorm<Eigen::Infinity>() == 0.0);

  ModelParams pl;
  pl.kind = ModelKind::limit;
  pl.eps = pl.delta = 0.1;
  pl.tau = 1e-4;
  const LimitState ls{u0, Vec::Zero(mesh.n_nodes()), Vec::Zero(mesh.n_bnd())};
  chdbc::LimitStepper lstepper(mesh, ops, pl);
  const LimitState la = lstepper.step(ls);
  const LimitState lb = chdbc::limit_step(ls, pl, ops, mesh);
  CHECK((la.U - lb.U).lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("the stiff sine transmission at small K completes its steps") {
  // Sharp-interface parameters with H = sin and a strong penalty. After the
  // first step the residual is small but the state still has to move a lot per
  // step, and the 1/K rows have so much curvature that no damped fraction of
  // the Newton direction decreases the residual max-norm: the solver must
  // accept the transient rise of the full step or it creeps and stalls.
  const Mesh mesh = make_unit_square_mesh(20);
  const Operators ops = assemble_operators(mesh);
  ModelParams p;
  p.kind = ModelKind::robin;
  p.eps = p.delta = 0.02;
  p.kappa = 1.0;
  p.tau = 1e-5;
  p.H = chdbc::sin_transmission();

  const Vec u0 = sine_product_interpolant(mesh, 1.0, 4.0);
  Vec v0(mesh.n_bnd());
  for (int b = 0; b < mesh.n_bnd(); ++b)
    v0[b] = p.H.inverse_on_I(u0[mesh.boundary_nodes[b]]);

  for (const double K : {1e-4, 1e-5}) {
    p.K = K;
    RobinState s{u0, v0, Vec::Zero(mesh.n_nodes()), Vec::Zero(mesh.n_bnd())};
    const double mass0 = ops.M.dot(s.U);
    chdbc::RobinStepper stepper(mesh, ops, p);
    for (int k = 0; k < 3; ++k) {
      s = stepper.step(s);
      CHECK(stepper.last_newton().residual_norm <= 1e-10);
      CHECK(std::abs(ops.M.dot(s.U) - mass0) <= 1e-9 * (1.0 + std::abs(mass0)));
    }
  }
}

TEST_CASE("a cold start exercises several Newton iterations") {
  const Mesh mesh = make_unit_square_mesh(6);
  const Operators ops = assemble_operators(mesh);
  ModelParams p = robin_params();
  p.tau = 1e-2;  // deliberately coarse step, far from the warm-start regime
  RobinState s;
  s.U = Vec::Zero(mesh.n_nodes());
  for (int i = 0; i < mesh.n_nodes(); ++i) s.U[i] = mesh.nodes[i].x > 0.5 ? 1.0 : -1.0;
  s.V = chdbc::restrict_to_boundary(mesh, s.U);
  s.Xi = Vec::Zero(mesh.n_nodes());
  s.Phi = Vec::Zero(mesh.n_bnd());

  chdbc::RobinStepper stepper(mesh, ops, p);
  stepper.step(s);
  const auto& h = stepper.last_newton().residual_history;
  REQUIRE(h.size() >= 3);
  for (size_t i = 1; i < h.size(); ++i) CHECK(h[i] < h[i - 1]);
  CHECK(stepper.last_newton().residual_norm <= 1e-11);
}
