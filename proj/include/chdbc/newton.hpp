#ifndef CHDBC_NEWTON_HPP
#define CHDBC_NEWTON_HPP

#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "chdbc/errors.hpp"
#include "chdbc/operators.hpp"

namespace chdbc {

struct NewtonConfig {
  double abs_tol = 1e-11;
  double rel_tol = 1e-12;
  int max_iters = 50;
  int max_halvings = 10;
};

struct NewtonResult {
  Vec x;
  int iterations = 0;
  double residual_norm = 0;
  // Max-norm of the residual at the start and after every accepted iterate.
  std::vector<double> residual_history;
};

// Damped Newton with a halving line search on the residual max-norm and a
// sparse direct LU for the linear solves. The solver object caches the
// symbolic analysis: as long as successive Jacobians share their sparsity
// pattern (they do, the steppers always insert every structural entry), only
// the numeric factorization is redone.
//
// Acceptance is the restricted monotonicity test |r(x + s d)| <= (1 - s/2)|r|
// in the max-norm, with two escapes that both take the undamped step. They
// exist for penalty formulations: residual rows scaled by 1/K have quadratic
// curvature that dwarfs an already-small residual, so damped fractions of a
// perfectly good Newton direction either fail the max-norm test outright or
// pass it at a microscopic step fraction that makes well under a percent of
// progress per iteration — while the undamped step lands in the quadratic
// basin and the residual collapses on the next iteration.
//
//  * Rescue: when no halving passes the test, the full step is accepted
//    anyway provided its residual is finite (bounded per run, see below).
//  * Stagnation monitor: the residual must halve within every
//    kStagnationWindow accepted iterations; when it fails to, the next
//    iteration skips the line search and takes the full step.
//
// Only runs of consecutive rescues, or non-finite trials, abort the solve.
class NewtonSolver {
 public:
  // Consecutive full-step acceptances without residual decrease before the
  // line search gives up. One rescue per time step is typical for stiff
  // penalty runs; a run of them means the iteration is genuinely lost.
  static constexpr int kMaxConsecutiveRescues = 5;
  // Accepted iterations within which the residual max-norm must halve before
  // the stagnation escape fires.
  static constexpr int kStagnationWindow = 5;

  explicit NewtonSolver(NewtonConfig cfg = {}) : cfg_(cfg) {}

  template <class ResidualFn, class JacobianFn>
  NewtonResult solve(ResidualFn&& residual, JacobianFn&& jacobian, Vec x) {
    NewtonResult res;
    Vec r = residual(x);
    double rn = r.template lpNorm<Eigen::Infinity>();
    res.residual_history.push_back(rn);
    // A non-finite start must not inflate the tolerance: with tol finite,
    // rn <= tol is false for inf and NaN, so blow-ups are never "converged".
    const double tol =
        std::isfinite(rn) ? std::max(cfg_.abs_tol, cfg_.rel_tol * rn) : cfg_.abs_tol;
    int consecutive_rescues = 0;
    double anchor_rn = rn;  // residual the stagnation monitor compares against
    int anchor_age = 0;     // accepted iterations since the anchor was set
    for (int iter = 0; iter < cfg_.max_iters; ++iter) {
      if (rn <= tol) {
        res.x = std::move(x);
        res.iterations = iter;
        res.residual_norm = rn;
        return res;
      }
      SpMat J = jacobian(x);
      if (!analyzed_) {
        lu_.analyzePattern(J);
        analyzed_ = true;
      }
      lu_.factorize(J);
      if (lu_.info() != Eigen::Success)
        throw SingularJacobianError("newton: Jacobian factorization failed");
      const Vec d = lu_.solve(-r);

      const bool stagnant = anchor_age >= kStagnationWindow && rn > 0.5 * anchor_rn;
      bool accepted = false;
      Vec x_full, r_full;  // the undamped trial, kept for the rescue paths
      double rn_full = std::numeric_limits<double>::quiet_NaN();
      {
        Vec x_try = x + d;
        r_full = residual(x_try);
        rn_full = r_full.template lpNorm<Eigen::Infinity>();
        x_full = std::move(x_try);
      }
      const bool full_usable =
          std::isfinite(rn_full) && consecutive_rescues < kMaxConsecutiveRescues;

      if (stagnant && full_usable) {
        // The damped phase is creeping (under a factor-2 gain over the whole
        // window): stop polishing tiny fractions and commit to the full step.
        x = std::move(x_full);
        r = std::move(r_full);
        rn = rn_full;
        ++consecutive_rescues;
        anchor_rn = rn;
        anchor_age = 0;
        res.residual_history.push_back(rn);
        continue;
      }

      // NaN compares false and halves further; the isfinite guard keeps an
      // infinite rn from accepting an infinite trial via inf <= inf. The
      // full trial was already evaluated above.
      if (std::isfinite(rn_full) && rn_full <= 0.5 * rn) {
        x = std::move(x_full);
        r = std::move(r_full);
        rn = rn_full;
        accepted = true;
        consecutive_rescues = 0;
      } else {
        double step = 0.5;
        for (int halving = 1; halving <= cfg_.max_halvings; ++halving) {
          Vec x_try = x + step * d;
          Vec r_try = residual(x_try);
          const double rn_try = r_try.template lpNorm<Eigen::Infinity>();
          if (std::isfinite(rn_try) && rn_try <= (1.0 - 0.5 * step) * rn) {
            x = std::move(x_try);
            r = std::move(r_try);
            rn = rn_try;
            accepted = true;
            consecutive_rescues = 0;
            break;
          }
          step *= 0.5;
        }
      }
      if (accepted) {
        ++anchor_age;
        if (rn <= 0.5 * anchor_rn) {
          anchor_rn = rn;
          anchor_age = 0;
        }
      } else if (full_usable) {
        x = std::move(x_full);
        r = std::move(r_full);
        rn = rn_full;
        ++consecutive_rescues;
        anchor_rn = rn;
        anchor_age = 0;
      } else {
        throw LineSearchStalledError(
            "newton: no residual decrease after " + std::to_string(cfg_.max_halvings) +
            " halvings and " + std::to_string(consecutive_rescues) + " full-step retries");
      }
      res.residual_history.push_back(rn);
    }
    if (rn <= tol) {
      res.x = std::move(x);
      res.iterations = cfg_.max_iters;
      res.residual_norm = rn;
      return res;
    }
    throw NoConvergenceError("newton: residual " + std::to_string(rn) + " above tolerance after " +
                             std::to_string(cfg_.max_iters) + " iterations");
  }

 private:
  NewtonConfig cfg_;
  Eigen::SparseLU<SpMat, Eigen::COLAMDOrdering<int>> lu_;
  bool analyzed_ = false;
};

template <class ResidualFn, class JacobianFn>
NewtonResult newton_solve(ResidualFn&& residual, JacobianFn&& jacobian, Vec x0,
                          NewtonConfig cfg = {}) {
  NewtonSolver solver(cfg);
  return solver.solve(std::forward<ResidualFn>(residual), std::forward<JacobianFn>(jacobian),
                      std::move(x0));
}

}  // namespace chdbc

#endif
