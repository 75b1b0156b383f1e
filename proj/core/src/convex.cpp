#include "xhaul/convex.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace xhaul::convex {

namespace {

double logdet_llt(const Cmat& x, const char* what) {
  if (x.rows() == 0) return 0.0;
  if (x.rows() == 1) {
    const double v = x(0, 0).real();
    if (!(v > 0.0)) throw std::runtime_error(std::string(what) + ": matrix not positive definite");
    return std::log(v);
  }
  Eigen::LLT<Cmat> llt(x);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error(std::string(what) + ": matrix not positive definite");
  double sum = 0.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) sum += std::log(llt.matrixL()(i, i).real());
  return 2.0 * sum;
}

}  // namespace

double logdet_identity_plus(const Cmat& a) {
  Cmat shifted = a;
  shifted.diagonal().array() += 1.0;
  return logdet_llt(shifted, "logdet_identity_plus");
}

double logdet_psd(const Cmat& x) { return logdet_llt(x, "logdet_psd"); }

double LogDetTangent::operator()(const Cmat& x) const {
  return offset + (grad * x).trace().real();
}

LogDetTangent linearize_logdet(const Cmat& x0) {
  LogDetTangent t;
  t.value_at_ref = logdet_psd(x0);  // throws on singular/non-PD input
  if (x0.rows() == 1) {
    t.grad = Cmat::Constant(1, 1, 1.0 / x0(0, 0).real());
  } else {
    Eigen::LLT<Cmat> llt(x0);
    t.grad = llt.solve(Cmat::Identity(x0.rows(), x0.cols()));
    t.grad = 0.5 * (t.grad + t.grad.adjoint()).eval();  // kill asymmetry drift
  }
  t.offset = t.value_at_ref - (t.grad * x0).trace().real();
  return t;
}

Cmat psd_project(const Cmat& x, double eig_floor) {
  const Cmat herm = 0.5 * (x + x.adjoint());
  Eigen::SelfAdjointEigenSolver<Cmat> es(herm);
  Eigen::VectorXd lam = es.eigenvalues().cwiseMax(eig_floor);
  return es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().adjoint();
}

Cmat psd_project_capped(const Cmat& x, double eig_floor, double trace_cap) {
  const Cmat herm = 0.5 * (x + x.adjoint());
  Eigen::SelfAdjointEigenSolver<Cmat> es(herm);
  Eigen::VectorXd lam = es.eigenvalues().cwiseMax(eig_floor);
  if (trace_cap > 0.0 && lam.sum() > trace_cap) {
    // Shift eigenvalues down uniformly (respecting the floor) until the
    // trace meets the cap; this is the Frobenius projection in the fixed
    // eigenbasis.
    double lo = 0.0, hi = lam.maxCoeff() - eig_floor;
    for (int it = 0; it < 100; ++it) {
      const double mid = 0.5 * (lo + hi);
      const double tr = (lam.array() - mid).cwiseMax(eig_floor).sum();
      (tr > trace_cap ? lo : hi) = mid;
    }
    lam = (lam.array() - hi).cwiseMax(eig_floor);
  }
  return es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().adjoint();
}

namespace {

double norm_blocks(const std::vector<Cmat>& a) {
  double s = 0.0;
  for (const auto& m : a) s += m.squaredNorm();
  return std::sqrt(s);
}

// Smoothed hinge: exact L1 penalty outside the [0, kappa] band, quadratic
// inside so the gradient stays continuous for the BB steps.
double hinge(double u, double kappa) {
  if (u <= 0.0) return 0.0;
  if (u <= kappa) return u * u / (2.0 * kappa);
  return u - 0.5 * kappa;
}

double hinge_slope(double u, double kappa) {
  if (u <= 0.0) return 0.0;
  if (u <= kappa) return u / kappa;
  return 1.0;
}

}  // namespace

InnerSolution solve_inner(const InnerProblem& problem, std::vector<Cmat> x0,
                          const InnerOptions& opts) {
  const int nb = static_cast<int>(problem.blocks.size());
  if (static_cast<int>(x0.size()) != nb)
    throw std::invalid_argument("solve_inner: block count mismatch");
  for (int b = 0; b < nb; ++b) {
    const auto& spec = problem.blocks[b];
    if (spec.trace_cap > 0.0 && spec.trace_cap < spec.eig_floor * spec.dim)
      throw std::invalid_argument("solve_inner: trace cap below eigenvalue floor");
  }

  auto project = [&](std::vector<Cmat>& x) {
    for (int b = 0; b < nb; ++b) {
      const auto& spec = problem.blocks[b];
      x[b] = spec.trace_cap > 0.0 ? psd_project_capped(x[b], spec.eig_floor, spec.trace_cap)
                                  : psd_project(x[b], spec.eig_floor);
    }
  };
  project(x0);

  std::vector<double> cons(problem.num_constraints, 0.0);
  std::vector<double> weights(problem.num_constraints, 0.0);
  std::vector<Cmat> grad(nb), cand(nb), prev_x(nb), prev_grad(nb);
  for (int b = 0; b < nb; ++b) grad[b].resize(problem.blocks[b].dim, problem.blocks[b].dim);

  double rho = opts.penalty_init;
  double objective = 0.0;
  double max_viol = 0.0;
  bool stationary = false;
  bool stalled = false;
  int total_iters = 0;

  extern long g_inner_evals;
  auto eval_pen = [&](const std::vector<Cmat>& x, double kappa, double& obj_out,
                      double& viol_out) {
    ++g_inner_evals;
    obj_out = problem.eval(x, cons);
    double pen = obj_out;
    viol_out = 0.0;
    for (int j = 0; j < problem.num_constraints; ++j) {
      const double v = -cons[j];
      viol_out = std::max(viol_out, v);
      pen -= rho * hinge(v, kappa);
    }
    return pen;
  };

  // Single iteration budget; the penalty weight escalates in place when
  // progress stops while constraints are still violated. The smoothing
  // band starts wide (the hinge curvature rho/kappa is what limits the
  // step size) and tightens with each escalation.
  double kappa = std::max(opts.feas_tol, 1e-2);
  int rounds_left = std::max(1, opts.penalty_rounds) - 1;
  double pen = eval_pen(x0, kappa, objective, max_viol);
  double best_pen = pen;
  int since_progress = 0;
  double alpha = 0.0;
  bool have_prev = false;

  for (int iter = 0; iter < opts.max_iters; ++iter, ++total_iters) {
    for (int j = 0; j < problem.num_constraints; ++j)
      weights[j] = rho * hinge_slope(-cons[j], kappa);
    for (int b = 0; b < nb; ++b) grad[b].setZero();
    problem.grad(x0, weights, grad);

    const double gnorm = norm_blocks(grad);
    const double xnorm = norm_blocks(x0);

    bool pause = gnorm < 1e-300;
    if (!pause) {
      if (have_prev) {
        // Barzilai-Borwein step from the last accepted move.
        double num = 0.0, den = 0.0;
        for (int b = 0; b < nb; ++b) {
          const Cmat dx = x0[b] - prev_x[b];
          const Cmat dg = grad[b] - prev_grad[b];
          num += dx.squaredNorm();
          den += dx.cwiseProduct(dg.conjugate()).sum().real();
        }
        alpha = (std::abs(den) > 1e-300) ? std::abs(num / den) : alpha * 2.0;
        alpha = std::clamp(alpha, 1e-14 * (1.0 + xnorm) / (1.0 + gnorm),
                           1e14 * (1.0 + xnorm) / (1.0 + gnorm));
      } else {
        alpha = (1.0 + xnorm) / (1.0 + gnorm);
      }

      prev_x = x0;
      prev_grad = grad;

      bool accepted = false;
      double step = alpha;
      double cand_pen = 0.0, cand_obj = 0.0, cand_viol = 0.0;
      for (int bt = 0; bt < 40; ++bt) {
        for (int b = 0; b < nb; ++b) cand[b] = x0[b] + step * grad[b];
        project(cand);
        double gain = 0.0;
        for (int b = 0; b < nb; ++b)
          gain += (cand[b] - x0[b]).cwiseProduct(grad[b].conjugate()).sum().real();
        if (gain <= 0.0) { step *= 0.5; continue; }
        cand_pen = eval_pen(cand, kappa, cand_obj, cand_viol);
        if (cand_pen >= pen + 1e-4 * gain) {
          accepted = true;
          break;
        }
        step *= 0.5;
        if (step * gnorm < 1e-16 * (1.0 + xnorm)) break;
      }

      if (accepted) {
        double move = 0.0;
        for (int b = 0; b < nb; ++b) move += (cand[b] - x0[b]).squaredNorm();
        move = std::sqrt(move);

        x0.swap(cand);
        pen = cand_pen;
        objective = cand_obj;
        max_viol = cand_viol;
        if (opts.step_trace) opts.step_trace->push_back(pen);

        if (pen > best_pen + opts.stall_tol * (1.0 + std::abs(best_pen))) {
          best_pen = pen;
          since_progress = 0;
        } else if (++since_progress >= opts.stall_window) {
          stalled = true;
          pause = true;
        }
        // Gradient-mapping residual with the accepted step.
        if (!pause && move / std::max(step, 1e-300) <= opts.tol * (1.0 + xnorm)) {
          stationary = true;
          pause = true;
        }
        have_prev = true;
      } else {
        stationary = true;  // no ascent step survives
        pause = true;
      }
    }

    if (pause) {
      if (max_viol > opts.feas_tol && rounds_left > 0) {
        rho *= 10.0;
        kappa = std::max(opts.feas_tol, kappa * 0.1);
        --rounds_left;
        pen = eval_pen(x0, kappa, objective, max_viol);
        best_pen = pen;
        since_progress = 0;
        have_prev = false;
        stationary = false;
        stalled = false;
        continue;
      }
      break;
    }
  }

  extern long g_inner_calls, g_inner_iters;
  ++g_inner_calls;
  g_inner_iters += total_iters;

  InnerSolution sol;
  sol.blocks = std::move(x0);
  sol.objective = objective;
  sol.max_violation = max_viol;
  sol.iterations = total_iters;
  sol.converged = (stationary || stalled) && max_viol <= opts.feas_tol * 10.0;
  return sol;
}

}  // namespace xhaul::convex

namespace xhaul::convex {
// temporary diagnostics
long g_inner_calls = 0;
long g_inner_iters = 0;
long g_inner_evals = 0;
}
