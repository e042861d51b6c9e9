#pragma once

#include <chrono>
#include <cmath>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include "oasis/discrete_operator.hpp"
#include "oasis/error.hpp"
#include "oasis/geometry.hpp"

namespace oasis {

enum class SolveStatus { Converged, MaxIter, Diverged };

inline std::string to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Converged: return "CONVERGED";
    case SolveStatus::MaxIter: return "MAX_ITER";
    case SolveStatus::Diverged: return "DIVERGED";
  }
  return "?";
}

enum class SolveMethod { PolicyIteration, FixedPoint };

struct SolveOptions {
  SolveMethod method = SolveMethod::PolicyIteration;
  // Residual tolerance, relative to 1 + sup|g| + s_max*sup|u|.
  double tol_res = 1e-9;
  int max_iter = 100;
  double blowup_threshold = 1e8;
  // Pseudo-time step as a fraction of the monotonicity limit.
  double damping = 0.9;
  // c > 0 is accepted only on request (eigen-type probes).
  bool allow_positive_shift = false;
  std::function<void(int, double)> trace;
};

struct SolveReport {
  Field solution;
  SolveStatus status = SolveStatus::MaxIter;
  int iterations = 0;
  std::vector<double> residual_history;
  double residual = 0.0;
  double runtime = 0.0;
};

// Fh(u) + c*u = g in the domain, u = boundary on the cuts.
struct DirichletProblem {
  const DiscreteOperator* op = nullptr;
  double shift = 0.0;
  std::vector<double> shift_field;  // per unknown; overrides shift when non-empty
  Field rhs;                        // empty means g = 0
  BoundaryData boundary;
};

// Raw result on unknowns, shared by all internal callers.
struct RawSolve {
  std::vector<double> u;
  SolveStatus status = SolveStatus::MaxIter;
  int iterations = 0;
  double residual = 0.0;
  std::vector<double> history;
};

inline double sup_abs(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

// Stateful solver: keeps the sparse LU of the last frozen policy so repeated
// solves with an unchanged policy and shift cost one back-substitution.
class DirichletSolver {
 public:
  explicit DirichletSolver(const DiscreteOperator& op) : op_(&op) {}

  const DiscreteOperator& op() const { return *op_; }

  RawSolve solve(std::span<const double> shift, std::span<const double> g,
                 std::span<const double> bv, const SolveOptions& opt,
                 const std::vector<double>* initial = nullptr) {
    for (double c : shift)
      if (c > 0.0 && !opt.allow_positive_shift && opt.method == SolveMethod::PolicyIteration)
        throw Error("solver", "INVALID_SHIFT", "positive shift needs the fixed-point path");
    return opt.method == SolveMethod::PolicyIteration ? howard(shift, g, bv, opt, initial)
                                                      : pseudo_time(shift, g, bv, opt, initial);
  }

  // sup |Fh(u) + c u - g|
  double residual(std::span<const double> u, std::span<const double> shift,
                  std::span<const double> g, std::span<const double> bv) const {
    double r = 0.0;
    for (int i = 0; i < op_->size(); ++i) {
      const double c = shift.size() == 1 ? shift[0] : shift[i];
      const double gi = g.empty() ? 0.0 : g[i];
      r = std::max(r, std::abs(op_->eval_node(u, bv, i) + c * u[i] - gi));
    }
    return r;
  }

  double scaled_tolerance(double tol, std::span<const double> u, std::span<const double> shift,
                          std::span<const double> g) const {
    const double smax = op_->max_diagonal() + sup_abs(shift);
    return tol * (1.0 + sup_abs(g) + smax * sup_abs(u));
  }

 private:
  RawSolve howard(std::span<const double> shift, std::span<const double> g,
                  std::span<const double> bv, const SolveOptions& opt,
                  const std::vector<double>* initial) {
    const int n = op_->size();
    RawSolve out;
    out.u = initial ? *initial : std::vector<double>(n, 0.0);
    const double bound = opt.blowup_threshold * std::max(1.0, sup_abs(bv));
    Eigen::VectorXd b, rhs(n);
    Policy prev;
    for (int it = 1; it <= opt.max_iter; ++it) {
      Policy pol = op_->select_policy(out.u, bv);
      if (it > 1 && pol == prev) {
        out.status = SolveStatus::Converged;
        break;
      }
      factor(pol, shift, bv, b);
      for (int i = 0; i < n; ++i) rhs[i] = (g.empty() ? 0.0 : g[i]) - b[i];
      Eigen::VectorXd x = lu_.solve(rhs);
      if (lu_.info() != Eigen::Success)
        throw Error("solver", "SINGULAR", "linear solve failed for a frozen policy");
      for (int i = 0; i < n; ++i) out.u[i] = x[i];
      out.iterations = it;
      out.residual = residual(out.u, shift, g, bv);
      out.history.push_back(out.residual);
      if (opt.trace) opt.trace(it, out.residual);
      if (!std::isfinite(out.residual) || sup_abs(out.u) > bound) {
        out.status = SolveStatus::Diverged;
        return out;
      }
      if (out.residual <= scaled_tolerance(opt.tol_res, out.u, shift, g)) {
        out.status = SolveStatus::Converged;
        break;
      }
      prev = std::move(pol);
    }
    if (out.status != SolveStatus::Converged) out.status = SolveStatus::MaxIter;
    return out;
  }

  void factor(const Policy& pol, std::span<const double> shift, std::span<const double> bv,
              Eigen::VectorXd& b) {
    const bool same = have_lu_ && pol == lu_policy_ &&
                      std::equal(shift.begin(), shift.end(), lu_shift_.begin(), lu_shift_.end());
    Eigen::SparseMatrix<double> A;
    op_->assemble(pol, shift, bv, A, b);
    if (same) return;
    A.makeCompressed();
    lu_.analyzePattern(A);
    lu_.factorize(A);
    if (lu_.info() != Eigen::Success)
      throw Error("solver", "SINGULAR", "factorization failed for a frozen policy");
    lu_policy_ = pol;
    lu_shift_.assign(shift.begin(), shift.end());
    have_lu_ = true;
  }

  // u <- u + tau_i (Fh(u) + c u - g), tau_i below the per-node monotonicity limit.
  RawSolve pseudo_time(std::span<const double> shift, std::span<const double> g,
                       std::span<const double> bv, const SolveOptions& opt,
                       const std::vector<double>* initial) {
    const int n = op_->size();
    RawSolve out;
    out.u = initial ? *initial : std::vector<double>(n, 0.0);
    std::vector<double> tau(n), r(n);
    for (int i = 0; i < n; ++i) {
      const double c = shift.size() == 1 ? shift[0] : shift[i];
      tau[i] = opt.damping / (op_->max_diagonal(i) + std::abs(c));
    }
    const double bound = opt.blowup_threshold * std::max(1.0, sup_abs(bv));
    for (int it = 1; it <= opt.max_iter; ++it) {
      double res = 0.0;
      for (int i = 0; i < n; ++i) {
        const double c = shift.size() == 1 ? shift[0] : shift[i];
        r[i] = op_->eval_node(out.u, bv, i) + c * out.u[i] - (g.empty() ? 0.0 : g[i]);
        res = std::max(res, std::abs(r[i]));
      }
      out.history.push_back(res);
      out.residual = res;
      out.iterations = it;
      if (opt.trace) opt.trace(it, res);
      if (res <= scaled_tolerance(opt.tol_res, out.u, shift, g)) {
        out.status = SolveStatus::Converged;
        return out;
      }
      for (int i = 0; i < n; ++i) out.u[i] += tau[i] * r[i];
      if (!std::isfinite(res) || sup_abs(out.u) > bound) {
        out.status = SolveStatus::Diverged;
        return out;
      }
    }
    out.status = SolveStatus::MaxIter;
    return out;
  }

  const DiscreteOperator* op_;
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu_;
  Policy lu_policy_;
  std::vector<double> lu_shift_;
  bool have_lu_ = false;
};

inline SolveReport solve_dirichlet(const DirichletProblem& p, const SolveOptions& opt = {},
                                   const Field* initial = nullptr) {
  if (!p.op) throw Error("solver", "INVALID_PROBLEM", "no operator");
  const auto t0 = std::chrono::steady_clock::now();
  const DiscreteOperator& op = *p.op;
  const DomainMask& mask = op.mask();
  std::vector<double> shift =
      p.shift_field.empty() ? std::vector<double>{p.shift} : p.shift_field;
  std::vector<double> g = p.rhs.size() ? gather(mask, p.rhs) : std::vector<double>{};
  for (double x : g)
    if (!std::isfinite(x)) throw Error("solver", "INVALID_PROBLEM", "rhs is not finite");
  const auto bv = op.boundary_values(p.boundary);
  for (double x : bv)
    if (!std::isfinite(x)) throw Error("solver", "INVALID_PROBLEM", "boundary data not finite");
  std::optional<std::vector<double>> init;
  if (initial) init = gather(mask, *initial);
  DirichletSolver solver(op);
  RawSolve r = solver.solve(shift, g, bv, opt, init ? &*init : nullptr);
  SolveReport rep;
  rep.solution = scatter(mask, r.u);
  rep.status = r.status;
  rep.iterations = r.iterations;
  rep.residual = r.residual;
  rep.residual_history = std::move(r.history);
  rep.runtime = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

// psi with Fh(psi) = 0 and psi = phi on the boundary.
inline Field solve_linear_extension(const DiscreteOperator& op, const BoundaryData& phi,
                                    const SolveOptions& opt = {}) {
  DirichletProblem p;
  p.op = &op;
  p.boundary = phi;
  SolveReport r = solve_dirichlet(p, opt);
  if (r.status == SolveStatus::Diverged)
    throw Error("solver", "DIVERGED", "linear extension diverged");
  if (r.status != SolveStatus::Converged)
    throw Error("solver", "MAX_ITER", "linear extension did not converge");
  return r.solution;
}

struct ComparisonResult {
  bool ok = true;
  std::vector<int> violations;  // grid node indices
  double worst = 0.0;           // largest amount by which sub exceeds super
};

// u_super >= u_sub - tol at every node of the mask.
inline ComparisonResult check_discrete_comparison(const Field& u_sub, const Field& u_super,
                                                  const DomainMask& mask, double tol_cmp = 1e-8) {
  if (!(u_sub.grid() == mask.grid()) || !(u_super.grid() == mask.grid()))
    throw Error("solver", "MASK_MISMATCH", "fields live on different grids");
  ComparisonResult r;
  for (int n : mask.nodes()) {
    const double gap = u_sub[n] - u_super[n];
    if (gap > tol_cmp) {
      r.ok = false;
      r.violations.push_back(n);
    }
    r.worst = std::max(r.worst, gap);
  }
  return r;
}

}  // namespace oasis
