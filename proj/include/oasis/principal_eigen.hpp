#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "oasis/discrete_operator.hpp"
#include "oasis/error.hpp"
#include "oasis/geometry.hpp"
#include "oasis/solver.hpp"

namespace oasis {

enum class EigenStatus { Converged, NotConverged };

inline std::string to_string(EigenStatus s) {
  return s == EigenStatus::Converged ? "CONVERGED" : "NOT_CONVERGED";
}

struct EigenOptions {
  double tol_bracket = 1e-4;
  int max_iter = 500;
  SolveOptions inner = [] {
    SolveOptions o;
    o.tol_res = 1e-12;
    return o;
  }();
};

struct EigenResult {
  double lambda_lo = 0.0;
  double lambda_hi = 0.0;
  double lambda_est = 0.0;
  Field phi;
  std::vector<double> phi_unknowns;
  int iterations = 0;
  double residual = 0.0;
  EigenStatus status = EigenStatus::NotConverged;
  std::vector<std::pair<double, double>> history;

  double width() const { return lambda_hi - lambda_lo; }
  double relative_width() const { return width() / lambda_est; }
};

// Inverse power iteration Fh(psi_{k+1}) = -psi_k with zero boundary values,
// bracketed by Collatz-Wielandt ratios psi_k / psi_{k+1}.
inline EigenResult principal_eigen(const DiscreteOperator& op, const EigenOptions& opt = {}) {
  const DomainMask& mask = op.mask();
  if (mask.components() != 1)
    throw Error("eigen", "NEGATIVE_ITERATE", "domain mask is not connected");
  const int n = op.size();
  std::vector<double> psi = mask.distance();
  {
    const double m = sup_abs(psi);
    for (double& x : psi) x /= m;
  }
  const std::vector<double> bv(op.cuts(), 0.0);
  const std::vector<double> shift{0.0};
  DirichletSolver solver(op);
  EigenResult res;
  std::vector<double> g(n);
  for (int k = 1; k <= opt.max_iter; ++k) {
    for (int i = 0; i < n; ++i) g[i] = -psi[i];
    // warm start: the next iterate is close to psi / lambda
    std::vector<double> guess(n, 0.0);
    if (k > 1)
      for (int i = 0; i < n; ++i) guess[i] = psi[i] / res.lambda_est;
    RawSolve r = solver.solve(shift, g, bv, opt.inner, &guess);
    if (r.status == SolveStatus::Diverged)
      throw Error("eigen", "NEGATIVE_ITERATE", "inner solve diverged");
    std::vector<double>& next = r.u;
    double top = 0.0;
    for (int i = 0; i < n; ++i) {
      if (!(next[i] > 0.0))
        throw Error("eigen", "NEGATIVE_ITERATE", "iterate lost positivity");
      top = std::max(top, next[i]);
    }
    double lo = INFINITY, hi = -INFINITY;
    for (int i = 0; i < n; ++i) {
      if (next[i] <= 1e-12 * top) continue;
      const double q = psi[i] / next[i];
      lo = std::min(lo, q);
      hi = std::max(hi, q);
    }
    for (double& x : next) x /= top;
    psi = std::move(next);
    res.lambda_lo = lo;
    res.lambda_hi = hi;
    res.lambda_est = 0.5 * (lo + hi);
    res.iterations = k;
    res.history.emplace_back(lo, hi);
    if ((hi - lo) / res.lambda_est < opt.tol_bracket) {
      res.status = EigenStatus::Converged;
      break;
    }
  }
  double rmax = 0.0;
  for (int i = 0; i < n; ++i)
    rmax = std::max(rmax, std::abs(op.eval_node(psi, bv, i) + res.lambda_est * psi[i]));
  res.residual = rmax;
  res.phi = scatter(mask, psi);
  res.phi_unknowns = std::move(psi);
  return res;
}

struct MonotonicityCheck {
  bool holds = false;
  EigenResult small;
  EigenResult big;
  double gap = 0.0;  // lambda_est(small) - lambda_est(big)
};

// Domain monotonicity: lambda(small) >= lambda(big) - bracket slack for small inside big.
inline MonotonicityCheck eigen_monotonicity_check(const OperatorSpec& spec, const Grid2D& grid,
                                                  const DomainSpec& small, const DomainSpec& big,
                                                  const EigenOptions& opt = {}) {
  for (int n = 0; n < grid.size(); ++n) {
    const Point p = grid.node(n);
    if (big.signed_distance(p) > small.signed_distance(p) + 1e-12)
      throw Error("eigen", "NOT_NESTED", "first domain is not contained in the second");
  }
  MonotonicityCheck c;
  auto ms = std::make_shared<const DomainMask>(build_mask(grid, small));
  auto mb = std::make_shared<const DomainMask>(build_mask(grid, big));
  c.small = principal_eigen(DiscreteOperator(spec, ms), opt);
  c.big = principal_eigen(DiscreteOperator(spec, mb), opt);
  c.gap = c.small.lambda_est - c.big.lambda_est;
  c.holds = c.small.lambda_hi >= c.big.lambda_lo;
  return c;
}

}  // namespace oasis
