#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "oasis/discrete_operator.hpp"
#include "oasis/error.hpp"
#include "oasis/geometry.hpp"
#include "oasis/principal_eigen.hpp"
#include "oasis/solver.hpp"

namespace oasis {

enum class KKind { K1, K2 };

inline std::string to_string(KKind k) { return k == KKind::K1 ? "K1" : "K2"; }

struct ReactionSpec {
  double mu = 0.0;
  double p = 2.0;
  KKind kind = KKind::K1;
  double k0 = 1.0;
  double k1 = 1.0;
  DomainSpec oasis;                      // K2 only
  double ramp = 0.0;                     // K2 ramp width; 0 means 4h
  std::function<double(Point)> profile;  // optional K1 profile, k0 <= k <= k1

  void validate() const {
    if (!(p > 1.0)) throw Error("logistic", "INVALID_REACTION", "p must exceed 1");
    if (!std::isfinite(mu)) throw Error("logistic", "INVALID_REACTION", "mu is not finite");
    if (!(k1 > 0.0)) throw Error("logistic", "INVALID_REACTION", "k1 must be positive");
    if (kind == KKind::K1 && !(k0 > 0.0 && k0 <= k1))
      throw Error("logistic", "INVALID_REACTION", "K1 needs 0 < k0 <= k1");
    if (kind == KKind::K2 && oasis.empty())
      throw Error("logistic", "INVALID_REACTION", "K2 needs an oasis domain");
    if (ramp < 0.0) throw Error("logistic", "INVALID_REACTION", "negative ramp width");
  }
};

// k on every grid node.
inline Field reaction_field(const ReactionSpec& r, const Grid2D& grid) {
  r.validate();
  Field k(grid);
  if (r.kind == KKind::K1) {
    for (int n = 0; n < grid.size(); ++n) {
      const double v = r.profile ? r.profile(grid.node(n)) : r.k1;
      if (!(v >= r.k0 && v <= r.k1))
        throw Error("logistic", "INVALID_REACTION", "profile leaves [k0, k1]");
      k[n] = v;
    }
    return k;
  }
  const double w = r.ramp > 0.0 ? r.ramp : 4.0 * grid.h();
  for (int n = 0; n < grid.size(); ++n) {
    const double sd = r.oasis.signed_distance(grid.node(n));
    k[n] = sd <= 0.0 ? 0.0 : r.k1 * std::min(1.0, sd / w);
  }
  return k;
}

// Discrete problem Fh(u) + mu u = k u^p on a mask, boundary data on the cuts.
class LogisticProblem {
 public:
  LogisticProblem(std::shared_ptr<const DiscreteOperator> op, std::vector<double> k, double mu,
                  double p, BoundaryData bc = {})
      : op_(std::move(op)), k_(std::move(k)), mu_(mu), p_(p), bc_(std::move(bc)) {
    if (static_cast<int>(k_.size()) != op_->size())
      throw Error("logistic", "MASK_MISMATCH", "k does not match the unknowns");
    bv_ = op_->boundary_values(bc_);
    reaction_.mu = mu;
    reaction_.p = p;
    reaction_.k1 = 0.0;
    for (double v : k_) reaction_.k1 = std::max(reaction_.k1, v);
  }

  static LogisticProblem make(const Grid2D& grid, const DomainSpec& omega, const OperatorSpec& spec,
                              const ReactionSpec& r) {
    r.validate();
    auto mask = std::make_shared<const DomainMask>(build_mask(grid, omega));
    auto op = std::make_shared<const DiscreteOperator>(spec, mask);
    const Field kf = reaction_field(r, grid);
    LogisticProblem P(op, gather(*mask, kf), r.mu, r.p);
    P.reaction_ = r;
    P.omega_ = omega;
    return P;
  }

  const DiscreteOperator& op() const { return *op_; }
  std::shared_ptr<const DiscreteOperator> op_ptr() const { return op_; }
  const DomainMask& mask() const { return op_->mask(); }
  const Grid2D& grid() const { return op_->grid(); }
  int size() const { return op_->size(); }
  const std::vector<double>& k() const { return k_; }
  double k_max() const { return reaction_.k1 > 0.0 ? reaction_.k1 : 0.0; }
  double mu() const { return mu_; }
  double p() const { return p_; }
  const std::vector<double>& bv() const { return bv_; }
  const BoundaryData& boundary() const { return bc_; }
  const ReactionSpec& reaction() const { return reaction_; }
  const DomainSpec& omega() const { return omega_; }

  LogisticProblem with_mu(double mu) const {
    LogisticProblem q = *this;
    q.mu_ = mu;
    q.reaction_.mu = mu;
    return q;
  }

  double f(int i, double u) const { return k_[i] * std::pow(std::max(u, 0.0), p_); }

  double residual_at(std::span<const double> u, int i) const {
    return op_->eval_node(u, bv_, i) + mu_ * u[i] - f(i, u[i]);
  }

  std::vector<double> residual_vector(std::span<const double> u) const {
    std::vector<double> r(size());
    for (int i = 0; i < size(); ++i) r[i] = residual_at(u, i);
    return r;
  }

  double residual(std::span<const double> u) const {
    double m = 0.0;
    for (int i = 0; i < size(); ++i) m = std::max(m, std::abs(residual_at(u, i)));
    return m;
  }

  // roundoff allowance for the residual at node i
  double roundoff(std::span<const double> u, int i) const {
    return 1e-12 * (op_->stencil_magnitude(u, bv_, i) + std::abs(mu_ * u[i]) + f(i, u[i]));
  }

  // largest residual above the allowance; <= 0 means supersolution
  double super_excess(std::span<const double> w) const {
    double m = -INFINITY;
    for (int i = 0; i < size(); ++i) m = std::max(m, residual_at(w, i) - roundoff(w, i));
    return m;
  }
  double sub_excess(std::span<const double> w) const {
    double m = -INFINITY;
    for (int i = 0; i < size(); ++i) m = std::max(m, -residual_at(w, i) - roundoff(w, i));
    return m;
  }

 private:
  std::shared_ptr<const DiscreteOperator> op_;
  std::vector<double> k_;
  double mu_ = 0.0, p_ = 2.0;
  BoundaryData bc_;
  std::vector<double> bv_;
  ReactionSpec reaction_;
  DomainSpec omega_;
};

// Residual tolerance accepted for barriers at seams of patched functions.
inline double tol_barrier(const LogisticProblem& P, double C) {
  return 5.0 * P.grid().h() * std::pow(1.0 + C, P.p());
}

enum class BarrierKind { Constant, NestedDomains, DiscreteOasis };

inline std::string to_string(BarrierKind k) {
  switch (k) {
    case BarrierKind::Constant: return "constant";
    case BarrierKind::NestedDomains: return "nested";
    case BarrierKind::DiscreteOasis: return "discrete_oasis";
  }
  return "?";
}

struct BarrierSet {
  std::vector<double> w_minus, w_plus;  // on unknowns
  double alpha = 0.0;
  double C = 0.0;
  BarrierKind kind = BarrierKind::Constant;
  int halvings = 0;
  int doublings = 0;
  // nested-domain construction
  DomainSpec omega1, omega2;
  Field phi_omega2;
  double delta = 0.0;
  double alpha_cubic = 0.0;
  double lambda_omega2_lo = 0.0;
  // discrete oasis construction
  double amplitude = 0.0;
  double lambda_zero_set = 0.0;
  // checks
  double super_excess = 0.0;
  double sub_excess = 0.0;
  double tol_barrier = 0.0;
};

struct Subsolution {
  std::vector<double> w;
  double alpha = 0.0;
  double alpha_initial = 0.0;
  int halvings = 0;
};

// w- = alpha phi with alpha from the conservative end of the bracket.
inline Subsolution build_subsolution(const LogisticProblem& P, const EigenResult& eig) {
  if (static_cast<int>(eig.phi_unknowns.size()) != P.size())
    throw Error("logistic", "MASK_MISMATCH", "eigenfunction lives on another mask");
  if (!(P.mu() > eig.lambda_hi))
    throw Error("logistic", "NO_SUBSOLUTION", "mu does not exceed the eigenvalue bracket");
  const double k1 = P.k_max();
  if (!(k1 > 0.0)) throw Error("logistic", "NO_SUBSOLUTION", "k vanishes identically");
  Subsolution s;
  s.alpha_initial = s.alpha = std::pow((P.mu() - eig.lambda_hi) / k1, 1.0 / (P.p() - 1.0));
  s.w.resize(P.size());
  for (int h = 0; h <= 60; ++h) {
    for (int i = 0; i < P.size(); ++i) s.w[i] = s.alpha * eig.phi_unknowns[i];
    if (P.sub_excess(s.w) <= 0.0) {
      s.halvings = h;
      return s;
    }
    s.alpha *= 0.5;
  }
  throw Error("logistic", "NO_SUBSOLUTION", "discrete subsolution check keeps failing");
}

inline std::vector<double> build_supersolution_K1(const LogisticProblem& P) {
  const ReactionSpec& r = P.reaction();
  if (r.kind != KKind::K1) throw Error("logistic", "INVALID_REACTION", "reaction is not K1");
  if (!(P.mu() > 0.0)) throw Error("logistic", "INVALID_REACTION", "K1 supersolution needs mu > 0");
  const double C = std::pow(P.mu() / r.k0, 1.0 / (P.p() - 1.0));
  return std::vector<double>(P.size(), C);
}

// Signed-distance separation between the oasis and the outer boundary,
// measured over grid nodes of the closed oasis.
inline double oasis_gap(const Grid2D& grid, const DomainSpec& omega, const DomainSpec& oasis) {
  double gap = INFINITY;
  for (int n = 0; n < grid.size(); ++n) {
    const Point x = grid.node(n);
    if (oasis.signed_distance(x) <= 0.0) gap = std::min(gap, -omega.signed_distance(x));
  }
  if (!std::isfinite(gap))
    throw Error("logistic", "OASIS_UNRESOLVED", "no grid node inside the oasis");
  return gap;
}

struct BarrierOptions {
  int max_doublings = 10;
  int shrink_retries = 6;
  bool allow_discrete_oasis = true;
  EigenOptions eigen;
  const EigenResult* zero_set_eigen = nullptr;  // reuse when available
};

// Mask of the nodes where k vanishes, with staircase boundary.
inline std::shared_ptr<const DomainMask> zero_set_mask(const LogisticProblem& P) {
  std::vector<char> in(P.grid().size(), 0);
  int count = 0;
  for (int i = 0; i < P.size(); ++i)
    if (P.k()[i] == 0.0) {
      in[P.mask().node_of(i)] = 1;
      ++count;
    }
  if (count == 0) throw Error("logistic", "OASIS_UNRESOLVED", "k has no zero set");
  return std::make_shared<const DomainMask>(build_mask_from_nodes(P.grid(), in));
}

inline EigenResult zero_set_eigen(const LogisticProblem& P, const EigenOptions& opt = {}) {
  return principal_eigen(DiscreteOperator(P.op().spec(), zero_set_mask(P)), opt);
}

namespace detail {

inline bool nested_supersolution(const LogisticProblem& P, const BarrierOptions& opt, BarrierSet& B) {
  const ReactionSpec& r = P.reaction();
  const Grid2D& grid = P.grid();
  const DomainMask& mask = P.mask();
  const double h = grid.h();
  const double gap = oasis_gap(grid, P.omega(), r.oasis);
  if (gap < 4.0 * h) throw Error("logistic", "OASIS_TOO_CLOSE", "oasis within 4h of the boundary");
  double s2 = 0.8 * gap, s1 = 0.4 * gap;
  std::optional<EigenResult> e2;
  for (int attempt = 0; attempt <= opt.shrink_retries; ++attempt) {
    if (s1 < 2.0 * h) return false;
    B.omega2 = r.oasis.inflated(s2);
    auto m2 = std::make_shared<const DomainMask>(build_mask(grid, B.omega2));
    EigenResult e = principal_eigen(DiscreteOperator(P.op().spec(), m2), opt.eigen);
    if (P.mu() < e.lambda_lo) {
      e2 = std::move(e);
      break;
    }
    s2 *= 0.75;
    s1 = 0.5 * s2;
  }
  if (!e2) return false;
  B.omega1 = r.oasis.inflated(s1);
  B.phi_omega2 = e2->phi;
  B.lambda_omega2_lo = e2->lambda_lo;
  B.delta = 0.5 * s1;

  const int n = P.size();
  std::vector<double> d1(n);
  double phi_min = INFINITY, phi_seam = 0.0, k_collar = INFINITY, k_out = INFINITY;
  for (int i = 0; i < n; ++i) {
    const int node = mask.node_of(i);
    d1[i] = -B.omega1.signed_distance(grid.node(node));
    const double phi = B.phi_omega2[node];
    if (d1[i] >= 0.0) phi_min = std::min(phi_min, phi);
    if (std::abs(d1[i] - B.delta) <= h) phi_seam = std::max(phi_seam, phi);
    if (d1[i] > 0.0 && d1[i] < B.delta) k_collar = std::min(k_collar, P.k()[i]);
    if (d1[i] <= 0.0) k_out = std::min(k_out, P.k()[i]);
  }
  if (!(phi_min > 0.0) || !std::isfinite(k_collar) || !(k_collar > 0.0) || !(k_out > 0.0))
    return false;
  const double R = std::max(1.0, phi_seam / phi_min);
  const double Lambda = P.op().spec().Lambda;
  const double mu = std::max(P.mu(), 0.0);
  const double c1 = (6.0 * Lambda * 2.0 * (R - 1.0) / (B.delta * B.delta) + R * mu) / k_collar;
  const double c2 = mu / k_out;
  B.C = std::pow(std::max({c1, c2, 1e-12}), 1.0 / (P.p() - 1.0));

  for (int dbl = 0; dbl <= opt.max_doublings; ++dbl) {
    const double C = B.C;
    B.alpha_cubic = (R - 1.0) * C / (B.delta * B.delta * B.delta);
    B.w_plus.assign(n, C);
    for (int i = 0; i < n; ++i) {
      if (d1[i] <= 0.0) continue;
      const double phit = C / phi_min * B.phi_omega2[mask.node_of(i)];
      B.w_plus[i] = d1[i] < B.delta ? std::min(phit, C + B.alpha_cubic * d1[i] * d1[i] * d1[i])
                                    : phit;
    }
    B.super_excess = P.super_excess(B.w_plus);
    if (B.super_excess <= 0.0) {
      B.doublings = dbl;
      B.kind = BarrierKind::NestedDomains;
      return true;
    }
    B.C *= 2.0;
  }
  return false;
}

// Fallback: A phi_Z on the zero set of k, a constant elsewhere.
inline bool discrete_oasis_supersolution(const LogisticProblem& P, const BarrierOptions& opt,
                                         BarrierSet& B) {
  std::optional<EigenResult> own;
  const EigenResult* ez = opt.zero_set_eigen;
  if (!ez) {
    own = zero_set_eigen(P, opt.eigen);
    ez = &*own;
  }
  B.lambda_zero_set = ez->lambda_lo;
  if (!(P.mu() < ez->lambda_lo)) return false;
  const int n = P.size();
  std::vector<int> zs(n, -1);  // unknown -> zero-set unknown
  auto zmask = zero_set_mask(P);
  double phi_min = INFINITY, k_min = INFINITY;
  for (int i = 0; i < n; ++i) {
    zs[i] = zmask->unknown_of(P.mask().node_of(i));
    if (zs[i] >= 0)
      phi_min = std::min(phi_min, ez->phi_unknowns[zs[i]]);
    else
      k_min = std::min(k_min, P.k()[i]);
  }
  if (!(k_min > 0.0)) return false;
  double C = std::pow(std::max(1.01 * P.mu() / k_min, 1e-12), 1.0 / (P.p() - 1.0));
  double A = C / phi_min;
  for (int pass = 0; pass < 400; ++pass) {
    B.w_plus.assign(n, C);
    for (int i = 0; i < n; ++i)
      if (zs[i] >= 0) B.w_plus[i] = A * ez->phi_unknowns[zs[i]];
    bool bad_z = false, bad_off = false;
    for (int i = 0; i < n; ++i) {
      if (P.residual_at(B.w_plus, i) <= P.roundoff(B.w_plus, i)) continue;
      (zs[i] >= 0 ? bad_z : bad_off) = true;
    }
    if (!bad_z && !bad_off) {
      B.C = C;
      B.amplitude = A;
      B.doublings = pass;
      B.super_excess = P.super_excess(B.w_plus);
      B.kind = BarrierKind::DiscreteOasis;
      return true;
    }
    if (bad_z) A *= 2.0;
    if (bad_off) {
      C *= 2.0;
      A *= 2.0;
    }
    if (!std::isfinite(A) || A > 1e250) return false;
  }
  return false;
}

}  // namespace detail

// Supersolution under K2: nested-domain construction, discrete oasis fallback.
inline BarrierSet build_supersolution_K2(const LogisticProblem& P, const BarrierOptions& opt = {}) {
  const ReactionSpec& r = P.reaction();
  if (r.kind != KKind::K2) throw Error("logistic", "INVALID_REACTION", "reaction is not K2");
  if (P.omega().empty())
    throw Error("logistic", "INVALID_REACTION", "problem was not built from a domain");
  BarrierSet B;
  if (detail::nested_supersolution(P, opt, B)) return B;
  BarrierSet F;
  if (opt.allow_discrete_oasis && detail::discrete_oasis_supersolution(P, opt, F)) return F;
  throw Error("logistic", "NO_SUPERSOLUTION",
              "mu is too close to the oasis eigenvalue for a certified supersolution");
}

// Ordered pair w- <= w+ for the problem on Omega.
inline BarrierSet build_barriers(const LogisticProblem& P, const EigenResult& eig_omega,
                                 const BarrierOptions& opt = {}) {
  Subsolution s = build_subsolution(P, eig_omega);
  BarrierSet B;
  if (P.reaction().kind == KKind::K1) {
    B.w_plus = build_supersolution_K1(P);
    B.C = B.w_plus.empty() ? 0.0 : B.w_plus[0];
    B.kind = BarrierKind::Constant;
    B.super_excess = P.super_excess(B.w_plus);
  } else {
    B = build_supersolution_K2(P, opt);
  }
  for (int i = 0; i < P.size(); ++i)
    while (s.w[i] > B.w_plus[i]) {
      s.alpha *= 0.5;
      ++s.halvings;
      for (int j = 0; j < P.size(); ++j) s.w[j] = s.alpha * eig_omega.phi_unknowns[j];
    }
  B.w_minus = std::move(s.w);
  B.alpha = s.alpha;
  B.halvings = s.halvings;
  B.sub_excess = P.sub_excess(B.w_minus);
  B.tol_barrier = tol_barrier(P, B.C);
  return B;
}

// Global tally of ordering checks made by every monotone iteration.
struct OrderingAudit {
  static std::atomic<long>& checks() {
    static std::atomic<long> c{0};
    return c;
  }
  static std::atomic<long>& violations() {
    static std::atomic<long> v{0};
    return v;
  }
};

enum class ShiftMode { Uniform, Adaptive };

struct MonotoneOptions {
  ShiftMode shift = ShiftMode::Adaptive;
  double tol_fix = 1e-10;  // relative to 1 + sup u
  double tol_cmp = 1e-8;   // relative to 1 + |u|
  int max_iter = 200000;
  double refresh_drop = 0.2;
  std::function<void(int, double)> trace;
  SolveOptions inner = [] {
    SolveOptions o;
    o.tol_res = 1e-15;
    o.blowup_threshold = INFINITY;  // barriers may be huge
    return o;
  }();
};

struct MonotoneReport {
  std::vector<double> u;  // unknowns
  Field solution;
  SolveStatus status = SolveStatus::MaxIter;
  int iterations = 0;
  int refreshes = 0;
  std::vector<double> increments;
  double residual = 0.0;     // sup |Fh(u) + mu u - k u^p|
  double tol_res_nl = 0.0;
  double sup = 0.0;
  double runtime = 0.0;

  bool certified() const { return status == SolveStatus::Converged && residual <= tol_res_nl; }
};

inline double tol_res_nl(const LogisticProblem& P, double sup) {
  const double h = P.grid().h();
  return std::max(1e-7, 5.0 * h * h) * std::pow(1.0 + sup, P.p());
}

// Shifted iteration Fh(u') + (mu - mu0) u' = k u^p - mu0 u from u = w+.
inline MonotoneReport monotone_solve(const LogisticProblem& P, std::span<const double> w_minus,
                                     std::span<const double> w_plus,
                                     const MonotoneOptions& opt = {}) {
  const auto t0 = std::chrono::steady_clock::now();
  const int n = P.size();
  if (static_cast<int>(w_plus.size()) != n ||
      (!w_minus.empty() && static_cast<int>(w_minus.size()) != n))
    throw Error("logistic", "MASK_MISMATCH", "barriers do not match the unknowns");
  const double mu = P.mu(), p = P.p();
  MonotoneReport rep;
  std::vector<double> u(w_plus.begin(), w_plus.end());
  std::vector<double> mu0(n), shift(n), g(n), uref;
  DirichletSolver solver(P.op());

  const double C1 = sup_abs(u);
  auto refresh = [&] {
    uref = u;
    for (int i = 0; i < n; ++i) {
      const double slope = opt.shift == ShiftMode::Uniform
                               ? p * P.k_max() * std::pow(C1, p - 1.0)
                               : p * P.k()[i] * std::pow(std::max(u[i], 0.0), p - 1.0);
      mu0[i] = 1.01 * std::max(std::max(mu, 0.0), slope);
      shift[i] = mu - mu0[i];
    }
  };
  refresh();
  const double tol_stop = opt.tol_fix;
  double prev = -1.0;
  for (int it = 1; it <= opt.max_iter; ++it) {
    for (int i = 0; i < n; ++i) g[i] = P.f(i, u[i]) - mu0[i] * u[i];
    RawSolve r = solver.solve(shift, g, P.bv(), opt.inner, &u);
    if (r.status == SolveStatus::Diverged) {
      rep.status = SolveStatus::Diverged;
      rep.iterations = it;
      break;
    }
    OrderingAudit::checks().fetch_add(1);
    double step = 0.0;
    for (int i = 0; i < n; ++i) {
      const double tol = opt.tol_cmp * (1.0 + std::abs(u[i]));
      const bool up = r.u[i] > u[i] + tol;
      const bool low = !w_minus.empty() && r.u[i] < w_minus[i] - tol;
      if (up || low) {
        OrderingAudit::violations().fetch_add(1);
        throw Error("logistic", "ORDERING_VIOLATION",
                    std::string(up ? "iterate increased" : "iterate fell below w-") +
                        " at unknown " + std::to_string(i) + " in step " + std::to_string(it));
      }
      step = std::max(step, std::abs(r.u[i] - u[i]));
    }
    u = std::move(r.u);
    rep.increments.push_back(step);
    rep.iterations = it;
    if (opt.trace) opt.trace(it, step);
    const double scale = 1.0 + sup_abs(u);
    bool done = step == 0.0;
    if (!done && prev > 0.0) {
      const double rho = std::min(step / prev, 0.99);
      done = step / (1.0 - rho) <= tol_stop * scale;
    }
    if (done) {
      rep.status = SolveStatus::Converged;
      break;
    }
    prev = step;
    if (opt.shift == ShiftMode::Adaptive) {
      bool drop = false;
      for (int i = 0; i < n && !drop; ++i)
        drop = u[i] < (1.0 - opt.refresh_drop) * uref[i];
      if (drop) {
        refresh();
        ++rep.refreshes;
      }
    }
  }
  rep.residual = P.residual(u);
  rep.sup = sup_abs(u);
  rep.tol_res_nl = tol_res_nl(P, rep.sup);
  rep.solution = scatter(P.mask(), u);
  rep.u = std::move(u);
  rep.runtime = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

inline MonotoneReport monotone_solve(const LogisticProblem& P, const BarrierSet& B,
                                     const MonotoneOptions& opt = {}) {
  return monotone_solve(P, B.w_minus, B.w_plus, opt);
}

// Largest (u - psi) / d over nodes within `width` of the outer boundary.
inline double boundary_constant(const Field& u, const Field& psi, const DomainMask& mask,
                                const DomainSpec& outer, double width) {
  double C = 0.0;
  const Grid2D& g = mask.grid();
  for (int node : mask.nodes()) {
    const double d = -outer.signed_distance(g.node(node));
    if (d <= 0.0 || d > width) continue;
    C = std::max(C, (u[node] - (psi.size() ? psi[node] : 0.0)) / d);
  }
  return C;
}

// Problem on Omega minus the closed hole with data 0 outside and phi on the hole.
struct AnnulusOptions {
  std::vector<double> delta_seq{1e-1, 1e-2, 1e-3, 0.0};
  MonotoneOptions mono;
  double collar = 0.0;  // outer collar width for the boundary fit; 0 means 0.1 gap
  EigenOptions eigen;
};

class AnnulusSolver {
 public:
  using Options = AnnulusOptions;

  struct Result {
    Field solution;
    MonotoneReport report;
    std::vector<std::pair<double, Field>> by_delta;
    Field psi;
    double C_fit = 0.0;     // max u / d on the outer collar
    double C_global = 0.0;  // max u / d over the whole annulus
    double M = 0.0;
  };

  AnnulusSolver(const Grid2D& grid, const DomainSpec& omega, const DomainSpec& hole,
                const OperatorSpec& spec, const ReactionSpec& reaction, double lambda_omega_hi,
                Options opt = {})
      : grid_(grid), omega_(omega), hole_(hole), spec_(spec), reaction_(reaction),
        lambda_hi_(lambda_omega_hi), opt_(std::move(opt)) {
    reaction_.validate();
    if (reaction_.kind != KKind::K2)
      throw Error("logistic", "INVALID_REACTION", "annulus problem needs a K2 reaction");
    auto mask = std::make_shared<const DomainMask>(
        build_mask(grid, DomainSpec::difference(omega, hole)));
    op_ = std::make_shared<const DiscreteOperator>(spec, mask);
    k_ = gather(*mask, reaction_field(reaction_, grid));
    for (double v : k_)
      if (!(v > 0.0)) throw Error("logistic", "INVALID_REACTION", "k must be positive on the annulus");
    gap_ = INFINITY;
    for (int c = 0; c < op_->cuts(); ++c)
      if (op_->cut_component(c) == BoundaryComponent::Inner)
        gap_ = std::min(gap_, -omega.signed_distance(op_->cut_point(c)));
    if (!std::isfinite(gap_)) gap_ = 0.0;
  }

  const DiscreteOperator& op() const { return *op_; }
  const DomainMask& mask() const { return op_->mask(); }
  const std::vector<double>& k() const { return k_; }
  const DomainSpec& hole() const { return hole_; }
  double gap() const { return gap_; }
  double mu() const { return reaction_.mu; }

  Result solve(const BoundaryData& inner_data, const std::vector<double>* lower = nullptr) {
    const BoundaryData bc = BoundaryData::from(
        [inner_data](Point p, BoundaryComponent c) {
          return c == BoundaryComponent::Outer ? 0.0 : inner_data.at(p, c);
        });
    const int n = op_->size();
    Result res;
    std::vector<double> floor = lower ? *lower : std::vector<double>(n, 0.0);
    for (std::size_t s = 0; s < opt_.delta_seq.size(); ++s) {
      const double delta = opt_.delta_seq[s];
      std::vector<double> kd = k_;
      for (double& v : kd) v += delta;
      LogisticProblem P(op_, kd, reaction_.mu, reaction_.p, bc);
      std::vector<double> wplus = supersolution(P, delta, res.M);
      MonotoneReport rep = monotone_solve(P, floor, wplus, opt_.mono);
      if (rep.status != SolveStatus::Converged)
        throw Error("logistic", rep.status == SolveStatus::Diverged ? "DIVERGED" : "MAX_ITER",
                    "annulus iteration did not converge at delta " + std::to_string(delta));
      if (s > 0) {
        const auto cmp = check_discrete_comparison(res.by_delta.back().second, rep.solution,
                                                   mask(), opt_.mono.tol_cmp * (1.0 + rep.sup));
        if (!cmp.ok)
          throw Error("logistic", "ORDERING_VIOLATION", "solutions not monotone in delta");
      }
      floor = rep.u;
      res.by_delta.emplace_back(delta, rep.solution);
      res.report = std::move(rep);
    }
    res.solution = res.report.solution;
    res.psi = solve_linear_extension(*op_, bc);
    const double width = opt_.collar > 0.0 ? opt_.collar : 0.1 * gap_;
    res.C_fit = boundary_constant(res.solution, Field(), mask(), omega_, width);
    res.C_global = boundary_constant(res.solution, Field(), mask(), omega_, INFINITY);
    return res;
  }

  Result solve(double inner_value, const std::vector<double>* lower = nullptr) {
    return solve(BoundaryData::constant(inner_value), lower);
  }

 private:
  // M w, with w solving the full-domain problem at mu* and k + max(delta, 1e-3).
  std::vector<double> supersolution(const LogisticProblem& P, double delta, double& M) {
    const double eps = std::max(delta, 1e-3);
    const std::vector<double>& w = full_domain_solution(eps);
    const int n = op_->size();
    std::vector<double> ws(n);
    const DomainMask& full = *full_mask_;
    for (int i = 0; i < n; ++i) ws[i] = w[full.unknown_of(op_->mask().node_of(i))];
    // start from M w >= phi at the unknowns next to the hole
    for (int c = 0; c < op_->cuts(); ++c)
      if (op_->cut_component(c) == BoundaryComponent::Inner)
        M = std::max(M, P.bv()[c] / ws[op_->cut_owner(c)]);
    M = std::max(M, 1.0);
    std::vector<double> out(n);
    for (int t = 0; t < 400; ++t) {
      for (int i = 0; i < n; ++i) out[i] = M * ws[i];
      if (P.super_excess(out) <= 0.0) return out;
      M *= 2.0;
    }
    throw Error("logistic", "NO_SUPERSOLUTION", "annulus supersolution check keeps failing");
  }

  const std::vector<double>& full_domain_solution(double eps) {
    auto it = w_cache_.find(eps);
    if (it != w_cache_.end()) return it->second;
    if (!full_mask_) {
      full_mask_ = std::make_shared<const DomainMask>(build_mask(grid_, omega_));
      full_op_ = std::make_shared<const DiscreteOperator>(spec_, full_mask_);
      eig_ = principal_eigen(*full_op_, opt_.eigen);
    }
    std::vector<double> k = gather(*full_mask_, reaction_field(reaction_, grid_));
    for (double& v : k) v += eps;
    const double mu_star = 1.5 * std::max({reaction_.mu, lambda_hi_, eig_.lambda_hi}) + 1.0;
    LogisticProblem W(full_op_, k, mu_star, reaction_.p);
    const double C = std::pow(mu_star / eps, 1.0 / (reaction_.p - 1.0));
    std::vector<double> wplus(W.size(), C);
    Subsolution s = build_subsolution(W, eig_);
    MonotoneReport rep = monotone_solve(W, s.w, wplus, opt_.mono);
    if (rep.status != SolveStatus::Converged)
      throw Error("logistic", "MAX_ITER", "auxiliary full-domain problem did not converge");
    return w_cache_.emplace(eps, std::move(rep.u)).first->second;
  }

  Grid2D grid_;
  DomainSpec omega_, hole_;
  OperatorSpec spec_;
  ReactionSpec reaction_;
  double lambda_hi_ = 0.0;
  Options opt_;
  std::shared_ptr<const DiscreteOperator> op_;
  std::vector<double> k_;
  double gap_ = 0.0;
  std::shared_ptr<const DomainMask> full_mask_;
  std::shared_ptr<const DiscreteOperator> full_op_;
  EigenResult eig_;
  std::map<double, std::vector<double>> w_cache_;
};

inline AnnulusSolver::Result solve_annulus(const Grid2D& grid, const DomainSpec& omega,
                                           const OperatorSpec& spec, const ReactionSpec& reaction,
                                           const BoundaryData& phi_inner, double lambda_omega_hi,
                                           AnnulusSolver::Options opt = {}) {
  AnnulusSolver s(grid, omega, reaction.oasis, spec, reaction, lambda_omega_hi, std::move(opt));
  return s.solve(phi_inner);
}

enum class Verdict { NoSolutionLow, Exists, NoSolutionHigh, Unresolved };

inline std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::NoSolutionLow: return "NO_SOLUTION_LOW";
    case Verdict::Exists: return "EXISTS";
    case Verdict::NoSolutionHigh: return "NO_SOLUTION_HIGH";
    case Verdict::Unresolved: return "UNRESOLVED";
  }
  return "?";
}

struct ClassifyOptions {
  MonotoneOptions mono;
  BarrierOptions barriers;
  bool probe_divergence = true;
  int probe_max_iter = 20000000;
};

struct Classification {
  Verdict verdict = Verdict::Unresolved;
  bool pipeline_success = false;
  bool agrees = false;
  std::string pipeline_error;  // qualified code when the pipeline failed
  std::optional<MonotoneReport> report;
  std::optional<BarrierSet> barriers;
  std::optional<SolveStatus> probe;
  double band_lo = 0.0, band_hi = 0.0;  // K2 upper band
};

// Unshifted fixed-point probe from large data on the oasis.
inline SolveStatus oasis_divergence_probe(const LogisticProblem& P, int max_iter = 20000000) {
  const ReactionSpec& r = P.reaction();
  auto m0 = std::make_shared<const DomainMask>(build_mask(P.grid(), r.oasis));
  DiscreteOperator op0(P.op().spec(), m0);
  SolveOptions o;
  o.method = SolveMethod::FixedPoint;
  o.max_iter = max_iter;
  o.tol_res = 1e-12;
  const std::vector<double> shift{P.mu()}, bv(op0.cuts(), 0.0);
  std::vector<double> init(op0.size(), 1e4);
  DirichletSolver s(op0);
  return s.solve(shift, {}, bv, o, &init).status;
}

// Verdict from the brackets, then the constructive pipeline as a cross-check.
inline Classification classify_mu(const LogisticProblem& P, const EigenResult& eig_omega,
                                  const EigenResult* eig_oasis = nullptr,
                                  const ClassifyOptions& opt = {}) {
  Classification c;
  const double mu = P.mu();
  const bool k2 = P.reaction().kind == KKind::K2;
  std::optional<EigenResult> ez_own;
  const EigenResult* ez = opt.barriers.zero_set_eigen;
  if (k2) {
    if (!eig_oasis) throw Error("logistic", "INVALID_ARGUMENT", "K2 needs the oasis eigenvalue");
    if (!ez) {
      ez_own = zero_set_eigen(P, opt.barriers.eigen);
      ez = &*ez_own;
    }
    c.band_lo = std::min(eig_oasis->lambda_lo, ez->lambda_lo);
    c.band_hi = std::max(eig_oasis->lambda_hi, ez->lambda_hi);
  }
  if (mu < eig_omega.lambda_lo)
    c.verdict = Verdict::NoSolutionLow;
  else if (mu <= eig_omega.lambda_hi)
    c.verdict = Verdict::Unresolved;
  else if (!k2 || mu < c.band_lo)
    c.verdict = Verdict::Exists;
  else if (mu <= c.band_hi)
    c.verdict = Verdict::Unresolved;
  else
    c.verdict = Verdict::NoSolutionHigh;

  BarrierOptions bo = opt.barriers;
  bo.zero_set_eigen = ez;
  try {
    BarrierSet B = build_barriers(P, eig_omega, bo);
    MonotoneReport rep = monotone_solve(P, B, opt.mono);
    c.pipeline_success = rep.status == SolveStatus::Converged;
    if (!c.pipeline_success) c.pipeline_error = "logistic." + to_string(rep.status);
    c.barriers = std::move(B);
    c.report = std::move(rep);
  } catch (const Error& e) {
    if (e.code() == "ORDERING_VIOLATION") throw;
    c.pipeline_success = false;
    c.pipeline_error = e.qualified_code();
  }
  switch (c.verdict) {
    case Verdict::Exists: c.agrees = c.pipeline_success; break;
    case Verdict::NoSolutionLow: c.agrees = !c.pipeline_success; break;
    case Verdict::NoSolutionHigh:
      c.agrees = !c.pipeline_success;
      if (opt.probe_divergence) {
        c.probe = oasis_divergence_probe(P, opt.probe_max_iter);
        c.agrees = c.agrees && *c.probe == SolveStatus::Diverged;
      }
      break;
    case Verdict::Unresolved: c.agrees = true; break;
  }
  return c;
}

}  // namespace oasis
