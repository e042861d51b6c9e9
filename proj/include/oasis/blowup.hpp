#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "oasis/error.hpp"
#include "oasis/geometry.hpp"
#include "oasis/logistic.hpp"
#include "oasis/principal_eigen.hpp"

namespace oasis {

struct BlowupOptions {
  double d_probe = 0.0;  // 0 means 0.1 gap
  double sat_tol = 1e-2;
  double tol_cmp = 1e-8;  // relative to 1 + |u|
  AnnulusOptions annulus = [] {
    AnnulusOptions o;
    o.delta_seq = {0.0};
    return o;
  }();
};

struct BlowupStep {
  double parameter = 0.0;  // inner datum n, or hole inflation
  Field u;
  double sup_probe = 0.0;
  double saturation = std::numeric_limits<double>::quiet_NaN();  // change from the previous step
  double C_fit = 0.0;
  int iterations = 0;
};

struct BlowupResult {
  Field minimal_candidate;
  Field maximal_candidate;
  std::vector<double> data_sequence;
  std::vector<double> domain_sequence;
  std::vector<BlowupStep> steps;
  std::vector<int> probe;  // grid nodes
  double saturation = std::numeric_limits<double>::quiet_NaN();
  bool saturated = false;
  double inner_growth = 0.0;  // fraction of rays increasing toward the hole
  double gap = 0.0;
};

inline std::vector<double> default_n_seq(double scale = 1.0, int top = 12) {
  std::vector<double> s;
  for (int k = 0; k <= top; ++k) s.push_back(std::ldexp(scale, k));
  return s;
}

// Grid nodes of `mask` at signed distance >= d_probe from the oasis.
inline std::vector<int> probe_set(const DomainMask& mask, const DomainSpec& oasis, double d_probe) {
  std::vector<int> out;
  for (int n : mask.nodes())
    if (oasis.signed_distance(mask.grid().node(n)) >= d_probe) out.push_back(n);
  return out;
}

// sup over probe nodes of |a - b| / (1 + |b|)
inline double relative_change(const Field& a, const Field& b, const std::vector<int>& probe) {
  double m = 0.0;
  for (int n : probe) m = std::max(m, std::abs(a[n] - b[n]) / (1.0 + std::abs(b[n])));
  return m;
}

// Along axis rays leaving the hole, the last three values rise toward it.
inline double inner_growth_fraction(const Field& u, const DiscreteOperator& op) {
  const DomainMask& m = op.mask();
  const Grid2D& g = m.grid();
  int rays = 0, rising = 0;
  for (int c = 0; c < op.cuts(); ++c) {
    if (op.cut_component(c) != BoundaryComponent::Inner) continue;
    const int owner = m.node_of(op.cut_owner(c));
    const Point cp = op.cut_point(c), x = g.node(owner);
    const double dx = cp.x - x.x, dy = cp.y - x.y;
    int si = 0, sj = 0;
    if (std::abs(dy) < 1e-12 * g.h())
      si = dx > 0 ? -1 : 1;
    else if (std::abs(dx) < 1e-12 * g.h())
      sj = dy > 0 ? -1 : 1;
    else
      continue;
    const int i = g.col(owner), j = g.row(owner);
    if (!g.in_box(i + 2 * si, j + 2 * sj)) continue;
    const int b = g.index(i + si, j + sj), a = g.index(i + 2 * si, j + 2 * sj);
    if (!m.inside(b) || !m.inside(a)) continue;
    ++rays;
    if (u[owner] > u[b] && u[b] > u[a]) ++rising;
  }
  return rays ? static_cast<double>(rising) / rays : 0.0;
}

// Increasing inner data n on the fixed annulus.
inline BlowupResult minimal_blowup(const Grid2D& grid, const DomainSpec& omega,
                                   const OperatorSpec& spec, const ReactionSpec& reaction,
                                   const std::vector<double>& n_seq, const BlowupOptions& opt = {}) {
  if (n_seq.empty()) throw Error("blowup", "INVALID_ARGUMENT", "empty data sequence");
  for (std::size_t k = 1; k < n_seq.size(); ++k)
    if (!(n_seq[k] > n_seq[k - 1]))
      throw Error("blowup", "INVALID_ARGUMENT", "data sequence must increase");
  AnnulusSolver S(grid, omega, reaction.oasis, spec, reaction, 0.0, opt.annulus);
  BlowupResult res;
  res.gap = S.gap();
  const double d_probe = opt.d_probe > 0.0 ? opt.d_probe : 0.1 * res.gap;
  res.probe = probe_set(S.mask(), reaction.oasis, d_probe);
  res.data_sequence = n_seq;
  std::vector<double> floor;
  for (double n : n_seq) {
    auto r = S.solve(n, floor.empty() ? nullptr : &floor);
    BlowupStep st;
    st.parameter = n;
    st.u = r.solution;
    st.C_fit = r.C_fit;
    st.iterations = r.report.iterations;
    for (int node : res.probe) st.sup_probe = std::max(st.sup_probe, st.u[node]);
    if (!res.steps.empty()) {
      const Field& prev = res.steps.back().u;
      for (int node : S.mask().nodes())
        if (st.u[node] < prev[node] - opt.tol_cmp * (1.0 + std::abs(prev[node])))
          throw Error("blowup", "ORDERING_VIOLATION", "candidate decreased as the datum grew");
      st.saturation = relative_change(st.u, prev, res.probe);
    }
    floor = r.report.u;
    res.steps.push_back(std::move(st));
  }
  res.minimal_candidate = res.steps.back().u;
  res.saturation = res.steps.back().saturation;
  res.saturated = res.saturation <= opt.sat_tol;
  res.inner_growth = inner_growth_fraction(res.minimal_candidate, S.op());
  return res;
}

// Fixed large datum on holes shrinking toward the oasis.
inline BlowupResult maximal_blowup(const Grid2D& grid, const DomainSpec& omega,
                                   const OperatorSpec& spec, const ReactionSpec& reaction,
                                   const std::vector<double>& inflation_seq, double n_big,
                                   const BlowupOptions& opt = {}) {
  if (inflation_seq.empty()) throw Error("blowup", "INVALID_ARGUMENT", "empty inflation sequence");
  for (std::size_t k = 0; k < inflation_seq.size(); ++k) {
    const double s = inflation_seq[k];
    if (s < 0.0 || (k > 0 && !(s < inflation_seq[k - 1])))
      throw Error("blowup", "INVALID_ARGUMENT", "inflations must decrease and be nonnegative");
    if (s > 0.0 && s < 2.0 * grid.h())
      throw Error("blowup", "NESTED_DOMAIN_UNRESOLVED", "inflation below 2h");
  }
  BlowupResult res;
  res.domain_sequence = inflation_seq;
  res.data_sequence = {n_big};
  res.gap = oasis_gap(grid, omega, reaction.oasis);
  const double d_probe = opt.d_probe > 0.0 ? opt.d_probe : 0.1 * res.gap;
  // common probe set: beyond the largest hole as well
  const double reach = std::max(d_probe, inflation_seq.front() + grid.h());
  auto full = build_mask(grid, DomainSpec::difference(omega, reaction.oasis.inflated(inflation_seq.front())));
  res.probe = probe_set(full, reaction.oasis, reach);
  for (double s : inflation_seq) {
    const DomainSpec hole = s > 0.0 ? reaction.oasis.inflated(s) : reaction.oasis;
    AnnulusSolver S(grid, omega, hole, spec, reaction, 0.0, opt.annulus);
    auto r = S.solve(n_big);
    BlowupStep st;
    st.parameter = s;
    st.u = r.solution;
    st.C_fit = r.C_fit;
    st.iterations = r.report.iterations;
    for (int node : res.probe) st.sup_probe = std::max(st.sup_probe, st.u[node]);
    if (!res.steps.empty()) {
      const Field& prev = res.steps.back().u;
      for (int node : res.probe)
        if (st.u[node] > prev[node] + opt.tol_cmp * (1.0 + std::abs(prev[node])))
          throw Error("blowup", "ORDERING_VIOLATION", "candidate grew as the hole shrank");
      st.saturation = relative_change(st.u, prev, res.probe);
    }
    res.steps.push_back(std::move(st));
    if (s == inflation_seq.back()) res.inner_growth = inner_growth_fraction(r.solution, S.op());
  }
  res.maximal_candidate = res.steps.back().u;
  res.saturation = res.steps.back().saturation;
  res.saturated = !(res.saturation > opt.sat_tol);
  return res;
}

// Largest amount by which `lower` exceeds `upper` on the probe nodes, relative.
inline double sandwich_excess(const Field& lower, const Field& upper, const std::vector<int>& probe) {
  double m = -INFINITY;
  for (int n : probe) m = std::max(m, (lower[n] - upper[n]) / (1.0 + std::abs(upper[n])));
  return m;
}

struct LowRow {
  double eps = 0.0, mu = 0.0;
  double sup = 0.0;
  double distance = 0.0;  // |u / sup u - phi|
  int iterations = 0;
};

struct LowTable {
  std::vector<LowRow> rows;
  bool sup_decreasing = true;
  bool distance_decreasing = true;
};

// mu = lambda_hi + eps: u -> 0 and u / sup u -> phi.
inline LowTable asymptotics_low(const LogisticProblem& P, const EigenResult& eig,
                                const std::vector<double>& eps_seq,
                                const MonotoneOptions& mono = {}) {
  LowTable t;
  for (double eps : eps_seq) {
    LowRow row;
    row.eps = eps;
    row.mu = eig.lambda_hi + eps;
    const LogisticProblem Q = P.with_mu(row.mu);
    MonotoneReport rep = monotone_solve(Q, build_barriers(Q, eig), mono);
    if (rep.status != SolveStatus::Converged)
      throw Error("blowup", "MAX_ITER", "low-end solve did not converge");
    row.sup = rep.sup;
    row.iterations = rep.iterations;
    for (int i = 0; i < Q.size(); ++i)
      row.distance = std::max(row.distance, std::abs(rep.u[i] / rep.sup - eig.phi_unknowns[i]));
    if (!t.rows.empty()) {
      t.sup_decreasing = t.sup_decreasing && row.sup < t.rows.back().sup;
      t.distance_decreasing = t.distance_decreasing && row.distance < t.rows.back().distance;
    }
    t.rows.push_back(row);
  }
  return t;
}

struct HighRow {
  double eps = 0.0, mu = 0.0;
  bool resolved = false;
  double inf_oasis = 0.0;
  double distance_oasis = 0.0;  // on the oasis, |u / sup_oasis u - phi_oasis|
  double probe_distance = 0.0;  // relative, against the minimal blow-up candidate
  int iterations = 0;
  Field u;
};

struct HighTable {
  std::vector<HighRow> rows;
  bool inf_increasing = true;
  bool distance_decreasing = true;
  bool probe_decreasing = true;
};

// mu = lambda_lo(oasis) - eps: u blows up on the oasis, approaches the
// minimal blow-up solution away from it.
inline HighTable asymptotics_high(const LogisticProblem& P, const EigenResult& eig_omega,
                                  const EigenResult& eig_oasis, const std::vector<double>& eps_seq,
                                  const Field* minimal = nullptr,
                                  const std::vector<int>& probe = {},
                                  const MonotoneOptions& mono = {}, const BarrierOptions& bo = {}) {
  if (P.reaction().kind != KKind::K2)
    throw Error("blowup", "INVALID_ARGUMENT", "high-end asymptotics need a K2 reaction");
  const std::vector<int> oasis_nodes = build_mask(P.grid(), P.reaction().oasis).nodes();
  HighTable t;
  int last = -1;
  for (double eps : eps_seq) {
    HighRow row;
    row.eps = eps;
    row.mu = eig_oasis.lambda_lo - eps;
    const LogisticProblem Q = P.with_mu(row.mu);
    try {
      BarrierSet B = build_barriers(Q, eig_omega, bo);
      MonotoneReport rep = monotone_solve(Q, B, mono);
      row.resolved = rep.status == SolveStatus::Converged;
      row.u = rep.solution;
      row.iterations = rep.iterations;
    } catch (const Error& e) {
      if (e.code() == "ORDERING_VIOLATION") throw;
      row.resolved = false;
    }
    if (row.resolved) {
      double top = 0.0;
      row.inf_oasis = INFINITY;
      for (int n : oasis_nodes) {
        top = std::max(top, row.u[n]);
        row.inf_oasis = std::min(row.inf_oasis, row.u[n]);
      }
      for (int n : oasis_nodes)
        row.distance_oasis = std::max(row.distance_oasis, std::abs(row.u[n] / top - eig_oasis.phi[n]));
      if (minimal) row.probe_distance = relative_change(row.u, *minimal, probe);
      if (last >= 0) {
        const HighRow& prev = t.rows[last];
        t.inf_increasing = t.inf_increasing && row.inf_oasis > prev.inf_oasis;
        t.distance_decreasing = t.distance_decreasing && row.distance_oasis < prev.distance_oasis;
        if (minimal) t.probe_decreasing = t.probe_decreasing && row.probe_distance < prev.probe_distance;
      }
    }
    t.rows.push_back(std::move(row));
    if (t.rows.back().resolved) last = static_cast<int>(t.rows.size()) - 1;
  }
  return t;
}

}  // namespace oasis
