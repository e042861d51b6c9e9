#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "oasis/logistic.hpp"
#include "oracles/newton.hpp"

using namespace oasis;

namespace {

DomainSpec unit_square() { return DomainSpec::rect({0, 0}, {1, 1}); }
DomainSpec oasis_disk() { return DomainSpec::disk({0.5, 0.5}, 0.25); }

ReactionSpec k1_reaction(double mu = 1.0) {
  ReactionSpec r;
  r.mu = mu;
  return r;
}

ReactionSpec k2_reaction(double mu = 1.0) {
  ReactionSpec r;
  r.kind = KKind::K2;
  r.oasis = oasis_disk();
  r.mu = mu;
  return r;
}

double max_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

EigenResult oasis_eigen(const Grid2D& g) {
  auto m = std::make_shared<const DomainMask>(build_mask(g, oasis_disk()));
  return principal_eigen(DiscreteOperator(OperatorSpec::laplacian(), m));
}

}  // namespace

TEST(Reaction, Fields) {
  Grid2D g = Grid2D::square(33);
  Field k = reaction_field(k1_reaction(), g);
  for (double v : k.values()) EXPECT_EQ(v, 1.0);
  ReactionSpec bad = k1_reaction();
  bad.k0 = 0.5;
  bad.profile = [](Point p) { return 0.2 + p.x; };
  EXPECT_THROW(reaction_field(bad, g), Error);

  ReactionSpec r = k2_reaction();
  Field k2 = reaction_field(r, g);
  for (int n = 0; n < g.size(); ++n) {
    const double sd = oasis_disk().signed_distance(g.node(n));
    if (sd <= 0) {
      EXPECT_EQ(k2[n], 0.0);
    } else {
      EXPECT_GT(k2[n], 0.0);
    }
    if (sd >= 4 * g.h()) {
      EXPECT_EQ(k2[n], 1.0);
    }
  }
  ReactionSpec nop = k2_reaction();
  nop.p = 1.0;
  EXPECT_THROW(nop.validate(), Error);
}

TEST(Barriers, SubsolutionAmplitude) {
  Grid2D g = Grid2D::square(65);
  auto P = LogisticProblem::make(g, unit_square(), OperatorSpec::laplacian(), k1_reaction(25));
  EigenResult e = principal_eigen(P.op());
  Subsolution s = build_subsolution(P, e);
  EXPECT_NEAR(s.alpha_initial, 25 - e.lambda_hi, 1e-12);
  EXPECT_NEAR(s.alpha_initial, 5.26, 0.02);
  EXPECT_LE(P.sub_excess(s.w), 0.0);

  ReactionSpec r2 = k1_reaction(25);
  r2.k0 = r2.k1 = 2.0;
  auto P2 = LogisticProblem::make(g, unit_square(), OperatorSpec::laplacian(), r2);
  EXPECT_NEAR(build_subsolution(P2, e).alpha_initial, 0.5 * s.alpha_initial, 1e-12);

  try {
    build_subsolution(P.with_mu(e.lambda_hi), e);
    FAIL();
  } catch (const Error& err) {
    EXPECT_EQ(err.qualified_code(), "logistic.NO_SUBSOLUTION");
  }
}

TEST(Barriers, ConstantSupersolution) {
  Grid2D g = Grid2D::square(17);
  auto P = LogisticProblem::make(g, unit_square(), OperatorSpec::laplacian(), k1_reaction(2));
  EXPECT_DOUBLE_EQ(build_supersolution_K1(P)[0], 2.0);
  ReactionSpec r = k1_reaction(8);
  r.k0 = r.k1 = 2.0;
  r.p = 3.0;
  for (auto spec : {OperatorSpec::laplacian(), OperatorSpec::pucci_minus(1, 4)}) {
    auto Q = LogisticProblem::make(g, unit_square(), spec, r);
    auto w = build_supersolution_K1(Q);
    EXPECT_NEAR(w[0], 2.0, 1e-15);
    EXPECT_LE(Q.super_excess(w), 0.0);
  }
}

TEST(Barriers, NestedDomainSupersolution) {
  Grid2D g = Grid2D::square(65);
  auto P0 = LogisticProblem::make(g, unit_square(), OperatorSpec::laplacian(), k2_reaction());
  EigenResult e = principal_eigen(P0.op());
  EigenResult e0 = oasis_eigen(g);
  auto P = P0.with_mu(e.lambda_hi + 0.3 * (e0.lambda_lo - e.lambda_hi));
  BarrierSet B = build_supersolution_K2(P);
  ASSERT_EQ(B.kind, BarrierKind::NestedDomains);
  EXPECT_LE(P.super_excess(B.w_plus), 0.0);
  const auto rv = P.residual_vector(B.w_plus);
  EXPECT_LE(*std::max_element(rv.begin(), rv.end()), tol_barrier(P, B.C));
  for (int i = 0; i < P.size(); ++i) {
    const Point x = g.node(P.mask().node_of(i));
    EXPECT_GE(B.w_plus[i], B.C * (1 - 1e-14));
    if (B.omega1.signed_distance(x) >= 0) {
      EXPECT_EQ(B.w_plus[i], B.C);
    }
  }
  // each smooth piece on its own region, evaluated pointwise
  const auto res = P.residual_vector(B.w_plus);
  for (int i = 0; i < P.size(); ++i) {
    const Point x = g.node(P.mask().node_of(i));
    const double d1 = -B.omega1.signed_distance(x);
    if (d1 >= B.delta + 4 * g.h()) {
      EXPECT_LE(res[i], 0.0);  // scaled eigenfunction
    }
    // plateau: Fh(C) = 0 away from the outer boundary, negative next to it
    if (d1 <= -4 * g.h()) {
      EXPECT_LE(res[i], P.mu() * B.C - P.k()[i] * B.C * B.C + 1e-9 * B.C * B.C);
    }
  }
}

TEST(Barriers, NoSupersolutionAboveOasisEigenvalue) {
  Grid2D g = Grid2D::square(33);
  EigenResult e0 = oasis_eigen(g);
  auto P = LogisticProblem::make(g, unit_square(), OperatorSpec::laplacian(),
                                 k2_reaction(1.05 * e0.lambda_est));
  try {
    build_supersolution_K2(P);
    FAIL();
  } catch (const Error& err) {
    EXPECT_EQ(err.qualified_code(), "logistic.NO_SUPERSOLUTION");
  }
}

TEST(Monotone, K1MatchesNewton) {
  Grid2D g = Grid2D::square(33);
  auto P0 = LogisticProblem::make(g, unit_square(), OperatorSpec::laplacian(), k1_reaction());
  EigenResult e = principal_eigen(P0.op());
  auto P = P0.with_mu(2 * e.lambda_est);
  BarrierSet B = build_barriers(P, e);
  MonotoneReport m = monotone_solve(P, B);
  ASSERT_EQ(m.status, SolveStatus::Converged);
  EXPECT_TRUE(m.certified());
  auto nt = oracle::damped_newton(P.op(), P.k(), P.mu(), P.p(), P.bv(), B.w_plus);
  ASSERT_TRUE(nt.converged);
  EXPECT_LE(max_diff(m.u, nt.u), 1e-8);
  for (double v : m.u) {
    EXPECT_GT(v, 0.0);
    EXPECT_LE(v, B.C);
  }
  // uniform shift: a plain contraction with nonincreasing steps
  MonotoneOptions uo;
  uo.shift = ShiftMode::Uniform;
  MonotoneReport mu = monotone_solve(P, B, uo);
  ASSERT_EQ(mu.status, SolveStatus::Converged);
  for (std::size_t k = 1; k < mu.increments.size(); ++k)
    EXPECT_LE(mu.increments[k], mu.increments[k - 1] * (1 + 1e-9) + 1e-13);
  EXPECT_LE(max_diff(mu.u, m.u), 1e-8);
}

TEST(Monotone, K2MidWindowMatchesNewton) {
  Grid2D g = Grid2D::square(33);
  auto P0 = LogisticProblem::make(g, unit_square(), OperatorSpec::laplacian(), k2_reaction());
  EigenResult e = principal_eigen(P0.op());
  EigenResult e0 = oasis_eigen(g);
  EigenResult ez = zero_set_eigen(P0);
  const double top = std::min(e0.lambda_lo, ez.lambda_lo);
  auto P = P0.with_mu(0.5 * (e.lambda_hi + top));
  BarrierSet B = build_barriers(P, e);
  MonotoneReport m = monotone_solve(P, B);
  ASSERT_EQ(m.status, SolveStatus::Converged);
  EXPECT_TRUE(m.certified());
  // Newton from a perturbed copy of the supersolution
  std::vector<double> start = B.w_plus;
  for (std::size_t i = 0; i < start.size(); ++i) start[i] *= 1.0 + 0.3 * std::sin(0.7 * i);
  auto nt = oracle::damped_newton(P.op(), P.k(), P.mu(), P.p(), P.bv(), start);
  ASSERT_TRUE(nt.converged);
  EXPECT_LE(max_diff(m.u, nt.u), 1e-8 * (1 + m.sup));
}

TEST(Monotone, DegeneratesBelowThreshold) {
  Grid2D g = Grid2D::square(33);
  auto P0 = LogisticProblem::make(g, unit_square(), OperatorSpec::laplacian(), k1_reaction());
  EigenResult e = principal_eigen(P0.op());
  auto P = P0.with_mu(0.5 * e.lambda_est);
  MonotoneReport m = monotone_solve(P, {}, build_supersolution_K1(P));
  EXPECT_EQ(m.status, SolveStatus::Converged);
  EXPECT_LT(m.sup, 1e-6);
}

TEST(Monotone, UniquenessAndPositivity) {
  Grid2D g = Grid2D::square(33);
  auto P0 = LogisticProblem::make(g, unit_square(), OperatorSpec::pucci_plus(1, 2), k1_reaction());
  EigenResult e = principal_eigen(P0.op());
  auto P = P0.with_mu(1.8 * e.lambda_est);
  BarrierSet B = build_barriers(P, e);
  MonotoneOptions o;
  MonotoneReport a = monotone_solve(P, B, o);
  std::vector<double> twice = B.w_plus;
  for (double& v : twice) v *= 2;
  MonotoneReport b = monotone_solve(P, B.w_minus, twice, o);
  ASSERT_EQ(a.status, SolveStatus::Converged);
  ASSERT_EQ(b.status, SolveStatus::Converged);
  EXPECT_LE(max_diff(a.u, b.u), 10 * o.tol_fix * (1 + B.C));
  for (int i = 0; i < P.size(); ++i) EXPECT_GE(a.u[i], (1 - 10 * g.h()) * B.w_minus[i]);
  EXPECT_TRUE(a.certified());
}

TEST(Monotone, IncreasingInMu) {
  Grid2D g = Grid2D::square(33);
  auto P0 = LogisticProblem::make(g, unit_square(), OperatorSpec::laplacian(), k1_reaction());
  EigenResult e = principal_eigen(P0.op());
  std::vector<double> prev;
  for (double f : {1.2, 1.5, 2.0, 3.0, 5.0}) {
    auto P = P0.with_mu(f * e.lambda_est);
    MonotoneReport m = monotone_solve(P, build_barriers(P, e));
    ASSERT_EQ(m.status, SolveStatus::Converged);
    if (!prev.empty()) {
      for (int i = 0; i < P.size(); ++i) EXPECT_GE(m.u[i], prev[i] - 1e-8);
    }
    prev = m.u;
  }
}

TEST(Monotone, OrderingViolationIsFatal) {
  Grid2D g = Grid2D::square(17);
  auto P = LogisticProblem::make(g, unit_square(), OperatorSpec::laplacian(), k1_reaction(60));
  const long before = OrderingAudit::violations().load();
  std::vector<double> low(P.size(), 0.1);  // not a supersolution
  try {
    monotone_solve(P, {}, low);
    FAIL();
  } catch (const Error& err) {
    EXPECT_EQ(err.qualified_code(), "logistic.ORDERING_VIOLATION");
  }
  EXPECT_EQ(OrderingAudit::violations().load(), before + 1);
  OrderingAudit::violations() -= 1;  // deliberate
}

TEST(Annulus, ZeroDataGivesZero) {
  Grid2D g = Grid2D::square(33);
  EigenResult e = principal_eigen(
      DiscreteOperator(OperatorSpec::laplacian(),
                       std::make_shared<const DomainMask>(build_mask(g, unit_square()))));
  ReactionSpec r = k2_reaction(5.0);
  AnnulusSolver s(g, unit_square(), r.oasis, OperatorSpec::laplacian(), r, e.lambda_hi);
  auto res = s.solve(0.0);
  for (int n : s.mask().nodes()) EXPECT_NEAR(res.solution[n], 0.0, 1e-10);
}

TEST(Annulus, BelowHarmonicExtensionAndMonotoneInDelta) {
  Grid2D g = Grid2D::square(33);
  EigenResult e = principal_eigen(
      DiscreteOperator(OperatorSpec::laplacian(),
                       std::make_shared<const DomainMask>(build_mask(g, unit_square()))));
  ReactionSpec r = k2_reaction(0.0);
  AnnulusSolver s(g, unit_square(), r.oasis, OperatorSpec::laplacian(), r, e.lambda_hi);
  auto res = s.solve(1.0);
  for (int n : s.mask().nodes()) {
    EXPECT_GT(res.solution[n], 0.0);
    EXPECT_LE(res.solution[n], res.psi[n] + 1e-12);
  }
  ASSERT_EQ(res.by_delta.size(), 4u);
  EXPECT_EQ(res.by_delta[0].first, 0.1);
  for (std::size_t k = 1; k < res.by_delta.size(); ++k)
    EXPECT_TRUE(check_discrete_comparison(res.by_delta[k - 1].second, res.by_delta[k].second,
                                          s.mask())
                    .ok);
  EXPECT_TRUE(std::isfinite(res.C_fit));
  EXPECT_TRUE(res.report.certified());
}

TEST(Classify, Verdicts) {
  Grid2D g = Grid2D::square(33);
  auto K1 = LogisticProblem::make(g, unit_square(), OperatorSpec::laplacian(), k1_reaction());
  EigenResult e = principal_eigen(K1.op());
  auto low = classify_mu(K1.with_mu(0.5 * e.lambda_lo), e);
  EXPECT_EQ(low.verdict, Verdict::NoSolutionLow);
  EXPECT_TRUE(low.agrees);
  EXPECT_EQ(low.pipeline_error, "logistic.NO_SUBSOLUTION");
  EXPECT_EQ(classify_mu(K1.with_mu(e.lambda_est), e).verdict, Verdict::Unresolved);
  auto k1 = classify_mu(K1.with_mu(3 * e.lambda_est), e);
  EXPECT_EQ(k1.verdict, Verdict::Exists);
  EXPECT_TRUE(k1.agrees);

  auto K2 = LogisticProblem::make(g, unit_square(), OperatorSpec::laplacian(), k2_reaction());
  EigenResult e0 = oasis_eigen(g);
  EXPECT_THROW(classify_mu(K2, e), Error);
  auto mid = classify_mu(K2.with_mu(0.5 * (e.lambda_hi + e0.lambda_lo)), e, &e0);
  EXPECT_EQ(mid.verdict, Verdict::Exists);
  EXPECT_TRUE(mid.agrees);
  ASSERT_TRUE(mid.report.has_value());
  EXPECT_TRUE(mid.report->certified());
  auto high = classify_mu(K2.with_mu(1.1 * e0.lambda_hi), e, &e0);
  EXPECT_EQ(high.verdict, Verdict::NoSolutionHigh);
  EXPECT_EQ(high.pipeline_error, "logistic.NO_SUPERSOLUTION");
  ASSERT_TRUE(high.probe.has_value());
  EXPECT_EQ(*high.probe, SolveStatus::Diverged);
  EXPECT_TRUE(high.agrees);
}

TEST(Audit, NoOrderingViolations) { EXPECT_EQ(OrderingAudit::violations().load(), 0); }
