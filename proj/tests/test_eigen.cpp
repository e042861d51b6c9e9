#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "oasis/principal_eigen.hpp"
#include "oracles/analytic.hpp"
#include "oracles/radial_shooting.hpp"

using namespace oasis;

namespace {

std::shared_ptr<const DomainMask> mask_of(const Grid2D& g, const DomainSpec& d) {
  return std::make_shared<const DomainMask>(build_mask(g, d));
}

DomainSpec unit_square() { return DomainSpec::rect({0, 0}, {1, 1}); }

EigenResult eig(const OperatorSpec& spec, const Grid2D& g, const DomainSpec& d,
                const EigenOptions& o = {}) {
  return principal_eigen(DiscreteOperator(spec, mask_of(g, d)), o);
}

}  // namespace

TEST(Oracle, ShootingReproducesBessel) {
  oracle::RadialPucci lap{1.0, 1.0, true};
  const double j0 = oracle::kBesselJ0Zero;
  EXPECT_NEAR(lap.eigenvalue(0.5), j0 * j0 / 0.25, 1e-6);
  oracle::RadialPucci pp{1.0, 2.0, true}, pm{1.0, 2.0, false};
  EXPECT_NEAR(pp.eigenvalue(0.5), oracle::kPucciPlusDiskHalf, 1e-6);
  EXPECT_NEAR(pm.eigenvalue(0.5), oracle::kPucciMinusDiskHalf, 1e-6);
}

TEST(Eigen, LaplacianSquare) {
  EigenResult r = eig(OperatorSpec::laplacian(), Grid2D::square(65), unit_square());
  ASSERT_EQ(r.status, EigenStatus::Converged);
  const double exact = 2 * std::numbers::pi * std::numbers::pi;
  EXPECT_NEAR(r.lambda_est, exact, 0.02 * exact);
  EXPECT_LT(r.relative_width(), 1e-4);
  EXPECT_LE(r.residual, 10 * 1e-4 * r.lambda_est);
  // five-point eigenvalue is known in closed form
  const double h = 1.0 / 64;
  const double discrete = 2 * 4 / (h * h) * std::pow(std::sin(std::numbers::pi * h / 2), 2);
  EXPECT_LE(r.lambda_lo, discrete * (1 + 1e-9));
  EXPECT_GE(r.lambda_hi, discrete * (1 - 1e-9));
}

TEST(Eigen, InvariantsAlongIteration) {
  EigenResult r = eig(OperatorSpec::pucci_plus(1, 3), Grid2D::square(41),
                      DomainSpec::disk({0.5, 0.5}, 0.45));
  ASSERT_EQ(r.status, EigenStatus::Converged);
  double sup = 0;
  for (int n = 0; n < r.phi.size(); ++n) sup = std::max(sup, r.phi[n]);
  EXPECT_DOUBLE_EQ(sup, 1.0);
  for (double v : r.phi_unknowns) EXPECT_GT(v, 0.0);
  for (std::size_t k = 0; k < r.history.size(); ++k) {
    EXPECT_LE(r.history[k].first, r.history[k].second);
    if (k >= 5) {
      EXPECT_GE(r.history[k].first, r.history[k - 1].first - 1e-9);
      EXPECT_LE(r.history[k].second, r.history[k - 1].second + 1e-9);
    }
  }
  EXPECT_LE(r.residual, 10 * 1e-4 * r.lambda_est);
}

TEST(Eigen, PucciDiskAgainstShooting) {
  EigenResult r = eig(OperatorSpec::pucci_plus(1, 2), Grid2D::square(97),
                      DomainSpec::disk({0.5, 0.5}, 0.5));
  oracle::RadialPucci pp{1.0, 2.0, true};
  const double ref = pp.eigenvalue(0.5);
  EXPECT_NEAR(r.lambda_est, ref, 0.03 * ref);
}

TEST(Eigen, ScalingLaw) {
  for (double t : {0.5, 2.0}) {
    for (auto spec : {OperatorSpec::laplacian(), OperatorSpec::pucci_minus(1, 2)}) {
      const int n = 33;
      Grid2D g = Grid2D::square(n);
      Grid2D gt(n, n, g.h() * t, {0, 0});
      EigenResult a = eig(spec, g, DomainSpec::disk({0.5, 0.5}, 0.4));
      EigenResult b = eig(spec, gt, DomainSpec::disk({0.5, 0.5}, 0.4).scaled(t));
      EXPECT_LE(std::abs(b.lambda_est * t * t - a.lambda_est),
                2 * (a.width() + b.width() * t * t));
    }
  }
}

TEST(Eigen, EqualConstantsReduceToLaplacian) {
  Grid2D g = Grid2D::square(49);
  DomainSpec d = DomainSpec::disk({0.5, 0.5}, 0.4);
  EigenResult a = eig(OperatorSpec::laplacian(), g, d);
  EigenResult b = eig(OperatorSpec::pucci_plus(1, 1), g, d);
  EXPECT_NEAR(b.lambda_est, a.lambda_est, 1e-6 * a.lambda_est);
}

TEST(Eigen, DomainMonotonicity) {
  Grid2D g = Grid2D::square(33);
  auto c1 = eigen_monotonicity_check(OperatorSpec::laplacian(), g,
                                     DomainSpec::rect({0.25, 0.25}, {0.75, 0.75}), unit_square());
  EXPECT_TRUE(c1.holds);
  EXPECT_GT(c1.gap, 0);
  auto c2 = eigen_monotonicity_check(OperatorSpec::laplacian(), g,
                                     DomainSpec::disk({0.5, 0.5}, 0.25), unit_square());
  EXPECT_TRUE(c2.holds);
  EXPECT_GT(c2.gap, 0);
  auto c3 = eigen_monotonicity_check(OperatorSpec::laplacian(), g, unit_square(), unit_square());
  EXPECT_TRUE(c3.holds);
  EXPECT_LE(c3.small.lambda_lo, c3.big.lambda_hi);
  EXPECT_THROW(eigen_monotonicity_check(OperatorSpec::laplacian(), g, unit_square(),
                                        DomainSpec::disk({0.5, 0.5}, 0.25)),
               Error);
}

TEST(Eigen, DisconnectedMaskRejected) {
  Grid2D g = Grid2D::square(33);
  std::vector<char> in(g.size(), 0);
  for (int j = 4; j < 12; ++j)
    for (int i = 4; i < 12; ++i) {
      in[g.index(i, j)] = 1;
      in[g.index(i + 16, j + 16)] = 1;
    }
  auto m = std::make_shared<const DomainMask>(build_mask_from_nodes(g, in));
  try {
    principal_eigen(DiscreteOperator(OperatorSpec::laplacian(), m));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.qualified_code(), "eigen.NEGATIVE_ITERATE");
  }
}

TEST(Eigen, MaximumPrincipleThreshold) {
  Grid2D g = Grid2D::square(33);
  DiscreteOperator op(OperatorSpec::pucci_plus(1, 2), mask_of(g, unit_square()));
  EigenResult r = principal_eigen(op);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> U(0.1, 1.0);
  Field init(g);
  for (int n : op.mask().nodes()) init[n] = U(rng);
  SolveOptions fp;
  fp.method = SolveMethod::FixedPoint;
  fp.max_iter = 2000000;
  DirichletProblem p;
  p.op = &op;
  p.shift = 0.9 * r.lambda_est;
  SolveReport below = solve_dirichlet(p, fp, &init);
  EXPECT_EQ(below.status, SolveStatus::Converged);
  double sup = 0;
  for (double v : below.solution.values()) sup = std::max(sup, std::abs(v));
  EXPECT_LE(sup, 1e-6);
  p.shift = 1.1 * r.lambda_est;
  SolveReport above = solve_dirichlet(p, fp, &init);
  EXPECT_EQ(above.status, SolveStatus::Diverged);
}

TEST(Eigen, NotConvergedIsReported) {
  EigenOptions o;
  o.max_iter = 2;
  o.tol_bracket = 1e-12;
  EigenResult r = eig(OperatorSpec::laplacian(), Grid2D::square(33), unit_square(), o);
  EXPECT_EQ(r.status, EigenStatus::NotConverged);
  EXPECT_LE(r.lambda_lo, r.lambda_hi);
  EXPECT_EQ(r.iterations, 2);
}
