#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "oasis/error.hpp"
#include "oasis/geometry.hpp"

namespace oasis {

struct SymMat2 {
  double a11 = 0.0;
  double a12 = 0.0;
  double a22 = 0.0;

  static SymMat2 diag(double d1, double d2) { return {d1, 0.0, d2}; }
  static SymMat2 identity() { return {1.0, 0.0, 1.0}; }
  // R(angle) diag(d1, d2) R(angle)^T
  static SymMat2 rotated_diag(double d1, double d2, double angle) {
    const double c = std::cos(angle), s = std::sin(angle);
    return {d1 * c * c + d2 * s * s, (d1 - d2) * c * s, d1 * s * s + d2 * c * c};
  }

  double trace() const { return a11 + a22; }
  double det() const { return a11 * a22 - a12 * a12; }
  double norm() const { return std::sqrt(a11 * a11 + 2.0 * a12 * a12 + a22 * a22); }

  // (e1, e2) with e1 <= e2. The larger-magnitude root is formed directly and
  // the other recovered from the determinant, avoiding cancellation.
  std::pair<double, double> eigenvalues() const {
    const double half_tr = 0.5 * (a11 + a22);
    const double rad = std::hypot(0.5 * (a11 - a22), a12);
    if (rad == 0.0) return {half_tr, half_tr};
    const double big = half_tr >= 0.0 ? half_tr + rad : half_tr - rad;
    const double small = big != 0.0 ? det() / big : 0.0;
    return big >= small ? std::pair{small, big} : std::pair{big, small};
  }

  SymMat2 operator+(const SymMat2& o) const { return {a11 + o.a11, a12 + o.a12, a22 + o.a22}; }
  SymMat2 operator-(const SymMat2& o) const { return {a11 - o.a11, a12 - o.a12, a22 - o.a22}; }
  SymMat2 operator-() const { return {-a11, -a12, -a22}; }
  SymMat2 operator*(double t) const { return {t * a11, t * a12, t * a22}; }
};

// tr(A M) for symmetric A, M.
inline double trace_product(const SymMat2& a, const SymMat2& m) {
  return a.a11 * m.a11 + 2.0 * a.a12 * m.a12 + a.a22 * m.a22;
}

inline double pucci_plus_eig(double e1, double e2, double lambda, double Lambda) {
  return (e1 >= 0.0 ? Lambda : lambda) * e1 + (e2 >= 0.0 ? Lambda : lambda) * e2;
}
inline double pucci_minus_eig(double e1, double e2, double lambda, double Lambda) {
  return (e1 >= 0.0 ? lambda : Lambda) * e1 + (e2 >= 0.0 ? lambda : Lambda) * e2;
}

inline double pucci_plus(const SymMat2& m, double lambda, double Lambda) {
  auto [e1, e2] = m.eigenvalues();
  return pucci_plus_eig(e1, e2, lambda, Lambda);
}
inline double pucci_minus(const SymMat2& m, double lambda, double Lambda) {
  auto [e1, e2] = m.eigenvalues();
  return pucci_minus_eig(e1, e2, lambda, Lambda);
}

enum class OperatorKind { Laplacian, PucciPlus, PucciMinus, BellmanSup };

inline std::string to_string(OperatorKind k) {
  switch (k) {
    case OperatorKind::Laplacian: return "laplacian";
    case OperatorKind::PucciPlus: return "pucci_plus";
    case OperatorKind::PucciMinus: return "pucci_minus";
    case OperatorKind::BellmanSup: return "bellman_sup";
  }
  return "?";
}

// A Bellman control: a coefficient field A(x), symmetric and sampled at nodes.
using ControlField = std::function<SymMat2(Point)>;

struct OperatorSpec {
  OperatorKind kind = OperatorKind::Laplacian;
  double lambda = 1.0;
  double Lambda = 1.0;
  int directions = 16;
  std::vector<ControlField> controls;

  static OperatorSpec laplacian() { return {}; }
  static OperatorSpec pucci_plus(double lambda, double Lambda, int K = 16) {
    return {OperatorKind::PucciPlus, lambda, Lambda, K, {}};
  }
  static OperatorSpec pucci_minus(double lambda, double Lambda, int K = 16) {
    return {OperatorKind::PucciMinus, lambda, Lambda, K, {}};
  }
  static OperatorSpec bellman(double lambda, double Lambda, std::vector<ControlField> ctrl,
                              int K = 16) {
    return {OperatorKind::BellmanSup, lambda, Lambda, K, std::move(ctrl)};
  }

  void validate() const {
    if (!(lambda > 0.0) || !(Lambda >= lambda) || !std::isfinite(Lambda))
      throw Error("operator", "INVALID_OPERATOR", "need 0 < lambda <= Lambda");
    if (directions < 4 || directions % 2 != 0)
      throw Error("operator", "INVALID_OPERATOR", "directions must be an even integer >= 4");
    if (kind == OperatorKind::BellmanSup && controls.empty())
      throw Error("operator", "INVALID_OPERATOR", "bellman operator needs at least one control");
  }

  std::string describe() const {
    if (kind == OperatorKind::Laplacian) return "laplacian";
    std::string s = to_string(kind) + "(" + std::to_string(lambda) + "," +
                    std::to_string(Lambda) + ",K=" + std::to_string(directions);
    if (kind == OperatorKind::BellmanSup) s += ",controls=" + std::to_string(controls.size());
    return s + ")";
  }
};

// sup over the control list of tr(A(x) M).
inline double x_dependent_eval(const OperatorSpec& op, Point x, const SymMat2& m) {
  if (op.kind != OperatorKind::BellmanSup)
    throw Error("operator", "INVALID_OPERATOR", "x_dependent_eval needs a bellman operator");
  double best = -INFINITY;
  for (const auto& a : op.controls) best = std::max(best, trace_product(a(x), m));
  return best;
}

// Exact pointwise F(x, M).
inline double evaluate(const OperatorSpec& op, Point x, const SymMat2& m) {
  switch (op.kind) {
    case OperatorKind::Laplacian: return m.trace();
    case OperatorKind::PucciPlus: return pucci_plus(m, op.lambda, op.Lambda);
    case OperatorKind::PucciMinus: return pucci_minus(m, op.lambda, op.Lambda);
    case OperatorKind::BellmanSup: return x_dependent_eval(op, x, m);
  }
  return 0.0;
}

// ELLIPTICITY_VIOLATION unless lambda I <= A(x) <= Lambda I at every grid node.
inline void check_controls(const OperatorSpec& op, const Grid2D& grid, double slack = 1e-12) {
  for (std::size_t c = 0; c < op.controls.size(); ++c)
    for (int n = 0; n < grid.size(); ++n) {
      auto [e1, e2] = op.controls[c](grid.node(n)).eigenvalues();
      const double tol = slack * op.Lambda;
      if (e1 < op.lambda - tol || e2 > op.Lambda + tol)
        throw Error("operator", "ELLIPTICITY_VIOLATION",
                    "control " + std::to_string(c) + " leaves [lambda, Lambda]");
    }
}

// Anisotropy whose principal axis turns with position: eigenvalues (Lambda, lambda)
// along angle omega*(x + y).
inline ControlField rotating_anisotropy(double lambda, double Lambda, double omega) {
  return [=](Point p) { return SymMat2::rotated_diag(Lambda, lambda, omega * (p.x + p.y)); };
}

}  // namespace oasis
