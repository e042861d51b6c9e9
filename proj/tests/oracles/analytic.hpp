#pragma once

// Closed-form and series reference values, independent of the library.

#include <cmath>
#include <numbers>

namespace oracle {

// Torsion function of the unit square, -Lap w = 1, w = 0 on the boundary,
// evaluated by the double sine series.
inline double square_torsion(double x, double y, int terms = 401) {
  const double pi = std::numbers::pi;
  double s = 0.0;
  for (int m = 1; m <= terms; m += 2)
    for (int n = 1; n <= terms; n += 2)
      s += 16.0 / (pi * pi * pi * pi * m * n * (m * m + n * n)) * std::sin(m * pi * x) *
           std::sin(n * pi * y);
  return s;
}

// Harmonic function in the annulus r_in < r < r_out, 1 on the inner circle and 0 on the outer.
inline double annulus_harmonic(double r, double r_in, double r_out) {
  return std::log(r_out / r) / std::log(r_out / r_in);
}

// Principal Dirichlet eigenvalue of the Laplacian on a rectangle.
inline double rectangle_eigenvalue(double a, double b) {
  const double pi = std::numbers::pi;
  return pi * pi * (1.0 / (a * a) + 1.0 / (b * b));
}

// First zero of the Bessel function J0.
inline constexpr double kBesselJ0Zero = 2.404825557695773;

}  // namespace oracle
