#pragma once

#include <vector>

#include "gravalloc/region.hpp"
#include "gravalloc/vec.hpp"

namespace gravalloc {

/// Gauss-Legendre rule on [-1, 1].
struct GaussRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};
GaussRule gauss_legendre(int n);

/// Product rule on the unit sphere S^{d-1}: Gauss-Legendre in each polar angle,
/// trapezoid in the azimuth. Weights sum to the sphere area d * kappa_d.
struct SphereRule {
  std::vector<Vec> directions;
  std::vector<double> weights;
};
SphereRule sphere_rule(int dim, int polar_nodes);

/// Newtonian potential integral of the uniform measure on `region`:
///   I(x) = integral over region of |z - x|^{2-d} dVol(z).
/// Balls and annuli use the shell-theorem closed form. Boxes use the divergence
/// identity (a sum of face integrals) with adaptive Gauss-Legendre cubature to
/// absolute tolerance `tol`; AccuracyError if the subdivision budget runs out.
double newton_potential_integral(const Region& region, const Point& x, double tol = 1e-8);

}  // namespace gravalloc
