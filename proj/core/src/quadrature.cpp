#include "gravalloc/quadrature.hpp"

#include <cmath>
#include <numbers>

#include "gravalloc/geometry.hpp"

namespace gravalloc {

GaussRule gauss_legendre(int n) {
  if (n < 1) throw ValidationError("Gauss-Legendre rule needs n >= 1");
  GaussRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      if (n == 1) p0 = 1.0;
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::fabs(dx) < 1e-16) break;
    }
    double p0 = 1.0, p1 = x;
    for (int k = 2; k <= n; ++k) {
      const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
      p0 = p1;
      p1 = p2;
    }
    if (n == 1) p0 = 1.0;
    dp = n * (x * p1 - p0) / (x * x - 1.0);
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    rule.nodes[i] = -x;
    rule.nodes[n - 1 - i] = x;
    rule.weights[i] = w;
    rule.weights[n - 1 - i] = w;
  }
  if (n % 2 == 1) rule.nodes[n / 2] = 0.0;
  return rule;
}

SphereRule sphere_rule(int dim, int polar_nodes) {
  if (dim < 2) throw ValidationError("sphere rule needs dim >= 2");
  const GaussRule g = gauss_legendre(polar_nodes);
  const int azimuth = 2 * polar_nodes;
  const int polar_dims = dim - 2;
  SphereRule rule;

  std::vector<int> idx(polar_dims, 0);
  for (;;) {
    // Polar angles theta_k in [0, pi] with weight sin^{d-2-k}(theta_k).
    double w_polar = 1.0;
    std::vector<double> theta(polar_dims);
    for (int k = 0; k < polar_dims; ++k) {
      theta[k] = 0.5 * std::numbers::pi * (g.nodes[idx[k]] + 1.0);
      w_polar *= 0.5 * std::numbers::pi * g.weights[idx[k]] * std::pow(std::sin(theta[k]), dim - 2 - k);
    }
    for (int a = 0; a < azimuth; ++a) {
      const double phi = 2.0 * std::numbers::pi * a / azimuth;
      Vec u(dim);
      double s = 1.0;
      for (int k = 0; k < polar_dims; ++k) {
        u[k] = s * std::cos(theta[k]);
        s *= std::sin(theta[k]);
      }
      u[dim - 2] = s * std::cos(phi);
      u[dim - 1] = s * std::sin(phi);
      rule.directions.push_back(u);
      rule.weights.push_back(w_polar * 2.0 * std::numbers::pi / azimuth);
    }
    int k = 0;
    while (k < polar_dims && ++idx[k] == polar_nodes) idx[k++] = 0;
    if (k == polar_dims) break;
  }
  return rule;
}

namespace {

double ball_potential(int d, const Point& center, double radius, const Point& x) {
  const double kd = kappa(d);
  const double r = (x - center).norm();
  if (r <= radius) return 0.5 * kd * (d * radius * radius - (d - 2) * r * r);
  return kd * std::pow(radius, d) * std::pow(r, 2.0 - d);
}

/// Adaptive tensor Gauss-Legendre integration of |w - x|^{2-d} over an axis-aligned
/// (d-1)-cube lying in the hyperplane w[axis] = plane.
class FaceIntegrator {
 public:
  FaceIntegrator(int d, int axis, double plane, const Point& x)
      : d_(d), axis_(axis), plane_(plane), x_(x), rule_(gauss_legendre(6)) {}

  double integrate(const std::vector<double>& lo, const std::vector<double>& hi, double tol) {
    const double coarse = rule(lo, hi);
    return refine(lo, hi, coarse, tol, 0);
  }
  long evaluations() const { return evals_; }

 private:
  static constexpr long kBudget = 40'000'000;

  double integrand(const std::vector<double>& w) const {
    double s = (plane_ - x_[axis_]) * (plane_ - x_[axis_]);
    int j = 0;
    for (int k = 0; k < d_; ++k) {
      if (k == axis_) continue;
      const double t = w[j++] - x_[k];
      s += t * t;
    }
    return std::pow(s, 0.5 * (2.0 - d_));
  }

  double rule(const std::vector<double>& lo, const std::vector<double>& hi) {
    const int m = static_cast<int>(rule_.nodes.size());
    const int fd = d_ - 1;
    std::vector<int> idx(fd, 0);
    std::vector<double> w(fd);
    double jac = 1.0;
    for (int k = 0; k < fd; ++k) jac *= 0.5 * (hi[k] - lo[k]);
    double sum = 0.0;
    for (;;) {
      double wt = 1.0;
      for (int k = 0; k < fd; ++k) {
        w[k] = 0.5 * (lo[k] + hi[k]) + 0.5 * (hi[k] - lo[k]) * rule_.nodes[idx[k]];
        wt *= rule_.weights[idx[k]];
      }
      sum += wt * integrand(w);
      ++evals_;
      int k = 0;
      while (k < fd && ++idx[k] == m) idx[k++] = 0;
      if (k == fd) break;
    }
    return sum * jac;
  }

  double refine(const std::vector<double>& lo, const std::vector<double>& hi, double coarse, double tol, int depth) {
    const int fd = d_ - 1;
    const int nchild = 1 << fd;
    std::vector<std::vector<double>> clo(nchild, lo), chi(nchild, hi);
    std::vector<double> vals(nchild);
    double fine = 0.0;
    for (int c = 0; c < nchild; ++c) {
      for (int k = 0; k < fd; ++k) {
        const double mid = 0.5 * (lo[k] + hi[k]);
        if (c & (1 << k)) clo[c][k] = mid;
        else chi[c][k] = mid;
      }
      vals[c] = rule(clo[c], chi[c]);
      fine += vals[c];
    }
    if (std::fabs(fine - coarse) <= tol || depth > 30) return fine;
    if (evals_ > kBudget) throw AccuracyError("box potential cubature exceeded its evaluation budget");
    double total = 0.0;
    for (int c = 0; c < nchild; ++c) total += refine(clo[c], chi[c], vals[c], tol / nchild, depth + 1);
    return total;
  }

  int d_, axis_;
  double plane_;
  Point x_;
  GaussRule rule_;
  long evals_ = 0;
};

double box_potential(const Box& box, const Point& x, double tol) {
  const int d = x.dim();
  // div[(z - x)|z - x|^{2-d} / 2] = |z - x|^{2-d}, so the volume integral is a sum of
  // face integrals weighted by the signed height of x below each face.
  double total = 0.0;
  const int faces = 2 * d;
  for (int axis = 0; axis < d; ++axis) {
    for (int side : {-1, 1}) {
      const double plane = box.center[axis] + side * box.halfwidth;
      const double height = side * (plane - x[axis]);
      if (height == 0.0) continue;
      std::vector<double> lo, hi;
      for (int k = 0; k < d; ++k) {
        if (k == axis) continue;
        lo.push_back(box.center[k] - box.halfwidth);
        hi.push_back(box.center[k] + box.halfwidth);
      }
      FaceIntegrator fi(d, axis, plane, x);
      const double face_tol = 2.0 * tol / (faces * std::fabs(height));
      total += 0.5 * height * fi.integrate(lo, hi, face_tol);
    }
  }
  return total;
}

}  // namespace

double newton_potential_integral(const Region& region, const Point& x, double tol) {
  const int d = region.dim();
  if (x.dim() != d) throw ValidationError("dimension mismatch");
  if (const auto* b = region.get_if<Ball>()) return ball_potential(d, b->center, b->radius, x);
  if (const auto* a = region.get_if<Annulus>()) {
    const double outer = ball_potential(d, a->center, a->outer, x);
    return a->inner > 0.0 ? outer - ball_potential(d, a->center, a->inner, x) : outer;
  }
  if (const auto* b = region.get_if<Box>()) return box_potential(*b, x, tol);
  throw UnsupportedRegionError("potential integral requires a bounded region");
}

}  // namespace gravalloc
