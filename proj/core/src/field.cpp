#include "gravalloc/field.hpp"

#include <algorithm>
#include <cmath>

#include "gravalloc/quadrature.hpp"

namespace gravalloc {

namespace {

/// |r|^{-d} from r^2.
inline double inv_pow_d(double r2, int d) {
  const double ir2 = 1.0 / r2;
  double v = 1.0;
  for (int k = 0; k < d / 2; ++k) v *= ir2;
  if (d % 2 == 1) v *= std::sqrt(ir2);
  return v;
}

/// |r|^{2-d} from r^2.
inline double inv_pow_d2(double r2, int d) {
  const double ir2 = 1.0 / r2;
  double v = 1.0;
  for (int k = 0; k < (d - 2) / 2; ++k) v *= ir2;
  if (d % 2 == 1) v *= std::sqrt(ir2);
  return v;
}

template <int D>
void sum_terms(const double* coords, std::size_t n, const double* x, double* out) {
  double acc[D] = {};
  for (std::size_t i = 0; i < n; ++i) {
    const double* z = coords + i * D;
    double diff[D];
    double r2 = 0.0;
    for (int k = 0; k < D; ++k) {
      diff[k] = z[k] - x[k];
      r2 += diff[k] * diff[k];
    }
    const double w = inv_pow_d(r2, D);
    for (int k = 0; k < D; ++k) acc[k] += diff[k] * w;
  }
  for (int k = 0; k < D; ++k) out[k] = acc[k];
}

void sum_terms(int d, const double* coords, std::size_t n, const double* x, double* out) {
  switch (d) {
    case 3: return sum_terms<3>(coords, n, x, out);
    case 4: return sum_terms<4>(coords, n, x, out);
    case 5: return sum_terms<5>(coords, n, x, out);
    case 6: return sum_terms<6>(coords, n, x, out);
    case 7: return sum_terms<7>(coords, n, x, out);
    case 8: return sum_terms<8>(coords, n, x, out);
    default: throw ValidationError("unsupported dimension");
  }
}

}  // namespace

Vec star_term(const Point& z, const Point& x) {
  Vec diff = z - x;
  return diff * inv_pow_d(diff.norm2(), x.dim());
}

FieldModel::FieldModel(StarConfig config, Ball truncation, bool compensate)
    : config_(std::make_shared<const StarConfig>(std::move(config))),
      trunc_(std::move(truncation)),
      compensate_(compensate),
      index_(config_->stars()) {
  const int d = config_->dim();
  if (trunc_.center.dim() != d) throw ValidationError("truncation dimension does not match the configuration");
  if (!(trunc_.radius > 0.0) || !std::isfinite(trunc_.radius)) {
    throw ValidationError("truncation radius must be positive and finite");
  }
  if (!config_->window().contains_region(Region(trunc_))) {
    throw ValidationError("truncation ball must lie inside the sampling window");
  }
  const auto& order = config_->order_from_origin();
  rank_.resize(order.size());
  for (std::size_t r = 0; r < order.size(); ++r) rank_[order[r]] = r;
  for (std::size_t i : order) {
    const Point& z = config_->star(i);
    if (distance(z, trunc_.center) <= trunc_.radius) {
      active_.push_back(i);
      for (int k = 0; k < d; ++k) active_coords_.push_back(z[k]);
    }
  }
}

namespace {
Ball window_ball(const StarConfig& config) {
  const auto* b = config.window().get_if<Ball>();
  if (!b) throw ValidationError("default truncation requires a ball window");
  return *b;
}
}  // namespace

FieldModel::FieldModel(StarConfig config, bool compensate)
    : FieldModel(config, window_ball(config), compensate) {}

void FieldModel::check_point(const Point& x) const {
  if (x.dim() != dim()) throw ValidationError("query point dimension does not match the configuration");
  if (!x.finite()) throw ValidationError("query point is not finite");
  if (compensate_ && distance(x, trunc_.center) > trunc_.radius) {
    throw DomainError("query point lies outside the truncation ball");
  }
}

Vec FieldModel::force(const Point& x) const { return sample(x).force; }

FieldSample FieldModel::sample(const Point& x) const {
  check_point(x);
  const int d = dim();
  FieldSample s;
  s.force = Vec(d);
  double best = std::numeric_limits<double>::infinity(), second = best;
  std::size_t best_i = kNoStar;
  const std::size_t n = active_.size();
  for (std::size_t j = 0; j < n; ++j) {
    const double* z = &active_coords_[j * d];
    double r2 = 0.0;
    for (int k = 0; k < d; ++k) r2 += (z[k] - x[k]) * (z[k] - x[k]);
    if (r2 < best) {
      second = best;
      best = r2;
      best_i = active_[j];
    } else if (r2 < second) {
      second = r2;
    }
  }
  if (best_i != kNoStar && std::sqrt(best) < kSingularityGuard) {
    throw SingularityError("evaluation point coincides with a star", best_i);
  }
  sum_terms(d, active_coords_.data(), n, x.data(), s.force.data());
  if (compensate_) s.force += kappa(d) * (x - trunc_.center);
  s.nearest = best_i;
  s.nearest_distance = std::sqrt(best);
  s.second_distance = std::sqrt(second);
  return s;
}

std::vector<std::size_t> FieldModel::stars_in(const Region& a) const {
  auto out = index_.query(a);
  std::sort(out.begin(), out.end(), [&](std::size_t i, std::size_t j) { return rank_[i] < rank_[j]; });
  return out;
}

void FieldModel::check_partial_region(const Region& a) const {
  if (a.dim() != dim()) throw ValidationError("region dimension does not match the configuration");
  if (!config_->window().contains_region(a)) {
    throw DomainError("partial region extends beyond the sampling window");
  }
}

namespace {

struct PartialCase {
  Point center;
  double outer;
  double inner;  // 0 for the ball case
};

PartialCase classify(const Region& a, const Point& x) {
  if (const auto* b = a.get_if<Ball>()) {
    if (distance(x, b->center) > b->radius) throw DomainError("query point lies outside the partial ball");
    return {b->center, b->radius, 0.0};
  }
  if (const auto* an = a.get_if<Annulus>()) {
    const double r = distance(x, an->center);
    if (an->inner == 0.0) {
      if (r > an->outer) throw DomainError("query point lies outside the partial ball");
      return {an->center, an->outer, 0.0};
    }
    if (r > an->inner) throw DomainError("query point must lie inside the inner sphere of the annulus");
    return {an->center, an->outer, an->inner};
  }
  throw DomainError("partial sums are defined for balls and annuli only");
}

std::vector<std::size_t> partial_stars(const FieldModel& m, const PartialCase& pc) {
  if (pc.inner == 0.0) return m.stars_in(Region(Ball{pc.center, pc.outer}));
  return m.stars_in(Region(Annulus{pc.center, pc.inner, pc.outer}));
}

}  // namespace

Vec FieldModel::force_partial(const Point& x, const Region& a) const {
  if (x.dim() != dim()) throw ValidationError("query point dimension does not match the configuration");
  check_partial_region(a);
  const PartialCase pc = classify(a, x);
  const int d = dim();
  Vec f(d);
  for (std::size_t i : partial_stars(*this, pc)) {
    const Point& z = config_->star(i);
    const double r = distance(z, x);
    if (r < kSingularityGuard) throw SingularityError("evaluation point coincides with a star", i);
    f += star_term(z, x);
  }
  // Uniform background: the ball pulls toward its center; a shell exerts no force inside.
  if (pc.inner == 0.0) f += kappa(d) * (x - pc.center);
  return f;
}

double FieldModel::potential_partial(const Point& x, const Region& a) const {
  if (x.dim() != dim()) throw ValidationError("query point dimension does not match the configuration");
  check_partial_region(a);
  const PartialCase pc = classify(a, x);
  const int d = dim();
  const double kd = kappa(d);
  double u = 0.0;
  for (std::size_t i : partial_stars(*this, pc)) {
    const Point& z = config_->star(i);
    const double r2 = (z - x).norm2();
    if (std::sqrt(r2) < kSingularityGuard) throw SingularityError("evaluation point coincides with a star", i);
    u -= inv_pow_d2(r2, d);
  }
  u /= (d - 2);
  const double p2 = pc.outer * pc.outer, q2 = pc.inner * pc.inner;
  u += d * kd * (p2 - q2) / (2.0 * (d - 2));
  if (pc.inner == 0.0) u -= 0.5 * kd * (x - pc.center).norm2();
  return u;
}

double FieldModel::potential_diff(const Point& x, const Point& y, const Region& a, double tol) const {
  if (x.dim() != dim() || y.dim() != dim()) {
    throw ValidationError("query point dimension does not match the configuration");
  }
  if (!a.bounded()) throw UnsupportedRegionError("potential difference requires a bounded region");
  check_partial_region(a);
  if (x == y) return 0.0;
  const int d = dim();
  double s = 0.0;
  for (std::size_t i : stars_in(a)) {
    const Point& z = config_->star(i);
    const double ry2 = (z - y).norm2(), rx2 = (z - x).norm2();
    if (std::sqrt(ry2) < kSingularityGuard || std::sqrt(rx2) < kSingularityGuard) {
      throw SingularityError("evaluation point coincides with a star", i);
    }
    s += inv_pow_d2(rx2, d) - inv_pow_d2(ry2, d);
  }
  const double iy = newton_potential_integral(a, y, tol);
  const double ix = newton_potential_integral(a, x, tol);
  return (s + iy - ix) / (d - 2);
}

Matrix FieldModel::jacobian(const Point& x) const {
  check_point(x);
  const int d = dim();
  Matrix j(d);
  for (std::size_t n = 0; n < active_.size(); ++n) {
    const double* z = &active_coords_[n * d];
    double diff[kMaxDim];
    double r2 = 0.0;
    for (int k = 0; k < d; ++k) {
      diff[k] = z[k] - x[k];
      r2 += diff[k] * diff[k];
    }
    if (std::sqrt(r2) < kSingularityGuard) throw SingularityError("evaluation point coincides with a star", active_[n]);
    const double ird = inv_pow_d(r2, d);
    const double c = d * ird / r2;
    for (int r = 0; r < d; ++r) {
      j(r, r) -= ird;
      for (int q = 0; q < d; ++q) j(r, q) += c * diff[r] * diff[q];
    }
  }
  if (compensate_) {
    const double kd = kappa(d);
    for (int r = 0; r < d; ++r) j(r, r) += kd;
  }
  return j;
}

Vec ball_field_integral(const Point& x, const Point& c, double L) {
  if (x.dim() != c.dim()) throw ValidationError("dimension mismatch");
  if (!(distance(x, c) < L)) throw DomainError("shell-theorem integral requires |x - c| < L");
  return -kappa(x.dim()) * (x - c);
}

double sphere_flux(const FieldModel& model, const Point& y, double rho, int polar_nodes) {
  if (!(rho > 0.0)) throw ValidationError("flux sphere radius must be positive");
  const SphereRule rule = sphere_rule(model.dim(), polar_nodes);
  const double area = std::pow(rho, model.dim() - 1);
  double flux = 0.0;
  for (std::size_t i = 0; i < rule.directions.size(); ++i) {
    const Vec& u = rule.directions[i];
    flux += rule.weights[i] * model.force(y + rho * u).dot(u);
  }
  return flux * area;
}

}  // namespace gravalloc
