#include "gravalloc/region.hpp"

#include <cmath>

#include "gravalloc/geometry.hpp"

namespace gravalloc {

namespace {

void check_center(const Point& c) {
  if (c.dim() < 1) throw ValidationError("region center has no dimension");
  if (!c.finite()) throw ValidationError("region center must be finite");
}

}  // namespace

Region::Region(Ball b) : shape_(b) {
  check_center(b.center);
  if (!(b.radius > 0.0) || !std::isfinite(b.radius)) throw ValidationError("ball radius must be > 0");
}

Region::Region(Annulus a) : shape_(a) {
  check_center(a.center);
  if (!(a.inner >= 0.0) || !(a.outer > a.inner) || !std::isfinite(a.outer)) {
    throw ValidationError("annulus requires 0 <= inner < outer");
  }
}

Region::Region(Box b) : shape_(b) {
  check_center(b.center);
  if (!(b.halfwidth > 0.0) || !std::isfinite(b.halfwidth)) throw ValidationError("box halfwidth must be > 0");
}

Region::Region(ComplementOfBall c) : shape_(c) {
  check_center(c.center);
  if (!(c.radius > 0.0) || !std::isfinite(c.radius)) throw ValidationError("ball radius must be > 0");
}

const Point& Region::center() const noexcept {
  return std::visit([](const auto& s) -> const Point& { return s.center; }, shape_);
}

int Region::dim() const noexcept { return center().dim(); }

std::string Region::kind() const {
  struct {
    std::string operator()(const Ball&) const { return "ball"; }
    std::string operator()(const Annulus&) const { return "annulus"; }
    std::string operator()(const Box&) const { return "box"; }
    std::string operator()(const ComplementOfBall&) const { return "complement_of_ball"; }
  } v;
  return std::visit(v, shape_);
}

bool Region::contains(const Point& z) const noexcept {
  struct {
    const Point& z;
    bool operator()(const Ball& b) const { return (z - b.center).norm() <= b.radius; }
    bool operator()(const Annulus& a) const {
      const double r = (z - a.center).norm();
      return a.inner < r && r <= a.outer;
    }
    bool operator()(const Box& b) const { return (z - b.center).norm_inf() <= b.halfwidth; }
    bool operator()(const ComplementOfBall& c) const { return (z - c.center).norm() > c.radius; }
  } v{z};
  return std::visit(v, shape_);
}

double Region::volume() const {
  const int d = dim();
  struct {
    int d;
    double operator()(const Ball& b) const { return kappa(d) * std::pow(b.radius, d); }
    double operator()(const Annulus& a) const {
      return kappa(d) * (std::pow(a.outer, d) - std::pow(a.inner, d));
    }
    double operator()(const Box& b) const { return std::pow(2.0 * b.halfwidth, d); }
    double operator()(const ComplementOfBall&) const {
      throw UnsupportedRegionError("complement of a ball has infinite volume");
    }
  } v{d};
  return std::visit(v, shape_);
}

double Region::bounding_halfwidth() const {
  struct {
    double operator()(const Ball& b) const { return b.radius; }
    double operator()(const Annulus& a) const { return a.outer; }
    double operator()(const Box& b) const { return b.halfwidth; }
    double operator()(const ComplementOfBall&) const {
      throw UnsupportedRegionError("complement of a ball is unbounded");
    }
  } v;
  return std::visit(v, shape_);
}

double Region::outer_radius() const {
  const int d = dim();
  if (const auto* b = get_if<Box>()) return b->halfwidth * std::sqrt(static_cast<double>(d));
  return bounding_halfwidth();
}

bool Region::contains_region(const Region& inner) const {
  const double tol = 1e-12;
  const Point& ci = inner.center();
  if (ci.dim() != dim()) return false;

  if (const auto* outer_ball = get_if<Ball>()) {
    const double offset = (ci - outer_ball->center).norm();
    if (!inner.bounded()) return false;
    return offset + inner.outer_radius() <= outer_ball->radius * (1.0 + tol) + tol;
  }
  if (const auto* outer_box = get_if<Box>()) {
    if (!inner.bounded()) return false;
    return (ci - outer_box->center).norm_inf() + inner.bounding_halfwidth() <=
           outer_box->halfwidth * (1.0 + tol) + tol;
  }
  if (const auto* outer_ann = get_if<Annulus>()) {
    if (!inner.bounded()) return false;
    const double offset = (ci - outer_ann->center).norm();
    const double far = offset + inner.outer_radius();
    double near = 0.0;
    if (const auto* ia = inner.get_if<Annulus>()) {
      // A concentric shell fits if its radii lie inside ours.
      if (offset == 0.0) return ia->inner >= outer_ann->inner && ia->outer <= outer_ann->outer;
      near = offset - ia->outer;
    } else if (const auto* ib = inner.get_if<Ball>()) {
      near = offset - ib->radius;
    } else {
      near = offset - inner.outer_radius();
    }
    return near > outer_ann->inner && far <= outer_ann->outer;
  }
  if (const auto* outer_comp = get_if<ComplementOfBall>()) {
    if (!inner.bounded()) {
      const auto* ic = inner.get_if<ComplementOfBall>();
      return (ci - outer_comp->center).norm() + outer_comp->radius <= ic->radius;
    }
    const double offset = (ci - outer_comp->center).norm();
    return offset - inner.outer_radius() > outer_comp->radius;
  }
  return false;
}

}  // namespace gravalloc
