#include <doctest.h>

#include <cmath>
#include <numbers>

#include "gravalloc/errors.hpp"
#include "gravalloc/far_field.hpp"
#include "gravalloc/field.hpp"
#include "gravalloc/geometry.hpp"
#include "gravalloc/rng.hpp"
#include "gravalloc/spatial_index.hpp"

using namespace gravalloc;

namespace {

const double kPi = std::numbers::pi;

StarConfig explicit_config(int d, std::vector<Point> pts, double window) {
  return from_explicit(d, std::move(pts), Ball{Point::zeros(d), window});
}

Vec direct_force(const StarConfig& cfg, const Point& x, const Point& c, bool compensate) {
  const int d = cfg.dim();
  Vec f = Vec::zeros(d);
  for (const auto& z : cfg.stars()) {
    const Vec v = z - x;
    f += v * std::pow(v.norm(), -d);
  }
  if (compensate) f += (x - c) * kappa(d);
  return f;
}

}  // namespace

TEST_CASE("force examples") {
  const FieldModel one(explicit_config(3, {Vec{1.0, 0.0, 0.0}}, 2.0));
  const Vec f = one.force(Point::zeros(3));
  CHECK(f[0] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(f[1] == 0.0);
  CHECK(f[2] == 0.0);

  const FieldModel sym(explicit_config(3, {Vec{1.0, 0.0, 0.0}, Vec{-1.0, 0.0, 0.0}}, 2.0));
  CHECK(sym.force(Point::zeros(3)).norm() < 1e-15);

  const FieldModel empty(explicit_config(3, {}, 5.0));
  const Vec fe = empty.force(Vec{1.0, 0.0, 0.0});
  CHECK(fe[0] == doctest::Approx(4.0 * kPi / 3.0).epsilon(1e-15));
  CHECK(fe[0] == doctest::Approx(4.18879).epsilon(1e-6));

  CHECK_THROWS_AS(one.force(Vec{1.0, 0.0, 0.0}), SingularityError);
  CHECK_THROWS_AS(one.force(Vec{5.0, 0.0, 0.0}), DomainError);
}

TEST_CASE("force matches direct summation in any order") {
  for (int d : {3, 4, 5}) {
    const StarConfig cfg = sample_poisson(d, Ball{Point::zeros(d), 4.0}, 1.0, 10 + d);
    const FieldModel model(cfg);
    Rng rng(d);
    for (int i = 0; i < 20; ++i) {
      Point x(d);
      for (int k = 0; k < d; ++k) x[k] = rng.uniform(-2.0, 2.0);
      const Vec a = model.force(x);
      const Vec b = direct_force(cfg, x, Point::zeros(d), true);
      CHECK((a - b).norm() <= 1e-10 * std::max(1.0, b.norm()));
    }
  }
}

TEST_CASE("translation covariance of the compensated field") {
  const StarConfig cfg = sample_poisson(3, Ball{Point::zeros(3), 5.0}, 1.0, 3);
  const Vec u{0.7, -1.1, 0.4};
  const StarConfig moved = cfg.translated(u);
  const FieldModel a(cfg), b(moved, Ball{u, 5.0});
  const Point x{0.3, 0.2, -0.5};
  const Vec fa = a.force(x), fb = b.force(x + u);
  CHECK((fa - fb).norm() < 1e-9 * std::max(1.0, fa.norm()));
}

TEST_CASE("force_partial examples") {
  const FieldModel m(explicit_config(3, {Vec{1.0, 0.0, 0.0}}, 2.0));
  const Vec a = m.force_partial(Point::zeros(3), Annulus{Point::zeros(3), 0.5, 2.0});
  CHECK(a[0] == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(std::fabs(a[1]) + std::fabs(a[2]) < 1e-15);

  const FieldModel none(explicit_config(3, {Vec{0.5, 0.0, 0.0}}, 3.0));
  CHECK(none.force_partial(Point::zeros(3), Annulus{Point::zeros(3), 1.0, 2.0}).norm() == 0.0);

  const Vec b = m.force_partial(Vec{0.2, 0.0, 0.0}, Ball{Point::zeros(3), 2.0});
  CHECK(b[0] == doctest::Approx(2.400258040957278).epsilon(1e-14));
  CHECK(b[0] == doctest::Approx(1.5625 + kappa(3) * 0.2).epsilon(1e-15));
}

TEST_CASE("potential_partial examples") {
  const FieldModel m5(explicit_config(5, {Vec{1.0, 0.0, 0.0, 0.0, 0.0}}, 2.0));
  const double u5 = m5.potential_partial(Point::zeros(5), Ball{Point::zeros(5), 2.0});
  CHECK(u5 == doctest::Approx(17.212630046381086).epsilon(1e-14));
  CHECK(u5 == doctest::Approx(-1.0 / 3.0 + 16.0 * kPi * kPi / 9.0).epsilon(1e-14));

  const FieldModel e5(explicit_config(5, {}, 3.0));
  const double c5 = e5.potential_partial(Point::zeros(5), Annulus{Point::zeros(5), 1.0, 2.0});
  CHECK(c5 == doctest::Approx(13.159472534785813).epsilon(1e-14));
  CHECK(c5 == doctest::Approx(5.0 * kappa(5) / 2.0).epsilon(1e-14));

  const FieldModel m3(explicit_config(3, {Vec{1.0, 0.0, 0.0}}, 2.0));
  const double u3 = m3.potential_partial(Point::zeros(3), Annulus{Point::zeros(3), 0.5, 2.0});
  CHECK(u3 == doctest::Approx(22.561944901923447).epsilon(1e-14));

  CHECK_THROWS_AS(m3.potential_partial(Vec{1.5, 0.0, 0.0}, Annulus{Point::zeros(3), 0.5, 1.8}), DomainError);
}

TEST_CASE("potential_diff examples and antisymmetry") {
  const FieldModel m(explicit_config(3, {Point::zeros(3)}, 3.0));
  const Region a = Ball{Point::zeros(3), 0.1};
  const Point x{1.0, 0.0, 0.0}, y{2.0, 0.0, 0.0};
  const double u = m.potential_diff(x, y, a);
  CHECK(u == doctest::Approx(0.4979056048976068).epsilon(1e-10));
  CHECK(u == doctest::Approx(0.5 - kappa(3) * 1e-3 * 0.5).epsilon(1e-10));
  CHECK(m.potential_diff(x, x, a) == 0.0);
  CHECK(m.potential_diff(y, x, a) == doctest::Approx(-u).epsilon(1e-12));

  const FieldModel s(explicit_config(3, {Vec{0.0, 1.0, 0.0}, Vec{0.0, -1.0, 0.5}, Vec{0.0, 0.3, -0.2}}, 3.0));
  const double v = s.potential_diff(Vec{1.0, 0.0, 0.0}, Vec{-1.0, 0.0, 0.0}, Ball{Point::zeros(3), 2.5});
  CHECK(std::fabs(v) < 1e-9);
}

TEST_CASE("jacobian examples and properties") {
  const FieldModel single(explicit_config(3, {Vec{2.0, 0.0, 0.0}}, 3.0), Ball{Point::zeros(3), 3.0}, false);
  const Matrix j = single.jacobian(Point::zeros(3));
  CHECK(j(0, 0) == doctest::Approx(2.0 / 8.0).epsilon(1e-14));
  CHECK(j(1, 1) == doctest::Approx(-1.0 / 8.0).epsilon(1e-14));
  CHECK(j(2, 2) == doctest::Approx(-1.0 / 8.0).epsilon(1e-14));
  CHECK(std::fabs(j(0, 1)) + std::fabs(j(1, 2)) < 1e-15);

  const FieldModel empty(explicit_config(4, {}, 3.0));
  const Matrix je = empty.jacobian(Point::zeros(4));
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) CHECK(je(r, c) == doctest::Approx(r == c ? kappa(4) : 0.0));

  const StarConfig cfg = sample_poisson(3, Ball{Point::zeros(3), 4.0}, 1.0, 21);
  const FieldModel m(cfg);
  const Point x{0.31, -0.42, 0.17};
  const Matrix jm = m.jacobian(x);
  double trace = 0.0;
  for (int r = 0; r < 3; ++r) {
    trace += jm(r, r);
    for (int c = 0; c < 3; ++c) CHECK(jm(r, c) == doctest::Approx(jm(c, r)).epsilon(1e-12));
  }
  CHECK(trace == doctest::Approx(3.0 * kappa(3)).epsilon(1e-9));
  const double h = 1e-5;
  for (int c = 0; c < 3; ++c) {
    Point xp = x, xm = x;
    xp[c] += h;
    xm[c] -= h;
    const Vec col = (m.force(xp) - m.force(xm)) * (1.0 / (2.0 * h));
    double scale = 1.0;
    for (int r = 0; r < 3; ++r) scale = std::max(scale, std::fabs(jm(r, c)));
    for (int r = 0; r < 3; ++r) CHECK(std::fabs(col[r] - jm(r, c)) / scale < 1e-6);
  }
}

TEST_CASE("ball field integral") {
  CHECK(ball_field_integral(Vec{0.5, 0.5, 0.5}, Vec{0.5, 0.5, 0.5}, 1.0).norm() == 0.0);
  const Vec v = ball_field_integral(Vec{1.0, 0.0, 0.0}, Point::zeros(3), 2.0);
  CHECK(v[0] == doctest::Approx(-kappa(3)).epsilon(1e-15));
  CHECK_THROWS_AS(ball_field_integral(Vec{2.0, 0.0, 0.0}, Point::zeros(3), 2.0), DomainError);
}

TEST_CASE("sphere flux counts enclosed stars") {
  const FieldModel m(explicit_config(3, {Vec{0.2, 0.1, 0.0}, Vec{1.6, 0.0, 0.3}, Vec{-0.3, 0.5, 0.2}}, 3.0));
  const double rho = 1.0;
  const double expected = 3.0 * kappa(3) * (kappa(3) - 2.0);
  CHECK(sphere_flux(m, Point::zeros(3), rho, 96) == doctest::Approx(expected).epsilon(1e-6));
}

TEST_CASE("kd-tree queries agree with a linear scan") {
  const StarConfig cfg = sample_poisson(3, Box{Point::zeros(3), 10.0}, 1.25, 99);
  REQUIRE(cfg.size() > 9000);
  const KdTree tree(cfg.stars());
  Rng rng(17);
  for (int q = 0; q < 1000; ++q) {
    Point c(3);
    for (int k = 0; k < 3; ++k) c[k] = rng.uniform(-11.0, 11.0);
    const double r = rng.uniform(0.0, 3.0);
    auto got = tree.query_ball(c, r);
    std::sort(got.begin(), got.end());
    std::vector<std::size_t> want;
    for (std::size_t i = 0; i < cfg.size(); ++i)
      if (distance(cfg.star(i), c) <= r) want.push_back(i);
    CHECK(got == want);
  }
  CHECK(KdTree(std::vector<Point>{}).query_ball(Point::zeros(3), 5.0).empty());
  CHECK(tree.query_ball(Point::zeros(3), 100.0).size() == cfg.size());
  const auto nn = tree.nearest(Point::zeros(3), 3);
  REQUIRE(nn.size() == 3);
  CHECK(nn[0].distance <= nn[1].distance);
}

TEST_CASE("stars_in matches region membership") {
  const StarConfig cfg = sample_poisson(4, Ball{Point::zeros(4), 3.0}, 1.0, 4);
  const FieldModel m(cfg);
  const Region a = Annulus{Vec{0.2, 0.0, 0.0, 0.0}, 0.7, 2.0};
  auto got = m.stars_in(a);
  std::sort(got.begin(), got.end());
  std::vector<std::size_t> want;
  for (std::size_t i = 0; i < cfg.size(); ++i)
    if (a.contains(cfg.star(i))) want.push_back(i);
  CHECK(got == want);
}

TEST_CASE("hierarchical far field tracks the exact field") {
  for (int d : {3, 4}) {
    const double L = d == 3 ? 12.0 : 7.0;
    const StarConfig cfg = sample_poisson(d, Ball{Point::zeros(d), L}, 1.0, 5);
    auto model = std::make_shared<FieldModel>(cfg);
    HierarchicalField h(model);
    h.prepare(Box{Point::zeros(d), 1.5});
    Rng rng(d);
    double worst = 0.0;
    for (int i = 0; i < 200; ++i) {
      Point x(d);
      for (int k = 0; k < d; ++k) x[k] = rng.uniform(-1.5, 1.5);
      const Vec e = model->force(x);
      const FieldSample s = h.sample(x);
      worst = std::max(worst, (s.force - e).norm() / std::max(1.0, e.norm()));
      const auto nn = model->index().nearest(x, 1);
      CHECK(s.nearest == nn[0].index);
    }
    CHECK(worst < 2e-3);
  }
}
