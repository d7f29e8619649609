#include <doctest.h>

#include <cmath>

#include "gravalloc/errors.hpp"
#include "gravalloc/geometry.hpp"
#include "gravalloc/region.hpp"
#include "gravalloc/rng.hpp"

using namespace gravalloc;

TEST_CASE("annulus membership is {q < |z - y| <= p}") {
  const Region a = Annulus{Point::zeros(3), 1.0, 2.0};
  CHECK_FALSE(a.contains(Vec{1.0, 0.0, 0.0}));
  CHECK(a.contains(Vec{2.0, 0.0, 0.0}));
  CHECK(a.contains(Vec{1.5, 0.0, 0.0}));
  CHECK_FALSE(a.contains(Vec{2.0000001, 0.0, 0.0}));
  CHECK(a.volume() == doctest::Approx(kappa(3) * 7.0));
}

TEST_CASE("region volumes and validation") {
  CHECK(Region(Ball{Point::zeros(4), 2.0}).volume() == doctest::Approx(kappa(4) * 16.0));
  CHECK(Region(Box{Point::zeros(3), 1.5}).volume() == doctest::Approx(27.0));
  CHECK_FALSE(Region(ComplementOfBall{Point::zeros(3), 1.0}).bounded());
  CHECK(Region(ComplementOfBall{Point::zeros(3), 1.0}).contains(Vec{2.0, 0.0, 0.0}));
  CHECK_THROWS_AS(Region(Ball{Point::zeros(3), -1.0}), ValidationError);
  CHECK_THROWS_AS(Region(Annulus{Point::zeros(3), 2.0, 1.0}), ValidationError);
}

TEST_CASE("rng streams are reproducible and distinct") {
  Rng a = Rng::stream(1, 5), b = Rng::stream(1, 5), c = Rng::stream(1, 6);
  bool differs = false;
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next();
    CHECK(x == b.next());
    differs = differs || x != c.next();
  }
  CHECK(differs);
  Rng n1 = Rng::stream(1, "alpha"), n2 = Rng::stream(1, "alpha");
  CHECK(n1.next() == n2.next());
}

TEST_CASE("rng variates have the right moments") {
  Rng rng(42);
  const int n = 200000;
  double su = 0, sn = 0, sn2 = 0, sp = 0, sp_big = 0;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    CHECK((u >= 0.0 && u < 1.0));
    su += u;
    const double z = rng.normal();
    sn += z;
    sn2 += z * z;
    sp += static_cast<double>(rng.poisson(3.5));
    sp_big += static_cast<double>(rng.poisson(250.0));
  }
  CHECK(su / n == doctest::Approx(0.5).epsilon(0.01));
  CHECK(std::fabs(sn / n) < 0.01);
  CHECK(sn2 / n == doctest::Approx(1.0).epsilon(0.01));
  CHECK(sp / n == doctest::Approx(3.5).epsilon(0.01));
  CHECK(sp_big / n == doctest::Approx(250.0).epsilon(0.002));
  for (int i = 0; i < 1000; ++i) CHECK(rng.below(7) < 7);
}
