#include <doctest.h>

#include <cmath>

#include "gravalloc/errors.hpp"
#include "gravalloc/rng.hpp"
#include "gravalloc/stats.hpp"

using namespace gravalloc;

TEST_CASE("exact Poisson tails") {
  CHECK(poisson_upper_tail(1.0, 2.0) == doctest::Approx(0.26424111765711533).epsilon(1e-14));
  CHECK(poisson_upper_tail(1.0, 2.0) == doctest::Approx(1.0 - 2.0 * std::exp(-1.0)).epsilon(1e-14));
  CHECK(poisson_upper_tail(1.0, 1.5) == poisson_upper_tail(1.0, 2.0));
  CHECK(poisson_upper_tail(3.0, 0.0) == 1.0);
  CHECK(poisson_lower_tail(2.0, 0.0) == doctest::Approx(std::exp(-2.0)).epsilon(1e-14));
  CHECK(poisson_lower_tail(2.0, -0.5) == 0.0);
  for (double lam : {0.5, 4.0, 60.0}) {
    for (int k = 0; k < 100; ++k) {
      CHECK(poisson_upper_tail(lam, k + 1) + poisson_lower_tail(lam, k) == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
  CHECK_THROWS_AS(poisson_upper_tail(0.0, 1.0), ValidationError);
}

TEST_CASE("Wilson interval") {
  const Interval zero = wilson_interval(0, 100);
  CHECK(zero.lo == 0.0);
  CHECK(zero.hi == doctest::Approx(0.036994).epsilon(1e-4));
  const Interval half = wilson_interval(50, 100);
  CHECK(half.lo < 0.5);
  CHECK(half.hi > 0.5);
  CHECK(half.lo + half.hi == doctest::Approx(1.0));
  const Interval none = wilson_interval(0, 0);
  CHECK(none.lo == 0.0);
  CHECK(none.hi == 1.0);
  CHECK_THROWS_AS(wilson_interval(3, 2), ValidationError);
}

TEST_CASE("Kolmogorov distribution and two-sample KS") {
  CHECK(kolmogorov_q(1.0) == doctest::Approx(0.26999967167735456).epsilon(1e-9));
  CHECK(kolmogorov_q(0.5) == doctest::Approx(0.9639452436648751).epsilon(1e-9));
  CHECK(kolmogorov_q(1.17) == doctest::Approx(kolmogorov_q(1.19)).epsilon(0.05));
  CHECK(kolmogorov_q(0.0) == 1.0);

  Rng rng(3);
  std::vector<double> a, b, c;
  for (int i = 0; i < 3000; ++i) {
    a.push_back(rng.normal());
    b.push_back(rng.normal());
    c.push_back(rng.normal() + 0.3);
  }
  CHECK(ks_two_sample(a, a).statistic == 0.0);
  CHECK(ks_two_sample(a, a).p_value == 1.0);
  CHECK(ks_two_sample(a, b).p_value > 0.01);
  CHECK(ks_two_sample(a, c).p_value < 1e-6);
  CHECK_THROWS_AS(ks_two_sample({}, a), ValidationError);
}

TEST_CASE("KS p-values are roughly uniform under the null") {
  int rejections = 0;
  const int trials = 400;
  for (int t = 0; t < trials; ++t) {
    Rng rng = Rng::stream(9, t);
    std::vector<double> a(500), b(500);
    for (auto& v : a) v = rng.uniform();
    for (auto& v : b) v = rng.uniform();
    rejections += ks_two_sample(a, b).p_value < 0.05 ? 1 : 0;
  }
  CHECK(rejections > 5);
  CHECK(rejections < 40);
}

TEST_CASE("linear fit and moments") {
  const LinearFit f = linear_fit({0, 1, 2, 3}, {1, 3, 5, 7});
  CHECK(f.slope == doctest::Approx(2.0));
  CHECK(f.intercept == doctest::Approx(1.0));
  CHECK(f.r_squared == doctest::Approx(1.0));
  CHECK(f.slope_stderr == doctest::Approx(0.0));
  CHECK_THROWS_AS(linear_fit({1, 1}, {0, 1}), ValidationError);
  CHECK(mean({1, 2, 3}) == 2.0);
  CHECK(variance({1, 2, 3}) == 1.0);
}
