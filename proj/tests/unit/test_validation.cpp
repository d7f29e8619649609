#include <doctest.h>

#include <cmath>
#include <sstream>

#include "gravalloc/validation.hpp"

using namespace gravalloc;

TEST_CASE("deterministic battery passes") {
  CHECK(test_poisson_tails().passed());
  CHECK(test_poisson_tails({1.0}, 1.0).passed());
  CHECK(test_hadamard_variant(12, 500, 3).passed());
  InverseDistanceOptions o;
  o.sets = 30;
  o.max_points = 600;
  const TestReport inv = test_inverse_distance_sum(o);
  CHECK(inv.passed());
  CHECK(inv.details["max_ratio_by_dim"]["3"].get<double>() < 1.0);
}

TEST_CASE("joint density probes") {
  JointDensityOptions one{3, 1, 0.5, 10.0, 200, 1};
  const TestReport r1 = test_joint_density_core(one);
  CHECK(r1.passed());
  CHECK(r1.details["max_inverse_error"].get<double>() < 1e-12);
  JointDensityOptions two{3, 2, 0.5, 10.0, 200, 1};
  const TestReport r2 = test_joint_density_core(two);
  CHECK(r2.passed());
  CHECK(r2.details["min_image_gap"].get<double>() > 0.0);
  JointDensityOptions far{3, 3, 3.0, 10.0, 10, 1};
  const TestReport r3 = test_joint_density_core(far);
  CHECK(r3.status == Status::Skipped);
  CHECK(r3.acceptable());
  CHECK(joint_density_lambda_bound(3, 2, 10.0) == doctest::Approx(1.0 / std::cbrt(std::log(2.0))));
}

TEST_CASE("field identity checks") {
  CHECK(test_gradient_consistency(30, 2).passed());
  CHECK(test_flux_identity(4, 2).passed());
  CHECK(test_shell_theorem(200000, 2).passed());
  CHECK(test_capture_asymptotics(3, 5, 2).passed());
  CHECK(test_capture_asymptotics(4, 5, 2).passed());
}

TEST_CASE("stable scaling identity case") {
  StableScalingOptions o;
  o.n = 1;
  o.samples = 500;
  o.window_radius = 6.0;
  const TestReport r = test_stable_scaling(o);
  CHECK(r.passed());
}

TEST_CASE("tail estimates") {
  TailEstimate t;
  t.quantity = "x";
  t.thresholds = {0, 1, 2};
  t.trials = {10, 10, 10};
  t.hits = {10, 4, 0};
  t.finalize();
  CHECK(t.monotone_non_increasing());
  CHECK(t.ci[2].lo == 0.0);
  CHECK(t.ci[2].hi > 0.0);
  CHECK(check_tail_shape("x", t).passed());
  t.hits = {10, 4, 5};
  t.finalize();
  CHECK_FALSE(t.monotone_non_increasing());
  CHECK(check_tail_shape("x", t).status == Status::Fail);
  const auto j = to_json(t);
  CHECK(j["estimate"].size() == 3);
  CHECK(j["ci_hi"].size() == 3);
}

TEST_CASE("partial potential tails") {
  PartialTailOptions o;
  o.d = 5;
  o.outer = 4.0;
  o.samples = 2000;
  o.t_potential = {0.0, 1e9};
  const auto tails = estimate_partial_potential_tail(o);
  REQUIRE(tails.size() == 3);
  CHECK(tails[0].estimates()[0] > 0.99);
  CHECK(tails[0].hits[1] == 0);
  CHECK(tails[0].ci[1].hi > 0.0);
  for (const auto& t : tails) {
    CHECK(t.monotone_non_increasing());
    CHECK(t.details["bound_shape"].size() == t.thresholds.size());
  }
  CHECK(tails[1].estimates().front() >= 0.5);
}

TEST_CASE("allocation tails on a small window") {
  AllocationTailOptions o;
  o.window_radius = 10.0;
  o.r_grid = {0.0, 1.0, 2.0};
  o.configs = 4;
  o.lattice_spacing = 0.2;
  o.crossing_seeds = 26;
  o.far.order = 4;
  const TailEstimate diam = estimate_diameter_tail(o);
  CHECK(diam.estimates()[0] == 1.0);
  CHECK(diam.monotone_non_increasing());
  o.r_grid = {0.5, 1.0, 2.0};
  const AllocationTails t = estimate_allocation_tails(o);
  CHECK(t.crossing.trials[0] == 4);
  CHECK(t.crossing.monotone_non_increasing());
  CHECK(t.diameter.hits[1] == diam.hits[1]);
  o.r_grid = {3.0};
  CHECK_THROWS_AS(estimate_crossing_tail(o), ValidationError);
}

TEST_CASE("suite bookkeeping") {
  TestReport pass{"a", Status::Pass}, skip{"b", Status::Skipped}, inc{"c", Status::Inconclusive};
  CHECK(suite_passed({pass, skip}));
  CHECK_FALSE(suite_passed({pass, inc}));
  std::ostringstream out;
  write_summary_csv({pass, skip}, out);
  CHECK(out.str().rfind("name,status,statistic,threshold,direction,seed,seconds\n", 0) == 0);
  CHECK(out.str().find("\"b\",skipped") != std::string::npos);
  SuiteOptions s;
  s.only = {"poisson_tails", "stable_marriage"};
  const auto reports = run_suite(s);
  CHECK(reports.size() == 2);
  CHECK(suite_passed(reports));
  s.only = {"nope"};
  CHECK_THROWS_AS(run_suite(s), ValidationError);
}
