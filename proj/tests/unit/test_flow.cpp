#include <doctest.h>

#include <cmath>
#include <sstream>

#include "gravalloc/far_field.hpp"
#include "gravalloc/field.hpp"
#include "gravalloc/flow.hpp"
#include "gravalloc/geometry.hpp"
#include "gravalloc/rng.hpp"

using namespace gravalloc;

namespace {
StarConfig explicit_config(int d, std::vector<Point> pts, double window) {
  return from_explicit(d, std::move(pts), Ball{Point::zeros(d), window});
}
}  // namespace

TEST_CASE("radial capture of a single star") {
  const FieldModel m(explicit_config(3, {Point::zeros(3)}, 2.0), Ball{Point::zeros(3), 2.0}, false);
  const FlowTrace tr = integrate_flow(m, Vec{0.1, 0.0, 0.0});
  REQUIRE(tr.terminal == Terminal::Captured);
  CHECK(tr.star == 0);
  CHECK(tr.tau == doctest::Approx(0.1 * 0.1 * 0.1 / 3.0).epsilon(0.01));
  CHECK(flow_time(tr).value() == tr.tau);

}

TEST_CASE("start on a star is captured at time zero") {
  const FieldModel m(explicit_config(3, {Vec{0.5, 0.0, 0.0}, Vec{-0.5, 0.2, 0.0}}, 3.0));
  const FlowTrace tr = integrate_flow(m, Vec{-0.5, 0.2, 0.0});
  CHECK(tr.terminal == Terminal::Captured);
  CHECK(tr.star == 1);
  CHECK(tr.tau == 0.0);
}

TEST_CASE("symmetric saddle is never captured and stays on the plane") {
  const FieldModel m(explicit_config(3, {Vec{1.0, 0.0, 0.0}, Vec{-1.0, 0.0, 0.0}}, 6.0));
  FlowOptions o;
  o.rel_tol = 1e-10;
  o.abs_tol = 1e-12;
  o.max_time = 5.0;
  const FlowTrace tr = integrate_flow(m, Vec{0.0, 0.5, 0.0}, o);
  CHECK(tr.terminal != Terminal::Captured);
  for (const auto& p : tr.positions) CHECK(p[0] == 0.0);
  CHECK_FALSE(flow_time(tr).has_value());
}

TEST_CASE("basin_of examples") {
  const FieldModel one(explicit_config(3, {Vec{0.2, 0.1, 0.0}}, 4.0), Ball{Point::zeros(3), 4.0}, false);
  CHECK(basin_of(one, Vec{1.0, -0.5, 0.3}).star == 0);
  const FieldModel two(explicit_config(3, {Vec{1.0, 0.0, 0.0}, Vec{-1.0, 0.0, 0.0}}, 4.0));
  const Basin b = basin_of(two, Vec{0.5, 0.0, 0.0});
  CHECK(b.resolved());
  CHECK(b.star == 0);
}

TEST_CASE("flows of a Poisson configuration resolve") {
  const StarConfig cfg = sample_poisson(3, Ball{Point::zeros(3), 12.0}, 1.0, 2024);
  auto model = std::make_shared<FieldModel>(cfg);
  HierarchicalField h(model);
  h.prepare(Box{Point::zeros(3), 4.0});
  Rng rng(1);
  int resolved = 0, agree = 0;
  const int n = 1000;
  for (int i = 0; i < n; ++i) {
    Point x(3);
    for (int k = 0; k < 3; ++k) x[k] = rng.uniform(-4.0, 4.0);
    const Basin b = basin_of(h, x);
    resolved += b.resolved() ? 1 : 0;
    if (i < 100) agree += basin_of(*model, x).star == b.star ? 1 : 0;
  }
  CHECK(resolved >= 990);
  CHECK(agree >= 98);
}

TEST_CASE("flow option validation") {
  const FieldModel m(explicit_config(3, {Point::zeros(3)}, 2.0));
  FlowOptions bad;
  bad.dominance_factor = 1.0;
  CHECK_THROWS_AS(integrate_flow(m, Vec{0.5, 0.0, 0.0}, bad), ValidationError);
  CHECK_THROWS_AS(integrate_flow(m, Vec{0.5, 0.0}), ValidationError);
  const FlowTrace outside = integrate_flow(m, Vec{1.9, 0.0, 0.0});
  CHECK(outside.terminal == Terminal::ExitedValidRegion);
}

TEST_CASE("trace export") {
  const FieldModel m(explicit_config(3, {Point::zeros(3)}, 2.0), Ball{Point::zeros(3), 2.0}, false);
  FlowOptions o;
  o.dominance_factor = 1e6;
  const FlowTrace tr = integrate_flow(m, Vec{0.4, 0.0, 0.0}, o);
  std::ostringstream out;
  write_trace_csv(tr, out);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "t,x1,x2,x3");
  std::size_t rows = 0;
  double last_t = -1.0;
  while (std::getline(in, line)) {
    ++rows;
    const double t = std::stod(line.substr(0, line.find(',')));
    CHECK(t > last_t);
    last_t = t;
  }
  CHECK(rows == tr.times.size());
  const auto j = trace_terminal_json(tr);
  CHECK(j["terminal"] == "captured");
  CHECK(j["star"] == 0);
  CHECK(j["tau"].get<double>() == tr.tau);
}
