#include <doctest.h>

#include <cmath>
#include <sstream>

#include "gravalloc/allocation.hpp"
#include "gravalloc/errors.hpp"
#include "gravalloc/far_field.hpp"
#include "gravalloc/field.hpp"
#include "gravalloc/geometry.hpp"

using namespace gravalloc;

namespace {
StarConfig explicit_config(int d, std::vector<Point> pts, double window) {
  return from_explicit(d, std::move(pts), Ball{Point::zeros(d), window});
}
std::vector<std::string> lines_of(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}
}  // namespace

TEST_CASE("single star owns the whole grid") {
  const FieldModel m(explicit_config(3, {Point::zeros(3)}, 4.0), Ball{Point::zeros(3), 4.0}, false);
  const GridSpec g{Box{Point::zeros(3), 1.0}, 8};
  const AllocationMap map = allocate_grid(m, g);
  CHECK(map.resolved_fraction() == 1.0);
  for (auto o : map.owner) CHECK(o == 0);
  CHECK(cell_volume(map, 0) == doctest::Approx(8.0));
  CHECK(extra_head_point(map) == 0);
}

TEST_CASE("two symmetric stars split the grid by the bisector") {
  const FieldModel m(explicit_config(3, {Vec{1.0, 0.0, 0.0}, Vec{-1.0, 0.0, 0.0}}, 6.0),
                     Ball{Point::zeros(3), 6.0}, false);
  const GridSpec g{Box{Point::zeros(3), 2.0}, 16};
  const AllocationMap map = allocate_grid(m, g);
  for (std::size_t i = 0; i < map.owner.size(); ++i) {
    const Point c = g.cell_center(i);
    CHECK(map.owner[i] == (c[0] > 0.0 ? 0 : 1));
  }
  CHECK(cell_volume(map, 0) == doctest::Approx(32.0));
  CHECK(cell_volume(map, 1) == doctest::Approx(32.0));
  CHECK_THROWS_AS(extra_head_point(map), UnresolvedError);
  const auto conn = connectivity(map);
  for (const auto& c : conn) CHECK(c.dominant_fraction() == 1.0);
}

TEST_CASE("allocate_grid rejects grids beyond the valid ball") {
  const FieldModel m(explicit_config(3, {Point::zeros(3)}, 4.0));
  CHECK_THROWS_AS(allocate_grid(m, GridSpec{Box{Point::zeros(3), 3.0}, 4}), ValidationError);
}

TEST_CASE("cell diameters") {
  AllocationMap map;
  map.grid = GridSpec{Box{Point::zeros(3), 1.0}, 4};
  map.owner.assign(map.grid.cell_count(), 1);
  map.owner[0] = 0;
  CHECK(cell_diameter(map, 0) == 0.0);
  map.owner[1] = 0;
  CHECK(cell_diameter(map, 0) == doctest::Approx(0.5));
  CHECK(allocation_diameter_at(map, Vec{-0.9, -0.9, -0.9}) == doctest::Approx(0.5));
  map.owner[5] = kUnresolved;
  CHECK_THROWS_AS(allocation_diameter_at(map, map.grid.cell_center(5)), UnresolvedError);
  CHECK(point_set_diameter({Vec{0.0, 0.0, 0.0}, Vec{3.0, 4.0, 0.0}, Vec{1.0, 1.0, 1.0}}) == doctest::Approx(5.0));
}

TEST_CASE("map, header and slice exports") {
  const FieldModel m(explicit_config(3, {Vec{1.0, 0.0, 0.0}, Vec{-1.0, 0.0, 0.0}}, 6.0),
                     Ball{Point::zeros(3), 6.0}, false);
  const GridSpec g{Box{Point::zeros(3), 2.0}, 4};
  const AllocationMap map = allocate_grid(m, g);
  std::ostringstream csv;
  write_map_csv(map, csv);
  const auto rows = lines_of(csv.str());
  REQUIRE(rows.size() == 65);
  CHECK(rows[0] == "i1,i2,i3,owner");
  CHECK(rows[1] == "0,0,0,1");
  const auto header = map_header_json(map);
  CHECK(header["cell_count"] == 64);
  CHECK(header["resolved_fraction"] == 1.0);
  CHECK(header["grid"]["resolution"] == 4);
  CHECK(header.contains("provenance"));

  std::ostringstream slice;
  write_slice_csv(map, 0, 1, Point::zeros(3), slice);
  const auto srows = lines_of(slice.str());
  REQUIRE(srows.size() == 17);
  CHECK(srows[0] == "x,y,owner");
  std::size_t left = 0, right = 0;
  for (std::size_t i = 1; i < srows.size(); ++i) {
    const double x = std::stod(srows[i].substr(0, srows[i].find(',')));
    const int owner = std::stoi(srows[i].substr(srows[i].rfind(',') + 1));
    CHECK(owner == (x > 0 ? 0 : 1));
    (owner == 0 ? right : left)++;
  }
  CHECK(left == right);
  CHECK_THROWS_AS(write_slice_csv(map, 1, 1, Point::zeros(3), slice), ValidationError);
}

TEST_CASE("Monte Carlo allocation volumes") {
  const FieldModel m(explicit_config(3, {Vec{1.0, 0.0, 0.0}, Vec{-1.0, 0.0, 0.0}}, 6.0),
                     Ball{Point::zeros(3), 6.0}, false);
  const Region box = Box{Point::zeros(3), 2.0};
  const McAllocation mc = mc_allocate(m, box, 4000, 3);
  CHECK(mc.coverage() == 1.0);
  const auto v = mc.volumes(2);
  CHECK(v[0] + v[1] == doctest::Approx(64.0));
  CHECK(std::fabs(v[0] - 32.0) < 4.0);
  const McAllocation again = mc_allocate(m, box, 4000, 3);
  CHECK(again.owner == mc.owner);
}

TEST_CASE("Poisson grid allocation resolves and basins are unit volume on average") {
  const StarConfig cfg = sample_poisson(3, Ball{Point::zeros(3), 12.0}, 1.0, 77);
  auto model = std::make_shared<FieldModel>(cfg);
  HierarchicalField h(model);
  h.prepare(Box{Point::zeros(3), 3.0});
  const AllocationMap map = allocate_grid(h, GridSpec{Box{Point::zeros(3), 2.0}, 16});
  CHECK(map.resolved_fraction() >= 0.99);
  const std::size_t head = extra_head_point(map);
  CHECK(head < cfg.size());
  CHECK(head == 2162);
  CHECK(cfg.star(head).norm() < 3.0);
}

TEST_CASE("flood-filled cell is the basin of its star") {
  const StarConfig cfg = sample_poisson(3, Ball{Point::zeros(3), 12.0}, 1.0, 5);
  auto model = std::make_shared<FieldModel>(cfg);
  HierarchicalField h(model);
  h.prepare(Box{Point::zeros(3), 4.0});
  const FloodCell cell = flood_cell_at(h, Point::zeros(3), 0.2);
  REQUIRE_FALSE(cell.truncated);
  CHECK(cell.star == basin_of(h, Point::zeros(3)).star);
  const double vol = static_cast<double>(cell.cells.size()) * 0.008;
  CHECK(vol > 0.5);
  CHECK(vol < 2.0);
  CHECK(cell.diameter() > 0.0);
}

TEST_CASE("crossing examples") {
  const FieldModel empty(explicit_config(3, {}, 10.0));
  CHECK(detect_crossing(empty, 1.0, 26, 1).crossed);
  const FieldModel inward(explicit_config(3, {Point::zeros(3)}, 10.0));
  const CrossingResult r = detect_crossing(inward, 0.15, 26, 1);
  CHECK(r.crossed);
  REQUIRE(r.witness.has_value());
  CHECK(trace_crosses(*r.witness, inward.config(), 0.15));
  CHECK_THROWS_AS(detect_crossing(empty, 3.0, 26, 1), ValidationError);
  CHECK(default_crossing_seeds(3, 1.0) >= 26);
}

TEST_CASE("stable marriage examples") {
  const StarConfig one = from_explicit(3, {Point::zeros(3)}, Box{Point::zeros(3), 0.5});
  const GridSpec g1{Box{Point::zeros(3), 0.5}, 4};
  CHECK(stable_marriage_quota(one, g1) == 64);
  const AllocationMap m1 = stable_marriage_allocate(one, g1);
  for (auto o : m1.owner) CHECK(o == 0);

  const StarConfig two = from_explicit(3, {Vec{0.5, 0.0, 0.0}, Vec{-0.5, 0.0, 0.0}}, Box{Point::zeros(3), 1.0});
  const GridSpec g2{Box{Point::zeros(3), 1.0}, 8};
  const AllocationMap m2 = stable_marriage_allocate(two, g2);
  std::size_t owned[2] = {0, 0};
  for (std::size_t i = 0; i < m2.owner.size(); ++i) {
    if (m2.owner[i] < 0) continue;
    ++owned[m2.owner[i]];
    CHECK((g2.cell_center(i)[0] > 0.0) == (m2.owner[i] == 0));
  }
  CHECK(owned[0] == 64);
  CHECK(owned[1] == 64);
  CHECK(count_blocking_pairs(two, m2, 64) == 0);

  CHECK_THROWS_AS(stable_marriage_allocate(one, GridSpec{Box{Point::zeros(3), 0.1}, 2}), InfeasibleError);
}
