#include "gravalloc/allocation.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <ostream>
#include <unordered_map>

#include "gravalloc/far_field.hpp"
#include "gravalloc/parallel.hpp"
#include "gravalloc/rng.hpp"
#include "gravalloc/serialization.hpp"

namespace gravalloc {

std::size_t GridSpec::cell_count() const {
  std::size_t n = 1;
  for (int k = 0; k < dim(); ++k) {
    if (n > kMaxGridCells) return std::numeric_limits<std::size_t>::max();
    n *= static_cast<std::size_t>(resolution);
  }
  return n;
}

double GridSpec::cell_volume() const { return std::pow(cell_width(), dim()); }

CellIndex GridSpec::index_of(std::size_t linear) const {
  CellIndex idx{};
  for (int k = 0; k < dim(); ++k) {
    idx[k] = static_cast<std::int64_t>(linear % resolution);
    linear /= resolution;
  }
  return idx;
}

std::size_t GridSpec::linear(const CellIndex& idx) const {
  std::size_t l = 0;
  for (int k = dim() - 1; k >= 0; --k) l = l * resolution + static_cast<std::size_t>(idx[k]);
  return l;
}

Point GridSpec::cell_center(std::size_t lin) const {
  const CellIndex idx = index_of(lin);
  const double w = cell_width();
  Point p(dim());
  for (int k = 0; k < dim(); ++k) p[k] = box.center[k] - box.halfwidth + (static_cast<double>(idx[k]) + 0.5) * w;
  return p;
}

std::vector<std::size_t> GridSpec::cells_containing(const Point& x) const {
  const int d = dim();
  const double w = cell_width();
  std::array<std::vector<std::int64_t>, kMaxDim> choices;
  for (int k = 0; k < d; ++k) {
    const double t = (x[k] - (box.center[k] - box.halfwidth)) / w;
    if (!(t >= 0.0) || t > resolution) return {};
    const auto i = static_cast<std::int64_t>(std::floor(t));
    if (static_cast<double>(i) == t && i > 0 && i < resolution) {
      choices[k] = {i - 1, i};
    } else {
      choices[k] = {std::min<std::int64_t>(i, resolution - 1)};
    }
  }
  std::vector<std::size_t> out;
  std::array<std::size_t, kMaxDim> pick{};
  for (;;) {
    CellIndex idx{};
    for (int k = 0; k < d; ++k) idx[k] = choices[k][pick[k]];
    out.push_back(linear(idx));
    int k = 0;
    while (k < d && ++pick[k] == choices[k].size()) pick[k++] = 0;
    if (k == d) break;
  }
  return out;
}

void GridSpec::validate() const {
  if (box.center.dim() < 1) throw ValidationError("grid box has no dimension");
  if (!(box.halfwidth > 0.0) || !std::isfinite(box.halfwidth)) throw ValidationError("grid halfwidth must be positive");
  if (resolution < 2) throw ValidationError("grid resolution must be at least 2");
  if (cell_count() > kMaxGridCells) throw ValidationError("grid exceeds the supported cell count (2^25)");
}

nlohmann::json to_json(const GridSpec& g) {
  return {{"box", to_json(Region(g.box))}, {"resolution", g.resolution}};
}

GridSpec grid_from_json(const nlohmann::json& j) {
  const Region r = region_from_json(j.at("box"));
  const auto* b = r.get_if<Box>();
  if (!b) throw ValidationError("grid box must be a box region");
  GridSpec g{*b, j.at("resolution").get<int>()};
  g.validate();
  return g;
}

std::size_t AllocationMap::resolved_count() const {
  return static_cast<std::size_t>(std::count_if(owner.begin(), owner.end(), [](std::int64_t o) { return o >= 0; }));
}

double AllocationMap::resolved_fraction() const {
  return owner.empty() ? 0.0 : static_cast<double>(resolved_count()) / static_cast<double>(owner.size());
}

std::size_t AllocationMap::star_count_hint() const {
  std::int64_t m = -1;
  for (auto o : owner) m = std::max(m, o);
  return static_cast<std::size_t>(m + 1);
}

nlohmann::json describe(const ForceSource& field) {
  const StarConfig& c = field.config();
  nlohmann::json j;
  j["dim"] = c.dim();
  j["stars"] = c.size();
  j["intensity"] = c.intensity();
  j["seed"] = c.seed();
  j["window"] = to_json(c.window());
  j["truncation"] = to_json(Region(field.truncation()));
  j["compensate"] = field.compensated();
  if (const auto* h = dynamic_cast<const HierarchicalField*>(&field)) {
    j["evaluator"] = "hierarchical";
    j["chebyshev_order"] = h->order();
    j["leaf_level"] = h->leaf_level();
  } else {
    j["evaluator"] = "exact";
  }
  return j;
}

namespace {

double valid_radius(const ForceSource& field, const FlowOptions& opts) {
  const double L = field.truncation().radius;
  return L - opts.margin_for(L);
}

}  // namespace

AllocationMap allocate_grid(const ForceSource& field, const GridSpec& grid, const FlowOptions& opts, int threads) {
  grid.validate();
  opts.validate();
  if (grid.dim() != field.dim()) throw ValidationError("grid dimension does not match the field");
  const Point& tc = field.truncation().center;
  double far2 = 0.0;
  const double w = grid.cell_width();
  for (int k = 0; k < grid.dim(); ++k) {
    const double lo = grid.box.center[k] - grid.box.halfwidth + 0.5 * w - tc[k];
    const double hi = grid.box.center[k] + grid.box.halfwidth - 0.5 * w - tc[k];
    const double m = std::max(std::fabs(lo), std::fabs(hi));
    far2 += m * m;
  }
  if (std::sqrt(far2) > valid_radius(field, opts)) {
    throw ValidationError("grid reaches outside the valid region of the field");
  }
  AllocationMap map;
  map.grid = grid;
  map.owner.assign(grid.cell_count(), kUnresolved);
  parallel_for(map.owner.size(), threads, [&](std::size_t i) {
    const Basin b = basin_of(field, grid.cell_center(i), opts);
    map.owner[i] = b.resolved() ? static_cast<std::int64_t>(b.star) : kUnresolved;
  });
  map.provenance = {{"field", describe(field)}, {"flow_options", to_json(opts)}, {"method", "flow"}};
  return map;
}

double cell_volume(const AllocationMap& map, std::size_t star) {
  const auto n = std::count(map.owner.begin(), map.owner.end(), static_cast<std::int64_t>(star));
  return static_cast<double>(n) * map.grid.cell_volume();
}

double point_set_diameter(const std::vector<Point>& pts) {
  double best = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (std::size_t j = i + 1; j < pts.size(); ++j) best = std::max(best, (pts[i] - pts[j]).norm2());
  return std::sqrt(best);
}

double cell_diameter(const AllocationMap& map, std::size_t star) {
  std::vector<Point> pts;
  for (std::size_t i = 0; i < map.owner.size(); ++i) {
    if (map.owner[i] == static_cast<std::int64_t>(star)) pts.push_back(map.grid.cell_center(i));
  }
  if (pts.empty()) throw ValidationError("star owns no cells");
  return point_set_diameter(pts);
}

namespace {

std::size_t owner_at(const AllocationMap& map, const Point& x) {
  if (x.dim() != map.grid.dim()) throw ValidationError("point dimension does not match the grid");
  const auto cells = map.grid.cells_containing(x);
  if (cells.empty()) throw DomainError("point lies outside the grid");
  const std::int64_t o = map.owner[cells.front()];
  for (std::size_t c : cells) {
    if (map.owner[c] != o) throw UnresolvedError("point lies on a boundary between cells with different owners");
  }
  if (o < 0) throw UnresolvedError("cell containing the point is unresolved");
  return static_cast<std::size_t>(o);
}

}  // namespace

double allocation_diameter_at(const AllocationMap& map, const Point& x) { return cell_diameter(map, owner_at(map, x)); }

std::size_t extra_head_point(const AllocationMap& map) { return owner_at(map, Point::zeros(map.grid.dim())); }

std::size_t McAllocation::unresolved() const {
  return static_cast<std::size_t>(std::count(owner.begin(), owner.end(), kUnresolved));
}

double McAllocation::coverage() const {
  return owner.empty() ? 0.0 : 1.0 - static_cast<double>(unresolved()) / static_cast<double>(owner.size());
}

std::vector<double> McAllocation::volumes(std::size_t star_count) const {
  std::vector<double> v(star_count, 0.0);
  if (owner.empty()) return v;
  const double unit = region.volume() / static_cast<double>(owner.size());
  for (auto o : owner) {
    if (o >= 0 && static_cast<std::size_t>(o) < star_count) v[o] += unit;
  }
  return v;
}

double McAllocation::diameter(std::size_t star) const {
  std::vector<Point> pts;
  for (std::size_t i = 0; i < owner.size(); ++i) {
    if (owner[i] == static_cast<std::int64_t>(star)) pts.push_back(points[i]);
  }
  return point_set_diameter(pts);
}

McAllocation mc_allocate(const ForceSource& field, const Region& region, std::size_t n_samples, std::uint64_t seed,
                         const FlowOptions& opts, int threads) {
  if (region.dim() != field.dim()) throw ValidationError("region dimension does not match the field");
  if (!region.bounded()) throw UnsupportedRegionError("Monte Carlo volumes need a bounded region");
  McAllocation mc{region, {}, {}, {}};
  Rng rng = Rng::stream(seed, "mc_allocate");
  mc.points.reserve(n_samples);
  for (std::size_t i = 0; i < n_samples; ++i) mc.points.push_back(sample_uniform(region, rng));
  mc.owner.assign(n_samples, kUnresolved);
  mc.tau.assign(n_samples, std::numeric_limits<double>::quiet_NaN());
  parallel_for(n_samples, threads, [&](std::size_t i) {
    const Basin b = basin_of(field, mc.points[i], opts);
    if (b.resolved()) {
      mc.owner[i] = static_cast<std::int64_t>(b.star);
      mc.tau[i] = b.tau;
    }
  });
  return mc;
}

std::vector<double> mc_cell_volumes(const ForceSource& field, const Region& region, std::size_t n_samples,
                                    std::uint64_t seed, const FlowOptions& opts, int threads) {
  return mc_allocate(field, region, n_samples, seed, opts, threads).volumes(field.config().size());
}

namespace {

struct CellHash {
  int d;
  std::size_t operator()(const CellIndex& c) const noexcept {
    std::uint64_t h = 0x9e3779b97f4a7c15ull;
    for (int k = 0; k < d; ++k) h = mix64(h ^ static_cast<std::uint64_t>(c[k]));
    return static_cast<std::size_t>(h);
  }
};

}  // namespace

double FloodCell::diameter() const {
  std::vector<Point> pts;
  pts.reserve(cells.size());
  for (const auto& c : cells) {
    Point p(dim);
    for (int k = 0; k < dim; ++k) p[k] = static_cast<double>(c[k]) * spacing;
    pts.push_back(p);
  }
  return point_set_diameter(pts);
}

FloodCell flood_cell_at(const ForceSource& field, const Point& x, double h, const FlowOptions& opts,
                        std::size_t max_cells) {
  if (!(h > 0.0)) throw ValidationError("lattice spacing must be positive");
  const int d = field.dim();
  if (x.dim() != d) throw ValidationError("point dimension does not match the field");
  const Basin start = basin_of(field, x, opts);
  if (!start.resolved()) throw UnresolvedError("flow from the query point is unresolved: " + start.reason);

  FloodCell fc;
  fc.dim = d;
  fc.star = start.star;
  fc.spacing = h;
  const Point& tc = field.truncation().center;
  const double vr = valid_radius(field, opts);

  std::unordered_map<CellIndex, std::int64_t, CellHash> seen(1024, CellHash{d});
  std::deque<CellIndex> queue;
  auto center = [&](const CellIndex& c) {
    Point p(d);
    for (int k = 0; k < d; ++k) p[k] = static_cast<double>(c[k]) * h;
    return p;
  };
  auto visit = [&](const CellIndex& c) {
    if (seen.contains(c)) return;
    const Point p = center(c);
    if (distance(p, tc) > vr) {
      seen.emplace(c, kUnresolved);
      fc.truncated = true;
      return;
    }
    const Basin b = basin_of(field, p, opts);
    ++fc.evaluated;
    const std::int64_t o = b.resolved() ? static_cast<std::int64_t>(b.star) : kUnresolved;
    seen.emplace(c, o);
    if (o == static_cast<std::int64_t>(fc.star)) {
      fc.cells.push_back(c);
      queue.push_back(c);
    }
  };
  auto nearest_cell = [&](const Point& p) {
    CellIndex c{};
    for (int k = 0; k < d; ++k) c[k] = static_cast<std::int64_t>(std::llround(p[k] / h));
    return c;
  };
  visit(nearest_cell(x));
  visit(nearest_cell(field.config().star(fc.star)));
  while (!queue.empty()) {
    if (fc.cells.size() >= max_cells) {
      fc.truncated = true;
      break;
    }
    const CellIndex c = queue.front();
    queue.pop_front();
    for (int k = 0; k < d; ++k) {
      for (int s : {-1, 1}) {
        CellIndex n = c;
        n[k] += s;
        visit(n);
      }
    }
  }
  std::sort(fc.cells.begin(), fc.cells.end());
  return fc;
}

namespace {

Point crossing_seed(int d, double R, std::size_t i, std::uint64_t seed) {
  Rng rng = Rng::stream(seed, static_cast<std::uint64_t>(i));
  const std::size_t strata = 4 * static_cast<std::size_t>(d) + 1;
  const std::size_t s = i % strata;
  Point p(d);
  if (s < 4 * static_cast<std::size_t>(d)) {
    const double side = s < 2 * static_cast<std::size_t>(d) ? R : 2.0 * R;
    const int face = static_cast<int>(s % (2 * d));
    for (int k = 0; k < d; ++k) p[k] = rng.uniform(-side, side);
    p[face / 2] = face % 2 == 0 ? -side : side;
    return p;
  }
  for (;;) {
    for (int k = 0; k < d; ++k) p[k] = rng.uniform(-2.0 * R, 2.0 * R);
    if (p.norm_inf() > R) return p;
  }
}

}  // namespace

std::size_t default_crossing_seeds(int d, double R) {
  return (4 * static_cast<std::size_t>(d) + 1) * static_cast<std::size_t>(std::ceil(8.0 * 4.0 * R));
}

bool trace_crosses(const FlowTrace& trace, const StarConfig& config, double R) {
  bool inner = false, outer = false;
  auto check = [&](const Point& p) {
    const double m = p.norm_inf();
    inner = inner || m <= R;
    outer = outer || m >= 2.0 * R;
  };
  for (const auto& p : trace.positions) check(p);
  if (trace.terminal == Terminal::Captured && trace.star < config.size()) check(config.star(trace.star));
  return inner && outer;
}

CrossingResult detect_crossing(const ForceSource& field, double R, std::size_t n_seeds, std::uint64_t seed,
                               const FlowOptions& opts) {
  const int d = field.dim();
  if (!(R > 0.0)) throw ValidationError("crossing radius must be positive");
  const Point& tc = field.truncation().center;
  // Farthest point of Q(0, 2R) from the truncation center.
  double far2 = 0.0;
  for (int k = 0; k < d; ++k) {
    const double m = std::fabs(tc[k]) + 2.0 * R;
    far2 += m * m;
  }
  if (std::sqrt(far2) > valid_radius(field, opts)) throw ValidationError("Q(0, 2R) must lie inside the valid region");
  FlowOptions fo = opts;
  fo.record_trace = true;
  CrossingResult res;
  for (std::size_t i = 0; i < n_seeds; ++i) {
    FlowTrace tr = integrate_flow(field, crossing_seed(d, R, i, seed), fo);
    res.seeds_used = i + 1;
    if (trace_crosses(tr, field.config(), R)) {
      res.crossed = true;
      res.witness = std::move(tr);
      return res;
    }
  }
  return res;
}

std::vector<Connectivity> connectivity(const AllocationMap& map) {
  const int d = map.grid.dim();
  const std::size_t n = map.owner.size();
  const std::int64_t res = map.grid.resolution;
  std::vector<char> done(n, 0);
  std::unordered_map<std::int64_t, Connectivity> by_star;
  std::vector<std::size_t> stack;
  for (std::size_t start = 0; start < n; ++start) {
    const std::int64_t o = map.owner[start];
    if (o < 0 || done[start]) continue;
    std::size_t size = 0;
    stack.assign(1, start);
    done[start] = 1;
    while (!stack.empty()) {
      const std::size_t c = stack.back();
      stack.pop_back();
      ++size;
      const CellIndex idx = map.grid.index_of(c);
      for (int k = 0; k < d; ++k) {
        for (int s : {-1, 1}) {
          CellIndex nb = idx;
          nb[k] += s;
          if (nb[k] < 0 || nb[k] >= res) continue;
          const std::size_t l = map.grid.linear(nb);
          if (!done[l] && map.owner[l] == o) {
            done[l] = 1;
            stack.push_back(l);
          }
        }
      }
    }
    auto& entry = by_star.try_emplace(o, Connectivity{static_cast<std::size_t>(o), 0, 0}).first->second;
    entry.cells += size;
    entry.largest_component = std::max(entry.largest_component, size);
  }
  std::vector<Connectivity> out;
  out.reserve(by_star.size());
  for (auto& [k, v] : by_star) out.push_back(v);
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.star < b.star; });
  return out;
}

void write_map_csv(const AllocationMap& map, std::ostream& out) {
  const int d = map.grid.dim();
  for (int k = 1; k <= d; ++k) out << 'i' << k << ',';
  out << "owner\n";
  for (std::size_t i = 0; i < map.owner.size(); ++i) {
    const CellIndex idx = map.grid.index_of(i);
    for (int k = 0; k < d; ++k) out << idx[k] << ',';
    out << map.owner[i] << '\n';
  }
}

nlohmann::json map_header_json(const AllocationMap& map) {
  return {{"grid", to_json(map.grid)},
          {"cell_count", map.owner.size()},
          {"cell_volume", map.grid.cell_volume()},
          {"resolved_fraction", map.resolved_fraction()},
          {"unresolved_marker", kUnresolved},
          {"provenance", map.provenance}};
}

void write_slice_csv(const AllocationMap& map, int axis_x, int axis_y, const Point& through, std::ostream& out) {
  const int d = map.grid.dim();
  if (axis_x < 0 || axis_x >= d || axis_y < 0 || axis_y >= d || axis_x == axis_y) {
    throw ValidationError("slice axes must be two distinct grid axes");
  }
  if (through.dim() != d) throw ValidationError("slice point dimension does not match the grid");
  const GridSpec& g = map.grid;
  const double w = g.cell_width();
  CellIndex idx{};
  for (int k = 0; k < d; ++k) {
    const auto i = static_cast<std::int64_t>(std::floor((through[k] - (g.box.center[k] - g.box.halfwidth)) / w));
    idx[k] = std::clamp<std::int64_t>(i, 0, g.resolution - 1);
  }
  out << "x,y,owner\n";
  for (std::int64_t j = 0; j < g.resolution; ++j) {
    for (std::int64_t i = 0; i < g.resolution; ++i) {
      idx[axis_x] = i;
      idx[axis_y] = j;
      const std::size_t l = g.linear(idx);
      const Point c = g.cell_center(l);
      out << format_real(c[axis_x]) << ',' << format_real(c[axis_y]) << ',' << map.owner[l] << '\n';
    }
  }
}

}  // namespace gravalloc
