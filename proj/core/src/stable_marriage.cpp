#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>
#include <optional>
#include <queue>

#include "gravalloc/allocation.hpp"
#include "gravalloc/spatial_index.hpp"

namespace gravalloc {

std::size_t stable_marriage_quota(const StarConfig& config, const GridSpec& grid) {
  grid.validate();
  const double q = std::round(1.0 / (config.intensity() * grid.cell_volume()));
  if (q < 1.0) throw InfeasibleError("cells are larger than one star's share; quota rounds to zero");
  return static_cast<std::size_t>(q);
}

namespace {

/// Strict preference key: distance, then index.
struct Pref {
  double dist2;
  std::size_t index;
  bool operator<(const Pref& o) const { return dist2 != o.dist2 ? dist2 < o.dist2 : index < o.index; }
};

}  // namespace

AllocationMap stable_marriage_allocate(const StarConfig& config, const GridSpec& grid) {
  grid.validate();
  if (grid.dim() != config.dim()) throw ValidationError("grid dimension does not match the configuration");
  const std::size_t cells = grid.cell_count();
  const std::size_t stars = config.size();
  AllocationMap map;
  map.grid = grid;
  map.owner.assign(cells, kUnresolved);
  map.provenance = {{"method", "stable_marriage"}, {"stars", stars}, {"seed", config.seed()}};
  if (stars == 0) return map;
  const std::size_t quota = stable_marriage_quota(config, grid);
  if (quota * stars > cells) {
    throw InfeasibleError("total star quota exceeds the number of grid cells");
  }
  map.provenance["quota"] = quota;

  std::vector<Point> centers(cells);
  for (std::size_t i = 0; i < cells; ++i) centers[i] = grid.cell_center(i);
  std::vector<std::size_t> order(cells);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return lexicographic_less(centers[a], centers[b]); });

  const KdTree tree(config.stars());
  // Lazily grown preference lists.
  std::vector<std::vector<std::size_t>> prefs(cells);
  std::vector<std::uint32_t> next(cells, 0);
  auto next_choice = [&](std::size_t cell) -> std::optional<std::size_t> {
    if (next[cell] >= stars) return std::nullopt;
    if (next[cell] >= prefs[cell].size()) {
      const std::size_t k = std::min(stars, std::max<std::size_t>(8, 2 * prefs[cell].size()));
      const auto nn = tree.nearest(centers[cell], k);
      prefs[cell].clear();
      for (const auto& n : nn) prefs[cell].push_back(n.index);
    }
    return prefs[cell][next[cell]++];
  };

  // Each star keeps its current best `quota` suitors in a max-heap (worst on top).
  std::vector<std::priority_queue<Pref>> held(stars);
  std::deque<std::size_t> free_cells(order.begin(), order.end());
  while (!free_cells.empty()) {
    const std::size_t cell = free_cells.front();
    free_cells.pop_front();
    const auto choice = next_choice(cell);
    if (!choice) continue;  // rejected everywhere: stays unassigned
    const std::size_t z = *choice;
    const Pref p{(centers[cell] - config.star(z)).norm2(), cell};
    auto& h = held[z];
    if (h.size() < quota) {
      h.push(p);
    } else if (p < h.top()) {
      free_cells.push_front(h.top().index);
      h.pop();
      h.push(p);
    } else {
      free_cells.push_front(cell);
    }
  }
  for (std::size_t z = 0; z < stars; ++z) {
    auto h = held[z];
    while (!h.empty()) {
      map.owner[h.top().index] = static_cast<std::int64_t>(z);
      h.pop();
    }
  }
  return map;
}

std::size_t count_blocking_pairs(const StarConfig& config, const AllocationMap& map, std::size_t quota) {
  const std::size_t stars = config.size();
  const std::size_t cells = map.owner.size();
  std::vector<Point> centers(cells);
  for (std::size_t i = 0; i < cells; ++i) centers[i] = map.grid.cell_center(i);
  // Worst held suitor and load per star.
  std::vector<Pref> worst(stars, Pref{-1.0, 0});
  std::vector<std::size_t> load(stars, 0);
  for (std::size_t i = 0; i < cells; ++i) {
    const std::int64_t o = map.owner[i];
    if (o < 0) continue;
    const Pref p{(centers[i] - config.star(o)).norm2(), i};
    ++load[o];
    if (worst[o].dist2 < 0.0 || worst[o] < p) worst[o] = p;
  }
  std::size_t blocking = 0;
  for (std::size_t i = 0; i < cells; ++i) {
    const std::int64_t o = map.owner[i];
    const Pref mine = o >= 0 ? Pref{(centers[i] - config.star(o)).norm2(), static_cast<std::size_t>(o)}
                             : Pref{std::numeric_limits<double>::infinity(), stars};
    for (std::size_t z = 0; z < stars; ++z) {
      if (static_cast<std::int64_t>(z) == o) continue;
      const double d2 = (centers[i] - config.star(z)).norm2();
      if (!(Pref{d2, z} < mine)) continue;  // the cell does not prefer z
      const bool star_wants = load[z] < quota || Pref{d2, i} < worst[z];
      if (star_wants) ++blocking;
    }
  }
  return blocking;
}

}  // namespace gravalloc
