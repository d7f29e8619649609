#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include <nlohmann/json.hpp>

#include "gravalloc/field.hpp"
#include "gravalloc/flow.hpp"
#include "gravalloc/region.hpp"

namespace gravalloc {

/// Owner marker for cells whose basin was not resolved (or left unassigned by a matching).
inline constexpr std::int64_t kUnresolved = -1;

/// Largest grid accepted by allocate_grid and stable_marriage_allocate.
inline constexpr std::size_t kMaxGridCells = std::size_t{1} << 25;

using CellIndex = std::array<std::int64_t, kMaxDim>;

/// Regular grid of resolution^d cells over an axis-aligned box.
struct GridSpec {
  Box box;
  int resolution = 2;

  int dim() const noexcept { return box.center.dim(); }
  std::size_t cell_count() const;
  double cell_width() const noexcept { return 2.0 * box.halfwidth / resolution; }
  double cell_volume() const;
  CellIndex index_of(std::size_t linear) const;
  std::size_t linear(const CellIndex& idx) const;
  Point cell_center(std::size_t linear) const;
  /// Cells whose closed box contains x (more than one on shared faces); empty outside the grid.
  std::vector<std::size_t> cells_containing(const Point& x) const;
  void validate() const;
};

nlohmann::json to_json(const GridSpec& g);
GridSpec grid_from_json(const nlohmann::json& j);

struct AllocationMap {
  GridSpec grid;
  std::vector<std::int64_t> owner;  ///< per cell, star index or kUnresolved
  nlohmann::json provenance;

  std::size_t resolved_count() const;
  double resolved_fraction() const;
  std::size_t star_count_hint() const;  ///< 1 + largest owner index
};

/// Identity of a field for provenance records.
nlohmann::json describe(const ForceSource& field);

/// Owner of every cell center via basin_of. Rejects grids reaching outside the valid ball.
AllocationMap allocate_grid(const ForceSource& field, const GridSpec& grid, const FlowOptions& opts = {},
                            int threads = 0);

/// (#cells owned) * cell volume.
double cell_volume(const AllocationMap& map, std::size_t star);
/// Max pairwise distance among the owned cell centers; 0 for a single cell.
double cell_diameter(const AllocationMap& map, std::size_t star);
/// Diameter of the cell owning x; UnresolvedError if x is unowned or on a disputed face.
double allocation_diameter_at(const AllocationMap& map, const Point& x);
/// Owner of the cell(s) containing the origin; UnresolvedError if unowned or disputed.
std::size_t extra_head_point(const AllocationMap& map);

/// Max pairwise distance of a point set (exact, quadratic).
double point_set_diameter(const std::vector<Point>& pts);

/// Monte Carlo basins: uniform samples in `region` flowed to their stars.
struct McAllocation {
  Region region;
  std::vector<Point> points;
  std::vector<std::int64_t> owner;
  std::vector<double> tau;  ///< capture time per sample (NaN when unresolved)

  std::size_t unresolved() const;
  double coverage() const;
  /// Per-star volume estimates count * Vol(region) / n, indexed by star.
  std::vector<double> volumes(std::size_t star_count) const;
  /// Max pairwise distance of the samples owned by `star`.
  double diameter(std::size_t star) const;
};
McAllocation mc_allocate(const ForceSource& field, const Region& region, std::size_t n_samples, std::uint64_t seed,
                         const FlowOptions& opts = {}, int threads = 0);
std::vector<double> mc_cell_volumes(const ForceSource& field, const Region& region, std::size_t n_samples,
                                    std::uint64_t seed, const FlowOptions& opts = {}, int threads = 0);

/// Grid-discretized cell of one star, found by flood fill over a lattice of spacing h
/// aligned with the origin (cells are connected, so the flood recovers the whole cell
/// up to discretization).
struct FloodCell {
  int dim = 0;
  std::size_t star = kNoStar;
  double spacing = 0.0;
  std::vector<CellIndex> cells;  ///< lattice indices; center = index * spacing
  std::size_t evaluated = 0;
  bool truncated = false;  ///< the flood reached the valid-region boundary or the cell budget
  double diameter() const;
};
/// Cell containing `x` (flowed first to find its star).
FloodCell flood_cell_at(const ForceSource& field, const Point& x, double h, const FlowOptions& opts = {},
                        std::size_t max_cells = 2'000'000);

/// Evidence of an R-crossing: a flow curve meeting both boundaries of Q(0,R) and Q(0,2R).
struct CrossingResult {
  bool crossed = false;
  std::size_t seeds_used = 0;
  std::optional<FlowTrace> witness;
};
/// Seed i is drawn from stratum i mod (4d + 1): the 2d faces of each cube boundary and
/// the shell Q(0,2R) \ Q(0,R). The seed sequence is a fixed function of `seed`, so a
/// crossing found with n seeds is found with any n' >= n.
CrossingResult detect_crossing(const ForceSource& field, double R, std::size_t n_seeds, std::uint64_t seed,
                               const FlowOptions& opts = {});
/// Default seed budget: 8 per unit of outer side length on each stratum.
std::size_t default_crossing_seeds(int d, double R);
/// True when the polyline (plus the captured star) has vertices with |.|_inf <= R and >= 2R.
bool trace_crosses(const FlowTrace& trace, const StarConfig& config, double R);

/// Per-star connected components of owned cells (face adjacency).
struct Connectivity {
  std::size_t star;
  std::size_t cells;
  std::size_t largest_component;
  double dominant_fraction() const { return cells ? static_cast<double>(largest_component) / cells : 0.0; }
};
std::vector<Connectivity> connectivity(const AllocationMap& map);

/// CSV i1..id,owner (owner -1 when unresolved) in linear cell order.
void write_map_csv(const AllocationMap& map, std::ostream& out);
/// Header record: grid, provenance, resolved fraction and cell count.
nlohmann::json map_header_json(const AllocationMap& map);
/// x,y,owner for the layer of cells containing `through` along the remaining axes.
void write_slice_csv(const AllocationMap& map, int axis_x, int axis_y, const Point& through, std::ostream& out);

/// Stable matching of grid cells (sites) to stars with quota round(1 / (intensity * cell volume))
/// per star under mutual distance preference; ties by index. Sites propose in lexicographic
/// order of their centers. InfeasibleError if the total quota exceeds the cell count.
AllocationMap stable_marriage_allocate(const StarConfig& config, const GridSpec& grid);
std::size_t stable_marriage_quota(const StarConfig& config, const GridSpec& grid);
/// Number of blocking (cell, star) pairs, by exhaustive scan.
std::size_t count_blocking_pairs(const StarConfig& config, const AllocationMap& map, std::size_t quota);

}  // namespace gravalloc
