#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "gravalloc/region.hpp"
#include "gravalloc/vec.hpp"

namespace gravalloc {

class Rng;

/// Volume of the unit ball in R^d: pi^{d/2} / Gamma(d/2 + 1).
double kappa(int d);

/// A finite star configuration inside a sampling window.
///
/// Immutable after construction. `order_from_origin()` lists star indices by
/// increasing |z| with ties broken lexicographically on coordinates; every
/// summation over stars in the library follows this order.
class StarConfig {
 public:
  int dim() const noexcept { return dim_; }
  const std::vector<Point>& stars() const noexcept { return stars_; }
  std::size_t size() const noexcept { return stars_.size(); }
  const Point& star(std::size_t i) const { return stars_.at(i); }
  const Region& window() const noexcept { return window_; }
  double intensity() const noexcept { return intensity_; }
  std::uint64_t seed() const noexcept { return seed_; }
  const std::vector<std::size_t>& order_from_origin() const noexcept { return order_; }

  /// Same configuration shifted by `u` (stars and window). Ordering is recomputed.
  StarConfig translated(const Vec& u) const;

  friend StarConfig sample_poisson(int dim, const Region& window, double intensity, std::uint64_t seed);
  friend StarConfig from_explicit(int dim, std::vector<Point> points, const Region& window);
  friend StarConfig restore_config(int dim, std::vector<Point> points, const Region& window, double intensity,
                                   std::uint64_t seed);

 private:
  StarConfig(int dim, std::vector<Point> stars, Region window, double intensity, std::uint64_t seed);

  int dim_;
  std::vector<Point> stars_;
  Region window_;
  double intensity_;
  std::uint64_t seed_;
  std::vector<std::size_t> order_;
};

/// Poisson process of the given intensity restricted to `window`.
/// The count is Poisson(intensity * Vol(window)); positions are i.i.d. uniform
/// (rejection from the bounding cube for balls and annuli). Bit-identical for equal inputs.
StarConfig sample_poisson(int dim, const Region& window, double intensity, std::uint64_t seed);

/// Deterministic configuration from explicit points; rejects duplicates and points outside `window`.
StarConfig from_explicit(int dim, std::vector<Point> points, const Region& window);

/// Rebuilds a configuration from serialized fields (validates like from_explicit).
StarConfig restore_config(int dim, std::vector<Point> points, const Region& window, double intensity,
                          std::uint64_t seed);

/// Uniform point in a bounded region (rejection from the bounding cube for balls and annuli).
Point sample_uniform(const Region& region, Rng& rng);

/// Star indices sorted by |z_i - origin|, ties lexicographic by coordinates.
std::vector<std::size_t> order_by_distance(const StarConfig& config, const Point& origin);
std::vector<std::size_t> order_by_distance(const std::vector<Point>& points, const Point& origin);

}  // namespace gravalloc
