#pragma once

#include <string>
#include <variant>

#include "gravalloc/vec.hpp"

namespace gravalloc {

/// Closed ball {z : |z - center| <= radius}.
struct Ball {
  Point center;
  double radius = 0.0;
};

/// Spherical shell {z : inner < |z - center| <= outer}.
struct Annulus {
  Point center;
  double inner = 0.0;
  double outer = 0.0;
};

/// Axis-aligned cube center + [-halfwidth, halfwidth]^d.
struct Box {
  Point center;
  double halfwidth = 0.0;
};

/// Open exterior {z : |z - center| > radius}; infinite volume.
struct ComplementOfBall {
  Point center;
  double radius = 0.0;
};

/// One of the four region shapes used for windows, truncations and partial sums.
class Region {
 public:
  using Variant = std::variant<Ball, Annulus, Box, ComplementOfBall>;

  Region(Ball b);
  Region(Annulus a);
  Region(Box b);
  Region(ComplementOfBall c);

  const Variant& shape() const noexcept { return shape_; }
  int dim() const noexcept;
  const Point& center() const noexcept;
  std::string kind() const;

  bool contains(const Point& z) const noexcept;
  bool bounded() const noexcept { return !std::holds_alternative<ComplementOfBall>(shape_); }
  /// Lebesgue volume; throws UnsupportedRegionError for unbounded regions.
  double volume() const;
  /// Half-width of the smallest center-aligned cube containing the region (bounded only).
  double bounding_halfwidth() const;
  /// Largest |z - center| attained in the region (bounded only).
  double outer_radius() const;

  /// True when `inner` is a subset of this region (exact for the shape pairs used here,
  /// conservative otherwise).
  bool contains_region(const Region& inner) const;

  template <class T>
  const T* get_if() const noexcept {
    return std::get_if<T>(&shape_);
  }

 private:
  Variant shape_;
};

}  // namespace gravalloc
