#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "gravalloc/region.hpp"
#include "gravalloc/vec.hpp"

namespace gravalloc {

/// Static k-d tree over a point set with exact range semantics.
///
/// Ball queries return {i : |p_i - c| <= r}; annulus queries return
/// {i : q < |p_i - c| <= p}, matching Region::contains. Results are sorted by index.
class KdTree {
 public:
  KdTree() = default;
  explicit KdTree(const std::vector<Point>& points);

  std::size_t size() const noexcept { return index_.size(); }
  int dim() const noexcept { return dim_; }

  std::vector<std::size_t> query(const Region& region) const;
  std::vector<std::size_t> query_ball(const Point& center, double radius) const;
  std::vector<std::size_t> query_annulus(const Point& center, double inner, double outer) const;

  struct Neighbor {
    std::size_t index;
    double distance;
  };
  /// The k nearest points sorted by distance (ties by index); fewer if size() < k.
  std::vector<Neighbor> nearest(const Point& x, std::size_t k) const;

 private:
  struct Node {
    std::uint32_t begin = 0, end = 0;  // range into index_
    std::int32_t left = -1, right = -1;
    std::array<double, kMaxDim> lo{}, hi{};
  };

  int build(std::uint32_t begin, std::uint32_t end);
  double min_dist2(const Node& n, const Point& x) const;
  double max_dist2(const Node& n, const Point& x) const;

  int dim_ = 0;
  std::vector<double> coords_;  // point i at coords_[i * dim_]
  std::vector<std::size_t> index_;
  std::vector<Node> nodes_;
};

}  // namespace gravalloc
