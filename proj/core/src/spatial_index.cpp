#include "gravalloc/spatial_index.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <queue>

namespace gravalloc {

namespace {
constexpr std::uint32_t kLeafSize = 8;
}

KdTree::KdTree(const std::vector<Point>& points) {
  if (points.empty()) return;
  dim_ = points.front().dim();
  coords_.resize(points.size() * dim_);
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (points[i].dim() != dim_) throw ValidationError("mixed dimensions in spatial index");
    for (int k = 0; k < dim_; ++k) coords_[i * dim_ + k] = points[i][k];
  }
  index_.resize(points.size());
  std::iota(index_.begin(), index_.end(), std::size_t{0});
  nodes_.reserve(2 * points.size() / kLeafSize + 2);
  build(0, static_cast<std::uint32_t>(points.size()));
}

int KdTree::build(std::uint32_t begin, std::uint32_t end) {
  const int id = static_cast<int>(nodes_.size());
  nodes_.emplace_back();
  Node node;
  node.begin = begin;
  node.end = end;
  for (int k = 0; k < dim_; ++k) {
    node.lo[k] = std::numeric_limits<double>::infinity();
    node.hi[k] = -std::numeric_limits<double>::infinity();
  }
  for (std::uint32_t i = begin; i < end; ++i) {
    const double* p = &coords_[index_[i] * dim_];
    for (int k = 0; k < dim_; ++k) {
      node.lo[k] = std::min(node.lo[k], p[k]);
      node.hi[k] = std::max(node.hi[k], p[k]);
    }
  }
  if (end - begin > kLeafSize) {
    int axis = 0;
    for (int k = 1; k < dim_; ++k) {
      if (node.hi[k] - node.lo[k] > node.hi[axis] - node.lo[axis]) axis = k;
    }
    const std::uint32_t mid = begin + (end - begin) / 2;
    std::nth_element(index_.begin() + begin, index_.begin() + mid, index_.begin() + end,
                     [&](std::size_t a, std::size_t b) {
                       const double ca = coords_[a * dim_ + axis], cb = coords_[b * dim_ + axis];
                       return ca != cb ? ca < cb : a < b;
                     });
    node.left = build(begin, mid);
    node.right = build(mid, end);
  }
  nodes_[id] = node;
  return id;
}

double KdTree::min_dist2(const Node& n, const Point& x) const {
  double s = 0.0;
  for (int k = 0; k < dim_; ++k) {
    double d = 0.0;
    if (x[k] < n.lo[k]) d = n.lo[k] - x[k];
    else if (x[k] > n.hi[k]) d = x[k] - n.hi[k];
    s += d * d;
  }
  return s;
}

double KdTree::max_dist2(const Node& n, const Point& x) const {
  double s = 0.0;
  for (int k = 0; k < dim_; ++k) {
    const double d = std::max(std::fabs(x[k] - n.lo[k]), std::fabs(x[k] - n.hi[k]));
    s += d * d;
  }
  return s;
}

std::vector<std::size_t> KdTree::query_annulus(const Point& center, double inner, double outer) const {
  std::vector<std::size_t> out;
  if (nodes_.empty()) return out;
  // Membership is decided on the true distance (not its square) to match Region::contains.
  const double outer2 = outer * outer * (1.0 + 1e-12);
  const double inner2 = inner * inner * (1.0 - 1e-12);
  std::vector<int> stack{0};
  while (!stack.empty()) {
    const Node& n = nodes_[stack.back()];
    stack.pop_back();
    if (min_dist2(n, center) > outer2) continue;
    if (inner > 0.0 && max_dist2(n, center) < inner2) continue;
    if (n.left < 0) {
      for (std::uint32_t i = n.begin; i < n.end; ++i) {
        const double* p = &coords_[index_[i] * dim_];
        double s = 0.0;
        for (int k = 0; k < dim_; ++k) s += (p[k] - center[k]) * (p[k] - center[k]);
        const double r = std::sqrt(s);
        if (r <= outer && (inner == 0.0 ? true : r > inner)) out.push_back(index_[i]);
      }
    } else {
      stack.push_back(n.left);
      stack.push_back(n.right);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::size_t> KdTree::query_ball(const Point& center, double radius) const {
  return query_annulus(center, 0.0, radius);
}

std::vector<std::size_t> KdTree::query(const Region& region) const {
  if (const auto* b = region.get_if<Ball>()) return query_ball(b->center, b->radius);
  if (const auto* a = region.get_if<Annulus>()) {
    if (a->inner == 0.0) {
      // {0 < |z - c| <= p}: drop an exact hit on the center.
      auto out = query_ball(a->center, a->outer);
      std::erase_if(out, [&](std::size_t i) {
        for (int k = 0; k < dim_; ++k) {
          if (coords_[i * dim_ + k] != a->center[k]) return false;
        }
        return true;
      });
      return out;
    }
    return query_annulus(a->center, a->inner, a->outer);
  }
  // Box and exterior regions: linear filter (not on a hot path).
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < index_.size(); ++i) {
    Point p(std::span<const double>(&coords_[i * dim_], dim_));
    if (region.contains(p)) out.push_back(i);
  }
  return out;
}

std::vector<KdTree::Neighbor> KdTree::nearest(const Point& x, std::size_t k) const {
  std::vector<Neighbor> best;
  if (nodes_.empty() || k == 0) return best;
  auto worse = [](const Neighbor& a, const Neighbor& b) {
    return a.distance != b.distance ? a.distance < b.distance : a.index < b.index;
  };
  // max-heap on (distance, index) of the current k best, in squared distance
  std::priority_queue<Neighbor, std::vector<Neighbor>, decltype(worse)> heap(worse);
  using Item = std::pair<double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> frontier;
  frontier.emplace(min_dist2(nodes_[0], x), 0);
  while (!frontier.empty()) {
    const auto [d2, id] = frontier.top();
    frontier.pop();
    if (heap.size() == k && d2 > heap.top().distance) break;
    const Node& n = nodes_[id];
    if (n.left < 0) {
      for (std::uint32_t i = n.begin; i < n.end; ++i) {
        const double* p = &coords_[index_[i] * dim_];
        double s = 0.0;
        for (int c = 0; c < dim_; ++c) s += (p[c] - x[c]) * (p[c] - x[c]);
        Neighbor cand{index_[i], s};
        if (heap.size() < k) {
          heap.push(cand);
        } else if (worse(cand, heap.top())) {
          heap.pop();
          heap.push(cand);
        }
      }
    } else {
      frontier.emplace(min_dist2(nodes_[n.left], x), n.left);
      frontier.emplace(min_dist2(nodes_[n.right], x), n.right);
    }
  }
  best.reserve(heap.size());
  while (!heap.empty()) {
    best.push_back(heap.top());
    heap.pop();
  }
  std::reverse(best.begin(), best.end());
  for (auto& b : best) b.distance = std::sqrt(b.distance);
  return best;
}

}  // namespace gravalloc
