#include "gravalloc/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "gravalloc/rng.hpp"

namespace gravalloc {

double kappa(int d) {
  if (d < 1) throw DomainError("kappa requires d >= 1");
  if (d > 64) {
    const double half = 0.5 * d;
    return std::exp(half * std::log(std::numbers::pi) - std::lgamma(half + 1.0));
  }
  // kappa_d = kappa_{d-2} * 2 pi / d, seeded with kappa_1 = 2, kappa_2 = pi.
  double k = (d % 2 == 1) ? 2.0 : std::numbers::pi;
  for (int j = (d % 2 == 1) ? 3 : 4; j <= d; j += 2) k *= 2.0 * std::numbers::pi / j;
  return k;
}

namespace {

void check_dim(int dim, const Region& window) {
  if (dim < 3 || dim > kMaxDim) throw ValidationError("dimension must be in [3, 8]");
  if (window.dim() != dim) throw ValidationError("window dimension does not match config dimension");
}

Point uniform_in_cube(Rng& rng, const Point& center, double halfwidth) {
  Point p(center.dim());
  for (int i = 0; i < center.dim(); ++i) p[i] = center[i] + halfwidth * (2.0 * rng.uniform() - 1.0);
  return p;
}

}  // namespace

StarConfig::StarConfig(int dim, std::vector<Point> stars, Region window, double intensity, std::uint64_t seed)
    : dim_(dim), stars_(std::move(stars)), window_(std::move(window)), intensity_(intensity), seed_(seed) {
  check_dim(dim_, window_);
  if (!(intensity_ > 0.0) || !std::isfinite(intensity_)) throw ValidationError("intensity must be > 0");
  for (const auto& z : stars_) {
    if (z.dim() != dim_) throw ValidationError("star dimension does not match config dimension");
    if (!z.finite()) throw ValidationError("star coordinates must be finite");
    if (!window_.contains(z)) throw ValidationError("star lies outside the window");
  }
  std::vector<std::size_t> lex(stars_.size());
  std::iota(lex.begin(), lex.end(), std::size_t{0});
  std::sort(lex.begin(), lex.end(),
            [&](std::size_t a, std::size_t b) { return lexicographic_less(stars_[a], stars_[b]); });
  for (std::size_t k = 1; k < lex.size(); ++k) {
    if (stars_[lex[k]] == stars_[lex[k - 1]]) throw ValidationError("duplicate star");
  }
  order_ = order_by_distance(stars_, Point::zeros(dim_));
}

StarConfig StarConfig::translated(const Vec& u) const {
  std::vector<Point> moved;
  moved.reserve(stars_.size());
  for (const auto& z : stars_) moved.push_back(z + u);
  Region w = std::visit(
      [&](auto s) -> Region {
        s.center += u;
        return Region(s);
      },
      window_.shape());
  return StarConfig(dim_, std::move(moved), std::move(w), intensity_, seed_);
}

StarConfig sample_poisson(int dim, const Region& window, double intensity, std::uint64_t seed) {
  check_dim(dim, window);
  if (!window.bounded()) throw UnsupportedRegionError("cannot sample a Poisson process in an infinite window");
  if (!(intensity > 0.0)) throw ValidationError("intensity must be > 0");
  Rng rng(seed);
  const auto count = rng.poisson(intensity * window.volume());
  std::vector<Point> stars;
  stars.reserve(count);
  while (stars.size() < count) stars.push_back(sample_uniform(window, rng));
  return StarConfig(dim, std::move(stars), window, intensity, seed);
}

Point sample_uniform(const Region& region, Rng& rng) {
  if (!region.bounded()) throw UnsupportedRegionError("cannot sample uniformly from an infinite region");
  const Point& c = region.center();
  const double hw = region.bounding_halfwidth();
  const bool cube = region.get_if<Box>() != nullptr;
  for (;;) {
    Point p = uniform_in_cube(rng, c, hw);
    if (cube || region.contains(p)) return p;
  }
}

StarConfig from_explicit(int dim, std::vector<Point> points, const Region& window) {
  return StarConfig(dim, std::move(points), window, 1.0, 0);
}

StarConfig restore_config(int dim, std::vector<Point> points, const Region& window, double intensity,
                          std::uint64_t seed) {
  return StarConfig(dim, std::move(points), window, intensity, seed);
}

std::vector<std::size_t> order_by_distance(const std::vector<Point>& points, const Point& origin) {
  std::vector<double> dist(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) dist[i] = (points[i] - origin).norm2();
  std::vector<std::size_t> idx(points.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    if (dist[a] != dist[b]) return dist[a] < dist[b];
    return lexicographic_less(points[a], points[b]);
  });
  return idx;
}

std::vector<std::size_t> order_by_distance(const StarConfig& config, const Point& origin) {
  return order_by_distance(config.stars(), origin);
}

}  // namespace gravalloc
