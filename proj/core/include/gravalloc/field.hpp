#pragma once

#include <cstddef>
#include <limits>
#include <memory>
#include <vector>

#include "gravalloc/geometry.hpp"
#include "gravalloc/spatial_index.hpp"
#include "gravalloc/vec.hpp"

namespace gravalloc {

inline constexpr std::size_t kNoStar = std::numeric_limits<std::size_t>::max();

/// Evaluations closer than this to a star raise SingularityError.
inline constexpr double kSingularityGuard = 1e-12;

/// Force at a point plus what the flow integrator needs to know about nearby stars.
struct FieldSample {
  Vec force;
  std::size_t nearest = kNoStar;  ///< config index of the closest known star
  double nearest_distance = std::numeric_limits<double>::infinity();
  /// Lower bound on the distance from the point to every star other than `nearest`.
  double second_distance = std::numeric_limits<double>::infinity();
};

/// Anything the flow integrator can follow: the exact model or an accelerated stand-in.
class ForceSource {
 public:
  virtual ~ForceSource() = default;
  virtual int dim() const = 0;
  virtual FieldSample sample(const Point& x) const = 0;
  virtual const StarConfig& config() const = 0;
  virtual const Ball& truncation() const = 0;
  virtual bool compensated() const = 0;
};

/// The star term (z - x) / |z - x|^d.
Vec star_term(const Point& z, const Point& x);

/// Finite-window gravitational field F(x | B(c, L)).
///
/// Sums (z - x)/|z - x|^d over the stars with |z - c| <= L in order of increasing
/// |z|, and when `compensate` is set adds kappa_d (x - c), the analytic pull of the
/// missing uniform background. With compensation the field has mean zero at every
/// x in the ball; queries outside the ball are rejected.
class FieldModel : public ForceSource {
 public:
  FieldModel(StarConfig config, Ball truncation, bool compensate = true);
  /// Truncation equal to the (ball) window of `config`.
  explicit FieldModel(StarConfig config, bool compensate = true);

  int dim() const override { return config_->dim(); }
  const StarConfig& config() const override { return *config_; }
  const Ball& truncation() const override { return trunc_; }
  bool compensated() const override { return compensate_; }
  const KdTree& index() const noexcept { return index_; }
  /// Config indices of the stars inside the truncation ball, in summation order.
  const std::vector<std::size_t>& active_stars() const noexcept { return active_; }

  Vec force(const Point& x) const;
  FieldSample sample(const Point& x) const override;

  /// F(x | A) for A a ball B(y, p) with |x - y| <= p, or an annulus with
  /// q > 0 and |x - y| <= q (q = 0 is treated as the ball). DomainError otherwise.
  Vec force_partial(const Point& x, const Region& a) const;
  /// Centered partial potential U(x | A) under the same geometry cases.
  double potential_partial(const Point& x, const Region& a) const;
  /// Centered potential difference U^diff(x, y | A) for any bounded A; the uniform-measure
  /// centering integral is evaluated by quadrature::newton_potential_integral.
  double potential_diff(const Point& x, const Point& y, const Region& a, double tol = 1e-8) const;
  /// D_x F(x | B(c, L)), including kappa_d I when compensated.
  Matrix jacobian(const Point& x) const;

  /// Stars of the configuration lying in `a`, in summation order.
  std::vector<std::size_t> stars_in(const Region& a) const;

 private:
  void check_point(const Point& x) const;
  void check_partial_region(const Region& a) const;

  std::shared_ptr<const StarConfig> config_;
  Ball trunc_;
  bool compensate_;
  KdTree index_;
  std::vector<std::size_t> active_;
  std::vector<double> active_coords_;  // flat, summation order
  std::vector<std::size_t> rank_;      // rank_[i] = position of star i in order_from_origin
};

/// Integral of (z - x)/|z - x|^d over B(c, L): the shell-theorem value -kappa_d (x - c).
/// Requires |x - c| < L.
Vec ball_field_integral(const Point& x, const Point& c, double L);

/// Outward flux of the model's field through the sphere of radius rho about y,
/// by a product rule with `polar_nodes` Gauss points per polar angle.
double sphere_flux(const FieldModel& model, const Point& y, double rho, int polar_nodes);

}  // namespace gravalloc
