#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gravalloc/far_field.hpp"
#include "gravalloc/flow.hpp"
#include "gravalloc/stats.hpp"

namespace gravalloc {

enum class Status { Pass, Fail, Skipped, Inconclusive };
std::string to_string(Status s);

/// Outcome of one check. `direction` states how statistic compares with threshold
/// for a pass ("<=", ">=", "==").
struct TestReport {
  std::string name;
  Status status = Status::Fail;
  double statistic = 0.0;
  double threshold = 0.0;
  std::string direction = "<=";
  nlohmann::json details = nlohmann::json::object();
  std::uint64_t seed = 0;
  double seconds = 0.0;

  bool passed() const noexcept { return status == Status::Pass; }
  /// Pass or Skipped: does not fail a suite.
  bool acceptable() const noexcept { return status == Status::Pass || status == Status::Skipped; }
};
nlohmann::json to_json(const TestReport& r);

/// Per-threshold tail counts {X > t} with 95% Wilson intervals.
struct TailEstimate {
  std::string quantity;
  std::vector<double> thresholds;
  std::vector<std::uint64_t> trials;
  std::vector<std::uint64_t> hits;
  std::vector<Interval> ci;
  std::uint64_t unresolved = 0;
  nlohmann::json details = nlohmann::json::object();

  /// Recomputes `ci` from trials and hits.
  void finalize();
  std::vector<double> estimates() const;
  bool monotone_non_increasing() const;
};
nlohmann::json to_json(const TailEstimate& t);

// ---------------------------------------------------------------- deterministic battery

/// Exact Poisson tails against exp(-(t/4) log(t/lambda)) for t >= 2 lambda, and
/// P(|X - lambda| >= t lambda) against 2 exp(-lambda t^2 / 3) for t in [0, delta].
/// Both checks visit every breakpoint of the step functions, so they are exhaustive.
TestReport test_poisson_tails(const std::vector<double>& lambdas = {0.5, 1, 2, 5, 10, 100}, double delta = 1.0);

/// |det A| >= 2^-k prod |a_ii| on random row-dominant matrices (|a_ii| >= 2 sum_j |a_ij|).
TestReport test_hadamard_variant(int k_max = 20, std::size_t trials = 10000, std::uint64_t seed = 1);

struct InverseDistanceOptions {
  std::vector<int> dims{3, 4, 5};
  std::size_t sets = 1000;
  std::size_t max_points = 10000;
  /// Sets up to this size are checked from every point; larger ones from sampled centers.
  std::size_t exhaustive_limit = 1500;
  std::size_t sampled_centers = 200;
  std::uint64_t seed = 1;
};
/// sum_{j != i} |x_j - x_i|^-d <= 2 * 8^d * log N / S^d for S-separated sets.
TestReport test_inverse_distance_sum(const InverseDistanceOptions& opts = {});

struct JointDensityOptions {
  int d = 3;
  int n = 2;
  double lambda = 0.5;
  double separation = 10.0;
  std::size_t trials = 1000;
  std::uint64_t seed = 1;
};
/// Probe regime bound lambda <= S / (10 (log max(N, 2))^{1/d}).
double joint_density_lambda_bound(int d, int n, double separation);
/// Injectivity of G(y)_i = sum_j g(y_j - x_i) on prod_j B(x_j, lambda), g(v) = v/|v|^d, and
/// |det DG| >= 2^{-Nd} prod |a_rr| whenever the rotated Jacobian is row dominant.
/// Skipped outside the probe regime.
TestReport test_joint_density_core(const JointDensityOptions& opts);

// ---------------------------------------------------------------- field identities

/// Central differences (h = 1e-5) of U(x|A) and U^diff against the analytic forces.
TestReport test_gradient_consistency(std::size_t fixtures = 100, std::uint64_t seed = 1, double tolerance = 1e-6);

/// Monte Carlo volume quadrature of the ball field integral against -kappa_d (x - c).
TestReport test_shell_theorem(std::size_t samples = 10'000'000, std::uint64_t seed = 1);

/// Sphere quadrature of the outward flux of F against d kappa_d (kappa_d rho^d - k).
TestReport test_flux_identity(std::size_t fixtures = 50, std::uint64_t seed = 1, double tolerance = 1e-3);

struct StableScalingOptions {
  int d = 3;
  int n = 2;
  std::size_t samples = 10000;
  double window_radius = 30.0;
  /// Pooled samples live in B(0, L n^{-1/d}) (true) or in B(0, L) (false).
  bool scaled_window = true;
  double p_threshold = 0.01;
  std::uint64_t seed = 1;
};
/// KS test: |F(0)| of n pooled unit-intensity samples against n^{(d-1)/d} |F(0)| of one sample.
TestReport test_stable_scaling(const StableScalingOptions& opts);

// ---------------------------------------------------------------- flow checks

/// tau from flows started at distance delta from an isolated star against delta^d / d.
TestReport test_capture_asymptotics(int d = 3, std::size_t deltas = 13, std::uint64_t seed = 1,
                                    double tolerance = 0.05);

struct LiouvilleOptions {
  int d = 3;
  double window_radius = 20.0;
  double box_halfwidth = 5.0;
  std::vector<double> t_grid{0.02, 0.04, 0.06, 0.08, 0.10, 0.12, 0.14, 0.16, 0.18, 0.20};
  std::size_t points = 100000;
  double tolerance = 0.05;
  double max_unresolved = 0.05;
  bool hierarchical = true;
  FarFieldOptions far{};
  FlowOptions flow{};
  int threads = 0;
  std::uint64_t seed = 1;
};
/// Survival fraction of tau_x > t for uniform x in Q(0, h), fitted to exp(-rate t).
/// Inconclusive when more than max_unresolved of the flows are unresolved.
/// details["fit"] carries {t, survival, rate, intercept, reference_rate} for plotting.
TestReport test_liouville(const LiouvilleOptions& opts);

struct FairnessOptions {
  int d = 3;
  double window_radius = 20.0;
  std::size_t configs = 20;
  std::size_t samples_per_config = 1'000'000;
  double boundary_distance = 5.0;  ///< stars this close to the window boundary are excluded
  double mean_tolerance = 0.02;
  double min_coverage = 0.99;
  FarFieldOptions far{};
  FlowOptions flow{};
  int threads = 0;
  std::uint64_t seed = 1;
};
/// Monte Carlo basin volumes of interior stars: grand mean within tolerance of 1, coverage of
/// interior samples, and hard failures (basins whose counts are inconsistent with any volume
/// in [0.5, 2] at Bonferroni level 1e-6).
TestReport test_fairness(const FairnessOptions& opts);

struct StableMarriageOptions {
  std::size_t configs = 10;
  std::vector<int> resolutions{8, 16, 32};
  double star_halfwidth = 2.0;
  double grid_halfwidth = 2.5;
  std::uint64_t seed = 1;
};
/// Zero blocking pairs on exhaustive scans of stable-marriage grid allocations (d = 3).
TestReport test_stable_marriage(const StableMarriageOptions& opts = {});

// ---------------------------------------------------------------- tail estimators

struct AllocationTailOptions {
  int d = 3;
  double window_radius = 20.0;
  std::vector<double> r_grid{1, 2, 3, 4};
  std::size_t configs = 200;
  double lattice_spacing = 0.1;      ///< flood-fill spacing for the origin's cell
  std::size_t crossing_seeds = 0;    ///< 0 uses default_crossing_seeds(d, R)
  std::size_t max_flood_cells = 2'000'000;
  bool hierarchical = true;
  FarFieldOptions far{};
  FlowOptions flow{};
  int threads = 0;
  std::uint64_t seed = 1;
};
/// P(X > R) for the diameter X of the cell containing the origin.
TailEstimate estimate_diameter_tail(const AllocationTailOptions& opts);
/// Frequency of detected R-crossings per R.
TailEstimate estimate_crossing_tail(const AllocationTailOptions& opts);
struct AllocationTails {
  TailEstimate diameter;
  TailEstimate crossing;
};
/// Both estimators on the same configurations (one field build per configuration).
AllocationTails estimate_allocation_tails(const AllocationTailOptions& opts);

struct PartialTailOptions {
  int d = 5;
  double inner = 2.0;
  double outer = 10.0;
  std::size_t samples = 100000;
  /// Thresholds per quantity (potential, force, jacobian); empty picks empirical quantiles.
  std::vector<double> t_potential, t_force, t_jacobian;
  int threads = 0;
  std::uint64_t seed = 1;
};
/// Tails of |U(0|A)|, |F(0|A)| and the operator norm of D_1F(0|A) for the annulus
/// A = B(0, outer) \ B(0, inner), in that order. Each carries the bound shape with unit
/// constants in details["bound_shape"] and a log-tail convexity flag.
std::vector<TailEstimate> estimate_partial_potential_tail(const PartialTailOptions& opts);

/// Tails must be non-increasing and decrease overall where positive.
TestReport check_tail_shape(const std::string& name, const TailEstimate& tail);

// ---------------------------------------------------------------- suite

enum class Scale { Quick, Full };

struct SuiteOptions {
  std::uint64_t seed = 1;
  Scale scale = Scale::Quick;
  std::vector<std::string> only;  ///< subset of suite_test_names(); empty runs all
  int threads = 0;
};
std::vector<std::string> suite_test_names();
std::vector<TestReport> run_suite(const SuiteOptions& opts);
/// True iff no report failed or was inconclusive.
bool suite_passed(const std::vector<TestReport>& reports);
/// name,status,statistic,threshold,direction,seed,seconds
void write_summary_csv(const std::vector<TestReport>& reports, std::ostream& out);

}  // namespace gravalloc
