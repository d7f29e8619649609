#include "gravalloc/validation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <unordered_map>

#include <Eigen/Dense>

#include "gravalloc/allocation.hpp"
#include "gravalloc/parallel.hpp"
#include "gravalloc/quadrature.hpp"
#include "gravalloc/rng.hpp"
#include "gravalloc/serialization.hpp"

namespace gravalloc {

std::string to_string(Status s) {
  switch (s) {
    case Status::Pass: return "pass";
    case Status::Fail: return "fail";
    case Status::Skipped: return "skipped";
    case Status::Inconclusive: return "inconclusive";
  }
  return "unknown";
}

nlohmann::json to_json(const TestReport& r) {
  return {{"name", r.name},         {"status", to_string(r.status)}, {"statistic", r.statistic},
          {"threshold", r.threshold}, {"direction", r.direction},      {"details", r.details},
          {"seed", r.seed},         {"seconds", r.seconds}};
}

void TailEstimate::finalize() {
  ci.clear();
  for (std::size_t i = 0; i < thresholds.size(); ++i) ci.push_back(wilson_interval(hits.at(i), trials.at(i)));
}

std::vector<double> TailEstimate::estimates() const {
  std::vector<double> e;
  for (std::size_t i = 0; i < thresholds.size(); ++i) {
    e.push_back(trials[i] ? static_cast<double>(hits[i]) / static_cast<double>(trials[i]) : 0.0);
  }
  return e;
}

bool TailEstimate::monotone_non_increasing() const {
  const auto e = estimates();
  for (std::size_t i = 1; i < e.size(); ++i) {
    if (e[i] > e[i - 1]) return false;
  }
  return true;
}

nlohmann::json to_json(const TailEstimate& t) {
  nlohmann::json j;
  j["quantity"] = t.quantity;
  j["thresholds"] = t.thresholds;
  j["trials"] = t.trials;
  j["hits"] = t.hits;
  j["estimate"] = t.estimates();
  std::vector<double> lo, hi;
  for (const auto& c : t.ci) {
    lo.push_back(c.lo);
    hi.push_back(c.hi);
  }
  j["ci_lo"] = lo;
  j["ci_hi"] = hi;
  j["unresolved"] = t.unresolved;
  j["monotone_non_increasing"] = t.monotone_non_increasing();
  j["details"] = t.details;
  return j;
}

namespace {

using Clock = std::chrono::steady_clock;

template <class Fn>
TestReport timed(Fn&& fn) {
  const auto t0 = Clock::now();
  TestReport r = fn();
  r.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
  return r;
}

std::uint64_t test_seed(std::uint64_t seed, std::string_view name) { return mix64(seed ^ hash_name(name)); }

Rng test_rng(std::uint64_t seed, std::string_view name, std::uint64_t index = 0) {
  return Rng::stream(test_seed(seed, name), index);
}

void set_status(TestReport& r, bool ok) { r.status = ok ? Status::Pass : Status::Fail; }

Vec random_direction(Rng& rng, int d) {
  for (;;) {
    Vec v(d);
    for (int k = 0; k < d; ++k) v[k] = rng.normal();
    const double n = v.norm();
    if (n > 1e-12) return v * (1.0 / n);
  }
}

Point uniform_in_ball(Rng& rng, int d, double radius) {
  Point p(d);
  if (d <= 4) {
    for (;;) {
      double r2 = 0.0;
      for (int k = 0; k < d; ++k) {
        p[k] = rng.uniform(-radius, radius);
        r2 += p[k] * p[k];
      }
      if (r2 <= radius * radius) return p;
    }
  }
  return random_direction(rng, d) * (radius * std::pow(rng.uniform(), 1.0 / d));
}

/// |v|^-d for |v|^2 = r2.
double inv_pow_d(double r2, int d) {
  double w = 1.0;
  const double ir2 = 1.0 / r2;
  for (int k = 0; k < d / 2; ++k) w *= ir2;
  if (d % 2 == 1) w *= std::sqrt(ir2);
  return w;
}

struct BuiltField {
  std::shared_ptr<FieldModel> model;
  std::shared_ptr<HierarchicalField> hier;
  const ForceSource& source() const { return hier ? static_cast<const ForceSource&>(*hier) : *model; }
};

BuiltField build_field(StarConfig cfg, bool hierarchical, FarFieldOptions far, const Region& prepare) {
  BuiltField f;
  f.model = std::make_shared<FieldModel>(std::move(cfg));
  if (hierarchical) {
    f.hier = std::make_shared<HierarchicalField>(f.model, far);
    f.hier->prepare(prepare);
  }
  return f;
}

double valid_radius_of(const ForceSource& field, const FlowOptions& opts) {
  const double L = field.truncation().radius;
  return L - opts.margin_for(L);
}

}  // namespace

// ---------------------------------------------------------------- Poisson tails

TestReport test_poisson_tails(const std::vector<double>& lambdas, double delta) {
  return timed([&] {
    TestReport r;
    r.name = "poisson_tails";
    r.direction = "<=";
    r.threshold = 0.0;
    if (!(delta > 0.0)) throw ValidationError("delta must be positive");
    std::size_t checks = 0, violations = 0;
    double worst_upper = 0.0, worst_two_sided = 0.0;
    nlohmann::json per = nlohmann::json::array();
    for (double lam : lambdas) {
      if (!(lam > 0.0)) throw ValidationError("Poisson means must be positive");
      // Conservative rounding at breakpoints: the larger probability is used.
      auto upper_at = [&](double x) { return poisson_upper_tail(lam, x - 1e-9 * std::max(1.0, std::fabs(x))); };
      auto lower_at = [&](double x) { return poisson_lower_tail(lam, x + 1e-9 * std::max(1.0, std::fabs(x))); };

      // (i) P(X >= t) <= exp(-(t/4) log(t/lambda)), t >= 2 lambda. Worst case per integer
      // step is its right end, so t = 2 lambda and the integers above it are exhaustive.
      std::vector<double> ts{2.0 * lam};
      const double kmax = 2.0 * lam + 40.0 * std::sqrt(lam) + 60.0;
      for (double k = std::ceil(2.0 * lam); k <= kmax; k += 1.0) ts.push_back(k);
      double w1 = 0.0;
      for (double t : ts) {
        const double p = poisson_upper_tail(lam, t);
        const double b = std::exp(-(t / 4.0) * std::log(t / lam));
        ++checks;
        if (p > b) ++violations;
        w1 = std::max(w1, p / b);
      }

      // (ii) P(|X - lambda| >= t lambda) <= 2 exp(-lambda t^2 / 3), t in [0, delta]; the
      // probability is a step function whose steps close on the right, so checking every
      // breakpoint plus a uniform grid bounds the supremum.
      std::vector<double> t2;
      for (int i = 0; i <= 100; ++i) t2.push_back(delta * i / 100.0);
      for (double k = std::floor(lam) + 1.0; k <= lam * (1.0 + delta); k += 1.0) t2.push_back(k / lam - 1.0);
      for (double m = std::max(0.0, std::ceil(lam * (1.0 - delta))); m < lam; m += 1.0) t2.push_back(1.0 - m / lam);
      double w2 = 0.0;
      for (double t : t2) {
        if (t < 0.0 || t > delta) continue;
        const double p = t == 0.0 ? 1.0 : std::min(1.0, upper_at(lam * (1.0 + t)) + lower_at(lam * (1.0 - t)));
        const double b = 2.0 * std::exp(-lam * t * t / 3.0);
        ++checks;
        if (p > b) ++violations;
        w2 = std::max(w2, p / b);
      }
      worst_upper = std::max(worst_upper, w1);
      worst_two_sided = std::max(worst_two_sided, w2);
      per.push_back({{"lambda", lam}, {"max_ratio_upper", w1}, {"max_ratio_two_sided", w2}});
    }
    r.statistic = static_cast<double>(violations);
    r.details = {{"checks", checks},
                 {"violations", violations},
                 {"delta", delta},
                 {"max_ratio_upper", worst_upper},
                 {"max_ratio_two_sided", worst_two_sided},
                 {"per_lambda", per}};
    set_status(r, violations == 0);
    return r;
  });
}

// ---------------------------------------------------------------- Hadamard variant

TestReport test_hadamard_variant(int k_max, std::size_t trials, std::uint64_t seed) {
  return timed([&] {
    TestReport r;
    r.name = "hadamard_variant";
    r.seed = seed;
    r.direction = "<=";
    if (k_max < 1) throw ValidationError("k_max must be at least 1");
    std::size_t violations = 0, checks = 0;
    double min_margin = std::numeric_limits<double>::infinity();

    auto check = [&](const Eigen::MatrixXd& a) {
      const int k = static_cast<int>(a.rows());
      const Eigen::PartialPivLU<Eigen::MatrixXd> lu(a);
      double logdet = 0.0, logbound = -k * std::log(2.0);
      for (int i = 0; i < k; ++i) {
        logdet += std::log(std::fabs(lu.matrixLU()(i, i)));
        logbound += std::log(std::fabs(a(i, i)));
      }
      const double margin = logdet - logbound;
      ++checks;
      if (margin < -1e-10 * k) ++violations;
      min_margin = std::min(min_margin, margin);
    };

    for (int k = 1; k <= k_max; ++k) check(Eigen::MatrixXd::Identity(k, k));
    Rng rng = test_rng(seed, "hadamard_variant");
    for (int k = 1; k <= k_max; ++k) {
      Eigen::MatrixXd a = Eigen::MatrixXd::Zero(k, k);
      for (int i = 0; i < k; ++i) a(i, i) = (rng.uniform() < 0.5 ? -1.0 : 1.0) * std::exp(rng.uniform(-5.0, 5.0));
      check(a);
    }
    for (std::size_t t = 0; t < trials; ++t) {
      const int k = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(k_max)));
      Eigen::MatrixXd a(k, k);
      for (int i = 0; i < k; ++i) {
        const double row_scale = std::exp(rng.uniform(-3.0, 3.0));
        double sum = 0.0;
        for (int j = 0; j < k; ++j) {
          if (j == i) continue;
          a(i, j) = rng.uniform() < 0.3 ? 0.0 : row_scale * rng.uniform(-1.0, 1.0);
          sum += std::fabs(a(i, j));
        }
        // A quarter of the rows sit exactly on the dominance boundary.
        const double slack = rng.uniform() < 0.25 ? 0.0 : std::pow(rng.uniform(), 3) * 4.0;
        double diag = 2.0 * sum * (1.0 + slack);
        if (diag == 0.0) diag = row_scale;
        a(i, i) = rng.uniform() < 0.5 ? -diag : diag;
      }
      check(a);
    }
    r.statistic = static_cast<double>(violations);
    r.details = {{"checks", checks}, {"violations", violations}, {"min_log_margin", min_margin}, {"k_max", k_max}};
    set_status(r, violations == 0);
    return r;
  });
}

// ---------------------------------------------------------------- inverse-distance sum

namespace {

/// Random sequential addition of S-separated points in a cube (grid-hashed).
std::vector<Point> rsa_points(Rng& rng, int d, std::size_t n, double s, double packing) {
  const double side = std::pow(static_cast<double>(n) * kappa(d) * std::pow(s / 2.0, d) / packing, 1.0 / d);
  const auto cells = static_cast<std::int64_t>(std::max(1.0, std::floor(side / s)));
  const double cw = side / static_cast<double>(cells);
  std::unordered_map<std::uint64_t, std::vector<std::uint32_t>> grid;
  auto key = [&](const std::array<std::int64_t, kMaxDim>& c) {
    std::uint64_t h = 0;
    for (int k = 0; k < d; ++k) h = h * static_cast<std::uint64_t>(cells + 2) + static_cast<std::uint64_t>(c[k] + 1);
    return h;
  };
  std::vector<Point> pts;
  const std::size_t max_attempts = 200 * n + 1000;
  for (std::size_t a = 0; a < max_attempts && pts.size() < n; ++a) {
    Point p(d);
    std::array<std::int64_t, kMaxDim> c{};
    for (int k = 0; k < d; ++k) {
      p[k] = rng.uniform(0.0, side);
      c[k] = std::min<std::int64_t>(cells - 1, static_cast<std::int64_t>(p[k] / cw));
    }
    bool ok = true;
    std::array<int, kMaxDim> o{};
    for (int k = 0; k < d; ++k) o[k] = -1;
    while (ok) {
      std::array<std::int64_t, kMaxDim> q{};
      for (int k = 0; k < d; ++k) q[k] = c[k] + o[k];
      if (auto it = grid.find(key(q)); it != grid.end()) {
        for (std::uint32_t j : it->second) {
          if ((pts[j] - p).norm2() <= s * s) {
            ok = false;
            break;
          }
        }
      }
      int k = 0;
      while (k < d && ++o[k] == 2) o[k++] = -1;
      if (k == d) break;
    }
    if (!ok) continue;
    grid[key(c)].push_back(static_cast<std::uint32_t>(pts.size()));
    pts.push_back(p);
  }
  return pts;
}

double inverse_distance_sum_at(const std::vector<Point>& pts, std::size_t i, int d) {
  double s = 0.0;
  for (std::size_t j = 0; j < pts.size(); ++j) {
    if (j != i) s += inv_pow_d((pts[j] - pts[i]).norm2(), d);
  }
  return s;
}

}  // namespace

TestReport test_inverse_distance_sum(const InverseDistanceOptions& opts) {
  return timed([&] {
    TestReport r;
    r.name = "inverse_distance_sum";
    r.seed = opts.seed;
    r.direction = "<=";
    if (opts.dims.empty() || opts.max_points < 2) throw ValidationError("need dimensions and at least 2 points");
    std::size_t checks = 0, violations = 0, sets = 0;
    nlohmann::json max_ratio = nlohmann::json::object();
    std::unordered_map<int, double> worst;

    auto check_set = [&](const std::vector<Point>& pts, int d, double s, Rng& rng) {
      const std::size_t n = pts.size();
      if (n < 2) return;
      ++sets;
      const double bound = 2.0 * std::pow(8.0, d) * std::log(static_cast<double>(n)) / std::pow(s, d);
      auto one = [&](std::size_t i) {
        const double ratio = inverse_distance_sum_at(pts, i, d) / bound;
        ++checks;
        if (ratio > 1.0) ++violations;
        worst[d] = std::max(worst[d], ratio);
      };
      if (n <= opts.exhaustive_limit) {
        for (std::size_t i = 0; i < n; ++i) one(i);
        return;
      }
      Point centroid = Point::zeros(d);
      for (const auto& p : pts) centroid += p;
      centroid *= 1.0 / static_cast<double>(n);
      std::size_t best = 0;
      for (std::size_t i = 1; i < n; ++i) {
        if ((pts[i] - centroid).norm2() < (pts[best] - centroid).norm2()) best = i;
      }
      one(best);
      for (std::size_t c = 0; c < opts.sampled_centers; ++c) one(rng.below(n));
    };

    Rng rng = test_rng(opts.seed, "inverse_distance_sum");
    for (int d : opts.dims) {
      // Two points exactly S apart.
      std::vector<Point> two{Point::zeros(d), Vec::unit(d, 0)};
      check_set(two, d, 1.0, rng);
      // Regular grids of spacing S.
      for (int m : {2, 3, 5, 8}) {
        std::vector<Point> g;
        std::size_t total = 1;
        for (int k = 0; k < d; ++k) total *= static_cast<std::size_t>(m);
        if (total > opts.max_points) continue;
        for (std::size_t i = 0; i < total; ++i) {
          Point p(d);
          std::size_t rem = i;
          for (int k = 0; k < d; ++k) {
            p[k] = static_cast<double>(rem % m);
            rem /= m;
          }
          g.push_back(p);
        }
        check_set(g, d, 1.0, rng);
      }
    }
    const double packing[] = {0.25, 0.18, 0.12, 0.08, 0.05, 0.03};
    for (std::size_t s = 0; s < opts.sets; ++s) {
      const int d = opts.dims[s % opts.dims.size()];
      const double logn = rng.uniform(std::log(2.0), std::log(static_cast<double>(opts.max_points)));
      const auto n = static_cast<std::size_t>(std::max(2.0, std::round(std::exp(logn))));
      const double sep = std::exp(rng.uniform(std::log(0.5), std::log(2.0)));
      const auto pts = rsa_points(rng, d, n, sep, packing[std::min(5, d - 3)]);
      check_set(pts, d, sep, rng);
    }
    for (const auto& [d, w] : worst) max_ratio[std::to_string(d)] = w;
    r.statistic = static_cast<double>(violations);
    r.details = {{"sets", sets},
                 {"checks", checks},
                 {"violations", violations},
                 {"constant", "2 * 8^d"},
                 {"max_ratio_by_dim", max_ratio}};
    set_status(r, violations == 0);
    return r;
  });
}

// ---------------------------------------------------------------- joint density core

double joint_density_lambda_bound(int d, int n, double separation) {
  return separation / (10.0 * std::pow(std::log(std::max(n, 2)), 1.0 / d));
}

namespace {

Vec g_map(const Vec& v) { return v * inv_pow_d(v.norm2(), v.dim()); }

Vec g_inverse(const Vec& w) {
  const int d = w.dim();
  return w * std::pow(w.norm(), -static_cast<double>(d) / (d - 1));
}

/// D g(v) = |v|^-d I - d v v^T |v|^{-d-2}.
Eigen::MatrixXd g_jacobian(const Vec& v) {
  const int d = v.dim();
  const double r2 = v.norm2();
  const double w = inv_pow_d(r2, d);
  Eigen::MatrixXd m = Eigen::MatrixXd::Identity(d, d) * w;
  for (int a = 0; a < d; ++a)
    for (int b = 0; b < d; ++b) m(a, b) -= d * v[a] * v[b] * w / r2;
  return m;
}

}  // namespace

TestReport test_joint_density_core(const JointDensityOptions& o) {
  return timed([&] {
    TestReport r;
    r.name = "joint_density_core[d=" + std::to_string(o.d) + ",N=" + std::to_string(o.n) + "]";
    r.seed = o.seed;
    r.direction = "<=";
    if (o.d < 3 || o.d > kMaxDim || o.n < 1) throw ValidationError("joint density probe needs d >= 3 and N >= 1");
    const double bound = joint_density_lambda_bound(o.d, o.n, o.separation);
    r.details = {{"d", o.d}, {"N", o.n}, {"lambda", o.lambda}, {"S", o.separation}, {"lambda_bound", bound}};
    if (!(o.lambda > 0.0) || o.lambda > bound) {
      r.status = Status::Skipped;
      r.details["reason"] = "lambda outside the probe regime lambda <= S / (10 (log max(N,2))^(1/d))";
      return r;
    }
    const int d = o.d, n = o.n;
    Rng rng = test_rng(o.seed, r.name);

    std::vector<Point> x{Point::zeros(d)};
    const double spread = 1.5 * o.separation * std::max(1.0, std::pow(n, 1.0 / d));
    while (static_cast<int>(x.size()) < n) {
      Point p(d);
      for (int k = 0; k < d; ++k) p[k] = rng.uniform(-spread, spread);
      bool ok = true;
      for (const auto& q : x) ok = ok && distance(p, q) > o.separation;
      if (ok) x.push_back(p);
    }
    auto draw = [&] {
      std::vector<Point> y;
      for (int j = 0; j < n; ++j) y.push_back(x[j] + uniform_in_ball(rng, d, o.lambda));
      return y;
    };
    auto image = [&](const std::vector<Point>& y) {
      Eigen::VectorXd gv = Eigen::VectorXd::Zero(n * d);
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
          const Vec t = g_map(y[j] - x[i]);
          for (int k = 0; k < d; ++k) gv(i * d + k) += t[k];
        }
      }
      return gv;
    };

    std::size_t failures = 0;
    double min_gap = std::numeric_limits<double>::infinity();
    double min_ratio = std::numeric_limits<double>::infinity();
    double max_inverse_error = 0.0;
    std::size_t dominant = 0, not_dominant = 0, violations = 0;
    double min_margin = std::numeric_limits<double>::infinity();

    for (std::size_t t = 0; t < o.trials; ++t) {
      const auto y = draw();
      // Distant pair and a nearby pair.
      auto y2 = draw();
      auto y3 = y;
      for (int j = 0; j < n; ++j) {
        const Vec step = random_direction(rng, d) * (1e-6 * o.lambda);
        if (distance(y[j] + step, x[j]) <= o.lambda) y3[j] = y[j] + step;
      }
      const auto gy = image(y);
      for (const auto* other : {&y2, &y3}) {
        double dy = 0.0;
        for (int j = 0; j < n; ++j) dy = std::max(dy, distance(y[j], (*other)[j]));
        if (dy == 0.0) continue;
        const double gap = (gy - image(*other)).norm();
        min_gap = std::min(min_gap, gap);
        min_ratio = std::min(min_ratio, gap / dy);
        if (!(gap > 0.0)) ++failures;
      }
      if (n == 1) {
        const Vec v = y[0] - x[0];
        Vec w(d);
        for (int k = 0; k < d; ++k) w[k] = gy(k);
        const double err = distance(g_inverse(w), v) / v.norm();
        max_inverse_error = std::max(max_inverse_error, err);
        if (err > 1e-10) ++failures;
      }

      // Jacobian in the radial frame of each diagonal block.
      Eigen::MatrixXd jac(n * d, n * d);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) jac.block(i * d, j * d, d, d) = g_jacobian(y[j] - x[i]);
      Eigen::MatrixXd q = Eigen::MatrixXd::Zero(n * d, n * d);
      for (int i = 0; i < n; ++i) {
        const Vec v = y[i] - x[i];
        Eigen::VectorXd e(d);
        for (int k = 0; k < d; ++k) e(k) = v[k];
        const Eigen::HouseholderQR<Eigen::MatrixXd> qr(e);
        q.block(i * d, i * d, d, d) = qr.householderQ() * Eigen::MatrixXd::Identity(d, d);
      }
      const Eigen::MatrixXd a = q.transpose() * jac * q;
      bool dom = true;
      double logbound = -static_cast<double>(n * d) * std::log(2.0);
      for (int row = 0; row < n * d; ++row) {
        double off = 0.0;
        for (int c = 0; c < n * d; ++c)
          if (c != row) off += std::fabs(a(row, c));
        if (std::fabs(a(row, row)) < 2.0 * off) dom = false;
        logbound += std::log(std::fabs(a(row, row)));
      }
      if (!dom) {
        ++not_dominant;
        continue;
      }
      ++dominant;
      const Eigen::PartialPivLU<Eigen::MatrixXd> lu(jac);
      double logdet = 0.0;
      for (int row = 0; row < n * d; ++row) logdet += std::log(std::fabs(lu.matrixLU()(row, row)));
      const double margin = logdet - logbound;
      min_margin = std::min(min_margin, margin);
      if (margin < -1e-9 * n * d) ++violations;
    }
    r.statistic = static_cast<double>(failures + violations);
    r.details["trials"] = o.trials;
    r.details["injectivity_failures"] = failures;
    r.details["min_image_gap"] = min_gap;
    r.details["min_gap_ratio"] = min_ratio;
    if (n == 1) r.details["max_inverse_error"] = max_inverse_error;
    r.details["jacobian_checks"] = dominant;
    r.details["jacobian_not_dominant"] = not_dominant;
    r.details["jacobian_violations"] = violations;
    r.details["min_log_margin"] = dominant ? min_margin : 0.0;
    set_status(r, failures == 0 && violations == 0);
    return r;
  });
}

// ---------------------------------------------------------------- gradient consistency

namespace {

StarConfig random_small_config(Rng& rng, int d, double window, double min_stars, double extra) {
  const auto count = static_cast<std::size_t>(min_stars) + rng.below(static_cast<std::uint64_t>(extra) + 1);
  std::vector<Point> pts;
  for (std::size_t i = 0; i < count; ++i) pts.push_back(uniform_in_ball(rng, d, window));
  return from_explicit(d, std::move(pts), Ball{Point::zeros(d), window});
}

Point point_away_from_stars(Rng& rng, const StarConfig& cfg, const Point& center, double radius, double clearance) {
  const int d = cfg.dim();
  for (int attempt = 0; attempt < 10000; ++attempt) {
    const Point p = center + uniform_in_ball(rng, d, radius);
    bool ok = true;
    for (const auto& z : cfg.stars()) ok = ok && distance(p, z) >= clearance;
    if (ok) return p;
  }
  throw ValidationError("could not place a fixture point away from the stars");
}

double grad_error(const Vec& fd, const Vec& expected) {
  return (fd - expected).norm_inf() / std::max(1.0, expected.norm_inf());
}

}  // namespace

TestReport test_gradient_consistency(std::size_t fixtures, std::uint64_t seed, double tolerance) {
  return timed([&] {
    TestReport r;
    r.name = "gradient_consistency";
    r.seed = seed;
    r.threshold = tolerance;
    r.direction = "<=";
    const double h = 1e-5;
    const double clearance = 0.25;
    double worst = 0.0;
    std::size_t checks = 0;
    nlohmann::json worst_fixture;
    for (std::size_t f = 0; f < fixtures; ++f) {
      Rng rng = test_rng(seed, "gradient_consistency", f);
      const int d = 3 + static_cast<int>(f % 3);
      const int kind = static_cast<int>((f / 3) % 3);
      const FieldModel model(random_small_config(rng, d, 3.0, 5, 20), Ball{Point::zeros(d), 3.0});
      const Point c = uniform_in_ball(rng, d, 0.5);
      const double p = rng.uniform(1.5, 2.5);
      const double q = rng.uniform(0.8, 1.3);
      const bool annulus = kind == 1 || (kind == 2 && f % 2 == 1);
      const Region a = annulus ? Region(Annulus{c, q, p}) : Region(Ball{c, p});
      const double inner = (annulus ? q : p) - 0.1;

      auto fd_grad = [&](auto&& fn, const Point& x) {
        Vec g(d);
        for (int k = 0; k < d; ++k) {
          Point xp = x, xm = x;
          xp[k] += h;
          xm[k] -= h;
          g[k] = (fn(xp) - fn(xm)) / (2.0 * h);
        }
        return g;
      };
      double err = 0.0;
      const Point x = point_away_from_stars(rng, model.config(), c, inner, clearance);
      if (kind < 2) {
        const Vec fd = fd_grad([&](const Point& u) { return model.potential_partial(u, a); }, x);
        err = grad_error(fd, -1.0 * model.force_partial(x, a));
        ++checks;
      } else {
        const Point y = point_away_from_stars(rng, model.config(), c, inner, clearance);
        const Vec fdx = fd_grad([&](const Point& u) { return model.potential_diff(u, y, a); }, x);
        const Vec fdy = fd_grad([&](const Point& u) { return model.potential_diff(x, u, a); }, y);
        err = std::max(grad_error(fdx, model.force_partial(x, a)), grad_error(fdy, -1.0 * model.force_partial(y, a)));
        checks += 2;
      }
      if (err >= worst) {
        worst = err;
        worst_fixture = {{"fixture", f}, {"d", d}, {"kind", kind == 0 ? "ball" : kind == 1 ? "annulus" : "diff"},
                         {"region", to_json(a)}, {"error", err}};
      }
    }
    r.statistic = worst;
    r.details = {{"fixtures", fixtures}, {"checks", checks}, {"h", h}, {"clearance", clearance},
                 {"metric", "max |fd - analytic| / max(1, max |analytic|)"}, {"worst", worst_fixture}};
    set_status(r, worst <= tolerance);
    return r;
  });
}

// ---------------------------------------------------------------- shell theorem

TestReport test_shell_theorem(std::size_t samples, std::uint64_t seed) {
  return timed([&] {
    TestReport r;
    r.name = "shell_theorem";
    r.seed = seed;
    r.threshold = 3.0;
    r.direction = "<=";
    if (samples < 2) throw ValidationError("need at least 2 samples");
    struct Fixture {
      Point x, c;
      double L;
    };
    std::vector<Fixture> fx{
        {Vec{1.0, 0.0, 0.0}, Vec{0.0, 0.0, 0.0}, 2.0},
        {Vec{0.3, -0.2, 0.9}, Vec{0.5, -0.3, 0.2}, 1.5},
        {Vec{0.0, 0.0, 0.0}, Vec{0.0, 0.0, 0.0}, 1.0},
        {Vec{1.2, 0.4, -0.3, 0.5}, Vec{0.0, 0.0, 0.0, 0.0}, 2.0},
        {Vec{0.2, 0.1, -0.4, 0.3, 0.6}, Vec{0.0, 0.1, 0.0, 0.0, 0.0}, 1.0},
    };
    double worst = 0.0;
    nlohmann::json per = nlohmann::json::array();
    for (std::size_t f = 0; f < fx.size(); ++f) {
      const auto& [x, c, L] = fx[f];
      const int d = x.dim();
      const Vec exact = ball_field_integral(x, c, L);
      // Points z = x + r u with u uniform on the sphere and r uniform on [0, R']: the density
      // is proportional to |z - x|^{1-d}, so the weight d kappa_d R' u 1_B(z) is bounded.
      const double rp = L + distance(x, c);
      const double wt = d * kappa(d) * rp;
      Rng rng = test_rng(seed, "shell_theorem", f);
      std::vector<double> sum(d, 0.0), sum2(d, 0.0);
      for (std::size_t i = 0; i < samples; ++i) {
        const Vec u = random_direction(rng, d);
        const Point z = x + u * (rp * rng.uniform());
        if (distance(z, c) > L) continue;
        for (int k = 0; k < d; ++k) {
          const double v = wt * u[k];
          sum[k] += v;
          sum2[k] += v * v;
        }
      }
      const double n = static_cast<double>(samples);
      double zmax = 0.0;
      std::vector<double> est(d), se(d);
      for (int k = 0; k < d; ++k) {
        est[k] = sum[k] / n;
        const double var = (sum2[k] / n - est[k] * est[k]) * n / (n - 1.0);
        se[k] = std::sqrt(std::max(var, 0.0) / n);
        const double z = se[k] > 0.0 ? std::fabs(est[k] - exact[k]) / se[k] : 0.0;
        zmax = std::max(zmax, z);
      }
      worst = std::max(worst, zmax);
      per.push_back({{"d", d}, {"x", to_json(x)}, {"c", to_json(c)}, {"L", L}, {"estimate", est},
                     {"standard_error", se}, {"exact", to_json(exact)}, {"max_z", zmax}});
    }
    r.statistic = worst;
    r.details = {{"samples_per_fixture", samples}, {"fixtures", per}};
    set_status(r, worst <= 3.0);
    return r;
  });
}

// ---------------------------------------------------------------- flux identity

TestReport test_flux_identity(std::size_t fixtures, std::uint64_t seed, double tolerance) {
  return timed([&] {
    TestReport r;
    r.name = "flux_identity";
    r.seed = seed;
    r.threshold = tolerance;
    r.direction = "<=";
    double worst = 0.0;
    nlohmann::json worst_fixture;
    for (std::size_t f = 0; f < fixtures; ++f) {
      Rng rng = test_rng(seed, "flux_identity", f);
      const int d = f % 4 == 3 ? 4 : 3;
      const double L = d == 3 ? 3.0 : 2.5;
      const StarConfig cfg = sample_poisson(d, Ball{Point::zeros(d), L}, 1.0, test_seed(seed, "flux_config") + f);
      const FieldModel model(cfg);
      Point y;
      double rho = 0.0;
      bool placed = false;
      for (int attempt = 0; attempt < 1000 && !placed; ++attempt) {
        y = uniform_in_ball(rng, d, 0.8);
        rho = rng.uniform(0.5, 1.4);
        if (y.norm() + rho > L - 0.2) continue;
        placed = true;
        for (const auto& z : cfg.stars()) placed = placed && std::fabs(distance(z, y) - rho) >= 0.2;
      }
      if (!placed) throw ValidationError("could not place a flux sphere away from the stars");
      std::size_t k = 0;
      for (const auto& z : cfg.stars()) k += distance(z, y) < rho ? 1 : 0;
      const double kd = kappa(d);
      const double expected = d * kd * (kd * std::pow(rho, d) - static_cast<double>(k));
      const double scale = d * kd * (kd * std::pow(rho, d) + static_cast<double>(k));
      const double flux = sphere_flux(model, y, rho, d == 3 ? 96 : 48);
      const double err = std::fabs(flux - expected) / scale;
      if (err >= worst) {
        worst = err;
        worst_fixture = {{"fixture", f}, {"d", d}, {"rho", rho}, {"inside", k}, {"flux", flux}, {"expected", expected}};
      }
    }
    r.statistic = worst;
    r.details = {{"fixtures", fixtures},
                 {"metric", "|flux - expected| / (d kappa_d (kappa_d rho^d + k))"},
                 {"worst", worst_fixture}};
    set_status(r, worst <= tolerance);
    return r;
  });
}

// ---------------------------------------------------------------- stable scaling

TestReport test_stable_scaling(const StableScalingOptions& o) {
  return timed([&] {
    TestReport r;
    r.name = "stable_scaling[d=" + std::to_string(o.d) + ",n=" + std::to_string(o.n) + "]";
    r.seed = o.seed;
    r.threshold = o.p_threshold;
    r.direction = ">=";
    if (o.d < 3 || o.n < 1 || o.samples < 2 || !(o.window_radius > 0.0)) {
      throw ValidationError("stable scaling needs d >= 3, n >= 1, samples >= 2 and a positive window");
    }
    const int d = o.d;
    const double kd = kappa(d);
    const double scale = std::pow(static_cast<double>(o.n), (d - 1.0) / d);
    const double pooled_radius = o.scaled_window ? o.window_radius * std::pow(o.n, -1.0 / d) : o.window_radius;

    auto field_norm = [&](Rng& rng, double radius, int copies) {
      Vec f = Vec::zeros(d);
      for (int c = 0; c < copies; ++c) {
        const std::uint64_t count = rng.poisson(kd * std::pow(radius, d));
        for (std::uint64_t i = 0; i < count; ++i) {
          const Point z = uniform_in_ball(rng, d, radius);
          f += z * inv_pow_d(z.norm2(), d);
        }
      }
      return f.norm();
    };
    std::vector<double> single(o.samples), pooled(o.samples);
    const std::uint64_t s1 = test_seed(o.seed, r.name + ":single");
    const std::uint64_t s2 = test_seed(o.seed, r.name + ":pooled");
    parallel_for(o.samples, 0, [&](std::size_t i) {
      Rng a = Rng::stream(s1, i);
      single[i] = scale * field_norm(a, o.window_radius, 1);
      Rng b = Rng::stream(s2, i);
      pooled[i] = field_norm(b, pooled_radius, o.n);
    });
    const KsResult ks = ks_two_sample(single, pooled);
    r.statistic = ks.p_value;
    r.details = {{"d", d},
                 {"n", o.n},
                 {"samples", o.samples},
                 {"window_radius", o.window_radius},
                 {"pooled_window_radius", pooled_radius},
                 {"ks_statistic", ks.statistic},
                 {"p_value", ks.p_value},
                 {"median_scaled_single", [&] {
                    auto v = single;
                    std::nth_element(v.begin(), v.begin() + v.size() / 2, v.end());
                    return v[v.size() / 2];
                  }()},
                 {"median_pooled", [&] {
                    auto v = pooled;
                    std::nth_element(v.begin(), v.begin() + v.size() / 2, v.end());
                    return v[v.size() / 2];
                  }()}};
    set_status(r, ks.p_value > o.p_threshold);
    return r;
  });
}

// ---------------------------------------------------------------- capture asymptotics

TestReport test_capture_asymptotics(int d, std::size_t deltas, std::uint64_t seed, double tolerance) {
  return timed([&] {
    TestReport r;
    r.name = "capture_asymptotics[d=" + std::to_string(d) + "]";
    r.seed = seed;
    r.threshold = tolerance;
    r.direction = "<=";
    if (deltas < 2) throw ValidationError("need at least two distances");
    // Isolated star at the origin; its neighbours sit 1.5 away on the axes.
    std::vector<Point> pts{Point::zeros(d)};
    for (int k = 0; k < d; ++k) {
      pts.push_back(Vec::unit(d, k) * 1.5);
      pts.push_back(Vec::unit(d, k) * -1.5);
    }
    const FieldModel model(from_explicit(d, pts, Ball{Point::zeros(d), 4.0}));
    Rng rng = test_rng(seed, r.name);
    double worst = 0.0;
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t i = 0; i < deltas; ++i) {
      const double delta = std::pow(10.0, -3.0 + 2.0 * static_cast<double>(i) / static_cast<double>(deltas - 1));
      FlowOptions fo;
      fo.dominance_factor = 1e12;
      fo.hard_radius = 1e-3 * delta;
      fo.rel_tol = 1e-9;
      fo.abs_tol = 1e-12 * delta;
      fo.max_time = 1.0;
      fo.record_trace = false;
      const Point x0 = random_direction(rng, d) * delta;
      const FlowTrace tr = integrate_flow(model, x0, fo);
      const double expected = std::pow(delta, d) / d;
      double err = std::numeric_limits<double>::infinity();
      if (tr.terminal == Terminal::Captured && tr.star == 0) err = std::fabs(tr.tau - expected) / expected;
      worst = std::max(worst, err);
      rows.push_back({{"delta", delta}, {"tau", tr.tau}, {"expected", expected}, {"relative_error", err},
                      {"terminal", to_string(tr.terminal)}, {"steps", tr.steps}});
    }
    r.statistic = worst;
    r.details = {{"d", d}, {"rows", rows}};
    set_status(r, worst <= tolerance);
    return r;
  });
}

// ---------------------------------------------------------------- Liouville decay

TestReport test_liouville(const LiouvilleOptions& o) {
  return timed([&] {
    TestReport r;
    r.name = "liouville[d=" + std::to_string(o.d) + "]";
    r.seed = o.seed;
    r.threshold = o.tolerance;
    r.direction = "<=";
    if (o.t_grid.size() < 2 || o.points < 10) throw ValidationError("Liouville fit needs >= 2 times and >= 10 points");
    const int d = o.d;
    const double t_max = *std::max_element(o.t_grid.begin(), o.t_grid.end());
    const StarConfig cfg =
        sample_poisson(d, Ball{Point::zeros(d), o.window_radius}, 1.0, test_seed(o.seed, r.name + ":config"));
    const Region box = Box{Point::zeros(d), o.box_halfwidth};
    const BuiltField field =
        build_field(cfg, o.hierarchical, o.far, Box{Point::zeros(d), o.box_halfwidth + 1.5});
    FlowOptions fo = o.flow;
    fo.record_trace = false;
    fo.max_time = 1.25 * t_max;
    const double vr = valid_radius_of(field.source(), fo);
    if (o.box_halfwidth * std::sqrt(static_cast<double>(d)) > vr - 1.0) {
      throw ValidationError("the sampling box must lie well inside the valid region");
    }

    Rng rng = test_rng(o.seed, r.name + ":points");
    std::vector<Point> xs;
    xs.reserve(o.points);
    for (std::size_t i = 0; i < o.points; ++i) xs.push_back(sample_uniform(box, rng));
    constexpr double kSurvivor = std::numeric_limits<double>::infinity();
    std::vector<double> tau(o.points, std::numeric_limits<double>::quiet_NaN());
    parallel_for(o.points, o.threads, [&](std::size_t i) {
      const FlowTrace tr = integrate_flow(field.source(), xs[i], fo);
      if (tr.terminal == Terminal::Captured) tau[i] = tr.tau;
      if (tr.terminal == Terminal::TimeBudgetExceeded) tau[i] = kSurvivor;
    });
    std::size_t unresolved = 0;
    for (double t : tau) unresolved += std::isnan(t) ? 1 : 0;
    const std::size_t resolved = o.points - unresolved;
    const double unresolved_fraction = static_cast<double>(unresolved) / static_cast<double>(o.points);
    const double reference = d * kappa(d);

    std::vector<double> surv, logs;
    for (double t : o.t_grid) {
      std::size_t alive = 0;
      for (double v : tau) alive += (!std::isnan(v) && v > t) ? 1 : 0;
      const double s = resolved ? static_cast<double>(alive) / static_cast<double>(resolved) : 0.0;
      surv.push_back(s);
      logs.push_back(s > 0.0 ? std::log(s) : -std::numeric_limits<double>::infinity());
    }
    r.details = {{"d", d},
                 {"window_radius", o.window_radius},
                 {"box_halfwidth", o.box_halfwidth},
                 {"points", o.points},
                 {"unresolved_fraction", unresolved_fraction},
                 {"hierarchical", o.hierarchical},
                 {"stars", cfg.size()}};
    if (unresolved_fraction > o.max_unresolved ||
        std::any_of(surv.begin(), surv.end(), [](double s) { return s <= 0.0; })) {
      r.status = Status::Inconclusive;
      r.statistic = std::numeric_limits<double>::quiet_NaN();
      r.details["reason"] = unresolved_fraction > o.max_unresolved ? "too many unresolved flows"
                                                                   : "empty survival bin";
      return r;
    }
    const LinearFit fit = linear_fit(o.t_grid, logs);
    const double rate = -fit.slope;
    r.statistic = std::fabs(rate - reference) / reference;
    r.details["fit"] = {{"t", o.t_grid},          {"survival", surv},
                        {"rate", rate},           {"rate_stderr", fit.slope_stderr},
                        {"intercept", fit.intercept}, {"r_squared", fit.r_squared},
                        {"reference_rate", reference}, {"d", d}};
    set_status(r, r.statistic <= o.tolerance);
    return r;
  });
}

// ---------------------------------------------------------------- fairness

TestReport test_fairness(const FairnessOptions& o) {
  return timed([&] {
    TestReport r;
    r.name = "fairness";
    r.seed = o.seed;
    r.threshold = o.mean_tolerance;
    r.direction = "<=";
    if (o.configs < 1 || o.samples_per_config < 1) throw ValidationError("fairness needs configs and samples");
    const int d = o.d;
    const double interior = o.window_radius - o.boundary_distance;
    double volume_sum = 0.0;
    std::size_t interior_stars = 0, interior_samples = 0, interior_resolved = 0, hard = 0;
    std::size_t total_unresolved = 0;
    nlohmann::json per = nlohmann::json::array();
    for (std::size_t c = 0; c < o.configs; ++c) {
      const std::uint64_t cseed = test_seed(o.seed, "fairness:config") + c;
      const StarConfig cfg = sample_poisson(d, Ball{Point::zeros(d), o.window_radius}, 1.0, cseed);
      FlowOptions fo = o.flow;
      fo.record_trace = false;
      const double vr = o.window_radius - fo.margin_for(o.window_radius);
      const Region region = Ball{Point::zeros(d), vr};
      const BuiltField field = build_field(cfg, true, o.far, region);
      const McAllocation mc = mc_allocate(field.source(), region, o.samples_per_config, cseed, fo, o.threads);
      const double weight = region.volume() / static_cast<double>(o.samples_per_config);
      std::vector<std::size_t> counts(cfg.size(), 0);
      for (std::size_t i = 0; i < mc.points.size(); ++i) {
        const bool inside = mc.points[i].norm() <= interior;
        interior_samples += inside ? 1 : 0;
        if (mc.owner[i] >= 0) {
          ++counts[static_cast<std::size_t>(mc.owner[i])];
          interior_resolved += inside ? 1 : 0;
        } else {
          ++total_unresolved;
        }
      }
      std::size_t n_int = 0;
      double vsum = 0.0;
      for (std::size_t z = 0; z < cfg.size(); ++z) n_int += cfg.star(z).norm() <= interior ? 1 : 0;
      const double alpha = 1e-6 / static_cast<double>(std::max<std::size_t>(1, n_int * o.configs));
      const double mu_lo = 0.5 / weight, mu_hi = 2.0 / weight;
      std::size_t hard_c = 0;
      for (std::size_t z = 0; z < cfg.size(); ++z) {
        if (cfg.star(z).norm() > interior) continue;
        vsum += static_cast<double>(counts[z]) * weight;
        const auto k = static_cast<double>(counts[z]);
        if ((k < mu_lo && poisson_lower_tail(mu_lo, k) < alpha) || (k > mu_hi && poisson_upper_tail(mu_hi, k) < alpha)) {
          ++hard_c;
        }
      }
      volume_sum += vsum;
      interior_stars += n_int;
      hard += hard_c;
      per.push_back({{"config_seed", cseed},
                     {"stars", cfg.size()},
                     {"interior_stars", n_int},
                     {"mean_volume", n_int ? vsum / static_cast<double>(n_int) : 0.0},
                     {"coverage", mc.coverage()},
                     {"hard_failures", hard_c}});
    }
    const double grand = interior_stars ? volume_sum / static_cast<double>(interior_stars) : 0.0;
    const double coverage =
        interior_samples ? static_cast<double>(interior_resolved) / static_cast<double>(interior_samples) : 0.0;
    r.statistic = std::fabs(grand - 1.0);
    r.details = {{"grand_mean", grand},
                 {"interior_stars", interior_stars},
                 {"interior_coverage", coverage},
                 {"min_coverage", o.min_coverage},
                 {"hard_failures", hard},
                 {"unresolved_samples", total_unresolved},
                 {"samples_per_config", o.samples_per_config},
                 {"configs", per}};
    set_status(r, r.statistic <= o.mean_tolerance && coverage >= o.min_coverage && hard == 0);
    return r;
  });
}

// ---------------------------------------------------------------- stable marriage

TestReport test_stable_marriage(const StableMarriageOptions& o) {
  return timed([&] {
    TestReport r;
    r.name = "stable_marriage";
    r.seed = o.seed;
    r.direction = "<=";
    if (o.resolutions.empty()) throw ValidationError("need at least one grid resolution");
    std::size_t blocking = 0, unfilled = 0;
    nlohmann::json per = nlohmann::json::array();
    for (std::size_t c = 0; c < o.configs; ++c) {
      const std::uint64_t cseed = test_seed(o.seed, "stable_marriage:config") + c;
      const StarConfig cfg = sample_poisson(3, Box{Point::zeros(3), o.star_halfwidth}, 1.0, cseed);
      const GridSpec grid{Box{Point::zeros(3), o.grid_halfwidth}, o.resolutions[c % o.resolutions.size()]};
      const AllocationMap map = stable_marriage_allocate(cfg, grid);
      const std::size_t quota = stable_marriage_quota(cfg, grid);
      const std::size_t b = count_blocking_pairs(cfg, map, quota);
      std::vector<std::size_t> load(cfg.size(), 0);
      for (auto o2 : map.owner)
        if (o2 >= 0) ++load[static_cast<std::size_t>(o2)];
      std::size_t short_stars = 0;
      for (auto l : load) short_stars += l != quota ? 1 : 0;
      blocking += b;
      unfilled += short_stars;
      per.push_back({{"config_seed", cseed}, {"stars", cfg.size()}, {"resolution", grid.resolution},
                     {"quota", quota}, {"blocking_pairs", b}, {"stars_below_quota", short_stars}});
    }
    r.statistic = static_cast<double>(blocking);
    r.details = {{"configs", per}, {"blocking_pairs", blocking}, {"stars_below_quota", unfilled}};
    set_status(r, blocking == 0 && unfilled == 0);
    return r;
  });
}

// ---------------------------------------------------------------- allocation tails

namespace {

AllocationTails run_allocation_tails(const AllocationTailOptions& o, bool want_diameter, bool want_crossing) {
  if (o.r_grid.empty() || o.configs < 1) throw ValidationError("tail estimation needs thresholds and configs");
  const double r_max = *std::max_element(o.r_grid.begin(), o.r_grid.end());
  if (r_max > o.window_radius / 4.0) throw ValidationError("largest R must not exceed L / 4");
  const int d = o.d;
  const std::size_t m = o.r_grid.size();
  struct PerConfig {
    bool diameter_ok = false;
    double diameter = 0.0;
    std::vector<char> crossed;
    std::vector<std::size_t> seeds_used;
  };
  std::vector<PerConfig> res(o.configs);
  FarFieldOptions far = o.far;
  far.threads = 1;
  FlowOptions fo = o.flow;
  fo.record_trace = false;
  parallel_for(o.configs, o.threads, [&](std::size_t c) {
    const std::uint64_t cseed = test_seed(o.seed, "allocation_tails:config") + c;
    const StarConfig cfg = sample_poisson(d, Ball{Point::zeros(d), o.window_radius}, 1.0, cseed);
    const double reach = std::max(want_crossing ? 2.0 * r_max + 1.0 : 0.0, 3.0);
    const BuiltField field = build_field(cfg, o.hierarchical, far, Box{Point::zeros(d), reach});
    PerConfig& pc = res[c];
    if (want_diameter) {
      try {
        const FloodCell cell = flood_cell_at(field.source(), Point::zeros(d), o.lattice_spacing, fo, o.max_flood_cells);
        if (!cell.truncated) {
          pc.diameter_ok = true;
          pc.diameter = cell.diameter();
        }
      } catch (const UnresolvedError&) {
      }
    }
    if (want_crossing) {
      for (double R : o.r_grid) {
        const std::size_t n = o.crossing_seeds ? o.crossing_seeds : default_crossing_seeds(d, R);
        const CrossingResult cr = detect_crossing(field.source(), R, n, cseed, fo);
        pc.crossed.push_back(cr.crossed ? 1 : 0);
        pc.seeds_used.push_back(cr.seeds_used);
      }
    }
  });

  AllocationTails out;
  auto init = [&](TailEstimate& t, const std::string& q) {
    t.quantity = q;
    t.thresholds = o.r_grid;
    t.trials.assign(m, 0);
    t.hits.assign(m, 0);
    t.details = {{"d", d}, {"window_radius", o.window_radius}, {"configs", o.configs}, {"seed", o.seed}};
  };
  init(out.diameter, "allocation_diameter");
  init(out.crossing, "crossing");
  std::vector<double> diameters;
  for (const auto& pc : res) {
    if (want_diameter) {
      if (!pc.diameter_ok) {
        ++out.diameter.unresolved;
      } else {
        diameters.push_back(pc.diameter);
        for (std::size_t i = 0; i < m; ++i) {
          ++out.diameter.trials[i];
          out.diameter.hits[i] += pc.diameter > o.r_grid[i] ? 1 : 0;
        }
      }
    }
    if (want_crossing) {
      for (std::size_t i = 0; i < m; ++i) {
        ++out.crossing.trials[i];
        out.crossing.hits[i] += pc.crossed[i] ? 1 : 0;
      }
    }
  }
  out.diameter.details["lattice_spacing"] = o.lattice_spacing;
  out.diameter.details["diameters"] = diameters;
  out.crossing.details["seeds"] = o.crossing_seeds ? nlohmann::json(o.crossing_seeds) : nlohmann::json("default");
  out.diameter.finalize();
  out.crossing.finalize();
  return out;
}

}  // namespace

TailEstimate estimate_diameter_tail(const AllocationTailOptions& opts) {
  return run_allocation_tails(opts, true, false).diameter;
}

TailEstimate estimate_crossing_tail(const AllocationTailOptions& opts) {
  return run_allocation_tails(opts, false, true).crossing;
}

AllocationTails estimate_allocation_tails(const AllocationTailOptions& opts) {
  return run_allocation_tails(opts, true, true);
}

// ---------------------------------------------------------------- partial potential tails

namespace {

std::vector<double> quantile_grid(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  std::vector<double> t;
  for (double q : {0.5, 0.75, 0.9, 0.95, 0.99, 0.995, 0.999, 0.9995, 0.9999}) {
    const auto i = static_cast<std::size_t>(q * static_cast<double>(v.size() - 1));
    if (t.empty() || v[i] > t.back()) t.push_back(v[i]);
  }
  return t;
}

TailEstimate tail_from_samples(const std::string& name, const std::vector<double>& v, std::vector<double> t) {
  if (t.empty()) t = quantile_grid(v);
  std::sort(t.begin(), t.end());
  TailEstimate e;
  e.quantity = name;
  e.thresholds = t;
  for (double th : t) {
    e.trials.push_back(v.size());
    e.hits.push_back(static_cast<std::uint64_t>(std::count_if(v.begin(), v.end(), [&](double x) { return x > th; })));
  }
  e.finalize();
  // Convexity of the log-tail in t over the thresholds with hits.
  std::vector<double> slopes;
  const auto est = e.estimates();
  for (std::size_t i = 0; i + 1 < t.size(); ++i) {
    if (est[i] > 0.0 && est[i + 1] > 0.0) {
      slopes.push_back((std::log(est[i + 1]) - std::log(est[i])) / (t[i + 1] - t[i]));
    }
  }
  bool convex = true, concave = true;
  for (std::size_t i = 0; i + 1 < slopes.size(); ++i) {
    convex = convex && slopes[i + 1] >= slopes[i];
    concave = concave && slopes[i + 1] <= slopes[i];
  }
  e.details["log_tail_convex"] = convex;
  e.details["log_tail_concave"] = concave;
  return e;
}

}  // namespace

std::vector<TailEstimate> estimate_partial_potential_tail(const PartialTailOptions& o) {
  const int d = o.d;
  if (d < 3 || d > kMaxDim) throw ValidationError("dimension must be in [3, 8]");
  if (!(o.inner > 0.0) || !(o.outer > o.inner)) throw ValidationError("need 0 < inner < outer");
  if (o.samples < 2) throw ValidationError("need at least 2 samples");
  const double kd = kappa(d);
  const double pd = std::pow(o.outer, d), qd = std::pow(o.inner, d);
  const double mean_count = kd * (pd - qd);
  const double centering = d * kd * (o.outer * o.outer - o.inner * o.inner) / (2.0 * (d - 2));
  std::vector<double> u(o.samples), f(o.samples), j(o.samples);
  const std::uint64_t base = test_seed(o.seed, "partial_potential_tail");
  parallel_for(o.samples, o.threads, [&](std::size_t s) {
    Rng rng = Rng::stream(base, s);
    const std::uint64_t count = rng.poisson(mean_count);
    double pot = 0.0, wsum = 0.0;
    double force[kMaxDim] = {}, uu[kMaxDim][kMaxDim] = {}, v[kMaxDim];
    for (std::uint64_t i = 0; i < count; ++i) {
      const double rd = qd + rng.uniform() * (pd - qd);
      const double r = std::pow(rd, 1.0 / d);
      double n2;
      do {
        n2 = 0.0;
        for (int a = 0; a < d; ++a) {
          v[a] = rng.normal();
          n2 += v[a] * v[a];
        }
      } while (n2 < 1e-24);
      const double w = 1.0 / rd;
      const double inv = 1.0 / std::sqrt(n2);
      for (int a = 0; a < d; ++a) v[a] *= inv;
      pot -= r * r * w;
      wsum += w;
      for (int a = 0; a < d; ++a) {
        force[a] += v[a] * r * w;
        for (int b = a; b < d; ++b) uu[a][b] += w * v[a] * v[b];
      }
    }
    // D_1 F(0) = sum r^-d (d u u^T - I).
    Eigen::MatrixXd jac(d, d);
    for (int a = 0; a < d; ++a) {
      for (int b = a; b < d; ++b) jac(a, b) = jac(b, a) = d * uu[a][b] - (a == b ? wsum : 0.0);
    }
    double f2 = 0.0;
    for (int a = 0; a < d; ++a) f2 += force[a] * force[a];
    u[s] = std::fabs(pot / (d - 2) + centering);
    f[s] = std::sqrt(f2);
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jac, Eigen::EigenvaluesOnly);
    j[s] = es.eigenvalues().cwiseAbs().maxCoeff();
  });
  std::vector<TailEstimate> out;
  out.push_back(tail_from_samples("partial_potential", u, o.t_potential));
  out.push_back(tail_from_samples("partial_force", f, o.t_force));
  out.push_back(tail_from_samples("partial_jacobian", j, o.t_jacobian));
  const double q = o.inner;
  auto shape = [&](int which, double t) {
    double e = 0.0;
    if (which == 0) e = std::pow(q, d - 2) * t * std::log(t / (q * q));
    if (which == 1) e = std::pow(q, d - 1) * t * std::log(t / q);
    if (which == 2) e = std::pow(q, d) * t * std::log(t);
    return std::min(1.0, std::exp(-e));
  };
  const char* formulas[] = {"exp(-q^(d-2) t log(t/q^2))", "exp(-q^(d-1) t log(t/q))", "exp(-q^d t log t)"};
  for (int w = 0; w < 3; ++w) {
    std::vector<double> b;
    for (double t : out[w].thresholds) b.push_back(shape(w, t));
    out[w].details["bound_shape"] = b;
    out[w].details["bound_formula"] = formulas[w];
    out[w].details["d"] = d;
    out[w].details["inner"] = o.inner;
    out[w].details["outer"] = o.outer;
    out[w].details["samples"] = o.samples;
    out[w].details["seed"] = o.seed;
  }
  out[2].details["norm"] = "operator";
  return out;
}

TestReport check_tail_shape(const std::string& name, const TailEstimate& tail) {
  TestReport r;
  r.name = name;
  r.direction = "<=";
  const auto e = tail.estimates();
  std::size_t increases = 0;
  for (std::size_t i = 1; i < e.size(); ++i) increases += e[i] > e[i - 1] ? 1 : 0;
  const bool decreasing = e.size() >= 2 && e.back() < e.front();
  r.statistic = static_cast<double>(increases);
  r.details = to_json(tail);
  r.details["decreasing_overall"] = decreasing;
  set_status(r, increases == 0 && decreasing);
  return r;
}

// ---------------------------------------------------------------- suite

std::vector<std::string> suite_test_names() {
  return {"poisson_tails",     "hadamard_variant", "inverse_distance_sum", "joint_density_core",
          "gradient_consistency", "shell_theorem", "flux_identity",        "capture_asymptotics",
          "stable_scaling",    "liouville",        "stable_marriage",      "fairness",
          "diameter_tail",     "crossing_tail",    "partial_potential_tail"};
}

std::vector<TestReport> run_suite(const SuiteOptions& s) {
  const auto names = suite_test_names();
  for (const auto& n : s.only) {
    if (std::find(names.begin(), names.end(), n) == names.end()) throw ValidationError("unknown test: " + n);
  }
  auto want = [&](const std::string& n) {
    return s.only.empty() || std::find(s.only.begin(), s.only.end(), n) != s.only.end();
  };
  const bool full = s.scale == Scale::Full;
  std::vector<TestReport> out;
  auto add = [&](TestReport r) {
    r.seed = s.seed;
    out.push_back(std::move(r));
  };

  if (want("poisson_tails")) add(test_poisson_tails());
  if (want("hadamard_variant")) add(test_hadamard_variant(20, full ? 10000 : 2000, s.seed));
  if (want("inverse_distance_sum")) {
    InverseDistanceOptions o;
    o.seed = s.seed;
    if (!full) {
      o.sets = 60;
      o.max_points = 2000;
    }
    add(test_inverse_distance_sum(o));
  }
  if (want("joint_density_core")) {
    const JointDensityOptions combos[] = {{3, 1, 0.5, 10.0, 0, s.seed},
                                          {3, 2, 0.5, 10.0, 0, s.seed},
                                          {3, 3, 0.5, 10.0, 0, s.seed},
                                          {4, 3, 0.5, 10.0, 0, s.seed},
                                          {5, 5, 0.4, 10.0, 0, s.seed}};
    for (auto o : combos) {
      o.trials = full ? 1000 : 200;
      add(test_joint_density_core(o));
    }
  }
  if (want("gradient_consistency")) add(test_gradient_consistency(100, s.seed));
  if (want("shell_theorem")) add(test_shell_theorem(full ? 10'000'000 : 1'000'000, s.seed));
  if (want("flux_identity")) add(test_flux_identity(full ? 50 : 10, s.seed));
  if (want("capture_asymptotics")) {
    add(test_capture_asymptotics(3, 13, s.seed));
    add(test_capture_asymptotics(5, 7, s.seed));
  }
  if (want("stable_scaling")) {
    const int combos[][2] = {{3, 2}, {3, 8}, {4, 2}};
    for (const auto& c : combos) {
      StableScalingOptions o;
      o.d = c[0];
      o.n = c[1];
      o.seed = s.seed;
      o.samples = full ? 10000 : 2000;
      o.window_radius = full ? (c[0] == 3 ? 30.0 : 12.0) : (c[0] == 3 ? 10.0 : 6.0);
      if (!full && c[1] == 8) continue;
      add(test_stable_scaling(o));
    }
  }
  if (want("liouville")) {
    LiouvilleOptions o;
    o.seed = s.seed;
    o.threads = s.threads;
    if (!full) {
      o.window_radius = 12.0;
      o.box_halfwidth = 3.0;
      o.points = 20000;
    }
    add(test_liouville(o));
    if (full) {
      o.d = 4;
      o.window_radius = 10.0;
      o.box_halfwidth = 2.0;
      add(test_liouville(o));
    }
  }
  if (want("stable_marriage")) {
    StableMarriageOptions o;
    o.seed = s.seed;
    if (!full) {
      o.configs = 3;
      o.resolutions = {8, 16};
    }
    add(test_stable_marriage(o));
  }
  if (want("fairness")) {
    FairnessOptions o;
    o.seed = s.seed;
    o.threads = s.threads;
    if (!full) {
      o.window_radius = 10.0;
      o.configs = 2;
      o.samples_per_config = 20000;
      o.boundary_distance = 3.0;
      o.mean_tolerance = 0.05;
    }
    add(test_fairness(o));
  }
  if (want("diameter_tail") || want("crossing_tail")) {
    AllocationTailOptions o;
    o.seed = s.seed;
    o.threads = s.threads;
    if (!full) {
      o.window_radius = 12.0;
      o.r_grid = {0.5, 1.0, 2.0, 2.5};
      o.configs = 10;
      o.far.order = 4;
    }
    const auto t0 = Clock::now();
    const auto t = run_allocation_tails(o, want("diameter_tail"), want("crossing_tail"));
    const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
    for (const auto& [name, tail] : {std::pair{"diameter_tail", &t.diameter}, std::pair{"crossing_tail", &t.crossing}}) {
      if (!want(name)) continue;
      TestReport r = check_tail_shape(name, *tail);
      r.seconds = secs;
      add(r);
    }
  }
  if (want("partial_potential_tail")) {
    const auto t0 = Clock::now();
    PartialTailOptions o;
    o.seed = s.seed;
    o.threads = s.threads;
    if (!full) {
      o.outer = 4.0;
      o.samples = 2000;
    }
    const auto tails = estimate_partial_potential_tail(o);
    const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
    for (const auto& t : tails) {
      TestReport r = check_tail_shape("partial_potential_tail[" + t.quantity + "]", t);
      r.seconds = secs / 3.0;
      add(r);
    }
  }
  return out;
}

bool suite_passed(const std::vector<TestReport>& reports) {
  return std::all_of(reports.begin(), reports.end(), [](const TestReport& r) { return r.acceptable(); });
}

void write_summary_csv(const std::vector<TestReport>& reports, std::ostream& out) {
  out << "name,status,statistic,threshold,direction,seed,seconds\n";
  for (const auto& r : reports) {
    out << '"' << r.name << "\"," << to_string(r.status) << ',' << format_real(r.statistic) << ','
        << format_real(r.threshold) << ',' << r.direction << ',' << r.seed << ',' << format_real(r.seconds) << '\n';
  }
}

}  // namespace gravalloc
