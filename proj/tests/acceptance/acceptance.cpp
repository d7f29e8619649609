#include <algorithm>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "gravalloc/serialization.hpp"
#include "gravalloc/validation.hpp"

using namespace gravalloc;
using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

constexpr std::uint64_t kSeed = 20240601;

struct Criterion {
  std::string name;
  std::function<std::vector<TestReport>()> run;
};

struct Settings {
  int threads = 0;
  std::size_t fairness_samples = 50'000;
};

std::vector<Criterion> criteria(const Settings& s) {
  std::vector<Criterion> out;

  out.push_back({"fairness", [s] {
                   FairnessOptions o;
                   o.d = 3;
                   o.window_radius = 20.0;
                   o.configs = 20;
                   o.samples_per_config = s.fairness_samples;
                   o.boundary_distance = 5.0;
                   o.mean_tolerance = 0.02;
                   o.far.order = 5;
                   o.threads = s.threads;
                   o.seed = kSeed;
                   return std::vector{test_fairness(o)};
                 }});

  out.push_back({"liouville", [s] {
                   std::vector<TestReport> r;
                   LiouvilleOptions o;
                   o.d = 3;
                   o.window_radius = 20.0;
                   o.box_halfwidth = 5.0;
                   o.points = 100'000;
                   o.tolerance = 0.05;
                   o.threads = s.threads;
                   o.seed = kSeed;
                   r.push_back(test_liouville(o));
                   o.d = 4;
                   o.window_radius = 10.0;
                   o.box_halfwidth = 2.0;
                   r.push_back(test_liouville(o));
                   return r;
                 }});

  out.push_back({"gradient_consistency", [] { return std::vector{test_gradient_consistency(100, kSeed, 1e-6)}; }});

  out.push_back({"shell_theorem", [] { return std::vector{test_shell_theorem(10'000'000, kSeed)}; }});

  out.push_back({"flux_identity", [] { return std::vector{test_flux_identity(50, kSeed, 1e-3)}; }});

  out.push_back({"stable_scaling", [] {
                   std::vector<TestReport> r;
                   const int combos[][2] = {{3, 2}, {3, 8}, {4, 2}};
                   for (const auto& c : combos) {
                     StableScalingOptions o;
                     o.d = c[0];
                     o.n = c[1];
                     o.samples = 10'000;
                     o.window_radius = c[0] == 3 ? 30.0 : 12.0;
                     o.p_threshold = 0.01;
                     o.seed = kSeed;
                     r.push_back(test_stable_scaling(o));
                   }
                   return r;
                 }});

  out.push_back({"capture_asymptotics", [] {
                   return std::vector{test_capture_asymptotics(3, 13, kSeed, 0.05),
                                      test_capture_asymptotics(4, 9, kSeed, 0.05),
                                      test_capture_asymptotics(5, 7, kSeed, 0.05)};
                 }});

  out.push_back({"deterministic_battery", [] {
                   std::vector<TestReport> r;
                   r.push_back(test_poisson_tails());
                   r.push_back(test_hadamard_variant(20, 10'000, kSeed));
                   InverseDistanceOptions io;
                   io.seed = kSeed;
                   r.push_back(test_inverse_distance_sum(io));
                   const JointDensityOptions combos[] = {{3, 1, 0.5, 10.0, 1000, kSeed},
                                                         {3, 2, 0.5, 10.0, 1000, kSeed},
                                                         {3, 3, 0.5, 10.0, 1000, kSeed},
                                                         {4, 3, 0.5, 10.0, 1000, kSeed},
                                                         {5, 5, 0.4, 10.0, 1000, kSeed}};
                   for (const auto& o : combos) r.push_back(test_joint_density_core(o));
                   return r;
                 }});

  out.push_back({"stable_marriage", [] {
                   StableMarriageOptions o;
                   o.configs = 10;
                   o.resolutions = {8, 16, 32};
                   o.seed = kSeed;
                   return std::vector{test_stable_marriage(o)};
                 }});

  out.push_back({"tails", [s] {
                   std::vector<TestReport> r;
                   AllocationTailOptions o;
                   o.d = 3;
                   o.window_radius = 20.0;
                   o.r_grid = {1.0, 2.0, 3.0, 4.0};
                   o.configs = 200;
                   o.far.order = 4;
                   o.threads = s.threads;
                   o.seed = kSeed;
                   const AllocationTails t = estimate_allocation_tails(o);
                   r.push_back(check_tail_shape("diameter_tail", t.diameter));
                   r.push_back(check_tail_shape("crossing_tail", t.crossing));
                   PartialTailOptions po;
                   po.d = 5;
                   po.inner = 2.0;
                   po.outer = 10.0;
                   po.samples = 2000;
                   po.seed = kSeed;
                   po.threads = s.threads;
                   for (const auto& pt : estimate_partial_potential_tail(po)) {
                     r.push_back(check_tail_shape("partial_potential_tail[" + pt.quantity + "]", pt));
                   }
                   return r;
                 }});

  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gravalloc acceptance criteria"};
  Settings s;
  std::vector<std::string> only;
  std::string report_path;
  bool list = false;
  app.add_option("--only", only, "criteria to run (default: all)")->delimiter(',');
  app.add_option("--threads", s.threads, "worker threads (0: GRAVALLOC_THREADS or all cores)");
  app.add_option("--fairness-samples", s.fairness_samples, "flow samples per fairness configuration");
  app.add_option("--report", report_path, "write all reports as JSON");
  app.add_flag("--list", list, "list criterion names");
  CLI11_PARSE(app, argc, argv);

  const auto all = criteria(s);
  if (list) {
    for (const auto& c : all) std::cout << c.name << '\n';
    return 0;
  }
  for (const auto& n : only) {
    if (std::none_of(all.begin(), all.end(), [&](const Criterion& c) { return c.name == n; })) {
      std::cerr << "unknown criterion: " << n << '\n';
      return 2;
    }
  }

  bool ok = true;
  json reports = json::object();
  for (const auto& c : all) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.name) == only.end()) continue;
    const auto t0 = Clock::now();
    std::vector<TestReport> rs;
    std::string error;
    try {
      rs = c.run();
    } catch (const std::exception& e) {
      error = e.what();
    }
    const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
    const bool pass = error.empty() && !rs.empty() && suite_passed(rs);
    ok = ok && pass;
    std::cout << (pass ? "PASS " : "FAIL ") << c.name << " seconds=" << format_real(secs);
    for (const auto& r : rs) {
      std::cout << " | " << r.name << ' ' << to_string(r.status) << ' ' << format_real(r.statistic) << ' '
                << r.direction << ' ' << format_real(r.threshold);
    }
    if (!error.empty()) std::cout << " | error: " << error;
    std::cout << std::endl;
    json arr = json::array();
    for (const auto& r : rs) arr.push_back(to_json(r));
    reports[c.name] = {{"pass", pass}, {"seconds", secs}, {"reports", arr}, {"error", error}};
  }
  if (!report_path.empty()) write_json_file(reports, report_path);
  return ok ? 0 : 1;
}
