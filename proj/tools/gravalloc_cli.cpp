#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "gravalloc/allocation.hpp"
#include "gravalloc/errors.hpp"
#include "gravalloc/far_field.hpp"
#include "gravalloc/field.hpp"
#include "gravalloc/flow.hpp"
#include "gravalloc/geometry.hpp"
#include "gravalloc/serialization.hpp"
#include "gravalloc/validation.hpp"

namespace fs = std::filesystem;
using namespace gravalloc;
using nlohmann::json;

namespace {

enum Exit { kOk = 0, kInternal = 1, kValidation = 2, kPartialDomain = 3, kSuiteFailure = 4 };

struct Common {
  std::string config_file;
  std::string stars_file;
  std::uint64_t seed = 1;
  int dim = 3;
  double window_radius = 10.0;
  std::string out_dir = ".";
  int threads = 0;
};

struct FieldFlags {
  bool hierarchical = false;
  bool no_compensation = false;
  int order = 0;
  FlowOptions flow;
};

void add_common(CLI::App* sub, Common& c, bool with_stars = true) {
  sub->add_option("--config", c.config_file, "JSON file of option values (keys are long flag names)");
  if (with_stars) sub->add_option("--stars", c.stars_file, "star configuration JSON (default: sample one)");
  sub->add_option("--seed", c.seed, "random seed");
  sub->add_option("--dim", c.dim, "dimension d >= 3")->check(CLI::Range(3, kMaxDim));
  sub->add_option("--window-radius", c.window_radius, "sampling window B(0, L) radius");
  sub->add_option("--out-dir", c.out_dir, "output directory");
  sub->add_option("--threads", c.threads, "worker threads (0: GRAVALLOC_THREADS or all cores)");
}

void add_field_flags(CLI::App* sub, FieldFlags& f) {
  sub->add_flag("--hierarchical", f.hierarchical, "use the hierarchical far-field approximation");
  sub->add_flag("--no-compensation", f.no_compensation, "drop the kappa_d (x - c) compensation term");
  sub->add_option("--order", f.order, "Chebyshev order of the far field (0: default)");
  sub->add_option("--rel-tol", f.flow.rel_tol, "flow relative tolerance");
  sub->add_option("--abs-tol", f.flow.abs_tol, "flow absolute tolerance");
  sub->add_option("--max-time", f.flow.max_time, "flow time budget");
  sub->add_option("--dominance-factor", f.flow.dominance_factor, "capture dominance factor");
  sub->add_option("--hard-radius", f.flow.hard_radius, "unconditional capture radius");
  sub->add_option("--window-margin", f.flow.window_margin, "valid-region margin (negative: default)");
}

std::string json_scalar_to_arg(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  return v.dump();
}

/// Fills options not given on the command line from the --config JSON object.
void apply_config_file(CLI::App* sub, const std::string& path) {
  const json j = read_json_file(path);
  if (!j.is_object()) throw ValidationError("config file must hold a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (key == "command" || key == "config") continue;
    CLI::Option* opt = nullptr;
    try {
      opt = sub->get_option("--" + key);
    } catch (const CLI::OptionNotFound&) {
      throw ValidationError("unknown key in config file: " + key);
    }
    if (opt->count() > 0 || (value.is_array() && value.empty())) continue;
    if (value.is_array()) {
      for (const auto& v : value) opt->add_result(json_scalar_to_arg(v));
    } else {
      opt->add_result(json_scalar_to_arg(value));
    }
    opt->run_callback();
  }
}

/// Resolved option values of a subcommand, loadable again through --config.
json run_config_json(CLI::App* sub) {
  json j;
  j["command"] = sub->get_name();
  for (const CLI::Option* opt : sub->get_options()) {
    const std::string name = opt->get_single_name();
    if (name.empty() || name == "help" || name == "config") continue;
    if (opt->get_expected_min() == 0) {
      j[name] = opt->count() > 0 && opt->as<bool>();
      continue;
    }
    std::vector<std::string> vals = opt->results();
    if (vals.empty()) {
      std::string d = opt->get_default_str();
      if (d == "{}" || d == "[]") {
        j[name] = json::array();
        continue;
      }
      if (d.empty()) continue;
      if (d.front() == '[' && d.back() == ']') d = d.substr(1, d.size() - 2);
      std::stringstream ss(d);
      for (std::string item; std::getline(ss, item, ',');) vals.push_back(item);
    }
    auto typed = [](const std::string& s) -> json {
      try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos == s.size()) return json::parse(s, nullptr, false).is_discarded() ? json(v) : json::parse(s);
      } catch (const std::exception&) {
      }
      return s;
    };
    if (opt->get_expected_max() > 1) {
      json arr = json::array();
      for (const auto& v : vals) arr.push_back(typed(v));
      j[name] = arr;
    } else if (!vals.empty()) {
      j[name] = typed(vals.back());
    }
  }
  return j;
}

fs::path prepare_out_dir(const Common& c, CLI::App* sub) {
  const fs::path dir(c.out_dir);
  fs::create_directories(dir);
  write_json_file(run_config_json(sub), dir / "run_config.json");
  return dir;
}

StarConfig load_or_sample(const Common& c) {
  if (!c.stars_file.empty()) return load_config(c.stars_file);
  if (!(c.window_radius > 0.0)) throw ValidationError("window radius must be positive");
  return sample_poisson(c.dim, Ball{Point::zeros(c.dim), c.window_radius}, 1.0, c.seed);
}

struct Field {
  std::shared_ptr<FieldModel> model;
  std::shared_ptr<HierarchicalField> hier;
  const ForceSource& source() const { return hier ? static_cast<const ForceSource&>(*hier) : *model; }
};

Field make_field(StarConfig cfg, const FieldFlags& f, const Common& c, const Region& prepare) {
  Field out;
  out.model = std::make_shared<FieldModel>(std::move(cfg), !f.no_compensation);
  if (f.hierarchical) {
    FarFieldOptions far;
    far.order = f.order;
    far.threads = c.threads;
    out.hier = std::make_shared<HierarchicalField>(out.model, far);
    out.hier->prepare(prepare);
  }
  return out;
}

Point parse_point(const std::vector<double>& v, int d, const std::string& what) {
  if (static_cast<int>(v.size()) != d) throw ValidationError(what + " needs exactly d coordinates");
  Point p(d);
  for (int k = 0; k < d; ++k) p[k] = v[k];
  return p;
}

template <class Fn>
void write_file(const fs::path& path, Fn&& fn) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  fn(out);
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

void write_tail_json(const TailEstimate& t, const fs::path& path) { write_json_file(to_json(t), path); }

}  // namespace


int main(int argc, char** argv) {
  CLI::App app{"gravalloc: gravitational allocation simulator and verification toolkit"};
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();
  app.footer(
      "Exit codes: 0 success, 1 internal error, 2 validation error, 3 partial-domain error, "
      "4 test-suite failure.\nGRAVALLOC_THREADS sets the default worker count.");

  Common c;
  FieldFlags ff;
  std::map<CLI::App*, std::function<int()>> actions;

  // ------------------------------------------------------------ sample
  auto* sample = app.add_subcommand("sample", "sample a Poisson star configuration in B(0, L)");
  add_common(sample, c, false);
  double intensity = 1.0;
  sample->add_option("--intensity", intensity, "Poisson intensity");
  actions[sample] = [&] {
    if (!(c.window_radius > 0.0)) throw ValidationError("window radius must be positive");
    const StarConfig cfg = sample_poisson(c.dim, Ball{Point::zeros(c.dim), c.window_radius}, intensity, c.seed);
    const fs::path dir = prepare_out_dir(c, sample);
    save_config(cfg, dir / "config.json");
    std::cout << cfg.size() << " stars\n";
    return kOk;
  };

  // ------------------------------------------------------------ field
  auto* field = app.add_subcommand("field", "evaluate F (and optionally F(x|A), U(x|A)) at query points");
  add_common(field, c);
  add_field_flags(field, ff);
  std::string points_file;
  std::vector<double> annulus;
  field->add_option("--points", points_file, "CSV of query points, d columns (required)");
  field->add_option("--partial", annulus, "inner,outer: report F(x|A) and U(x|A) for A = B(0,outer) minus B(0,inner)")
      ->expected(2)
      ->delimiter(',');
  actions[field] = [&] {
    if (points_file.empty()) throw ValidationError("--points is required");
    const StarConfig cfg = load_or_sample(c);
    const int d = cfg.dim();
    const auto pts = read_points_csv(points_file, d);
    const fs::path dir = prepare_out_dir(c, field);
    double reach = 1.0;
    for (const auto& p : pts) reach = std::max(reach, p.norm_inf() + 0.5);
    const Field f = make_field(cfg, ff, c, Box{Point::zeros(d), reach});
    std::optional<Region> a;
    if (!annulus.empty()) {
      if (annulus[0] > 0.0) {
        a = Annulus{Point::zeros(d), annulus[0], annulus[1]};
      } else {
        a = Ball{Point::zeros(d), annulus[1]};
      }
    }
    bool flagged = false;
    write_file(dir / "field.csv", [&](std::ostream& out) {
      for (int k = 1; k <= d; ++k) out << 'x' << k << ',';
      for (int k = 1; k <= d; ++k) out << 'F' << k << ',';
      if (a) out << "U,";
      out << "status\n";
      for (const auto& x : pts) {
        std::string status = "ok";
        std::vector<double> row;
        for (int k = 0; k < d; ++k) row.push_back(x[k]);
        Vec force(d);
        double u = std::nan("");
        try {
          force = a ? f.model->force_partial(x, *a) : f.source().sample(x).force;
          if (a) u = f.model->potential_partial(x, *a);
        } catch (const SingularityError&) {
          status = "singular";
        } catch (const DomainError&) {
          status = "outside";
        }
        if (status != "ok") {
          flagged = true;
          for (int k = 0; k < d; ++k) force[k] = std::nan("");
        }
        for (int k = 0; k < d; ++k) row.push_back(force[k]);
        if (a) row.push_back(u);
        out << format_row(row) << ',' << status << '\n';
      }
    });
    return flagged ? kPartialDomain : kOk;
  };

  // ------------------------------------------------------------ flow
  auto* flow = app.add_subcommand("flow", "integrate one gravitational flow curve");
  add_common(flow, c);
  add_field_flags(flow, ff);
  std::vector<double> start;
  flow->add_option("--start", start, "start point x1,...,xd (required)")->delimiter(',');
  actions[flow] = [&] {
    const StarConfig cfg = load_or_sample(c);
    const int d = cfg.dim();
    const Point x0 = parse_point(start, d, "--start");
    const fs::path dir = prepare_out_dir(c, flow);
    const Field f = make_field(cfg, ff, c, Box{Point::zeros(d), x0.norm_inf() + 2.0});
    FlowOptions fo = ff.flow;
    fo.record_trace = true;
    const FlowTrace tr = integrate_flow(f.source(), x0, fo);
    write_file(dir / "trace.csv", [&](std::ostream& out) { write_trace_csv(tr, out); });
    write_json_file(trace_terminal_json(tr), dir / "trace.json");
    std::cout << to_string(tr.terminal);
    if (tr.terminal == Terminal::Captured) std::cout << " star " << tr.star << " tau " << format_real(tr.tau);
    std::cout << '\n';
    return kOk;
  };

  // ------------------------------------------------------------ allocate
  auto* allocate = app.add_subcommand("allocate", "allocation map of a grid over Q(0, h)");
  add_common(allocate, c);
  add_field_flags(allocate, ff);
  double halfwidth = 2.0;
  int resolution = 16;
  std::string method = "gravity";
  std::vector<int> slice_axes{0, 1};
  allocate->add_option("--halfwidth", halfwidth, "grid box half-width h");
  allocate->add_option("--resolution", resolution, "cells per axis");
  allocate->add_option("--method", method, "gravity or stable-marriage")
      ->check(CLI::IsMember({"gravity", "stable-marriage"}));
  allocate->add_option("--slice-axes", slice_axes, "two axes of the exported slice through the origin")
      ->expected(2)
      ->delimiter(',');
  actions[allocate] = [&] {
    const StarConfig cfg = load_or_sample(c);
    const int d = cfg.dim();
    const GridSpec grid{Box{Point::zeros(d), halfwidth}, resolution};
    grid.validate();
    for (int ax : slice_axes) {
      if (ax < 0 || ax >= d) throw ValidationError("slice axis out of range");
    }
    if (slice_axes[0] == slice_axes[1]) throw ValidationError("slice axes must differ");
    const fs::path dir = prepare_out_dir(c, allocate);
    AllocationMap map;
    if (method == "gravity") {
      const Field f = make_field(cfg, ff, c, Box{Point::zeros(d), halfwidth + 1.0});
      map = allocate_grid(f.source(), grid, ff.flow, c.threads);
    } else {
      map = stable_marriage_allocate(cfg, grid);
    }
    write_file(dir / "map.csv", [&](std::ostream& out) { write_map_csv(map, out); });
    write_json_file(map_header_json(map), dir / "map.json");
    write_file(dir / "slice.csv",
               [&](std::ostream& out) { write_slice_csv(map, slice_axes[0], slice_axes[1], Point::zeros(d), out); });
    write_file(dir / "volumes.csv", [&](std::ostream& out) {
      out << "star,cells,volume\n";
      std::vector<std::size_t> counts(cfg.size(), 0);
      for (auto o : map.owner)
        if (o >= 0) ++counts[static_cast<std::size_t>(o)];
      for (std::size_t z = 0; z < cfg.size(); ++z) {
        if (counts[z]) out << z << ',' << counts[z] << ',' << format_real(cell_volume(map, z)) << '\n';
      }
    });
    std::cout << "resolved fraction " << format_real(map.resolved_fraction()) << '\n';
    return kOk;
  };

  // ------------------------------------------------------------ tails
  AllocationTailOptions tail_opts;
  auto add_tail_flags = [&](CLI::App* sub) {
    add_common(sub, c, false);
    add_field_flags(sub, ff);
    sub->add_option("--r-grid", tail_opts.r_grid, "thresholds R")->delimiter(',');
    sub->add_option("--configs", tail_opts.configs, "number of seed-pinned configurations");
    sub->add_option("--lattice-spacing", tail_opts.lattice_spacing, "flood-fill lattice spacing");
    sub->add_option("--crossing-seeds", tail_opts.crossing_seeds, "flow seeds per R (0: default budget)");
    sub->add_option("--max-flood-cells", tail_opts.max_flood_cells, "flood-fill cell budget");
  };
  auto tail_setup = [&] {
    tail_opts.d = c.dim;
    tail_opts.window_radius = c.window_radius;
    tail_opts.seed = c.seed;
    tail_opts.threads = c.threads;
    tail_opts.hierarchical = ff.hierarchical;
    tail_opts.far.order = ff.order;
    tail_opts.flow = ff.flow;
  };
  auto* dtail = app.add_subcommand("diameter-tail", "estimate P(X > R) for the allocation diameter X");
  add_tail_flags(dtail);
  actions[dtail] = [&] {
    tail_setup();
    const fs::path dir = prepare_out_dir(c, dtail);
    const TailEstimate t = estimate_diameter_tail(tail_opts);
    write_tail_json(t, dir / "tail.json");
    std::cout << to_json(t)["estimate"].dump() << '\n';
    return kOk;
  };
  auto* ctail = app.add_subcommand("crossing-tail", "estimate the frequency of R-crossings per R");
  add_tail_flags(ctail);
  actions[ctail] = [&] {
    tail_setup();
    const fs::path dir = prepare_out_dir(c, ctail);
    const TailEstimate t = estimate_crossing_tail(tail_opts);
    write_tail_json(t, dir / "tail.json");
    std::cout << to_json(t)["estimate"].dump() << '\n';
    return kOk;
  };

  // ------------------------------------------------------------ crossing
  auto* crossing = app.add_subcommand("crossing", "search one configuration for a flow curve from Q(0,R) to Q(0,2R)");
  add_common(crossing, c);
  add_field_flags(crossing, ff);
  double cross_r = 1.0;
  std::size_t cross_seeds = 0;
  crossing->add_option("-R,--radius", cross_r, "inner cube half-width R");
  crossing->add_option("--seeds", cross_seeds, "flow seeds (0: default budget)");
  actions[crossing] = [&] {
    const StarConfig cfg = load_or_sample(c);
    const int d = cfg.dim();
    const fs::path dir = prepare_out_dir(c, crossing);
    const Field f = make_field(cfg, ff, c, Box{Point::zeros(d), 2.0 * cross_r + 1.0});
    const std::size_t n = cross_seeds ? cross_seeds : default_crossing_seeds(d, cross_r);
    const CrossingResult r = detect_crossing(f.source(), cross_r, n, c.seed, ff.flow);
    json j{{"R", cross_r}, {"crossed", r.crossed}, {"seeds_used", r.seeds_used}, {"seed_budget", n}};
    if (r.witness) {
      j["witness"] = trace_terminal_json(*r.witness);
      write_file(dir / "witness.csv", [&](std::ostream& out) { write_trace_csv(*r.witness, out); });
    }
    write_json_file(j, dir / "crossing.json");
    std::cout << (r.crossed ? "true" : "false") << '\n';
    return kOk;
  };

  // ------------------------------------------------------------ liouville
  auto* liouville = app.add_subcommand("liouville", "fit the survival curve of capture times");
  add_common(liouville, c, false);
  add_field_flags(liouville, ff);
  LiouvilleOptions lo;
  liouville->add_option("--box-halfwidth", lo.box_halfwidth, "sampling box half-width");
  liouville->add_option("--points", lo.points, "number of start points");
  liouville->add_option("--t-grid", lo.t_grid, "fit times")->delimiter(',');
  liouville->add_option("--tolerance", lo.tolerance, "relative tolerance on the rate");
  actions[liouville] = [&] {
    lo.d = c.dim;
    lo.window_radius = c.window_radius;
    lo.seed = c.seed;
    lo.threads = c.threads;
    lo.hierarchical = ff.hierarchical;
    lo.far.order = ff.order;
    lo.flow = ff.flow;
    const fs::path dir = prepare_out_dir(c, liouville);
    const TestReport r = test_liouville(lo);
    write_json_file(to_json(r), dir / "report.json");
    if (r.details.contains("fit")) write_json_file(r.details["fit"], dir / "liouville_fit.json");
    std::cout << r.name << ' ' << to_string(r.status) << ' ' << format_real(r.statistic) << '\n';
    return r.acceptable() ? kOk : kSuiteFailure;
  };

  // ------------------------------------------------------------ partial-tail
  auto* ptail = app.add_subcommand("partial-tail", "tails of |U(0|A)|, |F(0|A)| and |D1F(0|A)| for an annulus A");
  add_common(ptail, c, false);
  PartialTailOptions po;
  ptail->add_option("--inner", po.inner, "inner radius q");
  ptail->add_option("--outer", po.outer, "outer radius p");
  ptail->add_option("--samples", po.samples, "Poisson samples");
  actions[ptail] = [&] {
    po.d = c.dim;
    po.seed = c.seed;
    po.threads = c.threads;
    const fs::path dir = prepare_out_dir(c, ptail);
    json out = json::array();
    int code = kOk;
    for (const auto& t : estimate_partial_potential_tail(po)) {
      write_tail_json(t, dir / ("tail_" + t.quantity + ".json"));
      const TestReport r = check_tail_shape(t.quantity, t);
      std::cout << r.name << ' ' << to_string(r.status) << '\n';
      if (!r.acceptable()) code = kSuiteFailure;
    }
    return code;
  };

  // ------------------------------------------------------------ validate
  auto* validate = app.add_subcommand("validate", "run the validation suite");
  add_common(validate, c, false);
  std::string scale = "quick";
  std::vector<std::string> only;
  validate->add_option("--scale", scale, "quick or full")->check(CLI::IsMember({"quick", "full"}));
  validate->add_option("--only", only, "subset of tests")->delimiter(',')->check(CLI::IsMember(suite_test_names()));
  actions[validate] = [&] {
    const fs::path dir = prepare_out_dir(c, validate);
    SuiteOptions so;
    so.seed = c.seed;
    so.scale = scale == "full" ? Scale::Full : Scale::Quick;
    so.only = only;
    so.threads = c.threads;
    const auto reports = run_suite(so);
    json all = json::array();
    for (const auto& r : reports) {
      all.push_back(to_json(r));
      std::cout << (r.passed() ? "PASS " : r.acceptable() ? "SKIP " : "FAIL ") << r.name << ' '
                << to_string(r.status) << " statistic=" << format_real(r.statistic) << '\n';
    }
    write_json_file(all, dir / "reports.json");
    write_file(dir / "summary.csv", [&](std::ostream& out) { write_summary_csv(reports, out); });
    return suite_passed(reports) ? kOk : kSuiteFailure;
  };

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kValidation;
  }

  try {
    CLI::App* sub = app.get_subcommands().front();
    if (!c.config_file.empty()) apply_config_file(sub, c.config_file);
    if (c.dim < 3 || c.dim > kMaxDim) throw ValidationError("dimension must be in [3, 8]");
    if (c.threads < 0) throw ValidationError("threads must be non-negative");
    ff.flow.validate();
    return actions.at(sub)();
  } catch (const DomainError& e) {
    std::cerr << "partial-domain error: " << e.what() << '\n';
    return kPartialDomain;
  } catch (const ValidationError& e) {
    std::cerr << "validation error: " << e.what() << '\n';
    return kValidation;
  } catch (const CLI::ParseError& e) {
    std::cerr << "validation error: " << e.what() << '\n';
    return kValidation;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return kInternal;
  }
}
