#include "gravalloc/flow.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "gravalloc/serialization.hpp"

namespace gravalloc {

void FlowOptions::validate() const {
  if (!(rel_tol > 0.0) || !(abs_tol > 0.0)) throw ValidationError("flow tolerances must be positive");
  if (!(max_time > 0.0)) throw ValidationError("max_time must be positive");
  if (!(dominance_factor >= 2.0)) throw ValidationError("dominance_factor must be at least 2");
  if (!(hard_radius >= 0.0)) throw ValidationError("hard_radius must be non-negative");
  if (max_steps < 1) throw ValidationError("max_steps must be at least 1");
  if (!std::isfinite(window_margin)) throw ValidationError("window_margin must be finite");
}

double FlowOptions::margin_for(double truncation_radius) const {
  if (window_margin >= 0.0) return window_margin;
  return std::min(std::max(2.0, 0.1 * truncation_radius), 0.5 * truncation_radius);
}

nlohmann::json to_json(const FlowOptions& o) {
  return {{"rel_tol", o.rel_tol},
          {"abs_tol", o.abs_tol},
          {"max_time", o.max_time},
          {"dominance_factor", o.dominance_factor},
          {"hard_radius", o.hard_radius},
          {"max_steps", o.max_steps},
          {"window_margin", o.window_margin}};
}

FlowOptions flow_options_from_json(const nlohmann::json& j) {
  FlowOptions o;
  o.rel_tol = j.value("rel_tol", o.rel_tol);
  o.abs_tol = j.value("abs_tol", o.abs_tol);
  o.max_time = j.value("max_time", o.max_time);
  o.dominance_factor = j.value("dominance_factor", o.dominance_factor);
  o.hard_radius = j.value("hard_radius", o.hard_radius);
  o.max_steps = j.value("max_steps", o.max_steps);
  o.window_margin = j.value("window_margin", o.window_margin);
  o.validate();
  return o;
}

std::string to_string(Terminal t) {
  switch (t) {
    case Terminal::Captured: return "captured";
    case Terminal::ExitedValidRegion: return "exited_valid_region";
    case Terminal::TimeBudgetExceeded: return "time_budget_exceeded";
    case Terminal::StepFailure: return "step_failure";
  }
  return "unknown";
}

namespace {

// Dormand-Prince 5(4) tableau.
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                 e6 = 22.0 / 525, e7 = -1.0 / 40;

struct StepAbort {
  enum Kind { Domain, Singular, NonFinite } kind;
};

FieldSample eval(const ForceSource& field, const Point& x) {
  FieldSample s;
  try {
    s = field.sample(x);
  } catch (const SingularityError&) {
    throw StepAbort{StepAbort::Singular};
  } catch (const DomainError&) {
    throw StepAbort{StepAbort::Domain};
  }
  if (!s.force.finite()) throw StepAbort{StepAbort::NonFinite};
  return s;
}

/// Capture test at u; returns the remaining analytic time or a negative value.
double capture_time(const ForceSource& field, const FieldSample& s, const Point& u, const FlowOptions& opts) {
  if (s.nearest == kNoStar) return -1.0;
  const int d = u.dim();
  const double r = s.nearest_distance;
  if (r <= opts.hard_radius) return std::pow(r, d) / d;
  if (r > 0.25 * s.second_distance) return -1.0;
  const Vec rest = s.force - star_term(field.config().star(s.nearest), u);
  if (std::pow(r, 1.0 - d) >= opts.dominance_factor * rest.norm()) return std::pow(r, d) / d;
  return -1.0;
}

}  // namespace

FlowTrace integrate_flow(const ForceSource& field, const Point& x0, const FlowOptions& opts) {
  opts.validate();
  if (x0.dim() != field.dim()) throw ValidationError("start point dimension does not match the field");
  if (!x0.finite()) throw ValidationError("start point is not finite");
  const int d = field.dim();
  const Ball& trunc = field.truncation();
  const double valid_radius = trunc.radius - opts.margin_for(trunc.radius);

  FlowTrace tr;
  tr.times.push_back(0.0);
  tr.positions.push_back(x0);
  auto finish = [&](Terminal t, std::string reason = {}) {
    tr.terminal = t;
    tr.reason = std::move(reason);
    return tr;
  };

  FieldSample s;
  try {
    s = field.sample(x0);
  } catch (const SingularityError& e) {
    tr.star = e.star();
    tr.tau = 0.0;
    return finish(Terminal::Captured);
  } catch (const DomainError&) {
    return finish(Terminal::ExitedValidRegion, "start point outside the field's domain");
  }
  if (distance(x0, trunc.center) > valid_radius) {
    return finish(Terminal::ExitedValidRegion, "start point outside the valid region");
  }
  if (!s.force.finite()) return finish(Terminal::StepFailure, "non-finite force");
  if (const double rest = capture_time(field, s, x0, opts); rest >= 0.0) {
    tr.star = s.nearest;
    tr.tau = rest;
    return finish(Terminal::Captured);
  }

  double t = 0.0;
  Point y = x0;
  auto clearance_step = [&](const FieldSample& fs) {
    const double clear = std::min(fs.nearest_distance, fs.second_distance);
    const double speed = fs.force.norm();
    if (!std::isfinite(clear) || speed == 0.0) return std::numeric_limits<double>::infinity();
    return 0.1 * clear / speed;
  };
  double h = std::min(opts.max_time, 0.2 * clearance_step(s));
  if (!std::isfinite(h)) h = 0.01 * opts.max_time;

  Vec k1 = s.force;
  bool just_rejected = false;
  while (true) {
    if (tr.steps + tr.rejected >= opts.max_steps) {
      tr.end_time = t;
      return finish(Terminal::StepFailure, "step budget exhausted");
    }
    h = std::min({h, opts.max_time - t, clearance_step(s)});
    if (h <= 1e-15 * std::max(1.0, t)) {
      tr.end_time = t;
      return finish(Terminal::StepFailure, "step size underflow");
    }
    Point ynew(d);
    FieldSample s7;
    double err = 0.0;
    try {
      const Vec k2 = eval(field, y + h * (a21 * k1)).force;
      const Vec k3 = eval(field, y + h * (a31 * k1 + a32 * k2)).force;
      const Vec k4 = eval(field, y + h * (a41 * k1 + a42 * k2 + a43 * k3)).force;
      const Vec k5 = eval(field, y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4)).force;
      const Vec k6 = eval(field, y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5)).force;
      ynew = y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
      s7 = eval(field, ynew);
      const Vec e = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * s7.force);
      for (int i = 0; i < d; ++i) {
        const double sc = opts.abs_tol + opts.rel_tol * std::max(std::fabs(y[i]), std::fabs(ynew[i]));
        err = std::max(err, std::fabs(e[i]) / sc);
      }
    } catch (const StepAbort& a) {
      if (a.kind == StepAbort::Domain && h <= 1e-12 * std::max(1.0, t)) {
        tr.end_time = t;
        return finish(Terminal::ExitedValidRegion, "stage point left the truncation ball");
      }
      ++tr.rejected;
      just_rejected = true;
      h *= 0.25;
      continue;
    }
    if (!std::isfinite(err)) {
      ++tr.rejected;
      just_rejected = true;
      h *= 0.25;
      continue;
    }
    if (err > 1.0) {
      ++tr.rejected;
      just_rejected = true;
      h *= std::max(0.2, 0.9 * std::pow(err, -0.2));
      continue;
    }

    t += h;
    y = ynew;
    s = s7;
    k1 = s.force;
    ++tr.steps;
    if (opts.record_trace || tr.times.size() < 2) {
      tr.times.push_back(t);
      tr.positions.push_back(y);
    } else {
      tr.times.back() = t;
      tr.positions.back() = y;
    }
    tr.end_time = t;

    if (distance(y, trunc.center) > valid_radius) return finish(Terminal::ExitedValidRegion, "left the valid region");
    if (const double rest = capture_time(field, s, y, opts); rest >= 0.0) {
      tr.star = s.nearest;
      tr.tau = t + rest;
      return finish(Terminal::Captured);
    }
    if (t >= opts.max_time) return finish(Terminal::TimeBudgetExceeded, "time budget exhausted");

    const double grow = just_rejected ? 1.0 : 5.0;
    just_rejected = false;
    h *= err == 0.0 ? grow : std::min(grow, std::max(0.2, 0.9 * std::pow(err, -0.2)));
  }
}

Basin basin_of(const ForceSource& field, const Point& x0, FlowOptions opts) {
  opts.record_trace = false;
  const FlowTrace tr = integrate_flow(field, x0, opts);
  Basin b;
  b.terminal = tr.terminal;
  b.star = tr.terminal == Terminal::Captured ? tr.star : kNoStar;
  b.tau = tr.tau;
  b.reason = tr.terminal == Terminal::Captured ? std::string{} : to_string(tr.terminal) + ": " + tr.reason;
  return b;
}

std::optional<double> flow_time(const FlowTrace& trace) {
  if (trace.terminal != Terminal::Captured) return std::nullopt;
  return trace.tau;
}

void write_trace_csv(const FlowTrace& trace, std::ostream& out) {
  const int d = trace.positions.empty() ? 0 : trace.positions.front().dim();
  out << "t";
  for (int k = 1; k <= d; ++k) out << ",x" << k;
  out << '\n';
  for (std::size_t i = 0; i < trace.times.size(); ++i) {
    out << format_real(trace.times[i]);
    for (int k = 0; k < d; ++k) out << ',' << format_real(trace.positions[i][k]);
    out << '\n';
  }
}

nlohmann::json trace_terminal_json(const FlowTrace& trace) {
  nlohmann::json j;
  j["terminal"] = to_string(trace.terminal);
  if (trace.terminal == Terminal::Captured) {
    j["star"] = trace.star;
    j["tau"] = trace.tau;
  } else {
    j["star"] = nullptr;
    j["tau"] = nullptr;
  }
  j["end_time"] = trace.end_time;
  j["steps"] = trace.steps;
  j["rejected"] = trace.rejected;
  j["reason"] = trace.reason;
  if (!trace.positions.empty()) {
    j["start"] = to_json(trace.positions.front());
    j["end"] = to_json(trace.positions.back());
  }
  return j;
}

}  // namespace gravalloc
