#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gravalloc/field.hpp"

namespace gravalloc {

struct FlowOptions {
  double rel_tol = 1e-6;
  double abs_tol = 1e-9;
  double max_time = 50.0;
  double dominance_factor = 8.0;
  double hard_radius = 1e-4;
  std::int64_t max_steps = 1'000'000;
  /// Flows leaving Ball(c, L - margin) are unresolved. Negative selects the default
  /// max(2, 0.1 L), capped at L / 2 for small truncations.
  double window_margin = -1.0;
  /// Keep every accepted step; when false only the start and end are kept.
  bool record_trace = true;

  void validate() const;
  double margin_for(double truncation_radius) const;
};

nlohmann::json to_json(const FlowOptions& o);
FlowOptions flow_options_from_json(const nlohmann::json& j);

enum class Terminal { Captured, ExitedValidRegion, TimeBudgetExceeded, StepFailure };
std::string to_string(Terminal t);

struct FlowTrace {
  std::vector<double> times;
  std::vector<Point> positions;
  Terminal terminal = Terminal::StepFailure;
  std::size_t star = kNoStar;  ///< captured star (config index)
  double tau = 0.0;            ///< capture time, including the analytic completion
  double end_time = 0.0;       ///< time of the last sample
  std::int64_t steps = 0;
  std::int64_t rejected = 0;
  std::string reason;
};

/// Integrates dY/dt = F(Y) from x0 with Dormand-Prince 5(4) until capture, exit
/// from the valid ball, the time budget or a step failure.
///
/// Capture at position u by its nearest star z: |u - z| <= hard_radius, or
/// |u - z|^{1-d} >= dominance_factor * |F(u) - (z - u)/|z - u|^d| together with
/// |u - z| <= 0.25 * (distance to every other star). The remaining time is
/// completed analytically as |u - z|^d / d.
FlowTrace integrate_flow(const ForceSource& field, const Point& x0, const FlowOptions& opts = {});

struct Basin {
  std::size_t star = kNoStar;
  Terminal terminal = Terminal::StepFailure;
  double tau = 0.0;
  std::string reason;
  bool resolved() const noexcept { return terminal == Terminal::Captured; }
};
Basin basin_of(const ForceSource& field, const Point& x0, FlowOptions opts = {});

std::optional<double> flow_time(const FlowTrace& trace);

/// CSV with header t,x1..xd and one row per sample.
void write_trace_csv(const FlowTrace& trace, std::ostream& out);
/// Terminal record: {terminal, star, tau, end_time, steps, rejected, reason, start, end}.
nlohmann::json trace_terminal_json(const FlowTrace& trace);

}  // namespace gravalloc
