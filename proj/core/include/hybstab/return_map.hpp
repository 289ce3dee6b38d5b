#pragma once

#include <optional>
#include <vector>

#include "hybstab/flow.hpp"

namespace hybstab {

struct ReturnMapOptions {
  int orientation = 0;         // required crossing orientation; 0 accepts both
  int required_crossings = 1;  // which qualifying hit counts as the return
  double t_max = 200.0;
  int max_jumps = 1000;
  FlowOptions flow;
  double departure_radius = -1.0;  // < 0: use 10 * event_tol
  double degenerate_tol = 1e-8;

  static ReturnMapOptions from(const Tolerances& t) {
    ReturnMapOptions o;
    o.flow = FlowOptions::from(t);
    o.flow.stop_on_singular = false;  // return-map runs pass singular corners
    return o;
  }
};

struct ReturnResult {
  double s = 0.0;  // section parameter of the return
  double t = 0.0;  // flight time
  int jumps = 0;
};

/// First return of the orbit launched at section parameter s.
/// Throws NoReturnError when the orbit fails to come back.
ReturnResult return_map(const HybridSystemDef& sys, const SectionDef& section, double s,
                        const ReturnMapOptions& opts);

/// Like return_map but also hands back the full trajectory of the run.
std::pair<ReturnResult, HybridTrajectory> return_map_with_orbit(const HybridSystemDef& sys,
                                                                const SectionDef& section, double s,
                                                                const ReturnMapOptions& opts);

struct ProbePoint {
  double s = 0.0;
  std::optional<double> pi_s;
  double gap = 0.0;  // pi(s) - s when defined
  std::string error;
};

enum class ProbeVerdict { Stable, Unstable, Mixed };
const char* probe_verdict_name(ProbeVerdict v);

struct ProbeResult {
  std::vector<ProbePoint> points;
  ProbeVerdict verdict = ProbeVerdict::Mixed;
  bool degenerate = false;  // all gaps within degenerate_tol of zero
  int failures = 0;
};

/// Empirical verdict: sign of pi(s) - s over a grid.
ProbeResult stability_probe(const HybridSystemDef& sys, const SectionDef& section,
                            const std::vector<double>& grid, const ReturnMapOptions& opts);

struct FixedPointResult {
  double s_star = 0.0;
  double gap = 0.0;  // pi(s*) - s*
  double period_time = 0.0;
  int jumps_per_period = 0;
  bool degenerate = false;
  HybridTrajectory orbit;  // one period from the section point
};

/// Bisection on pi(s) - s over [s_lo, s_hi]. The bracket must change sign,
/// unless both ends are already fixed within degenerate_tol (center-like
/// systems), which returns the midpoint flagged degenerate.
FixedPointResult find_fixed_point(const HybridSystemDef& sys, const SectionDef& section,
                                  double s_lo, double s_hi, double tol,
                                  const ReturnMapOptions& opts);

}  // namespace hybstab
