#include "hybstab/return_map.hpp"

#include <cmath>

namespace hybstab {

const char* probe_verdict_name(ProbeVerdict v) {
  switch (v) {
    case ProbeVerdict::Stable:
      return "Stable";
    case ProbeVerdict::Unstable:
      return "Unstable";
    case ProbeVerdict::Mixed:
      return "Mixed";
  }
  return "?";
}

namespace {

// Transversality of the section to the flow, checked at the base point and
// falling back to the midpoint when the base sits on an equilibrium (the
// shipped pinball sections are anchored at the saddle).
void check_section(const HybridSystemDef& sys, const SectionDef& section) {
  if (!(section.length > 0.0)) throw SchemaError("section length must be positive");
  const Vec2 n = section.normal();
  for (const Vec2 q : {section.base, section.at(0.5 * section.length)}) {
    try {
      const std::size_t fi = region_of(sys, q);
      const Vec2 f = sys.fields[fi].eval(q);
      if (f.norm() <= sys.tol.field_tol) continue;  // equilibrium: try the other probe point
      if (std::fabs(dot(f, n)) <= sys.tol.field_tol)
        throw NumericError("section is not transversal to the flow");
      return;
    } catch (const NumericError&) {
      continue;  // base on a manifold or unmatched region: try the midpoint
    }
  }
  throw NumericError("section transversality could not be established");
}

}  // namespace

std::pair<ReturnResult, HybridTrajectory> return_map_with_orbit(const HybridSystemDef& sys,
                                                                const SectionDef& section, double s,
                                                                const ReturnMapOptions& opts) {
  if (!(s > 0.0 && s < section.length))
    throw SchemaError("return_map: s must lie strictly inside (0, length)");
  check_section(sys, section);

  SectionWatch watch;
  watch.base = section.base;
  watch.direction = section.direction;
  watch.length = section.length;
  watch.orientation_filter = opts.orientation;
  watch.stop_on_hit = true;
  watch.required_crossings = std::max(1, opts.required_crossings);
  watch.arm_distance =
      opts.departure_radius >= 0.0 ? opts.departure_radius : 10.0 * opts.flow.ode.event_tol;

  const FlowResult res =
      flow_with_watch(sys, section.at(s), opts.t_max, opts.max_jumps, opts.flow, watch);
  if (!res.stop_hit) {
    throw NoReturnError(std::string("no return to the section (") +
                        termination_name(res.traj.termination) +
                        (res.traj.termination_detail.empty() ? "" : ": " + res.traj.termination_detail) +
                        ")");
  }
  ReturnResult out;
  out.s = res.stop_hit->s;
  out.t = res.stop_hit->t;
  out.jumps = res.traj.jump_count;
  return {out, res.traj};
}

ReturnResult return_map(const HybridSystemDef& sys, const SectionDef& section, double s,
                        const ReturnMapOptions& opts) {
  return return_map_with_orbit(sys, section, s, opts).first;
}

ProbeResult stability_probe(const HybridSystemDef& sys, const SectionDef& section,
                            const std::vector<double>& grid, const ReturnMapOptions& opts) {
  if (grid.empty()) throw SchemaError("stability_probe: empty grid");
  for (std::size_t i = 1; i < grid.size(); ++i)
    if (!(grid[i - 1] < grid[i])) throw SchemaError("stability_probe: grid must be ascending");

  ProbeResult out;
  bool all_neg = true, all_pos = true, all_small = true;
  for (double s : grid) {
    ProbePoint pt;
    pt.s = s;
    try {
      const ReturnResult r = return_map(sys, section, s, opts);
      pt.pi_s = r.s;
      pt.gap = r.s - s;
      all_neg = all_neg && pt.gap < 0.0;
      all_pos = all_pos && pt.gap > 0.0;
      all_small = all_small && std::fabs(pt.gap) <= opts.degenerate_tol;
    } catch (const NoReturnError& e) {
      pt.error = e.what();
      ++out.failures;
    }
    out.points.push_back(std::move(pt));
  }
  if (out.failures == static_cast<int>(grid.size()))
    throw NoReturnError("stability_probe: every grid point failed to return");

  const int ok = static_cast<int>(grid.size()) - out.failures;
  if (ok > 0 && all_small) {
    out.degenerate = true;
    out.verdict = ProbeVerdict::Mixed;
  } else if (ok > 0 && all_neg) {
    out.verdict = ProbeVerdict::Stable;
  } else if (ok > 0 && all_pos) {
    out.verdict = ProbeVerdict::Unstable;
  } else {
    out.verdict = ProbeVerdict::Mixed;
  }
  return out;
}

FixedPointResult find_fixed_point(const HybridSystemDef& sys, const SectionDef& section,
                                  double s_lo, double s_hi, double tol,
                                  const ReturnMapOptions& opts) {
  if (!(s_lo < s_hi)) throw SchemaError("find_fixed_point: need s_lo < s_hi");
  if (!(tol > 0.0)) throw SchemaError("find_fixed_point: tol must be positive");

  // gap evaluation with up-to-3 deterministic retries on NoReturn
  auto gap_at = [&](double s) -> std::pair<double, double> {  // (s used, gap)
    const double w = s_hi - s_lo;
    const double trials[4] = {s, s + w / 64.0, s - w / 64.0, s + w / 32.0};
    std::string last;
    for (double c : trials) {
      if (!(c > 0.0 && c < section.length)) continue;
      try {
        return {c, return_map(sys, section, c, opts).s - c};
      } catch (const NoReturnError& e) {
        last = e.what();
      }
    }
    throw NoReturnError("find_fixed_point: no return near s = " + std::to_string(s) +
                        (last.empty() ? "" : " (" + last + ")"));
  };

  auto [lo, g_lo] = gap_at(s_lo);
  auto [hi, g_hi] = gap_at(s_hi);

  FixedPointResult out;
  if (std::fabs(g_lo) <= opts.degenerate_tol && std::fabs(g_hi) <= opts.degenerate_tol) {
    // center-like: every point is (nearly) fixed
    out.degenerate = true;
    out.s_star = 0.5 * (lo + hi);
  } else {
    if (g_lo == 0.0) {
      out.s_star = lo;
    } else if (g_hi == 0.0) {
      out.s_star = hi;
    } else {
      if ((g_lo > 0.0) == (g_hi > 0.0))
        throw NumericError("find_fixed_point: bracket does not straddle a sign change of pi(s) - s");
      while (hi - lo > tol) {
        const auto [mid, g_mid] = gap_at(0.5 * (lo + hi));
        if (!(mid > lo && mid < hi)) break;  // retry landed outside; accept current bracket
        if ((g_mid > 0.0) == (g_lo > 0.0)) {
          lo = mid;
          g_lo = g_mid;
        } else {
          hi = mid;
          g_hi = g_mid;
        }
      }
      out.s_star = 0.5 * (lo + hi);
    }
  }

  auto [final_res, orbit] = return_map_with_orbit(sys, section, out.s_star, opts);
  out.gap = final_res.s - out.s_star;
  out.period_time = final_res.t;
  out.jumps_per_period = final_res.jumps;
  out.orbit = std::move(orbit);
  return out;
}

}  // namespace hybstab
