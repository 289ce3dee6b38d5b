#pragma once

#include <optional>
#include <variant>
#include <vector>

#include "hybstab/system.hpp"

namespace hybstab {

enum class Termination {
  TimeLimit,
  JumpLimit,
  NonRegularHit,
  SingularEvent,
  EquilibriumApproach,
  StepFailure,
};

const char* termination_name(Termination t);

struct IntegratorOptions {
  double rel_tol = 1e-10;
  double abs_tol = 1e-12;
  double h_init = 1e-3;
  double h_min = 1e-14;
  double h_max = 0.5;
  double event_tol = 1e-11;
  long max_steps = 1'000'000;

  void validate() const;
  static IntegratorOptions from(const Tolerances& t);
};

struct FlowOptions {
  IntegratorOptions ode;
  bool stop_on_singular = true;

  static FlowOptions from(const Tolerances& t) {
    FlowOptions o;
    o.ode = IntegratorOptions::from(t);
    return o;
  }
};

/// One accepted Dormand-Prince step with its 4th-order dense interpolant.
struct DenseStep {
  double t0 = 0.0;
  double width = 0.0;  // step size the interpolant was built on
  double t1 = 0.0;     // end of the valid range; < t0 + width after truncation
  Vec2 y0, y1;
  std::array<Vec2, 5> rcont;

  Vec2 eval(double t) const;
  Vec2 deriv(double t) const;  // time derivative of the interpolant
};

struct SmoothArc {
  std::size_t field = 0;
  double t_begin = 0.0;
  double t_end = 0.0;
  std::vector<DenseStep> steps;

  Vec2 first() const { return steps.empty() ? Vec2{} : steps.front().y0; }
  Vec2 last() const { return steps.empty() ? Vec2{} : steps.back().y1; }
};

struct JumpEvent {
  std::size_t manifold = 0;
  double t = 0.0;
  Vec2 pre, post;
  BoundaryEventClass cls;
  double h_pre = 0.0;   // |h| residual at the refined pre point
  double h_post = 0.0;  // |h| at the jump image
};

using TrajectorySegment = std::variant<SmoothArc, JumpEvent>;

struct BoundaryHit {
  std::size_t manifold = 0;
  double t = 0.0;
  Vec2 point;
  int side_before = 0;  // sign of h on the arc just before the hit
};

struct HybridTrajectory {
  std::vector<TrajectorySegment> segments;
  Termination termination = Termination::TimeLimit;
  std::string termination_detail;
  double t_end = 0.0;
  int jump_count = 0;
  double nudge_length = 0.0;  // post-jump offset along the outgoing field
  std::optional<BoundaryHit> terminal_hit;  // boundary point the run ended on, if any

  const SmoothArc* last_arc() const;
  Vec2 final_state() const;
};

/// Integrate one smooth arc until t_max or the first sign change of some
/// h_i, refined on the dense output to |h| <= event_tol.
std::pair<SmoothArc, std::optional<BoundaryHit>> integrate_smooth(const FieldDef& field,
                                                                  const Vec2& x0, double t_max,
                                                                  const HybridSystemDef& sys,
                                                                  const IntegratorOptions& opts,
                                                                  double t0 = 0.0);

/// Full hybrid orbit: smooth arcs alternating with jumps.
HybridTrajectory flow_hybrid(const HybridSystemDef& sys, const Vec2& x0, double t_max,
                             int max_jumps, const FlowOptions& opts);

struct SectionHit {
  double s = 0.0;  // section parameter in [0, length]
  double t = 0.0;
  int orientation = 0;  // sign of <velocity, section normal>
  Vec2 point;
};

/// All crossings of the section segment by the trajectory's arcs, refined
/// on the stored dense output.
std::vector<SectionHit> section_hits(const HybridTrajectory& traj, const SectionDef& section);

/// Dense-output state at time t (clamped to the trajectory's range).
Vec2 trajectory_state_at(const HybridTrajectory& traj, double t);

/// Online section watcher for return-map style runs. `length <= 0` watches
/// the whole line. Detection arms only once the orbit has moved
/// `arm_distance` away from the section, so launches from the section
/// itself do not self-trigger.
struct SectionWatch {
  Vec2 base;
  Vec2 direction;  // unit
  double length = -1.0;
  int orientation_filter = 0;  // 0 = accept both
  bool stop_on_hit = false;
  int required_crossings = 1;  // stop at the n-th qualifying hit
  double arm_distance = 0.0;
};

struct FlowResult {
  HybridTrajectory traj;
  std::vector<SectionHit> hits;        // all in-segment hits, in time order
  std::optional<SectionHit> stop_hit;  // the hit that ended the run, if any
};

FlowResult flow_with_watch(const HybridSystemDef& sys, const Vec2& x0, double t_max, int max_jumps,
                           const FlowOptions& opts, const std::optional<SectionWatch>& watch);

}  // namespace hybstab
