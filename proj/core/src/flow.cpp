#include "hybstab/flow.hpp"

#include <algorithm>
#include <cmath>

namespace hybstab {

const char* termination_name(Termination t) {
  switch (t) {
    case Termination::TimeLimit:
      return "TimeLimit";
    case Termination::JumpLimit:
      return "JumpLimit";
    case Termination::NonRegularHit:
      return "NonRegularHit";
    case Termination::SingularEvent:
      return "SingularEvent";
    case Termination::EquilibriumApproach:
      return "EquilibriumApproach";
    case Termination::StepFailure:
      return "StepFailure";
  }
  return "?";
}

void IntegratorOptions::validate() const {
  if (!(rel_tol > 0 && abs_tol > 0 && event_tol > 0))
    throw SchemaError("integrator tolerances must be positive");
  if (!(0 < h_min && h_min <= h_init && h_init <= h_max))
    throw SchemaError("step bounds must satisfy 0 < h_min <= h_init <= h_max");
  if (max_steps <= 0) throw SchemaError("max_steps must be positive");
}

IntegratorOptions IntegratorOptions::from(const Tolerances& t) {
  IntegratorOptions o;
  o.rel_tol = t.rel_tol;
  o.abs_tol = t.abs_tol;
  o.h_init = t.h_init;
  o.h_min = t.h_min;
  o.h_max = t.h_max;
  o.event_tol = t.event_tol;
  o.max_steps = static_cast<long>(t.max_steps);
  return o;
}

// ---------------------------------------------------------------------------
// Dormand-Prince 5(4) with the classical 4th-order dense interpolant
// ---------------------------------------------------------------------------

namespace {

constexpr double A21 = 1.0 / 5;
constexpr double A31 = 3.0 / 40, A32 = 9.0 / 40;
constexpr double A41 = 44.0 / 45, A42 = -56.0 / 15, A43 = 32.0 / 9;
constexpr double A51 = 19372.0 / 6561, A52 = -25360.0 / 2187, A53 = 64448.0 / 6561,
                 A54 = -212.0 / 729;
constexpr double A61 = 9017.0 / 3168, A62 = -355.0 / 33, A63 = 46732.0 / 5247, A64 = 49.0 / 176,
                 A65 = -5103.0 / 18656;
constexpr double B1 = 35.0 / 384, B3 = 500.0 / 1113, B4 = 125.0 / 192, B5 = -2187.0 / 6784,
                 B6 = 11.0 / 84;
constexpr double E1 = 71.0 / 57600, E3 = -71.0 / 16695, E4 = 71.0 / 1920, E5 = -17253.0 / 339200,
                 E6 = 22.0 / 525, E7 = -1.0 / 40;
constexpr double D1 = -12715105075.0 / 11282082432.0;
constexpr double D3 = 87487479700.0 / 32700410799.0;
constexpr double D4 = -10690763975.0 / 1880347072.0;
constexpr double D5 = 701980252875.0 / 199316789632.0;
constexpr double D6 = -1453857185.0 / 822651844.0;
constexpr double D7 = 69997945.0 / 29380423.0;

constexpr int kSubSamples = 8;  // dense sub-sampling per step for sign scans

struct StageSet {
  Vec2 k1, k2, k3, k4, k5, k6, k7;
};

DenseStep make_dense(double t0, double h, const Vec2& y0, const Vec2& y1, const StageSet& k) {
  DenseStep d;
  d.t0 = t0;
  d.width = h;
  d.t1 = t0 + h;
  d.y0 = y0;
  d.y1 = y1;
  const Vec2 dy = y1 - y0;
  d.rcont[0] = y0;
  d.rcont[1] = dy;
  d.rcont[2] = h * k.k1 - dy;
  d.rcont[3] = dy - h * k.k7 - d.rcont[2];
  d.rcont[4] = h * (D1 * k.k1 + D3 * k.k3 + D4 * k.k4 + D5 * k.k5 + D6 * k.k6 + D7 * k.k7);
  return d;
}

}  // namespace

Vec2 DenseStep::eval(double t) const {
  const double th = (t - t0) / width;
  const double th1 = 1.0 - th;
  return rcont[0] + th * (rcont[1] + th1 * (rcont[2] + th * (rcont[3] + th1 * rcont[4])));
}

Vec2 DenseStep::deriv(double t) const {
  const double th = (t - t0) / width;
  const Vec2 d = rcont[1] + (1.0 - 2.0 * th) * rcont[2] + th * (2.0 - 3.0 * th) * rcont[3] +
                 2.0 * th * (1.0 - th) * (1.0 - 2.0 * th) * rcont[4];
  return d / width;
}

const SmoothArc* HybridTrajectory::last_arc() const {
  for (auto it = segments.rbegin(); it != segments.rend(); ++it)
    if (const auto* arc = std::get_if<SmoothArc>(&*it)) return arc;
  return nullptr;
}

Vec2 HybridTrajectory::final_state() const {
  if (segments.empty()) return {};
  if (const auto* arc = std::get_if<SmoothArc>(&segments.back())) return arc->last();
  return std::get<JumpEvent>(segments.back()).post;
}

// ---------------------------------------------------------------------------
// event scanning over one dense step
// ---------------------------------------------------------------------------

namespace {

struct Crossing {
  double theta = 0.0;
  double t = 0.0;
  Vec2 point;
  int sign_before = 0;
};

template <typename Fn>
Crossing refine_crossing(const Fn& g_of, const DenseStep& step, double th_lo, double th_hi,
                         double g_lo) {
  double lo = th_lo, hi = th_hi, glo = g_lo;
  for (int it = 0; it < 80; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double gm = g_of(step.eval(step.t0 + mid * step.width));
    if (glo * gm <= 0.0)
      hi = mid;
    else {
      lo = mid;
      glo = gm;
    }
  }
  Crossing c;
  c.theta = hi;
  c.t = step.t0 + hi * step.width;
  c.point = step.eval(c.t);
  c.sign_before = glo > 0 ? 1 : -1;
  return c;
}

// Walk kSubSamples dense samples of one step over [0, theta_max] and hand
// every armed sign change to `on_crossing` (which may stop the scan by
// returning false). Returns the updated armed state.
template <typename Fn, typename OnCrossing>
bool scan_step(const Fn& g_of, const DenseStep& step, double theta_max, bool armed,
               double arm_threshold, const OnCrossing& on_crossing) {
  double th_prev = 0.0;
  double g_prev = g_of(step.eval(step.t0));
  for (int i = 1; i <= kSubSamples; ++i) {
    const double th = std::min(theta_max, static_cast<double>(i) / kSubSamples);
    if (th <= th_prev) break;
    const double g = g_of(step.eval(step.t0 + th * step.width));
    if (!armed && std::fabs(g_prev) > arm_threshold) armed = true;
    if (armed && (g_prev * g < 0.0 || (g == 0.0 && g_prev != 0.0))) {
      if (!on_crossing(refine_crossing(g_of, step, th_prev, th, g_prev))) return armed;
    }
    if (!armed && std::fabs(g) > arm_threshold) armed = true;
    g_prev = g;
    th_prev = th;
    if (th >= theta_max) break;
  }
  return armed;
}

struct ArcOutcome {
  SmoothArc arc;
  std::optional<BoundaryHit> hit;
  std::vector<SectionHit> section_hits;
  std::optional<SectionHit> stop_hit;
  enum class Why { Boundary, TimeLimit, Equilibrium, StepFailure, SectionStop } why = Why::TimeLimit;
  std::string detail;
};

class ArcIntegrator {
 public:
  ArcIntegrator(const HybridSystemDef& sys, const FieldDef& field, const IntegratorOptions& opts)
      : sys_(sys), field_(field), opts_(opts) {
    opts_.validate();
  }

  ArcOutcome run(const Vec2& x0, double t0, double t_end, const SectionWatch* watch,
                 int* crossings_seen) {
    ArcOutcome out;
    SmoothArc& arc = out.arc;
    arc.t_begin = t0;
    arc.t_end = t0;

    const double arm_manifold = 10.0 * opts_.event_tol;
    std::vector<bool> armed(sys_.manifolds.size());
    for (std::size_t i = 0; i < armed.size(); ++i)
      armed[i] = std::fabs(sys_.manifolds[i].h_at(x0)) > arm_manifold;

    const Vec2 watch_normal =
        watch ? Vec2{watch->direction.y, -watch->direction.x} : Vec2{0.0, 0.0};
    auto sigma = [&](const Vec2& q) { return dot(q - watch->base, watch_normal); };
    const double arm_section =
        watch ? std::max(10.0 * opts_.event_tol, watch->arm_distance) : 0.0;
    bool section_armed = watch && std::fabs(sigma(x0)) > arm_section;

    Vec2 y = x0;
    double t = t0;
    double h = std::clamp(opts_.h_init, opts_.h_min, opts_.h_max);
    Vec2 k1;
    bool have_k1 = false;

    for (long step_count = 0; step_count < opts_.max_steps; ++step_count) {
      if (t >= t_end) {
        out.why = ArcOutcome::Why::TimeLimit;
        return out;
      }
      if (field_.eval(y).norm() < sys_.tol.field_tol) {
        out.why = ArcOutcome::Why::Equilibrium;
        return out;
      }
      h = std::min(h, t_end - t);

      StageSet k;
      Vec2 y1;
      double err = 0.0;
      bool stage_ok = true;
      std::string stage_err;
      try {
        if (!have_k1) {
          k1 = field_.eval(y);
          have_k1 = true;
        }
        k.k1 = k1;
        k.k2 = field_.eval(y + h * (A21 * k.k1));
        k.k3 = field_.eval(y + h * (A31 * k.k1 + A32 * k.k2));
        k.k4 = field_.eval(y + h * (A41 * k.k1 + A42 * k.k2 + A43 * k.k3));
        k.k5 = field_.eval(y + h * (A51 * k.k1 + A52 * k.k2 + A53 * k.k3 + A54 * k.k4));
        k.k6 = field_.eval(y + h * (A61 * k.k1 + A62 * k.k2 + A63 * k.k3 + A64 * k.k4 + A65 * k.k5));
        y1 = y + h * (B1 * k.k1 + B3 * k.k3 + B4 * k.k4 + B5 * k.k5 + B6 * k.k6);
        k.k7 = field_.eval(y1);
        const Vec2 e = h * (E1 * k.k1 + E3 * k.k3 + E4 * k.k4 + E5 * k.k5 + E6 * k.k6 + E7 * k.k7);
        const double scx = opts_.abs_tol + opts_.rel_tol * std::max(std::fabs(y.x), std::fabs(y1.x));
        const double scy = opts_.abs_tol + opts_.rel_tol * std::max(std::fabs(y.y), std::fabs(y1.y));
        err = std::sqrt(0.5 * ((e.x / scx) * (e.x / scx) + (e.y / scy) * (e.y / scy)));
      } catch (const EvalError& e) {
        stage_ok = false;
        stage_err = e.what();
      }

      if (!stage_ok || !(err <= 1.0)) {
        if (h <= opts_.h_min * (1.0 + 1e-12)) {
          out.why = ArcOutcome::Why::StepFailure;
          out.detail = stage_ok ? "error estimate exceeds tolerance at h_min" : stage_err;
          return out;
        }
        const double fac =
            stage_ok && std::isfinite(err) ? std::max(0.2, 0.9 * std::pow(err, -0.2)) : 0.25;
        h = std::max(opts_.h_min, h * std::min(fac, 0.5));
        continue;
      }

      DenseStep step = make_dense(t, h, y, y1, k);

      // earliest armed manifold crossing
      std::optional<Crossing> best;
      std::size_t best_manifold = 0;
      for (std::size_t i = 0; i < sys_.manifolds.size(); ++i) {
        const ManifoldDef& m = sys_.manifolds[i];
        auto g_of = [&](const Vec2& q) { return m.h_at(q); };
        std::optional<Crossing> c;
        scan_step(g_of, step, 1.0, armed[i], arm_manifold, [&](const Crossing& cr) {
          c = cr;
          return false;  // first crossing of this manifold is enough
        });
        if (c && (!best || c->t < best->t)) {
          best = c;
          best_manifold = i;
        }
      }
      const double theta_cut = best ? best->theta : 1.0;

      // section hits before the manifold event
      if (watch) {
        bool stopped = false;
        section_armed = scan_step(
            sigma, step, theta_cut, section_armed, arm_section, [&](const Crossing& cr) {
              SectionHit hit;
              hit.t = cr.t;
              hit.point = cr.point;
              hit.s = dot(cr.point - watch->base, watch->direction);
              hit.orientation = dot(step.deriv(cr.t), watch_normal) >= 0 ? 1 : -1;
              const bool in_segment =
                  watch->length <= 0.0 || (hit.s >= 0.0 && hit.s <= watch->length);
              if (!in_segment) return true;
              out.section_hits.push_back(hit);
              const bool orient_ok = watch->orientation_filter == 0 ||
                                     hit.orientation == watch->orientation_filter;
              if (!orient_ok) return true;
              ++*crossings_seen;
              if (watch->stop_on_hit && *crossings_seen >= watch->required_crossings) {
                step.t1 = cr.t;
                step.y1 = cr.point;
                out.stop_hit = hit;
                stopped = true;
                return false;
              }
              return true;
            });
        if (stopped) {
          arc.steps.push_back(step);
          arc.t_end = step.t1;
          out.why = ArcOutcome::Why::SectionStop;
          return out;
        }
      }

      if (best) {
        // near-simultaneous crossing of a second manifold is non-regular
        bool tie = false;
        for (std::size_t i = 0; i < sys_.manifolds.size(); ++i) {
          if (i == best_manifold) continue;
          const ManifoldDef& m = sys_.manifolds[i];
          auto g_of = [&](const Vec2& q) { return m.h_at(q); };
          scan_step(g_of, step, 1.0, armed[i], arm_manifold, [&](const Crossing& cr) {
            if (std::fabs(cr.t - best->t) < opts_.event_tol) tie = true;
            return false;
          });
        }
        step.t1 = best->t;
        step.y1 = best->point;
        arc.steps.push_back(step);
        arc.t_end = best->t;
        out.why = ArcOutcome::Why::Boundary;
        BoundaryHit hit;
        hit.manifold = best_manifold;
        hit.t = best->t;
        hit.point = best->point;
        hit.side_before = tie ? 0 : best->sign_before;
        if (tie) out.detail = "two manifolds crossed within event_tol of each other";
        out.hit = hit;
        return out;
      }

      // no event: update arming along the whole step
      for (std::size_t i = 0; i < sys_.manifolds.size(); ++i) {
        if (armed[i]) continue;
        const ManifoldDef& m = sys_.manifolds[i];
        for (int s = 0; s <= kSubSamples && !armed[i]; ++s) {
          const double th = static_cast<double>(s) / kSubSamples;
          if (std::fabs(m.h_at(step.eval(step.t0 + th * step.width))) > arm_manifold)
            armed[i] = true;
        }
      }

      arc.steps.push_back(step);
      t = step.t1;
      y = step.y1;
      k1 = k.k7;  // FSAL
      arc.t_end = t;
      const double fac = err <= 1e-30 ? 5.0 : std::clamp(0.9 * std::pow(err, -0.2), 0.2, 5.0);
      h = std::clamp(h * fac, opts_.h_min, opts_.h_max);
    }
    out.why = ArcOutcome::Why::StepFailure;
    out.detail = "max_steps exceeded";
    return out;
  }

 private:
  const HybridSystemDef& sys_;
  const FieldDef& field_;
  IntegratorOptions opts_;
};

}  // namespace

std::pair<SmoothArc, std::optional<BoundaryHit>> integrate_smooth(const FieldDef& field,
                                                                  const Vec2& x0, double t_max,
                                                                  const HybridSystemDef& sys,
                                                                  const IntegratorOptions& opts,
                                                                  double t0) {
  ArcIntegrator integ(sys, field, opts);
  int crossings = 0;
  ArcOutcome out = integ.run(x0, t0, t_max, nullptr, &crossings);
  if (out.why == ArcOutcome::Why::StepFailure)
    throw NumericError("integrate_smooth: " + (out.detail.empty() ? "step failure" : out.detail));
  return {std::move(out.arc), out.hit};
}

// ---------------------------------------------------------------------------
// hybrid flow
// ---------------------------------------------------------------------------

FlowResult flow_with_watch(const HybridSystemDef& sys, const Vec2& x0, double t_max, int max_jumps,
                           const FlowOptions& opts, const std::optional<SectionWatch>& watch_in) {
  FlowResult result;
  HybridTrajectory& traj = result.traj;
  traj.nudge_length = 10.0 * sys.tol.boundary_tol;

  const SectionWatch* watch = watch_in ? &*watch_in : nullptr;
  int crossings_seen = 0;

  Vec2 cur = x0;
  double t = 0.0;
  std::size_t field_index = 0;

  auto finish = [&](Termination term, std::string detail) {
    traj.termination = term;
    traj.termination_detail = std::move(detail);
    traj.t_end = t;
  };

  // Classify a boundary hit, record the jump, resolve the continuation.
  // Returns false when the trajectory ends here.
  auto handle_boundary = [&](const Vec2& p, std::size_t manifold, int side_before) -> bool {
    traj.terminal_hit = BoundaryHit{manifold, t, p, side_before};
    const PointClass pc = classify_point(sys, p);
    if (pc.kind != PointClass::Kind::RegularBoundary || pc.index != manifold) {
      finish(Termination::NonRegularHit,
             pc.kind == PointClass::Kind::NonRegular ? pc.reason : "hit reclassified off-manifold");
      return false;
    }
    BoundaryEventClass cls;
    try {
      cls = classify_boundary_event(sys, p, side_before == 0 ? std::optional<int>{} : side_before);
    } catch (const Error& e) {
      finish(Termination::SingularEvent, std::string("event classification failed: ") + e.what());
      return false;
    }
    JumpEvent ev;
    ev.manifold = manifold;
    ev.t = t;
    ev.pre = p;
    ev.post = pc.image;
    ev.cls = cls;
    ev.h_pre = std::fabs(sys.manifolds[manifold].h_at(p));
    ev.h_post = std::fabs(sys.manifolds[manifold].h_at(pc.image));
    traj.segments.push_back(ev);
    ++traj.jump_count;

    if (cls.kind == BoundaryEventClass::Kind::FieldVanishes) {
      const Vec2 fout = sys.fields[cls.outgoing_field].eval(pc.image);
      finish(fout.norm() < sys.tol.field_tol ? Termination::EquilibriumApproach
                                             : Termination::SingularEvent,
             "field vanishes at the event");
      return false;
    }
    std::optional<Departure> dep;
    std::string dep_error;
    try {
      dep = resolve_departure(sys, manifold, pc.image);
    } catch (const Error& e) {
      dep_error = e.what();
    }
    // a jump fixed point that nothing departs from is the hybrid rest state
    if (!dep && dep_error.empty() && (pc.image - p).norm() <= sys.tol.boundary_tol) {
      finish(Termination::EquilibriumApproach, "jump fixed point with no departing orbit");
      return false;
    }
    if (cls.is_singularity() && opts.stop_on_singular) {
      finish(Termination::SingularEvent, "jump singularity");
      return false;
    }
    if (traj.jump_count >= max_jumps) {
      finish(Termination::JumpLimit, "");
      return false;
    }
    if (!dep_error.empty()) {
      finish(Termination::SingularEvent, "departure resolution failed: " + dep_error);
      return false;
    }
    if (!dep) {
      finish(Termination::SingularEvent, "no orbit departs from the jump image");
      return false;
    }
    const Vec2 fout = sys.fields[dep->field].eval(pc.image);
    const double speed = fout.norm();
    if (speed < sys.tol.field_tol) {
      finish(Termination::EquilibriumApproach, "outgoing field vanishes at the jump image");
      return false;
    }
    // nudge off the manifold along the outgoing direction, advancing time by
    // the matching amount so identity-jump crossings stay seamless in t
    cur = pc.image + (traj.nudge_length / speed) * fout;
    t += traj.nudge_length / speed;
    field_index = dep->field;
    traj.terminal_hit.reset();  // the run continues past this hit
    return true;
  };

  {
    const PointClass pc = classify_point(sys, x0);
    if (pc.kind == PointClass::Kind::NonRegular)
      throw NumericError("flow_hybrid: starting point is non-regular (" + pc.reason + ")");
    if (pc.kind == PointClass::Kind::RegularBoundary) {
      if (!handle_boundary(x0, pc.index, 0)) return result;
    } else {
      field_index = pc.index;
    }
  }

  while (t < t_max) {
    ArcIntegrator integ(sys, sys.fields[field_index], opts.ode);
    ArcOutcome out = integ.run(cur, t, t_max, watch, &crossings_seen);
    out.arc.field = field_index;
    if (!out.arc.steps.empty()) traj.segments.push_back(out.arc);
    t = out.arc.t_end;
    for (const auto& h : out.section_hits) result.hits.push_back(h);

    switch (out.why) {
      case ArcOutcome::Why::TimeLimit:
        finish(Termination::TimeLimit, "");
        return result;
      case ArcOutcome::Why::Equilibrium:
        finish(Termination::EquilibriumApproach, "");
        return result;
      case ArcOutcome::Why::StepFailure:
        finish(Termination::StepFailure, out.detail);
        return result;
      case ArcOutcome::Why::SectionStop:
        result.stop_hit = out.stop_hit;
        finish(Termination::TimeLimit, "stopped at section hit");
        return result;
      case ArcOutcome::Why::Boundary:
        if (out.hit->side_before == 0) {
          traj.terminal_hit = *out.hit;
          finish(Termination::NonRegularHit, out.detail);
          return result;
        }
        if (!handle_boundary(out.hit->point, out.hit->manifold, out.hit->side_before)) return result;
        break;
    }
  }
  finish(Termination::TimeLimit, "");
  return result;
}

HybridTrajectory flow_hybrid(const HybridSystemDef& sys, const Vec2& x0, double t_max,
                             int max_jumps, const FlowOptions& opts) {
  return flow_with_watch(sys, x0, t_max, max_jumps, opts, std::nullopt).traj;
}

// ---------------------------------------------------------------------------
// post-hoc section hits
// ---------------------------------------------------------------------------

Vec2 trajectory_state_at(const HybridTrajectory& traj, double t) {
  const SmoothArc* last = nullptr;
  for (const auto& seg : traj.segments) {
    const auto* arc = std::get_if<SmoothArc>(&seg);
    if (!arc || arc->steps.empty()) continue;
    last = arc;
    if (t < arc->t_begin) return arc->first();
    if (t <= arc->t_end) {
      for (const DenseStep& s : arc->steps)
        if (t <= s.t1) return s.eval(std::max(t, s.t0));
      return arc->last();
    }
  }
  return last ? last->last() : traj.final_state();
}

std::vector<SectionHit> section_hits(const HybridTrajectory& traj, const SectionDef& section) {
  std::vector<SectionHit> hits;
  const Vec2 n = section.normal();
  auto sigma = [&](const Vec2& q) { return dot(q - section.base, n); };
  for (const auto& seg : traj.segments) {
    const auto* arc = std::get_if<SmoothArc>(&seg);
    if (!arc || arc->steps.empty()) continue;
    // launches sitting on the section (up to roundoff) are not crossings
    bool armed = std::fabs(sigma(arc->first())) > 1e-12;
    for (const DenseStep& step : arc->steps) {
      const double theta_end = (step.t1 - step.t0) / step.width;
      armed = scan_step(sigma, step, theta_end, armed, 1e-12, [&](const Crossing& cr) {
        const double s = section.parameter_of(cr.point);
        if (s >= 0.0 && s <= section.length) {
          SectionHit hit;
          hit.s = s;
          hit.t = cr.t;
          hit.point = cr.point;
          hit.orientation = dot(step.deriv(cr.t), n) >= 0 ? 1 : -1;
          hits.push_back(hit);
        }
        return true;
      });
    }
  }
  return hits;
}

}  // namespace hybstab
