#include <cmath>
#include <cstring>
#include <vector>

#include "doctest.h"
#include "hybstab/flow.hpp"
#include "test_support.hpp"

using namespace hybstab;

namespace {

// apex (max x) of an arc, refined as the zero of the velocity component
std::vector<double> arc_apexes(const HybridTrajectory& traj) {
  std::vector<double> out;
  for (const auto& seg : traj.segments) {
    const auto* arc = std::get_if<SmoothArc>(&seg);
    if (!arc) continue;
    double best = -1e300;
    for (const DenseStep& step : arc->steps) {
      for (int i = 0; i <= 16; ++i) {
        const double t = step.t0 + (step.t1 - step.t0) * i / 16.0;
        double lo = t, hi = std::min(step.t1, step.t0 + (step.t1 - step.t0) * (i + 1) / 16.0);
        const double va = step.eval(lo).y, vb = step.eval(hi).y;
        if (va > 0 && vb < 0) {
          for (int it = 0; it < 60; ++it) {
            const double mid = 0.5 * (lo + hi);
            (step.eval(mid).y > 0 ? lo : hi) = mid;
          }
          best = std::max(best, step.eval(0.5 * (lo + hi)).x);
        }
        best = std::max(best, step.eval(t).x);
      }
    }
    out.push_back(best);
  }
  return out;
}

double pinball_energy(const Vec2& q) {
  return 0.5 * q.y * q.y - 9.8 * (std::sqrt(1.0 + q.x * q.x) - 1.0);
}

}  // namespace

TEST_CASE("integrate_smooth: constant gravity arc hits the ground") {
  const HybridSystemDef ball = load_file(config_path("bouncing_ball.json"));
  const auto [arc, hit] =
      integrate_smooth(ball.fields[0], {1.0, 0.0}, 10.0, ball, IntegratorOptions::from(ball.tol));
  REQUIRE(hit.has_value());
  CHECK(hit->manifold == 0);
  CHECK(hit->t == doctest::Approx(std::sqrt(2.0 / 9.8)).epsilon(1e-9));
  CHECK(hit->point.y == doctest::Approx(-std::sqrt(2.0 * 9.8)).epsilon(1e-9));
  CHECK(std::fabs(ball.manifolds[0].h_at(hit->point)) <= ball.tol.event_tol);
}

TEST_CASE("integrate_smooth: harmonic circle closes") {
  const HybridSystemDef sys = load_file(config_path("harmonic_circle.json"));
  const double two_pi = 6.283185307179586;
  const auto [arc, hit] =
      integrate_smooth(sys.fields[0], {1.0, 0.0}, two_pi, sys, IntegratorOptions::from(sys.tol));
  CHECK(!hit.has_value());
  CHECK((arc.last() - Vec2{1.0, 0.0}).norm() <= 1e-6);
}

TEST_CASE("integrate_smooth: pinball above separatrix energy reaches the wall") {
  const HybridSystemDef pin = load_file(config_path("pinball.json"));
  const auto [arc, hit] =
      integrate_smooth(pin.fields[0], {0.0, 2.9}, 10.0, pin, IntegratorOptions::from(pin.tol));
  REQUIRE(hit.has_value());
  CHECK(hit->manifold == 0);  // right wall
  CHECK(hit->point.x == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(hit->point.y > 0.0);
}

TEST_CASE("flow_hybrid: bouncing ball apex heights follow the rho^2 law") {
  const HybridSystemDef ball = load_file(config_path("bouncing_ball.json"));
  FlowOptions opts = FlowOptions::from(ball.tol);
  const HybridTrajectory traj = flow_hybrid(ball, {1.0, 0.0}, 20.0, 4, opts);
  CHECK(traj.jump_count == 4);
  const auto apexes = arc_apexes(traj);
  REQUIRE(apexes.size() >= 4);
  CHECK(apexes[0] == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(apexes[1] == doctest::Approx(0.25).epsilon(1e-7));
  CHECK(apexes[2] == doctest::Approx(0.0625).epsilon(1e-7));
  CHECK(apexes[3] == doctest::Approx(0.015625).epsilon(1e-7));
  // impact speeds decrease monotonically
  double prev = 1e300;
  for (const auto& seg : traj.segments) {
    if (const auto* ev = std::get_if<JumpEvent>(&seg)) {
      CHECK(std::fabs(ev->pre.y) < prev);
      prev = std::fabs(ev->pre.y);
      CHECK(ev->h_pre <= ball.tol.event_tol);
      CHECK(ev->cls.kind == BoundaryEventClass::Kind::JumpCrossing);
    }
  }
}

TEST_CASE("flow_hybrid: ball at rest terminates immediately") {
  const HybridSystemDef ball = load_file(config_path("bouncing_ball.json"));
  const HybridTrajectory traj =
      flow_hybrid(ball, {0.0, 0.0}, 10.0, 100, FlowOptions::from(ball.tol));
  CHECK(traj.termination == Termination::EquilibriumApproach);
  CHECK(traj.t_end == 0.0);
}

TEST_CASE("flow_hybrid: pinball arcs conserve energy") {
  const HybridSystemDef pin = load_file(config_path("pinball.json"));
  FlowOptions opts = FlowOptions::from(pin.tol);
  opts.stop_on_singular = false;
  const HybridTrajectory traj = flow_hybrid(pin, {0.0, 0.5}, 20.0, 100, opts);
  CHECK(traj.termination == Termination::TimeLimit);
  for (const auto& seg : traj.segments) {
    const auto* arc = std::get_if<SmoothArc>(&seg);
    if (!arc || arc->steps.empty()) continue;
    const double e0 = pinball_energy(arc->first());
    for (const DenseStep& s : arc->steps) {
      const double drift = std::fabs(pinball_energy(s.eval(s.t1)) - e0);
      CHECK(drift <= 1e-6 * std::max(1.0, s.t1 - arc->t_begin));
    }
  }
}

TEST_CASE("flow_hybrid: seamless identity crossing matches the smooth solution") {
  // same field on both sides of y = 0 with the identity jump
  const HybridSystemDef hybrid = load_system(R"json({
    "manifolds": [{"name": "axis", "h": "y", "jump": ["x", "y"]}],
    "fields": [{"signs": [0], "f": ["y", "-x"]}]
  })json");
  const HybridSystemDef smooth = load_file(config_path("harmonic_circle.json"));
  const double two_pi = 6.283185307179586;
  const HybridTrajectory htraj =
      flow_hybrid(hybrid, {1.0, 0.5}, two_pi, 50, FlowOptions::from(hybrid.tol));
  CHECK(htraj.jump_count >= 2);
  const auto [ref, hit] = integrate_smooth(smooth.fields[0], {1.0, 0.5}, two_pi, smooth,
                                           IntegratorOptions::from(smooth.tol));
  HybridTrajectory rtraj;
  rtraj.segments.push_back(ref);
  const double tol = 10.0 * hybrid.tol.rel_tol;
  for (const auto& seg : htraj.segments) {
    const auto* arc = std::get_if<SmoothArc>(&seg);
    if (!arc) continue;
    for (const DenseStep& s : arc->steps) {
      const Vec2 a = s.y1;
      const Vec2 b = trajectory_state_at(rtraj, s.t1);
      CHECK((a - b).norm() <= tol * (1.0 + a.norm()));
    }
  }
}

TEST_CASE("flow_hybrid is deterministic") {
  const HybridSystemDef ball = load_file(config_path("bouncing_ball.json"));
  const FlowOptions opts = FlowOptions::from(ball.tol);
  const HybridTrajectory a = flow_hybrid(ball, {1.0, 0.0}, 20.0, 6, opts);
  const HybridTrajectory b = flow_hybrid(ball, {1.0, 0.0}, 20.0, 6, opts);
  REQUIRE(a.segments.size() == b.segments.size());
  for (std::size_t i = 0; i < a.segments.size(); ++i) {
    const auto* arc_a = std::get_if<SmoothArc>(&a.segments[i]);
    if (!arc_a) {
      const auto& ja = std::get<JumpEvent>(a.segments[i]);
      const auto& jb = std::get<JumpEvent>(b.segments[i]);
      CHECK(std::memcmp(&ja.t, &jb.t, sizeof ja.t) == 0);
      CHECK(ja.pre.x == jb.pre.x);
      CHECK(ja.pre.y == jb.pre.y);
      continue;
    }
    const auto* arc_b = std::get_if<SmoothArc>(&b.segments[i]);
    REQUIRE(arc_b);
    REQUIRE(arc_a->steps.size() == arc_b->steps.size());
    for (std::size_t k = 0; k < arc_a->steps.size(); ++k) {
      CHECK(arc_a->steps[k].t1 == arc_b->steps[k].t1);
      CHECK(arc_a->steps[k].y1.x == arc_b->steps[k].y1.x);
      CHECK(arc_a->steps[k].y1.y == arc_b->steps[k].y1.y);
    }
  }
}

TEST_CASE("section_hits: one positive hit per revolution of the circle") {
  const HybridSystemDef sys = load_file(config_path("harmonic_circle.json"));
  const double two_pi = 6.283185307179586;
  const auto [arc, hit] = integrate_smooth(sys.fields[0], {1.0, 0.0}, 3.0 * two_pi, sys,
                                           IntegratorOptions::from(sys.tol));
  HybridTrajectory traj;
  traj.segments.push_back(arc);
  const SectionDef section = make_section({0.0, 0.0}, {1.0, 0.0}, 2.0);
  const auto hits = section_hits(traj, section);
  REQUIRE(hits.size() == 3);
  for (std::size_t k = 0; k < hits.size(); ++k) {
    CHECK(hits[k].s == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(hits[k].t == doctest::Approx(two_pi * (k + 1)).epsilon(1e-7));
    CHECK(hits[k].orientation == 1);
  }
}

TEST_CASE("section_hits: empty when the section is out of reach") {
  const HybridSystemDef sys = load_file(config_path("harmonic_circle.json"));
  const auto [arc, hit] =
      integrate_smooth(sys.fields[0], {1.0, 0.0}, 10.0, sys, IntegratorOptions::from(sys.tol));
  HybridTrajectory traj;
  traj.segments.push_back(arc);
  const SectionDef far = make_section({5.0, 0.0}, {0.0, 1.0}, 1.0);
  CHECK(section_hits(traj, far).empty());
}

TEST_CASE("flow_hybrid: regular-tangential loop passes its corners") {
  const HybridSystemDef rt = load_file(config_path("regular_tangential.json"));
  FlowOptions opts = FlowOptions::from(rt.tol);
  opts.stop_on_singular = false;
  // start inside the loop on the section used by the probe
  const HybridTrajectory traj = flow_hybrid(rt, {0.5, 0.125 - 0.05}, 30.0, 40, opts);
  CHECK(traj.termination == Termination::TimeLimit);
  CHECK(traj.jump_count >= 10);
  // early crossings happen away from the corners and must be transversal;
  // later ones hug the polycycle within lie_tol of the tangency points
  int seen = 0;
  for (const auto& seg : traj.segments) {
    if (const auto* ev = std::get_if<JumpEvent>(&seg)) {
      if (seen < 3) CHECK(ev->cls.kind == BoundaryEventClass::Kind::JumpCrossing);
      ++seen;
    }
  }
}
