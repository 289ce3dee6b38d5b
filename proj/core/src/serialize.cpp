#include "hybstab/serialize.hpp"

#include <cstdio>
#include <ostream>

namespace hybstab {

using nlohmann::json;

std::string format_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_trajectory_csv(const HybridTrajectory& traj, std::ostream& out) {
  out << "segment,kind,t,x,y\n";
  std::size_t index = 0;
  for (const auto& seg : traj.segments) {
    if (const auto* arc = std::get_if<SmoothArc>(&seg)) {
      bool first = true;
      for (const DenseStep& s : arc->steps) {
        if (first) {
          out << index << ",arc," << format_g17(s.t0) << ',' << format_g17(s.y0.x) << ','
              << format_g17(s.y0.y) << '\n';
          first = false;
        }
        out << index << ",arc," << format_g17(s.t1) << ',' << format_g17(s.y1.x) << ','
            << format_g17(s.y1.y) << '\n';
      }
    } else {
      const JumpEvent& ev = std::get<JumpEvent>(seg);
      out << index << ",jump_pre," << format_g17(ev.t) << ',' << format_g17(ev.pre.x) << ','
          << format_g17(ev.pre.y) << '\n';
      out << index << ",jump_post," << format_g17(ev.t) << ',' << format_g17(ev.post.x) << ','
          << format_g17(ev.post.y) << '\n';
    }
    ++index;
  }
}

namespace {

json vec_to_json(const Vec2& v) { return json::array({v.x, v.y}); }

json event_class_to_json(const BoundaryEventClass& cls) {
  json j;
  switch (cls.kind) {
    case BoundaryEventClass::Kind::JumpCrossing:
      j["kind"] = "JumpCrossing";
      break;
    case BoundaryEventClass::Kind::JumpSingularity: {
      j["kind"] = "JumpSingularity";
      json reasons = json::array();
      if (cls.tangency_at_p) reasons.push_back("TangencyAtP");
      if (cls.tangency_at_pbar) reasons.push_back("TangencyAtPbar");
      if (cls.not_local_diffeo) reasons.push_back("NotLocalDiffeo");
      j["reasons"] = reasons;
      break;
    }
    case BoundaryEventClass::Kind::FieldVanishes:
      j["kind"] = "FieldVanishes";
      break;
  }
  j["incoming_side"] = cls.incoming_side;
  j["outgoing_side"] = cls.outgoing_side;
  j["lie_in"] = cls.lie_in;
  j["lie_out"] = cls.lie_out;
  j["chart_derivative"] = cls.chart_derivative;
  return j;
}

}  // namespace

json trajectory_to_json(const HybridTrajectory& traj) {
  json segments = json::array();
  for (const auto& seg : traj.segments) {
    if (const auto* arc = std::get_if<SmoothArc>(&seg)) {
      json samples = json::array();
      bool first = true;
      for (const DenseStep& s : arc->steps) {
        if (first) {
          samples.push_back(json::array({s.t0, s.y0.x, s.y0.y}));
          first = false;
        }
        samples.push_back(json::array({s.t1, s.y1.x, s.y1.y}));
      }
      segments.push_back(
          {{"type", "arc"}, {"field", arc->field}, {"samples", std::move(samples)}});
    } else {
      const JumpEvent& ev = std::get<JumpEvent>(seg);
      segments.push_back({{"type", "jump"},
                          {"manifold", ev.manifold},
                          {"t", ev.t},
                          {"pre", vec_to_json(ev.pre)},
                          {"post", vec_to_json(ev.post)},
                          {"event", event_class_to_json(ev.cls)},
                          {"h_pre", ev.h_pre},
                          {"h_post", ev.h_post}});
    }
  }
  json out{{"segments", std::move(segments)},
           {"termination", termination_name(traj.termination)},
           {"termination_detail", traj.termination_detail},
           {"t_end", traj.t_end},
           {"jump_count", traj.jump_count},
           {"nudge_length", traj.nudge_length}};
  if (traj.terminal_hit) {
    out["terminal_hit"] = {{"manifold", traj.terminal_hit->manifold},
                           {"t", traj.terminal_hit->t},
                           {"point", vec_to_json(traj.terminal_hit->point)}};
  }
  return out;
}

json report_to_json(const SingularityReport& rep) {
  json j;
  const bool saddle = rep.kind == SingularityReport::Kind::HyperbolicSaddle;
  j["kind"] = saddle ? "HyperbolicSaddle" : "JumpSingularity";
  j["p"] = vec_to_json(rep.location);
  j["p_bar"] = vec_to_json(rep.image);
  j["nu"] = saddle ? json(rep.nu) : json();
  j["lambda"] = saddle ? json(rep.lambda) : json();
  j["n_s"] = saddle ? json() : json(rep.n_s);
  j["n_u"] = saddle ? json() : json(rep.n_u);
  j["k0"] = (!saddle && rep.power_order) ? json(*rep.power_order) : json();
  j["a_k0"] = (!saddle && rep.power_order) ? json(rep.leading_coeff) : json();
  j["ratio"] = rep.ratio_is_infinite || rep.ratio_indeterminate ? json() : json(rep.ratio);
  j["ratio_is_infinite"] = rep.ratio_is_infinite;
  j["diagnostics"] = rep.diagnostics;
  return j;
}

json verdict_to_json(const StabilityVerdict& v) {
  json connections = json::array();
  for (const auto& c : v.connections) {
    connections.push_back({{"edge", c.edge},
                           {"residual", c.residual},
                           {"pass", c.pass},
                           {"crossings", c.crossings},
                           {"note", c.note}});
  }
  json reports = json::array();
  for (const auto& r : v.reports) reports.push_back(report_to_json(r));
  json j;
  j["r"] = v.r.infinite ? json() : json(v.r.value);
  j["r_is_infinite"] = v.r.infinite;
  j["verdict"] = verdict_name(v.verdict);
  if (!v.inconclusive_reason.empty()) j["inconclusive_reason"] = v.inconclusive_reason;
  j["singularities"] = std::move(reports);
  j["connections"] = std::move(connections);
  return j;
}

void write_probe_csv(const ProbeResult& probe, std::ostream& out) {
  out << "s,pi_s,gap\n";
  for (const ProbePoint& pt : probe.points) {
    out << format_g17(pt.s) << ',';
    if (pt.pi_s)
      out << format_g17(*pt.pi_s) << ',' << format_g17(pt.gap);
    else
      out << "nan,nan";
    out << '\n';
  }
}

json probe_to_json(const ProbeResult& probe) {
  json points = json::array();
  for (const ProbePoint& pt : probe.points) {
    json p{{"s", pt.s}};
    if (pt.pi_s) {
      p["pi_s"] = *pt.pi_s;
      p["gap"] = pt.gap;
    } else {
      p["error"] = pt.error;
    }
    points.push_back(std::move(p));
  }
  return json{{"points", std::move(points)},
              {"verdict", probe_verdict_name(probe.verdict)},
              {"degenerate", probe.degenerate},
              {"failures", probe.failures}};
}

json fixed_point_to_json(const FixedPointResult& fp) {
  return json{{"s_star", fp.s_star},
              {"gap", fp.gap},
              {"period_time", fp.period_time},
              {"jumps_per_period", fp.jumps_per_period},
              {"degenerate", fp.degenerate}};
}

}  // namespace hybstab
