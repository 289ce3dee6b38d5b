#include "hybstab/polycycle.hpp"

#include <algorithm>
#include <cmath>

#include "hybstab/lie.hpp"
#include "json.hpp"

namespace hybstab {

using nlohmann::json;

const char* verdict_name(Verdict v) {
  switch (v) {
    case Verdict::Stable:
      return "Stable";
    case Verdict::Unstable:
      return "Unstable";
    case Verdict::Inconclusive:
      return "Inconclusive";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// spec loading
// ---------------------------------------------------------------------------

namespace {

Vec2 read_vec2(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
    throw SchemaError(where + " must be [x, y]");
  return {j[0].get<double>(), j[1].get<double>()};
}

void reject_unknown(const json& obj, std::initializer_list<const char*> allowed,
                    const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (std::find_if(allowed.begin(), allowed.end(),
                     [&](const char* k) { return it.key() == k; }) == allowed.end())
      throw SchemaError("unknown key \"" + it.key() + "\" in " + where);
  }
}

int read_side(const json& j, const std::string& where) {
  if (!j.is_number_integer()) throw SchemaError(where + " must be 1 or -1");
  const int v = j.get<int>();
  if (v != 1 && v != -1) throw SchemaError(where + " must be 1 or -1");
  return v;
}

}  // namespace

PolycycleSpec load_polycycle_spec(const std::string& json_text, const HybridSystemDef& sys) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw SchemaError(std::string("polycycle spec is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw SchemaError("polycycle spec root must be an object");
  reject_unknown(doc, {"singularities", "edges", "section", "assume_flat"}, "polycycle spec");

  PolycycleSpec spec;
  if (doc.contains("assume_flat")) {
    if (!doc["assume_flat"].is_boolean()) throw SchemaError("assume_flat must be a boolean");
    spec.assume_flat = doc["assume_flat"].get<bool>();
  }

  if (!doc.contains("singularities") || !doc["singularities"].is_array() ||
      doc["singularities"].empty())
    throw SchemaError("polycycle spec needs a nonempty \"singularities\" array");
  for (const json& js : doc["singularities"]) {
    if (!js.contains("type") || !js["type"].is_string())
      throw SchemaError("singularity entry needs a \"type\"");
    SingularityQuery q;
    const std::string type = js["type"].get<std::string>();
    if (type == "saddle") {
      reject_unknown(js, {"type", "guess"}, "saddle entry");
      q.type = SingularityQuery::Type::Saddle;
      q.point = read_vec2(js.at("guess"), "saddle guess");
    } else if (type == "jump") {
      reject_unknown(js, {"type", "p", "manifold", "incoming_side", "outgoing_side"}, "jump entry");
      q.type = SingularityQuery::Type::Jump;
      q.point = read_vec2(js.at("p"), "jump p");
      if (!js.contains("manifold") || !js["manifold"].is_string())
        throw SchemaError("jump entry needs a manifold name");
      q.manifold = sys.manifold_index(js["manifold"].get<std::string>());
      q.incoming_side = read_side(js.at("incoming_side"), "incoming_side");
      q.outgoing_side = read_side(js.at("outgoing_side"), "outgoing_side");
    } else {
      throw SchemaError("unknown singularity type \"" + type + "\"");
    }
    spec.singularities.push_back(q);
  }

  if (!doc.contains("edges") || !doc["edges"].is_array() || doc["edges"].empty())
    throw SchemaError("polycycle spec needs a nonempty \"edges\" array");
  for (const json& je : doc["edges"]) {
    reject_unknown(je, {"from", "to", "waypoints"}, "edge entry");
    EdgeDecl e;
    if (!je.contains("from") || !je.contains("to"))
      throw SchemaError("edge entry needs \"from\" and \"to\"");
    e.from = je["from"].get<std::size_t>();
    e.to = je["to"].get<std::size_t>();
    if (e.from >= spec.singularities.size() || e.to >= spec.singularities.size())
      throw SchemaError("edge index out of range");
    if (je.contains("waypoints"))
      for (const json& w : je["waypoints"]) e.waypoints.push_back(read_vec2(w, "waypoint"));
    spec.edges.push_back(std::move(e));
  }

  if (!doc.contains("section") || !doc["section"].is_object())
    throw SchemaError("polycycle spec needs a \"section\" object");
  const json& jsec = doc["section"];
  reject_unknown(jsec, {"base", "direction", "length", "interior_side"}, "section");
  const Vec2 base = read_vec2(jsec.at("base"), "section base");
  const Vec2 dir = read_vec2(jsec.at("direction"), "section direction");
  if (!jsec.contains("length") || !jsec["length"].is_number())
    throw SchemaError("section needs a numeric length");
  spec.section = make_section(base, dir, jsec["length"].get<double>());
  if (jsec.contains("interior_side")) spec.interior_side = read_side(jsec["interior_side"], "interior_side");
  return spec;
}

// ---------------------------------------------------------------------------
// graphic number and verdict
// ---------------------------------------------------------------------------

GraphicNumber graphic_number(const std::vector<SingularityReport>& reports) {
  if (reports.empty()) throw NumericError("graphic_number: no singularities");
  GraphicNumber r;
  r.value = 1.0;
  for (const SingularityReport& rep : reports) {
    if (rep.ratio_indeterminate)
      throw NumericError(
          "graphic_number: a hyperbolicity ratio is indeterminate (order exceeded max_order)");
    if (rep.ratio_is_infinite) {
      r.infinite = true;
      continue;
    }
    if (!(rep.ratio > 0.0)) throw NumericError("graphic_number: nonpositive ratio");
    r.value *= rep.ratio;
  }
  if (r.infinite) r.value = 0.0;
  return r;
}

StabilityVerdict classify_stability(const GraphicNumber& r, double r_margin) {
  StabilityVerdict v;
  v.r = r;
  if (r.infinite || r.value > 1.0 + r_margin) {
    v.verdict = Verdict::Stable;
  } else if (r.value < 1.0 - r_margin) {
    v.verdict = Verdict::Unstable;
  } else {
    v.verdict = Verdict::Inconclusive;
    v.inconclusive_reason = "graphic number within r_margin of 1; the stability criterion is silent there";
  }
  return v;
}

// ---------------------------------------------------------------------------
// connection verification
// ---------------------------------------------------------------------------

namespace {

// Launch point for an edge leaving a singularity, offset so that the
// normal displacement from the invariant set is about eigvec_offset.
Vec2 edge_launch(const HybridSystemDef& sys, const SingularityReport& src, const Vec2& aim,
                 double offset) {
  if (src.kind == SingularityReport::Kind::HyperbolicSaddle) {
    const Vec2 dir = dot(src.v_unstable, aim - src.location) >= 0 ? src.v_unstable
                                                                  : -src.v_unstable;
    return src.location + offset * dir;
  }
  // jump exit: follow the outgoing orbit's Taylor arc off the image point
  const auto fi = field_on_side(sys, src.manifold, src.image, src.outgoing_side);
  if (!fi) throw NumericError("edge launch: no field on the outgoing side");
  const FieldDef& field = sys.fields[*fi];
  const ManifoldDef& m = sys.manifolds[src.manifold];
  const Vec2 f = field.eval(src.image);
  const double speed = f.norm();
  if (speed <= sys.tol.field_tol) throw NumericError("edge launch: field vanishes at the exit");

  const int order = std::max(1, src.n_u);
  LieSeries series(field.f, m.h);
  double lie_m = series.value_at(order, src.image.x, src.image.y);
  if (std::fabs(lie_m) < 1e-300) throw NumericError("edge launch: degenerate contact data");
  double factorial = 1.0;
  for (int k = 2; k <= order; ++k) factorial *= k;
  const double dt = std::pow(factorial * offset / std::fabs(lie_m), 1.0 / order);

  // second-order arc q(dt) = p + dt f + dt^2/2 (Df f)
  Mat2 Df;
  const std::vector<std::string> xy{"x", "y"};
  Df.a = CompiledExpr(field.f[0].differentiate("x"), xy).eval(src.image.x, src.image.y);
  Df.b = CompiledExpr(field.f[0].differentiate("y"), xy).eval(src.image.x, src.image.y);
  Df.c = CompiledExpr(field.f[1].differentiate("x"), xy).eval(src.image.x, src.image.y);
  Df.d = CompiledExpr(field.f[1].differentiate("y"), xy).eval(src.image.x, src.image.y);
  return src.image + dt * f + (0.5 * dt * dt) * Df.apply(f);
}

double saddle_box_radius(const HybridSystemDef& sys, const Vec2& saddle) {
  double dist = std::numeric_limits<double>::infinity();
  for (const ManifoldDef& m : sys.manifolds) {
    const double g = m.grad_h(saddle).norm();
    if (g > sys.tol.grad_tol) dist = std::min(dist, std::fabs(m.h_at(saddle)) / g);
  }
  return std::isfinite(dist) ? std::min(1.0, 0.5 * dist) : 1.0;
}

}  // namespace

std::vector<EdgeResidual> verify_connections(const HybridSystemDef& sys, const PolycycleSpec& spec,
                                             const std::vector<SingularityReport>& reports) {
  if (reports.size() != spec.singularities.size())
    throw NumericError("verify_connections: report count does not match the declared singularities");
  std::vector<EdgeResidual> out;

  FlowOptions fopts = FlowOptions::from(sys.tol);
  fopts.stop_on_singular = true;

  for (std::size_t ei = 0; ei < spec.edges.size(); ++ei) {
    const EdgeDecl& e = spec.edges[ei];
    const SingularityReport& src = reports[e.from];
    const SingularityReport& dst = reports[e.to];
    EdgeResidual res;
    res.edge = ei;
    res.residual = std::numeric_limits<double>::infinity();

    const Vec2 aim = e.waypoints.empty() ? dst.location : e.waypoints.front();
    Vec2 q0;
    try {
      q0 = edge_launch(sys, src, aim, sys.tol.eigvec_offset);
    } catch (const Error& err) {
      res.note = err.what();
      out.push_back(res);
      continue;
    }

    const HybridTrajectory traj = flow_hybrid(sys, q0, sys.tol.verify_t_max, 1000, fopts);

    // every recorded event except the terminal one must be a plain crossing
    std::vector<const JumpEvent*> events;
    for (const auto& seg : traj.segments)
      if (const auto* ev = std::get_if<JumpEvent>(&seg)) events.push_back(ev);
    bool bad_mid_edge = false;
    for (std::size_t k = 0; k + 1 < events.size(); ++k)
      if (events[k]->cls.kind != BoundaryEventClass::Kind::JumpCrossing) bad_mid_edge = true;
    res.crossings = static_cast<int>(events.size());
    if (!events.empty() && events.back()->cls.kind != BoundaryEventClass::Kind::JumpCrossing)
      --res.crossings;  // the terminal singular event is the edge endpoint, not a crossing

    if (dst.kind == SingularityReport::Kind::HyperbolicSaddle) {
      // closest approach to the stable-manifold line inside the
      // linearization box, wherever the run ended up afterwards
      const double box = saddle_box_radius(sys, dst.location);
      const Vec2 n_perp = perp(dst.v_stable);
      for (const auto& seg : traj.segments) {
        const auto* arc = std::get_if<SmoothArc>(&seg);
        if (!arc) continue;
        for (const DenseStep& s : arc->steps) {
          for (int i = 0; i <= 4; ++i) {
            const Vec2 q = s.eval(s.t0 + (s.t1 - s.t0) * i / 4.0);
            if ((q - dst.location).norm() <= box)
              res.residual = std::min(res.residual, std::fabs(dot(q - dst.location, n_perp)));
          }
        }
      }
      if (!std::isfinite(res.residual)) res.note = "trajectory never entered the saddle box";
    } else {
      // jump target: distance from the arrival point on the target manifold
      const JumpEvent* last_event = events.empty() ? nullptr : events.back();
      if (last_event && last_event->manifold == dst.manifold) {
        res.residual = (last_event->pre - dst.location).norm();
      } else if (traj.terminal_hit && traj.terminal_hit->manifold == dst.manifold) {
        // the run ended on the manifold without a classifiable event
        // (typical when the arrival lands within lie_tol of the corner)
        res.residual = (traj.terminal_hit->point - dst.location).norm();
      } else {
        res.note = "trajectory never reached the target manifold (" +
                   std::string(termination_name(traj.termination)) +
                   (traj.termination_detail.empty() ? "" : ": " + traj.termination_detail) + ")";
      }
    }
    if (bad_mid_edge) {
      res.pass = false;
      res.note = "edge crossed the switching set at a non-crossing point";
    } else {
      res.pass = res.residual <= sys.tol.connection_tol;
    }
    out.push_back(res);
  }
  return out;
}

// ---------------------------------------------------------------------------
// full pipeline
// ---------------------------------------------------------------------------

StabilityVerdict analyze_polycycle(const HybridSystemDef& sys, const PolycycleSpec& spec,
                                   int max_order) {
  std::vector<SingularityReport> reports;
  for (std::size_t i = 0; i < spec.singularities.size(); ++i) {
    const SingularityQuery& q = spec.singularities[i];
    SingularityReport rep = analyze_singularity(sys, q, max_order, spec.assume_flat);
    if (rep.kind == SingularityReport::Kind::HyperbolicSaddle) {
      for (const ManifoldDef& m : sys.manifolds)
        if (std::fabs(m.h_at(rep.location)) <= sys.tol.boundary_tol)
          throw NotHyperbolicError("saddle on the switching set violates condition (b)(i)");
    } else {
      for (const std::string& d : rep.diagnostics) {
        if (d.find("contact order exceeds") != std::string::npos)
          throw NotHyperbolicError("flat contact at a jump singularity violates condition (b)(ii)");
        if (d.find("jump crossing, not a singularity") != std::string::npos)
          throw NotHyperbolicError(
              "declared vertex " + std::to_string(i) +
              " classifies as a jump crossing; polycycle vertices must be singularities");
      }
      if (rep.ratio_indeterminate)
        throw NotHyperbolicError(
            "jump singularity may be flat (power order exceeds max_order); "
            "set assume_flat to treat it as infinite order");
    }
    reports.push_back(std::move(rep));
  }

  std::vector<EdgeResidual> connections = verify_connections(sys, spec, reports);
  for (const EdgeResidual& c : connections) {
    if (!c.pass)
      throw NotHyperbolicError(
          "edge " + std::to_string(c.edge) + " failed verification" +
          (c.note.empty() ? " (residual " + std::to_string(c.residual) + ")" : ": " + c.note));
  }

  StabilityVerdict verdict = classify_stability(graphic_number(reports), sys.tol.r_margin);
  verdict.reports = std::move(reports);
  verdict.connections = std::move(connections);
  return verdict;
}

}  // namespace hybstab
