#include "hybstab/system.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "hybstab/lie.hpp"
#include "json.hpp"

namespace hybstab {

using nlohmann::json;

namespace {

const std::vector<std::string> kXY{"x", "y"};

int sign_with_tol(double v, double tol) {
  if (v > tol) return 1;
  if (v < -tol) return -1;
  return 0;
}

void reject_unknown_keys(const json& obj, std::initializer_list<const char*> allowed,
                         const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (std::find_if(allowed.begin(), allowed.end(),
                     [&](const char* k) { return it.key() == k; }) == allowed.end())
      throw SchemaError("unknown key \"" + it.key() + "\" in " + where);
  }
}

Expression parse_config_expr(const std::string& text, const std::map<std::string, double>& params,
                             const std::string& where) {
  Expression e;
  try {
    e = parse_expression(text);
  } catch (const ParseError& err) {
    throw SchemaError(where + ": " + err.what());
  }
  for (const auto& [name, value] : params) e = e.substitute(name, Expression::constant(value));
  for (const auto& v : e.free_variables()) {
    if (v != "x" && v != "y")
      throw SchemaError(where + ": unknown identifier '" + v + "' (allowed: x, y, params, pi)");
  }
  return e;
}

}  // namespace

void ManifoldDef::finalize() {
  h_c = CompiledExpr(h, kXY);
  hx_c = CompiledExpr(h.differentiate("x"), kXY);
  hy_c = CompiledExpr(h.differentiate("y"), kXY);
  for (int c = 0; c < 2; ++c) {
    jump_c[c] = CompiledExpr(jump[c], kXY);
    jump_jac_c[c][0] = CompiledExpr(jump[c].differentiate("x"), kXY);
    jump_jac_c[c][1] = CompiledExpr(jump[c].differentiate("y"), kXY);
  }
}

void FieldDef::finalize() {
  f_c[0] = CompiledExpr(f[0], kXY);
  f_c[1] = CompiledExpr(f[1], kXY);
}

std::size_t HybridSystemDef::manifold_index(const std::string& name) const {
  for (std::size_t i = 0; i < manifolds.size(); ++i)
    if (manifolds[i].name == name) return i;
  throw SchemaError("no manifold named \"" + name + "\"");
}

// ---------------------------------------------------------------------------
// load_system
// ---------------------------------------------------------------------------

namespace {

// Sampled consistency check: find points of h = 0 by root solving along
// random lines and verify the jump sends them back onto the manifold.
void check_jump_consistency(HybridSystemDef& sys, std::size_t mi, std::mt19937& rng) {
  const ManifoldDef& m = sys.manifolds[mi];
  const double tol = sys.tol.jump_consistency_tol;
  const int wanted = static_cast<int>(sys.tol.n_check);
  const double R = 10.0;
  std::uniform_real_distribution<double> coord(-R, R);
  std::uniform_real_distribution<double> angle(0.0, 2.0 * 3.14159265358979323846);

  int found = 0, skipped = 0;
  for (int attempt = 0; attempt < 60 * wanted && found < wanted; ++attempt) {
    const Vec2 base{coord(rng), coord(rng)};
    const double a = angle(rng);
    const Vec2 dir{std::cos(a), std::sin(a)};
    const int segments = 64;
    double prev_t = -R;
    double prev_h;
    try {
      prev_h = m.h_at(base + prev_t * dir);
    } catch (const EvalError&) {
      continue;
    }
    for (int s = 1; s <= segments && found < wanted; ++s) {
      const double t = -R + 2.0 * R * s / segments;
      double ht;
      try {
        ht = m.h_at(base + t * dir);
      } catch (const EvalError&) {
        prev_t = t;
        prev_h = std::numeric_limits<double>::quiet_NaN();
        continue;
      }
      if (std::isfinite(prev_h) && std::isfinite(ht) && prev_h * ht < 0.0) {
        double lo = prev_t, hi = t, hlo = prev_h;
        for (int it = 0; it < 80; ++it) {
          const double mid = 0.5 * (lo + hi);
          const double hm = m.h_at(base + mid * dir);
          if (hlo * hm <= 0.0)
            hi = mid;
          else {
            lo = mid;
            hlo = hm;
          }
        }
        const Vec2 p = base + 0.5 * (lo + hi) * dir;
        if (m.grad_h(p).norm() > sys.tol.grad_tol) {
          try {
            const Vec2 image = m.apply_jump(p);
            const double h_img = m.h_at(image);
            if (!std::isfinite(h_img)) {
              ++skipped;
            } else if (std::fabs(h_img) > tol) {
              char buf[160];
              std::snprintf(buf, sizeof buf,
                            "jump of manifold \"%s\" leaves the manifold at (%.6g, %.6g): |h| = %.3g",
                            m.name.c_str(), p.x, p.y, std::fabs(h_img));
              throw SchemaError(buf);
            } else {
              ++found;
            }
          } catch (const EvalError&) {
            ++skipped;
          }
        }
      }
      prev_t = t;
      prev_h = ht;
    }
  }
  if (found == 0)
    sys.load_notes.push_back("jump consistency of manifold \"" + m.name +
                             "\" could not be sampled (no manifold points found in [-10,10]^2)");
  else if (skipped > 0)
    sys.load_notes.push_back("jump consistency of manifold \"" + m.name + "\": " +
                             std::to_string(skipped) + " samples skipped (evaluation outside domain)");
}

}  // namespace

HybridSystemDef load_system(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw SchemaError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw SchemaError("config root must be a JSON object");
  reject_unknown_keys(doc, {"params", "manifolds", "fields", "tolerances"}, "config");

  HybridSystemDef sys;

  if (doc.contains("tolerances")) {
    const json& t = doc["tolerances"];
    if (!t.is_object()) throw SchemaError("\"tolerances\" must be an object");
    for (auto it = t.begin(); it != t.end(); ++it) {
      if (!it.value().is_number()) throw SchemaError("tolerance \"" + it.key() + "\" must be a number");
      sys.tol.set(it.key(), it.value().get<double>());
    }
  }

  if (doc.contains("params")) {
    const json& p = doc["params"];
    if (!p.is_object()) throw SchemaError("\"params\" must be an object");
    for (auto it = p.begin(); it != p.end(); ++it) {
      const std::string& name = it.key();
      if (!it.value().is_number()) throw SchemaError("param \"" + name + "\" must be a number");
      if (name == "x" || name == "y" || name == "pi")
        throw SchemaError("param name \"" + name + "\" is reserved");
      sys.params[name] = it.value().get<double>();
    }
  }

  if (!doc.contains("manifolds") || !doc["manifolds"].is_array())
    throw SchemaError("config needs a \"manifolds\" array");
  if (!doc.contains("fields") || !doc["fields"].is_array() || doc["fields"].empty())
    throw SchemaError("config needs a nonempty \"fields\" array");

  std::set<std::string> names;
  for (const json& jm : doc["manifolds"]) {
    reject_unknown_keys(jm, {"name", "h", "jump"}, "manifold entry");
    if (!jm.contains("name") || !jm["name"].is_string())
      throw SchemaError("manifold entry needs a string \"name\"");
    ManifoldDef m;
    m.name = jm["name"].get<std::string>();
    if (!names.insert(m.name).second) throw SchemaError("duplicate manifold name \"" + m.name + "\"");
    if (!jm.contains("h") || !jm["h"].is_string())
      throw SchemaError("manifold \"" + m.name + "\" needs an expression string \"h\"");
    m.h = parse_config_expr(jm["h"].get<std::string>(), sys.params, "manifold \"" + m.name + "\" h");
    if (!jm.contains("jump") || !jm["jump"].is_array() || jm["jump"].size() != 2)
      throw SchemaError("manifold \"" + m.name + "\" needs \"jump\": [expr, expr]");
    for (int c = 0; c < 2; ++c) {
      if (!jm["jump"][c].is_string())
        throw SchemaError("manifold \"" + m.name + "\" jump components must be strings");
      m.jump[c] = parse_config_expr(jm["jump"][c].get<std::string>(), sys.params,
                                    "manifold \"" + m.name + "\" jump");
    }
    m.finalize();
    sys.manifolds.push_back(std::move(m));
  }

  for (const json& jf : doc["fields"]) {
    reject_unknown_keys(jf, {"signs", "f"}, "field entry");
    FieldDef f;
    if (!jf.contains("signs") || !jf["signs"].is_array() ||
        jf["signs"].size() != sys.manifolds.size())
      throw SchemaError("field entry needs \"signs\" of length " +
                        std::to_string(sys.manifolds.size()));
    for (const json& s : jf["signs"]) {
      if (!s.is_number_integer()) throw SchemaError("field signs must be integers -1, 0, 1");
      const int v = s.get<int>();
      if (v < -1 || v > 1) throw SchemaError("field signs must be -1, 0 or 1");
      f.signs.push_back(v);
    }
    if (!jf.contains("f") || !jf["f"].is_array() || jf["f"].size() != 2)
      throw SchemaError("field entry needs \"f\": [expr, expr]");
    for (int c = 0; c < 2; ++c) {
      if (!jf["f"][c].is_string()) throw SchemaError("field components must be strings");
      f.f[c] = parse_config_expr(jf["f"][c].get<std::string>(), sys.params, "field f");
    }
    f.finalize();
    sys.fields.push_back(std::move(f));
  }

  std::mt19937 rng(0x5eedcafe);
  for (std::size_t i = 0; i < sys.manifolds.size(); ++i) check_jump_consistency(sys, i, rng);

  return sys;
}

// ---------------------------------------------------------------------------
// classification
// ---------------------------------------------------------------------------

std::size_t region_of(const HybridSystemDef& sys, const Vec2& p) {
  std::vector<int> sig(sys.manifolds.size());
  for (std::size_t i = 0; i < sys.manifolds.size(); ++i) {
    const double h = sys.manifolds[i].h_at(p);
    sig[i] = sign_with_tol(h, sys.tol.boundary_tol);
    if (sig[i] == 0) {
      // tolerate only if every pattern ignores this manifold
      for (const FieldDef& f : sys.fields)
        if (f.signs[i] != 0)
          throw NumericError("region_of: point lies on manifold \"" + sys.manifolds[i].name + "\"");
    }
  }
  std::size_t match = sys.fields.size();
  for (std::size_t j = 0; j < sys.fields.size(); ++j) {
    bool ok = true;
    for (std::size_t i = 0; i < sig.size(); ++i) {
      const int want = sys.fields[j].signs[i];
      if (want != 0 && want != sig[i]) {
        ok = false;
        break;
      }
    }
    if (ok) {
      if (match != sys.fields.size())
        throw NumericError("region_of: ambiguous match (fields " + std::to_string(match) + " and " +
                           std::to_string(j) + ") — ill-formed config");
      match = j;
    }
  }
  if (match == sys.fields.size()) throw NumericError("region_of: no field matches the sign pattern");
  return match;
}

std::optional<std::size_t> field_on_side(const HybridSystemDef& sys, std::size_t manifold,
                                         const Vec2& p, int side) {
  std::vector<int> sig(sys.manifolds.size());
  for (std::size_t i = 0; i < sys.manifolds.size(); ++i)
    sig[i] = i == manifold ? side : sign_with_tol(sys.manifolds[i].h_at(p), sys.tol.boundary_tol);
  std::optional<std::size_t> match;
  for (std::size_t j = 0; j < sys.fields.size(); ++j) {
    bool ok = true;
    for (std::size_t i = 0; i < sig.size(); ++i) {
      const int want = sys.fields[j].signs[i];
      if (want != 0 && sig[i] != 0 && want != sig[i]) {
        ok = false;
        break;
      }
    }
    if (ok) {
      if (match) throw NumericError("ambiguous field match next to manifold — ill-formed config");
      match = j;
    }
  }
  return match;
}

PointClass classify_point(const HybridSystemDef& sys, const Vec2& p) {
  PointClass out;
  std::vector<std::size_t> on;
  for (std::size_t i = 0; i < sys.manifolds.size(); ++i)
    if (std::fabs(sys.manifolds[i].h_at(p)) <= sys.tol.boundary_tol) on.push_back(i);

  if (on.empty()) {
    out.kind = PointClass::Kind::Interior;
    out.index = region_of(sys, p);
    return out;
  }
  if (on.size() > 1) {
    out.kind = PointClass::Kind::NonRegular;
    out.reason = "on two manifolds (\"" + sys.manifolds[on[0]].name + "\", \"" +
                 sys.manifolds[on[1]].name + "\")";
    return out;
  }
  const std::size_t i0 = on[0];
  const ManifoldDef& m = sys.manifolds[i0];
  if (m.grad_h(p).norm() <= sys.tol.grad_tol) {
    out.kind = PointClass::Kind::NonRegular;
    out.reason = "h not regular here (gradient of \"" + m.name + "\" below grad_tol)";
    return out;
  }
  Vec2 image;
  try {
    image = m.apply_jump(p);
  } catch (const EvalError& e) {
    out.kind = PointClass::Kind::NonRegular;
    out.reason = std::string("jump evaluation failed: ") + e.what();
    return out;
  }
  for (std::size_t i = 0; i < sys.manifolds.size(); ++i) {
    if (i == i0) continue;
    if (std::fabs(sys.manifolds[i].h_at(image)) <= sys.tol.boundary_tol) {
      out.kind = PointClass::Kind::NonRegular;
      out.reason = "jump image lies on manifold \"" + sys.manifolds[i].name + "\"";
      return out;
    }
  }
  out.kind = PointClass::Kind::RegularBoundary;
  out.index = i0;
  out.image = image;
  return out;
}

int chart_axis(const ManifoldDef& m, const Vec2& p, double grad_tol) {
  const Vec2 g = m.grad_h(p);
  if (g.norm() <= grad_tol) throw NumericError("chart construction failed: gradient of h degenerate");
  // graph over the axis with the smaller partial; the other partial solves h=0
  return std::fabs(g.x) < std::fabs(g.y) ? 0 : 1;
}

double jump_chart_derivative(const HybridSystemDef& sys, std::size_t manifold, const Vec2& p,
                             const Vec2& pbar) {
  const ManifoldDef& m = sys.manifolds[manifold];
  const int ax_p = chart_axis(m, p, sys.tol.grad_tol);
  const int ax_q = chart_axis(m, pbar, sys.tol.grad_tol);
  const Vec2 g = m.grad_h(p);
  // tangent of the chart curve t -> (p.x + t, Y(t)) resp. (X(t), p.y + t)
  Vec2 tangent;
  if (ax_p == 0)
    tangent = {1.0, -g.x / g.y};
  else
    tangent = {-g.y / g.x, 1.0};
  const Mat2 J = m.jump_jacobian(p);
  const Vec2 dphi = J.apply(tangent);
  return ax_q == 0 ? dphi.x : dphi.y;
}

namespace {

struct SideInfo {
  int side = 0;
  std::size_t field = 0;
  double lie = 0.0;
  bool tangent = false;
};

// Sides of the manifold at q with a matched field and the Lie value there.
std::vector<SideInfo> side_candidates(const HybridSystemDef& sys, std::size_t manifold,
                                      const Vec2& q) {
  std::vector<SideInfo> out;
  for (int side : {+1, -1}) {
    const auto fi = field_on_side(sys, manifold, q, side);
    if (!fi) continue;
    SideInfo s;
    s.side = side;
    s.field = *fi;
    s.lie = lie_value(sys.fields[*fi], sys.manifolds[manifold], q);
    s.tangent = std::fabs(s.lie) <= sys.tol.lie_tol;
    out.push_back(s);
  }
  return out;
}

}  // namespace

BoundaryEventClass classify_boundary_event(const HybridSystemDef& sys, const Vec2& p,
                                           std::optional<int> incoming_side) {
  const PointClass pc = classify_point(sys, p);
  if (pc.kind != PointClass::Kind::RegularBoundary)
    throw NumericError("classify_boundary_event: point is not a regular boundary point" +
                       (pc.reason.empty() ? std::string() : " (" + pc.reason + ")"));
  const std::size_t i0 = pc.index;
  const Vec2 pbar = pc.image;
  const Tolerances& tol = sys.tol;

  // incoming component at p
  const auto cand_p = side_candidates(sys, i0, p);
  if (cand_p.empty()) throw NumericError("no field defined on either side of the manifold at p");
  SideInfo in;
  if (incoming_side) {
    bool found = false;
    for (const auto& c : cand_p)
      if (c.side == *incoming_side) {
        in = c;
        found = true;
      }
    if (!found) throw NumericError("no field matched on the hinted incoming side");
  } else {
    std::vector<SideInfo> arriving, tangents;
    for (const auto& c : cand_p) {
      if (c.side * c.lie < -tol.lie_tol) arriving.push_back(c);
      if (c.tangent) tangents.push_back(c);
    }
    if (arriving.size() == 1)
      in = arriving[0];
    else if (arriving.empty() && !tangents.empty())
      in = tangents[0];
    else if (arriving.size() > 1)
      throw NumericError("cannot resolve incoming side: both fields push toward the manifold");
    else
      throw NumericError("cannot resolve incoming side: no orbit arrives at p");
  }

  BoundaryEventClass ev;
  ev.incoming_side = in.side;
  ev.incoming_field = in.field;
  ev.lie_in = in.lie;

  // outgoing component at pbar
  const auto cand_q = side_candidates(sys, i0, pbar);
  if (cand_q.empty()) throw NumericError("no field defined on either side of the manifold at p-bar");
  SideInfo out;
  {
    std::vector<SideInfo> departing, tangents;
    for (const auto& c : cand_q) {
      if (c.side * c.lie > tol.lie_tol) departing.push_back(c);
      if (c.tangent) tangents.push_back(c);
    }
    if (departing.size() == 1)
      out = departing[0];
    else if (departing.empty() && !tangents.empty())
      out = tangents[0];
    else if (departing.size() > 1)
      throw NumericError("cannot resolve outgoing side: both fields leave the manifold");
    else
      throw NumericError("cannot resolve outgoing side: no orbit departs from p-bar");
  }
  ev.outgoing_side = out.side;
  ev.outgoing_field = out.field;
  ev.lie_out = out.lie;

  if (sys.fields[in.field].eval(p).norm() < tol.field_tol ||
      sys.fields[out.field].eval(pbar).norm() < tol.field_tol) {
    ev.kind = BoundaryEventClass::Kind::FieldVanishes;
    return ev;
  }

  ev.tangency_at_p = std::fabs(in.lie) <= tol.lie_tol;
  ev.tangency_at_pbar = std::fabs(out.lie) <= tol.lie_tol;
  ev.chart_derivative = jump_chart_derivative(sys, i0, p, pbar);
  ev.not_local_diffeo = std::fabs(ev.chart_derivative) <= tol.diffeo_tol;
  // Lie-derivative product with both factors oriented by traversal:
  // incoming pushes toward the manifold, outgoing pushes away.
  ev.oriented_lie_product = (-in.side * in.lie) * (out.side * out.lie);

  if (ev.oriented_lie_product > tol.lie_tol && !ev.not_local_diffeo)
    ev.kind = BoundaryEventClass::Kind::JumpCrossing;
  else
    ev.kind = BoundaryEventClass::Kind::JumpSingularity;
  return ev;
}

std::optional<Departure> resolve_departure(const HybridSystemDef& sys, std::size_t manifold,
                                           const Vec2& q, int max_order) {
  const auto cands = side_candidates(sys, manifold, q);
  std::vector<Departure> transversal;
  std::vector<SideInfo> tangents;
  for (const auto& c : cands) {
    if (c.side * c.lie > sys.tol.lie_tol)
      transversal.push_back({c.field, c.side, false, 1, c.lie});
    else if (c.tangent)
      tangents.push_back(c);
  }
  if (transversal.size() == 1) return transversal[0];
  if (transversal.size() > 1)
    throw NumericError("ambiguous departure: both fields leave the manifold (repelling)");

  // tangential exit: the first nonvanishing iterated Lie derivative must
  // push into the candidate's own side
  for (const auto& c : tangents) {
    LieSeries series(sys.fields[c.field].f, sys.manifolds[manifold].h);
    for (int k = 2; k <= max_order; ++k) {
      const double v = series.value_at(k, q.x, q.y);
      if (std::fabs(v) > sys.tol.lie_tol) {
        if (sign_with_tol(v, 0.0) == c.side) return Departure{c.field, c.side, true, k, v};
        break;
      }
    }
  }
  return std::nullopt;
}

}  // namespace hybstab
