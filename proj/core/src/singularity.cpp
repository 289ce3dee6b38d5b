#include "hybstab/singularity.hpp"

#include <algorithm>
#include <cmath>

#include "hybstab/lie.hpp"

namespace hybstab {

namespace {

const std::vector<std::string> kXY{"x", "y"};

Mat2 symbolic_jacobian(const FieldDef& field, const Vec2& p) {
  Mat2 J;
  J.a = CompiledExpr(field.f[0].differentiate("x"), kXY).eval(p.x, p.y);
  J.b = CompiledExpr(field.f[0].differentiate("y"), kXY).eval(p.x, p.y);
  J.c = CompiledExpr(field.f[1].differentiate("x"), kXY).eval(p.x, p.y);
  J.d = CompiledExpr(field.f[1].differentiate("y"), kXY).eval(p.x, p.y);
  return J;
}

Vec2 eigenvector(const Mat2& J, double mu) {
  // rows of (J - mu I) are both orthogonal to the eigenvector
  const Vec2 a{J.b, mu - J.a};
  const Vec2 b{mu - J.d, J.c};
  Vec2 v = a.norm() >= b.norm() ? a : b;
  if (v.norm() == 0.0) throw NumericError("degenerate eigenvector");
  v = normalized(v);
  // deterministic sign: dominant component positive
  if (std::fabs(v.x) >= std::fabs(v.y) ? v.x < 0 : v.y < 0) v = -v;
  return v;
}

// Minimal bare system used when an operation integrates a raw field with
// no switching manifolds.
HybridSystemDef shell_system(const FieldDef& field, const Tolerances& tol) {
  HybridSystemDef sys;
  sys.tol = tol;
  FieldDef f = field;
  f.signs.clear();
  sys.fields.push_back(std::move(f));
  return sys;
}

}  // namespace

Vec2 find_equilibrium(const FieldDef& field, Vec2 guess, double tol, int max_iter) {
  for (int it = 0; it < max_iter; ++it) {
    const Vec2 f = field.eval(guess);
    if (f.norm() <= tol) return guess;
    const Mat2 J = symbolic_jacobian(field, guess);
    const double det = J.det();
    const double scale = std::max({std::fabs(J.a), std::fabs(J.b), std::fabs(J.c), std::fabs(J.d)});
    if (std::fabs(det) <= 1e-14 * std::max(1.0, scale * scale))
      throw NumericError("find_equilibrium: singular Jacobian along the Newton path");
    const Vec2 dx{(-f.x * J.d + f.y * J.b) / det, (-f.y * J.a + f.x * J.c) / det};
    guess += dx;
  }
  if (field.eval(guess).norm() <= tol) return guess;
  throw NumericError("find_equilibrium: no convergence after Newton iterations");
}

SaddleInfo saddle_info(const FieldDef& field, const Vec2& p, double equilibrium_tol) {
  if (field.eval(p).norm() > equilibrium_tol)
    throw NumericError("saddle_info: point is not an equilibrium");
  SaddleInfo s;
  s.location = p;
  s.jacobian = symbolic_jacobian(field, p);
  const double tr = s.jacobian.trace();
  const double det = s.jacobian.det();
  if (det >= 0.0) throw NotASaddleError("not a saddle: det(J) >= 0");
  const double disc = std::sqrt(tr * tr - 4.0 * det);
  s.lambda = 0.5 * (tr + disc);
  s.nu = 0.5 * (tr - disc);
  s.ratio = -s.nu / s.lambda;
  s.v_unstable = eigenvector(s.jacobian, s.lambda);
  s.v_stable = eigenvector(s.jacobian, s.nu);
  return s;
}

ContactOrder contact_order(const FieldDef& field, const Expression& h, const Vec2& p,
                           int max_order, const Tolerances& tol) {
  if (field.eval(p).norm() <= tol.field_tol)
    throw NumericError("contact_order: field vanishes at the point");
  if (std::fabs(h.evaluate_xy(p.x, p.y)) > tol.boundary_tol)
    throw NumericError("contact_order: point is not on the manifold");
  LieSeries series(field.f, h);
  ContactOrder out;
  for (int k = 1; k <= max_order; ++k) {
    const double v = series.value_at(k, p.x, p.y);
    if (std::fabs(v) > tol.lie_tol) {
      out.order = k;
      out.lie_value = v;
      return out;
    }
  }
  return out;  // candidate flat point
}

// ---------------------------------------------------------------------------
// power order of the jump in manifold charts
// ---------------------------------------------------------------------------

namespace {

// Taylor coefficients of the implicit function solving h = 0 as a graph
// over the chart axis, via iterated symbolic total derivatives of the
// slope -h_a / h_b.
std::vector<double> implicit_curve_coefficients(const ManifoldDef& m, const Vec2& p, int axis,
                                                int max_order, double grad_tol) {
  const Vec2 g = m.grad_h(p);
  const double denom = axis == 0 ? g.y : g.x;
  if (std::fabs(denom) <= grad_tol)
    throw NumericError("chart construction failed: gradient of h degenerate");
  const std::string chart_var = axis == 0 ? "x" : "y";
  const std::string solved_var = axis == 0 ? "y" : "x";

  const Expression ha = m.h.differentiate(chart_var);
  const Expression hb = m.h.differentiate(solved_var);
  const Expression slope = Expression::neg(Expression::div(ha, hb));

  std::vector<double> coeffs(static_cast<std::size_t>(max_order) + 1);
  coeffs[0] = axis == 0 ? p.y : p.x;
  Expression d = slope;  // k-th total derivative of the solved coordinate
  double factorial = 1.0;
  for (int k = 1; k <= max_order; ++k) {
    factorial *= k;
    coeffs[static_cast<std::size_t>(k)] = d.evaluate_xy(p.x, p.y) / factorial;
    if (k < max_order) {
      // total derivative along the curve: d/da = d/da + slope * d/db
      const Expression da = d.differentiate(chart_var);
      const Expression db = d.differentiate(solved_var);
      d = Expression::add(da, Expression::mul(slope, db));
    }
  }
  return coeffs;
}

Expression polynomial_in_t(const std::vector<double>& coeffs) {
  Expression t = Expression::variable("t");
  Expression sum = Expression::constant(0.0);
  bool first = true;
  for (std::size_t k = 0; k < coeffs.size(); ++k) {
    if (coeffs[k] == 0.0 && k > 0) continue;
    Expression term = k == 0 ? Expression::constant(coeffs[k])
                             : Expression::mul(Expression::constant(std::fabs(coeffs[k])),
                                               Expression::pow(t, static_cast<double>(k)));
    if (k > 0 && coeffs[k] < 0.0) term = Expression::neg(term);
    sum = first ? term : Expression::add(sum, term);
    first = false;
  }
  return sum;
}

}  // namespace

PowerOrder jump_power_order(const HybridSystemDef& sys, std::size_t manifold, const Vec2& p,
                            int max_order) {
  const PointClass pc = classify_point(sys, p);
  if (pc.kind != PointClass::Kind::RegularBoundary || pc.index != manifold)
    throw NumericError("jump_power_order: point is not a regular boundary point of the manifold");
  const ManifoldDef& m = sys.manifolds[manifold];
  const Vec2 pbar = pc.image;

  PowerOrder out;
  out.chart_axis_p = chart_axis(m, p, sys.tol.grad_tol);
  out.chart_axis_pbar = chart_axis(m, pbar, sys.tol.grad_tol);

  // curve through p as expressions of the chart parameter t
  const auto curve =
      implicit_curve_coefficients(m, p, out.chart_axis_p, max_order, sys.tol.grad_tol);
  Expression chart_expr, solved_expr;
  {
    const double base = out.chart_axis_p == 0 ? p.x : p.y;
    chart_expr = Expression::add(Expression::constant(base), Expression::variable("t"));
    solved_expr = polynomial_in_t(curve);
  }
  const Expression& phi_out = m.jump[out.chart_axis_pbar];
  Expression psi = out.chart_axis_p == 0
                       ? phi_out.substitute("x", chart_expr).substitute("y", solved_expr)
                       : phi_out.substitute("y", chart_expr).substitute("x", solved_expr);
  const double target = out.chart_axis_pbar == 0 ? pbar.x : pbar.y;
  psi = Expression::sub(psi, Expression::constant(target));

  out.coeffs = taylor_coefficients(psi, "t", 0.0, max_order);

  double scale = 1.0;
  double factorial = 1.0;
  for (int k = 1; k <= max_order; ++k) {
    factorial *= k;
    const double a = out.coeffs[static_cast<std::size_t>(k)];
    if (std::fabs(a) > sys.tol.coeff_tol * scale) {
      out.k0 = k;
      out.a_k0 = a;
      return out;
    }
    scale = std::max(scale, std::fabs(a) * factorial);
  }
  return out;  // exceeds max_order
}

// ---------------------------------------------------------------------------
// per-vertex analysis
// ---------------------------------------------------------------------------

SingularityReport analyze_singularity(const HybridSystemDef& sys, const SingularityQuery& query,
                                      int max_order, bool assume_flat) {
  SingularityReport rep;
  if (query.type == SingularityQuery::Type::Saddle) {
    const Vec2 p = find_equilibrium(sys.fields[region_of(sys, query.point)], query.point,
                                    sys.tol.newton_tol);
    const SaddleInfo s = saddle_info(sys.fields[region_of(sys, p)], p, 1e-9);
    rep.kind = SingularityReport::Kind::HyperbolicSaddle;
    rep.location = p;
    rep.image = p;
    rep.nu = s.nu;
    rep.lambda = s.lambda;
    rep.v_stable = s.v_stable;
    rep.v_unstable = s.v_unstable;
    rep.ratio = s.ratio;
    return rep;
  }

  // jump singularity branch
  const std::size_t mi = query.manifold;
  if (mi >= sys.manifolds.size()) throw SchemaError("singularity refers to an unknown manifold");
  const ManifoldDef& m = sys.manifolds[mi];
  const PointClass pc = classify_point(sys, query.point);
  if (pc.kind != PointClass::Kind::RegularBoundary || pc.index != mi)
    throw NumericError("declared jump point is not a regular point of its manifold" +
                       (pc.reason.empty() ? std::string() : " (" + pc.reason + ")"));
  rep.kind = SingularityReport::Kind::JumpSingularity;
  rep.location = query.point;
  rep.image = pc.image;
  rep.manifold = mi;
  rep.incoming_side = query.incoming_side;
  rep.outgoing_side = query.outgoing_side;

  const auto in_field = field_on_side(sys, mi, query.point, query.incoming_side);
  const auto out_field = field_on_side(sys, mi, rep.image, query.outgoing_side);
  if (!in_field || !out_field)
    throw NumericError("no field matched on the declared incoming/outgoing side");
  if (sys.fields[*in_field].eval(query.point).norm() <= sys.tol.field_tol ||
      sys.fields[*out_field].eval(rep.image).norm() <= sys.tol.field_tol)
    throw NumericError("field vanishes at a declared jump singularity");

  const ContactOrder cs = contact_order(sys.fields[*in_field], m.h, query.point, max_order, sys.tol);
  const ContactOrder cu = contact_order(sys.fields[*out_field], m.h, rep.image, max_order, sys.tol);
  if (!cs.order || !cu.order) {
    rep.ratio_indeterminate = true;
    rep.diagnostics.push_back("contact order exceeds max_order (possible flat point)");
    rep.n_s = cs.order.value_or(0);
    rep.n_u = cu.order.value_or(0);
    return rep;
  }
  rep.n_s = *cs.order;
  rep.n_u = *cu.order;

  const PowerOrder po = jump_power_order(sys, mi, query.point, max_order);
  rep.power_order = po.k0;
  if (po.k0) {
    rep.leading_coeff = po.a_k0;
    rep.ratio = (static_cast<double>(rep.n_u) / rep.n_s) * (*po.k0);
  } else if (assume_flat) {
    rep.ratio_is_infinite = true;
    rep.diagnostics.push_back("power order exceeds max_order; treated as infinite (assume_flat)");
  } else {
    rep.ratio_indeterminate = true;
    rep.ratio_lower_bound = (static_cast<double>(rep.n_u) / rep.n_s) * (max_order + 1);
    rep.diagnostics.push_back(
        "power order exceeds max_order; ratio is at least the reported lower bound "
        "(set assume_flat to treat the jump as flat)");
  }

  // advisory classification of the declared point
  try {
    const BoundaryEventClass ev = classify_boundary_event(sys, query.point, query.incoming_side);
    if (ev.kind == BoundaryEventClass::Kind::JumpCrossing)
      rep.diagnostics.push_back("declared point classifies as a jump crossing, not a singularity");
    if (ev.kind == BoundaryEventClass::Kind::FieldVanishes)
      rep.diagnostics.push_back("field vanishes at the declared point");
  } catch (const Error& e) {
    rep.diagnostics.push_back(std::string("event classification: ") + e.what());
  }
  return rep;
}

// ---------------------------------------------------------------------------
// empirical transition exponent
// ---------------------------------------------------------------------------

namespace {

struct LogFit {
  double slope = 0.0;
  double residual = 0.0;
};

LogFit fit_loglog(const std::vector<std::pair<double, double>>& samples) {
  const std::size_t n = samples.size();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const auto& [s, t] : samples) {
    const double lx = std::log(s), ly = std::log(t);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  LogFit fit;
  const double denom = n * sxx - sx * sx;
  if (denom == 0.0) throw NumericError("degenerate transition fit grid");
  fit.slope = (n * sxy - sx * sy) / denom;
  const double intercept = (sy - fit.slope * sx) / n;
  double ss = 0;
  for (const auto& [s, t] : samples) {
    const double r = std::log(t) - (fit.slope * std::log(s) + intercept);
    ss += r * r;
  }
  fit.residual = std::sqrt(ss / n);
  return fit;
}

// project q onto the manifold along the gradient (few Newton sweeps)
Vec2 project_onto_manifold(const ManifoldDef& m, Vec2 q) {
  for (int it = 0; it < 4; ++it) {
    const double h = m.h_at(q);
    const Vec2 g = m.grad_h(q);
    const double g2 = dot(g, g);
    if (g2 == 0.0) break;
    q = q - (h / g2) * g;
  }
  return q;
}

}  // namespace

TransitionFit empirical_transition_exponent(const FieldDef& field, const Expression& h,
                                            const Vec2& p, int samples, double x_min, double x_max,
                                            const Tolerances& tol) {
  if (samples < 3) throw SchemaError("transition fit needs at least 3 samples");
  if (!(0 < x_min && x_min < x_max)) throw SchemaError("transition grid must satisfy 0 < x_min < x_max");
  const ContactOrder c = contact_order(field, h, p, 8, tol);
  if (!c.order || *c.order < 2)
    throw NumericError("empirical_transition_exponent: no tangency of order >= 2 at p");

  ManifoldDef mdef;
  mdef.name = "sigma";
  mdef.h = h;
  mdef.jump = {Expression::variable("x"), Expression::variable("y")};
  mdef.finalize();

  const Vec2 fp = field.eval(p);
  HybridSystemDef shell = shell_system(field, tol);
  FlowOptions fopts = FlowOptions::from(tol);

  // cross section of the tangent orbit, a little downstream of p
  const double offset = tol.section_offset;
  SectionWatch tau;
  {
    const auto [arc, hit] =
        integrate_smooth(shell.fields[0], p, 10.0 * offset / fp.norm(), shell,
                         IntegratorOptions::from(tol));
    Vec2 qc = arc.last();
    // refine the point at arclength ~ offset from p
    for (const DenseStep& s : arc.steps) {
      if ((s.y1 - p).norm() >= offset) {
        double lo = s.t0, hi = s.t1;
        for (int it = 0; it < 60; ++it) {
          const double mid = 0.5 * (lo + hi);
          ((s.eval(mid) - p).norm() < offset ? lo : hi) = mid;
        }
        qc = s.eval(0.5 * (lo + hi));
        break;
      }
    }
    if ((qc - p).norm() < 0.9 * offset)
      throw NumericError("empirical_transition_exponent: could not place the cross section");
    tau.base = qc;
    tau.direction = normalized(perp(field.eval(qc)));
    tau.length = -1.0;  // whole line
    tau.stop_on_hit = true;
    tau.required_crossings = 1;
    tau.arm_distance = 0.0;
  }

  const Vec2 grad = mdef.grad_h(p);
  const Vec2 t_hat = normalized(perp(grad));
  const double t_max = 200.0 * (x_max + offset) / std::max(fp.norm(), 1e-3);

  auto run_side = [&](double side_sign, std::vector<std::pair<double, double>>& out) -> bool {
    out.clear();
    for (int i = 0; i < samples; ++i) {
      const double s =
          samples == 1 ? x_min
                       : x_min * std::pow(x_max / x_min, static_cast<double>(i) / (samples - 1));
      const Vec2 q0 = project_onto_manifold(mdef, p + (side_sign * s) * t_hat);
      const FlowResult res = flow_with_watch(shell, q0, t_max, 0, fopts, tau);
      if (!res.stop_hit) return false;
      const double T = std::fabs(dot(res.stop_hit->point - tau.base, tau.direction));
      if (T <= 0.0) return false;
      out.push_back({s, T});
    }
    return true;
  };

  TransitionFit fit;
  if (!run_side(+1.0, fit.samples) && !run_side(-1.0, fit.samples))
    throw NumericError("empirical_transition_exponent: trajectories fail to connect the sections");

  LogFit lf = fit_loglog(fit.samples);
  if (lf.residual > 1e-2 && fit.samples.size() > 4) {
    // asymptotic regime only: drop the two largest grid points
    fit.samples.resize(fit.samples.size() - 2);
    fit.discarded = 2;
    lf = fit_loglog(fit.samples);
  }
  fit.exponent = lf.slope;
  fit.residual = lf.residual;
  return fit;
}

// ---------------------------------------------------------------------------
// Dulac sandwich bounds
// ---------------------------------------------------------------------------

DulacReport dulac_bounds_check(const FieldDef& field, const Vec2& saddle, double eps,
                               const std::vector<double>& x_grid, const HybridSystemDef& sys) {
  const SaddleInfo s = saddle_info(field, saddle, 1e-9);
  if (!(eps > 0.0 && eps < s.lambda))
    throw SchemaError("dulac_bounds_check: eps must lie in (0, lambda)");

  DulacReport rep;
  rep.eps = eps;
  rep.nu = s.nu;
  rep.lambda = s.lambda;

  // delta: half the distance to the nearest manifold, capped at 1
  double dist = std::numeric_limits<double>::infinity();
  for (const ManifoldDef& m : sys.manifolds) {
    const double g = m.grad_h(saddle).norm();
    if (g > sys.tol.grad_tol) dist = std::min(dist, std::fabs(m.h_at(saddle)) / g);
  }
  rep.delta = std::isfinite(dist) ? std::min(1.0, 0.5 * dist) : 1.0;

  for (double x : x_grid)
    if (!(0.0 < x && x < rep.delta))
      throw SchemaError("dulac grid point outside (0, delta)");

  HybridSystemDef shell = shell_system(field, sys.tol);
  FlowOptions fopts = FlowOptions::from(sys.tol);

  SectionWatch tau;
  tau.base = saddle + rep.delta * s.v_unstable;
  tau.direction = s.v_stable;
  tau.length = 2.0 * rep.delta;
  tau.stop_on_hit = true;
  tau.required_crossings = 1;

  rep.min_margin = std::numeric_limits<double>::infinity();
  rep.all_hold = true;
  const double a = -s.nu / (s.lambda - eps);
  const double b = -s.nu / (s.lambda + eps);
  for (double x : x_grid) {
    const Vec2 q0 = saddle + x * s.v_unstable + rep.delta * s.v_stable;
    const double t_max = 10.0 + 5.0 * std::log(rep.delta / x) / s.lambda;
    const FlowResult res = flow_with_watch(shell, q0, t_max, 0, fopts, tau);
    if (!res.stop_hit) throw NumericError("dulac_bounds_check: trajectory escapes the saddle box");
    DulacPoint pt;
    pt.x = x;
    pt.value = res.stop_hit->s;  // section parameter = stable-eigendirection offset
    pt.lower = std::pow(rep.delta, 1.0 - a) * std::pow(x, a);
    pt.upper = std::pow(rep.delta, 1.0 - b) * std::pow(x, b);
    pt.margin = std::min(pt.value / pt.lower, pt.upper / pt.value);
    rep.min_margin = std::min(rep.min_margin, pt.margin);
    rep.all_hold = rep.all_hold && pt.lower < pt.value && pt.value < pt.upper;
    rep.points.push_back(pt);
  }
  return rep;
}

HybridSystemDef time_reversed_fields(const HybridSystemDef& sys) {
  HybridSystemDef out = sys;
  for (FieldDef& f : out.fields) {
    f.f[0] = Expression::neg(f.f[0]);
    f.f[1] = Expression::neg(f.f[1]);
    f.finalize();
  }
  return out;
}

}  // namespace hybstab
