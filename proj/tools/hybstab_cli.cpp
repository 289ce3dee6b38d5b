// hybstab: planar hybrid systems — simulation, polycycle stability,
// return maps, and numerical validation.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include "CLI11.hpp"

#include "hybstab/lie.hpp"
#include "hybstab/polycycle.hpp"
#include "hybstab/return_map.hpp"
#include "hybstab/serialize.hpp"
#include "hybstab/singularity.hpp"
#include "manifest.hpp"
#include "svg_plot.hpp"

using namespace hybstab;
using nlohmann::json;

namespace {

constexpr int kExitConfig = 1;
constexpr int kExitRuntime = 2;
constexpr int kExitNotHyperbolic = 3;
constexpr int kExitCheckFailed = 4;

struct Common {
  std::string config_path;
  std::string out_dir = ".";
  bool reproducible = false;
  std::vector<std::string> tol_overrides;
  cli::RunManifest manifest;
  std::chrono::steady_clock::time_point started = std::chrono::steady_clock::now();
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SchemaError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

HybridSystemDef load_system_file(Common& common) {
  if (common.config_path.empty()) throw SchemaError("no system config given (see --config)");
  const std::string text = slurp(common.config_path);
  common.manifest.input_hashes.push_back({common.config_path, cli::fnv1a_hex(text)});
  HybridSystemDef sys = load_system(text);
  for (const std::string& ov : common.tol_overrides) {
    const auto eq = ov.find('=');
    if (eq == std::string::npos) throw SchemaError("--tol expects NAME=VALUE, got " + ov);
    sys.tol.set(ov.substr(0, eq), std::stod(ov.substr(eq + 1)));
  }
  common.manifest.tolerances = sys.tol;
  for (const std::string& note : sys.load_notes) std::cerr << "note: " << note << "\n";
  return sys;
}

void emit(Common& common, const std::string& name, const std::string& contents) {
  const std::string path = common.out_dir + "/" + name;
  cli::write_file_atomic(path, contents);
  common.manifest.outputs.push_back(name);
}

void finish_manifest(Common& common, const std::string& stem) {
  common.manifest.reproducible = common.reproducible;
  common.manifest.duration_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - common.started).count();
  cli::write_file_atomic(common.out_dir + "/" + stem + ".manifest.json",
                         common.manifest.to_json().dump(2) + "\n");
}

Vec2 parse_point(const std::string& text, const std::string& what) {
  double x, y;
  if (std::sscanf(text.c_str(), "%lf,%lf", &x, &y) != 2)
    throw SchemaError(what + " expects \"x,y\", got \"" + text + "\"");
  return {x, y};
}

SectionDef parse_section(const std::string& text) {
  double bx, by, dx, dy, len;
  if (std::sscanf(text.c_str(), "%lf,%lf,%lf,%lf,%lf", &bx, &by, &dx, &dy, &len) != 5)
    throw SchemaError("--section expects \"bx,by,dx,dy,length\", got \"" + text + "\"");
  return make_section({bx, by}, {dx, dy}, len);
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

int cmd_simulate(Common& common, const std::string& x0_text, double t_max, int max_jumps,
                 const std::string& format, bool stop_on_singular) {
  const HybridSystemDef sys = load_system_file(common);
  const Vec2 x0 = parse_point(x0_text, "--x0");
  FlowOptions opts = FlowOptions::from(sys.tol);
  opts.stop_on_singular = stop_on_singular;

  const HybridTrajectory traj = flow_hybrid(sys, x0, t_max, max_jumps, opts);

  if (format == "csv") {
    std::ostringstream csv;
    write_trajectory_csv(traj, csv);
    emit(common, "trajectory.csv", csv.str());
  } else {
    emit(common, "trajectory.json", trajectory_to_json(traj).dump(2) + "\n");
  }
  finish_manifest(common, "trajectory");

  std::cout << "termination: " << termination_name(traj.termination)
            << (traj.termination_detail.empty() ? "" : " (" + traj.termination_detail + ")")
            << ", jumps: " << traj.jump_count << ", t_end: " << format_g17(traj.t_end) << "\n";
  return traj.termination == Termination::StepFailure ? kExitRuntime : 0;
}

// ---------------------------------------------------------------------------
// analyze
// ---------------------------------------------------------------------------

int cmd_analyze(Common& common, const std::string& spec_path, int max_order) {
  const HybridSystemDef sys = load_system_file(common);
  const std::string spec_text = slurp(spec_path);
  common.manifest.input_hashes.push_back({spec_path, cli::fnv1a_hex(spec_text)});
  const PolycycleSpec spec = load_polycycle_spec(spec_text, sys);

  const StabilityVerdict verdict = analyze_polycycle(sys, spec, max_order);
  emit(common, "verdict.json", verdict_to_json(verdict).dump(2) + "\n");
  finish_manifest(common, "verdict");

  std::cout << "graphic number r = "
            << (verdict.r.infinite ? std::string("infinity") : format_g17(verdict.r.value))
            << ", verdict: " << verdict_name(verdict.verdict) << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// return-map
// ---------------------------------------------------------------------------

int cmd_return_map(Common& common, const std::string& section_text, const std::string& grid_text,
                   const std::string& bracket_text, int orientation, double t_max, int max_jumps,
                   double fp_tol, bool plot) {
  const HybridSystemDef sys = load_system_file(common);
  const SectionDef section = parse_section(section_text);
  ReturnMapOptions opts = ReturnMapOptions::from(sys.tol);
  opts.orientation = orientation;
  opts.t_max = t_max;
  opts.max_jumps = max_jumps;

  if (!grid_text.empty()) {
    std::vector<double> grid;
    std::stringstream ss(grid_text);
    std::string item;
    while (std::getline(ss, item, ',')) grid.push_back(std::stod(item));
    const ProbeResult probe = stability_probe(sys, section, grid, opts);
    std::ostringstream csv;
    write_probe_csv(probe, csv);
    emit(common, "probe.csv", csv.str());
    emit(common, "probe.json", probe_to_json(probe).dump(2) + "\n");
    if (plot) emit(common, "probe.svg", cli::probe_svg(probe, common.reproducible));
    finish_manifest(common, "probe");
    std::cout << "empirical verdict: " << probe_verdict_name(probe.verdict)
              << (probe.degenerate ? " (degenerate)" : "") << ", failures: " << probe.failures
              << "\n";
    return 0;
  }

  if (!bracket_text.empty()) {
    double lo, hi;
    if (std::sscanf(bracket_text.c_str(), "%lf,%lf", &lo, &hi) != 2)
      throw SchemaError("--bracket expects \"lo,hi\"");
    const FixedPointResult fp = find_fixed_point(sys, section, lo, hi, fp_tol, opts);
    emit(common, "fixed_point.json", fixed_point_to_json(fp).dump(2) + "\n");
    std::ostringstream csv;
    write_trajectory_csv(fp.orbit, csv);
    emit(common, "orbit.csv", csv.str());
    finish_manifest(common, "fixed_point");
    std::cout << "s* = " << format_g17(fp.s_star) << ", gap = " << format_g17(fp.gap)
              << ", period = " << format_g17(fp.period_time)
              << ", jumps/period = " << fp.jumps_per_period
              << (fp.degenerate ? " (degenerate)" : "") << "\n";
    return 0;
  }

  throw SchemaError("return-map needs --grid or --bracket");
}

// ---------------------------------------------------------------------------
// validate
// ---------------------------------------------------------------------------

namespace checks {

json derivatives(const HybridSystemDef& sys, bool& ok) {
  std::mt19937 rng(0xd1ffe);
  std::uniform_real_distribution<double> coord(-2.0, 2.0);
  std::vector<std::pair<std::string, Expression>> exprs;
  for (const ManifoldDef& m : sys.manifolds) {
    exprs.push_back({"manifold " + m.name + " h", m.h});
    exprs.push_back({"manifold " + m.name + " jump[0]", m.jump[0]});
    exprs.push_back({"manifold " + m.name + " jump[1]", m.jump[1]});
  }
  for (std::size_t i = 0; i < sys.fields.size(); ++i) {
    exprs.push_back({"field " + std::to_string(i) + " f[0]", sys.fields[i].f[0]});
    exprs.push_back({"field " + std::to_string(i) + " f[1]", sys.fields[i].f[1]});
  }
  json items = json::array();
  bool all = true;
  for (const auto& [label, e] : exprs) {
    double worst = 0.0;
    int tested = 0;
    for (const std::string var : {"x", "y"}) {
      Expression de;
      try {
        de = e.differentiate(var);
      } catch (const Error&) {
        continue;
      }
      for (int trial = 0; trial < 60 && tested < 20; ++trial) {
        const double x = coord(rng), y = coord(rng);
        const double h = 1e-5;
        try {
          const std::map<std::string, double> at{{"x", x}, {"y", y}};
          std::map<std::string, double> up = at, dn = at;
          up[var] += h;
          dn[var] -= h;
          const double fd = (e.evaluate(up) - e.evaluate(dn)) / (2 * h);
          const double sym = de.evaluate(at);
          if (!std::isfinite(fd) || !std::isfinite(sym) || std::fabs(sym) > 1e5) continue;
          worst = std::max(worst, std::fabs(sym - fd) / (1.0 + std::fabs(sym)));
          ++tested;
        } catch (const Error&) {
          continue;
        }
      }
    }
    const bool pass = tested == 0 || worst <= 1e-5;
    all = all && pass;
    items.push_back(
        {{"expression", label}, {"points", tested}, {"max_rel_err", worst}, {"pass", pass}});
  }
  ok = all;
  return json{{"check", "derivatives"}, {"pass", all}, {"items", std::move(items)}};
}

json dulac(const HybridSystemDef& sys, const Vec2& guess, double eps, bool& ok) {
  ok = true;
  Vec2 saddle;
  std::size_t field_index = 0;
  try {
    field_index = region_of(sys, guess);
    saddle = find_equilibrium(sys.fields[field_index], guess, sys.tol.newton_tol);
    field_index = region_of(sys, saddle);
    saddle_info(sys.fields[field_index], saddle);
  } catch (const Error& e) {
    return json{{"check", "dulac"},
                {"pass", true},
                {"skipped", true},
                {"note", std::string("no hyperbolic saddle found: ") + e.what()}};
  }
  // one cheap call to learn delta, then a grid inside the sector
  const DulacReport probe = dulac_bounds_check(sys.fields[field_index], saddle, eps, {1e-3}, sys);
  std::vector<double> grid;
  for (int i = 0; i < 10; ++i)
    grid.push_back(0.01 * probe.delta * std::pow(20.0, static_cast<double>(i) / 9.0));
  const DulacReport rep = dulac_bounds_check(sys.fields[field_index], saddle, eps, grid, sys);
  ok = rep.all_hold;
  json points = json::array();
  for (const auto& pt : rep.points)
    points.push_back({{"x", pt.x},
                      {"D", pt.value},
                      {"lower", pt.lower},
                      {"upper", pt.upper},
                      {"margin", pt.margin}});
  return json{{"check", "dulac"},
              {"pass", rep.all_hold},
              {"saddle", {saddle.x, saddle.y}},
              {"delta", rep.delta},
              {"eps", rep.eps},
              {"nu", rep.nu},
              {"lambda", rep.lambda},
              {"min_margin", rep.min_margin},
              {"points", std::move(points)}};
}

json transition(const HybridSystemDef& sys, bool& ok) {
  ok = true;
  json items = json::array();
  for (std::size_t mi = 0; mi < sys.manifolds.size(); ++mi) {
    const ManifoldDef& m = sys.manifolds[mi];
    // a manifold point to anchor the chart walk
    Vec2 p0;
    bool found = false;
    for (double x0 : {0.0, 0.5, -0.5, 1.0, -1.0}) {
      for (double y0 : {0.0, 0.5, -0.5, 1.0, -1.0}) {
        Vec2 q{x0, y0};
        for (int it = 0; it < 30; ++it) {
          const double h = m.h_at(q);
          const Vec2 g = m.grad_h(q);
          const double g2 = dot(g, g);
          if (g2 == 0.0) break;
          q = q - (h / g2) * g;
        }
        if (std::fabs(m.h_at(q)) <= sys.tol.boundary_tol) {
          p0 = q;
          found = true;
          break;
        }
      }
      if (found) break;
    }
    if (!found) continue;

    auto at_param = [&](double t) {
      Vec2 q = p0 + t * normalized(perp(m.grad_h(p0)));
      for (int it = 0; it < 30; ++it) {
        const double h = m.h_at(q);
        const Vec2 g = m.grad_h(q);
        const double g2 = dot(g, g);
        if (g2 == 0.0) break;
        q = q - (h / g2) * g;
      }
      return q;
    };

    for (int side : {+1, -1}) {
      const auto fi = field_on_side(sys, mi, p0, side);
      if (!fi) continue;
      const FieldDef& field = sys.fields[*fi];

      double prev_t = -3.0;
      double prev_l = lie_value(field, m, at_param(prev_t));
      for (int k = 1; k <= 120; ++k) {
        const double t = -3.0 + 6.0 * k / 120.0;
        const double l = lie_value(field, m, at_param(t));
        const bool crossing = std::isfinite(prev_l) && std::isfinite(l) &&
                              (prev_l * l < 0.0 || (l == 0.0 && prev_l != 0.0));
        if (crossing) {
          double lo = prev_t, hi = t, llo = prev_l;
          for (int it = 0; it < 60 && l != 0.0; ++it) {
            const double mid = 0.5 * (lo + hi);
            const double lm = lie_value(field, m, at_param(mid));
            if (llo * lm <= 0.0)
              hi = mid;
            else {
              lo = mid;
              llo = lm;
            }
          }
          const Vec2 q = at_param(l == 0.0 ? t : 0.5 * (lo + hi));
          try {
            const ContactOrder order = contact_order(field, m.h, q, 6, sys.tol);
            if (order.order && *order.order >= 2) {
              const TransitionFit fit =
                  empirical_transition_exponent(field, m.h, q, 8, 0.02, 0.2, sys.tol);
              const double rel = std::fabs(fit.exponent - *order.order) / *order.order;
              const bool pass = rel <= 0.05;
              ok = ok && pass;
              items.push_back({{"manifold", m.name},
                               {"side", side},
                               {"point", {q.x, q.y}},
                               {"contact_order", *order.order},
                               {"fitted_exponent", fit.exponent},
                               {"rel_err", rel},
                               {"pass", pass}});
            }
          } catch (const Error& e) {
            items.push_back(
                {{"manifold", m.name}, {"side", side}, {"point", {q.x, q.y}}, {"note", e.what()}});
          }
        }
        prev_t = t;
        prev_l = l;
      }
    }
  }
  json out{{"check", "transition"}, {"pass", ok}, {"items", std::move(items)}};
  if (out["items"].empty()) out["note"] = "no tangency found on any manifold";
  return out;
}

}  // namespace checks

int cmd_validate(Common& common, const std::string& checks_text, const std::string& guess_text,
                 double eps) {
  const HybridSystemDef sys = load_system_file(common);
  const Vec2 guess = parse_point(guess_text, "--guess");

  std::vector<std::string> wanted;
  std::stringstream ss(checks_text);
  std::string item;
  while (std::getline(ss, item, ',')) wanted.push_back(item);

  json results = json::array();
  bool all_ok = true;
  double failing_margin = 0.0;
  for (const std::string& name : wanted) {
    bool ok = true;
    if (name == "derivatives") {
      results.push_back(checks::derivatives(sys, ok));
    } else if (name == "dulac") {
      json r = checks::dulac(sys, guess, eps, ok);
      if (!ok && r.contains("min_margin")) failing_margin = r["min_margin"].get<double>();
      results.push_back(std::move(r));
    } else if (name == "transition") {
      results.push_back(checks::transition(sys, ok));
    } else {
      throw SchemaError("unknown check \"" + name + "\" (known: dulac, transition, derivatives)");
    }
    all_ok = all_ok && ok;
  }

  emit(common, "validation.json", json{{"pass", all_ok}, {"checks", results}}.dump(2) + "\n");
  finish_manifest(common, "validation");
  if (!all_ok) {
    std::cerr << "validation failed";
    if (failing_margin != 0.0) std::cerr << " (margin " << format_g17(failing_margin) << ")";
    std::cerr << "\n";
    return kExitCheckFailed;
  }
  std::cout << "all checks passed\n";
  return 0;
}

// ---------------------------------------------------------------------------
// classify-point
// ---------------------------------------------------------------------------

int cmd_classify_point(Common& common, const std::string& point_text, bool write_file) {
  const HybridSystemDef sys = load_system_file(common);
  const Vec2 p = parse_point(point_text, "--point");
  const PointClass pc = classify_point(sys, p);
  json j{{"point", {p.x, p.y}}};
  switch (pc.kind) {
    case PointClass::Kind::Interior:
      j["class"] = "Interior";
      j["field"] = pc.index;
      break;
    case PointClass::Kind::NonRegular:
      j["class"] = "NonRegular";
      j["reason"] = pc.reason;
      break;
    case PointClass::Kind::RegularBoundary: {
      j["class"] = "RegularBoundary";
      j["manifold"] = sys.manifolds[pc.index].name;
      j["image"] = {pc.image.x, pc.image.y};
      try {
        const BoundaryEventClass ev = classify_boundary_event(sys, p);
        json je;
        switch (ev.kind) {
          case BoundaryEventClass::Kind::JumpCrossing:
            je["kind"] = "JumpCrossing";
            break;
          case BoundaryEventClass::Kind::JumpSingularity: {
            je["kind"] = "JumpSingularity";
            json reasons = json::array();
            if (ev.tangency_at_p) reasons.push_back("TangencyAtP");
            if (ev.tangency_at_pbar) reasons.push_back("TangencyAtPbar");
            if (ev.not_local_diffeo) reasons.push_back("NotLocalDiffeo");
            je["reasons"] = reasons;
            break;
          }
          case BoundaryEventClass::Kind::FieldVanishes:
            je["kind"] = "FieldVanishes";
            break;
        }
        je["lie_in"] = ev.lie_in;
        je["lie_out"] = ev.lie_out;
        je["chart_derivative"] = ev.chart_derivative;
        j["event"] = std::move(je);
      } catch (const Error& e) {
        j["event"] = json{{"error", e.what()}};
      }
      break;
    }
  }
  std::cout << j.dump(2) << "\n";
  if (write_file) {
    emit(common, "point.json", j.dump(2) + "\n");
    finish_manifest(common, "point");
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"planar hybrid systems: simulation, polycycle stability, return maps"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand

  Common common;
  app.add_option("--config", common.config_path,
                 "system config JSON (alternative to the positional argument)");
  app.add_option("--out", common.out_dir, "output directory")->capture_default_str();
  app.add_flag("--reproducible", common.reproducible,
               "suppress timestamps so reruns are byte-identical");
  app.add_option("--tol", common.tol_overrides, "tolerance override NAME=VALUE (repeatable)");

  auto* sim = app.add_subcommand("simulate", "integrate a hybrid trajectory");
  std::string sim_config, sim_x0, sim_format = "csv";
  double sim_tmax = 10.0;
  int sim_jumps = 100;
  bool sim_stop_singular = false;
  sim->add_option("system", sim_config, "system config JSON");
  sim->add_option("--x0", sim_x0, "initial point x,y")->required();
  sim->add_option("--tmax", sim_tmax, "time horizon")->capture_default_str();
  sim->add_option("--max-jumps", sim_jumps, "jump budget")->capture_default_str();
  sim->add_option("--format", sim_format, "csv|json")->check(CLI::IsMember({"csv", "json"}));
  sim->add_flag("--stop-on-singular", sim_stop_singular, "terminate at singular events");

  auto* ana = app.add_subcommand("analyze", "polycycle stability verdict");
  std::string ana_config, ana_spec;
  int ana_order = 8;
  ana->add_option("system", ana_config, "system config JSON");
  ana->add_option("spec", ana_spec, "polycycle spec JSON")->required();
  ana->add_option("--max-order", ana_order, "contact/power order cap")->capture_default_str();

  auto* ret = app.add_subcommand("return-map", "first-return probe or fixed-point search");
  std::string ret_config, ret_section, ret_grid, ret_bracket;
  int ret_orient = 0, ret_jumps = 1000;
  double ret_tmax = 200.0, ret_fp_tol = 1e-8;
  bool ret_plot = false;
  ret->add_option("system", ret_config, "system config JSON");
  ret->add_option("--section", ret_section, "bx,by,dx,dy,length")->required();
  ret->add_option("--grid", ret_grid, "comma-separated s values (stability probe)");
  ret->add_option("--bracket", ret_bracket, "lo,hi (fixed-point bisection)");
  ret->add_option("--orientation", ret_orient, "required crossing orientation (-1, 0, 1)");
  ret->add_option("--tmax", ret_tmax, "per-point time horizon")->capture_default_str();
  ret->add_option("--max-jumps", ret_jumps, "per-point jump budget")->capture_default_str();
  ret->add_option("--fp-tol", ret_fp_tol, "bisection width tolerance")->capture_default_str();
  ret->add_flag("--plot", ret_plot, "emit probe.svg");

  auto* val = app.add_subcommand("validate", "numerical cross-checks");
  std::string val_config, val_checks = "dulac,transition,derivatives", val_guess = "0.1,0.1";
  double val_eps = 0.1;
  val->add_option("system", val_config, "system config JSON");
  val->add_option("--checks", val_checks, "subset of dulac,transition,derivatives")
      ->capture_default_str();
  val->add_option("--guess", val_guess, "saddle search start x,y")->capture_default_str();
  val->add_option("--eps", val_eps, "Dulac bound eps")->capture_default_str();

  auto* cls = app.add_subcommand("classify-point", "classify a point of the plane");
  std::string cls_config, cls_point;
  bool cls_write = false;
  cls->add_option("system", cls_config, "system config JSON");
  cls->add_option("--point", cls_point, "x,y")->required();
  cls->add_flag("--write", cls_write, "also write point.json to --out");

  CLI11_PARSE(app, argc, argv);

  for (int i = 0; i < argc; ++i) common.manifest.flags.push_back(argv[i]);

  try {
    if (sim->parsed()) {
      if (!sim_config.empty()) common.config_path = sim_config;
      common.manifest.subcommand = "simulate";
      return cmd_simulate(common, sim_x0, sim_tmax, sim_jumps, sim_format, sim_stop_singular);
    }
    if (ana->parsed()) {
      if (!ana_config.empty()) common.config_path = ana_config;
      common.manifest.subcommand = "analyze";
      return cmd_analyze(common, ana_spec, ana_order);
    }
    if (ret->parsed()) {
      if (!ret_config.empty()) common.config_path = ret_config;
      common.manifest.subcommand = "return-map";
      return cmd_return_map(common, ret_section, ret_grid, ret_bracket, ret_orient, ret_tmax,
                            ret_jumps, ret_fp_tol, ret_plot);
    }
    if (val->parsed()) {
      if (!val_config.empty()) common.config_path = val_config;
      common.manifest.subcommand = "validate";
      return cmd_validate(common, val_checks, val_guess, val_eps);
    }
    if (cls->parsed()) {
      if (!cls_config.empty()) common.config_path = cls_config;
      common.manifest.subcommand = "classify-point";
      return cmd_classify_point(common, cls_point, cls_write);
    }
  } catch (const NotHyperbolicError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNotHyperbolic;
  } catch (const SchemaError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return 0;
}
