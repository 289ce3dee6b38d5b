// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Each criterion states its tolerance inline.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "ast_gen.hpp"
#include "hybstab/polycycle.hpp"
#include "hybstab/return_map.hpp"
#include "hybstab/serialize.hpp"
#include "hybstab/singularity.hpp"
#include "test_support.hpp"

using namespace hybstab;

namespace {

struct Criterion {
  std::string name;
  std::function<void()> run;
};

struct Failure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void require(bool ok, const std::string& what) {
  if (!ok) throw Failure(what);
}

std::string fmt(double v) { return format_g17(v); }

// ---------------------------------------------------------------------------

void criterion_1_saddle() {
  const HybridSystemDef pin = load_file(config_path("pinball.json"));
  const SaddleInfo s = saddle_info(pin.fields[0], find_equilibrium(pin.fields[0], {0.3, 0.2}));
  require(std::fabs(s.jacobian.a) <= 1e-12 && std::fabs(s.jacobian.d) <= 1e-12 &&
              std::fabs(s.jacobian.b - 1.0) <= 1e-12 && std::fabs(s.jacobian.c - 9.8) <= 1e-12,
          "Jacobian differs from [[0,1],[9.8,0]]");
  require(std::fabs(s.lambda - std::sqrt(9.8)) <= 1e-9, "lambda != sqrt(9.8): " + fmt(s.lambda));
  require(std::fabs(s.nu + std::sqrt(9.8)) <= 1e-9, "nu != -sqrt(9.8): " + fmt(s.nu));
  require(std::fabs(s.ratio - 1.0) <= 1e-9, "r0 != 1: " + fmt(s.ratio));
}

void criterion_2_jump_singularities() {
  const HybridSystemDef pin = load_file(config_path("pinball.json"));
  const double v0 = pin.params.at("v0");
  for (const auto& [mi, p] : {std::pair<std::size_t, Vec2>{0, {1.0, v0}},
                              std::pair<std::size_t, Vec2>{1, {-1.0, -v0}}}) {
    const PowerOrder po = jump_power_order(pin, mi, p, 8);
    require(po.k0.has_value() && *po.k0 == 3, "power order != 3 at wall " + std::to_string(mi));
    require(std::fabs(po.coeffs[1]) <= pin.tol.coeff_tol, "chart derivative above coeff_tol");
    require(std::fabs(po.coeffs[2]) <= pin.tol.coeff_tol, "second coefficient above coeff_tol");
    require(std::fabs(po.coeffs[3]) > pin.tol.coeff_tol, "third coefficient below coeff_tol");

    SingularityQuery q;
    q.type = SingularityQuery::Type::Jump;
    q.point = p;
    q.manifold = mi;
    q.incoming_side = mi == 0 ? -1 : 1;
    q.outgoing_side = q.incoming_side;
    const SingularityReport rep = analyze_singularity(pin, q, 8);
    require(rep.n_s == 1 && rep.n_u == 1, "contact orders != 1");
    require(std::fabs(rep.ratio - 3.0) <= 1e-9, "wall ratio != 3: " + fmt(rep.ratio));
  }
}

void criterion_3_graphic_numbers() {
  const HybridSystemDef pin = load_file(config_path("pinball.json"));
  for (const auto& [file, want] :
       {std::pair{"pinball_gamma_L.spec.json", 3.0}, {"pinball_gamma_R.spec.json", 3.0},
        {"pinball_gamma.spec.json", 9.0}}) {
    const PolycycleSpec spec = load_polycycle_spec(read_file(config_path(file)), pin);
    const StabilityVerdict v = analyze_polycycle(pin, spec, 8);
    require(v.r.value == want && !v.r.infinite,
            std::string(file) + ": r = " + fmt(v.r.value) + ", expected exactly " + fmt(want));
    require(v.verdict == Verdict::Stable, std::string(file) + ": verdict not Stable");
  }
}

void criterion_4_probe() {
  const HybridSystemDef pin = load_file(config_path("pinball.json"));
  const double v0 = pin.params.at("v0");
  const SectionDef ell = make_section({0.0, 0.0}, {0.0, 1.0}, 4.0);
  std::vector<double> grid;
  for (double f : {0.005, 0.01, 0.02, 0.03, 0.05}) grid.push_back(f * v0);

  ReturnMapOptions opts = ReturnMapOptions::from(pin.tol);
  opts.orientation = 1;
  const ProbeResult fwd = stability_probe(pin, ell, grid, opts);
  require(fwd.failures == 0, "forward probe had failures");
  for (const auto& pt : fwd.points)
    require(pt.gap < 0.0, "pi(s) - s not negative at s = " + fmt(pt.s));

  const HybridSystemDef rev = load_file(config_path("pinball_reversed.json"));
  ReturnMapOptions ropts = ReturnMapOptions::from(rev.tol);
  ropts.orientation = -1;
  const ProbeResult back = stability_probe(rev, ell, grid, ropts);
  require(back.failures == 0, "reversed probe had failures");
  for (const auto& pt : back.points)
    require(pt.gap > 0.0, "reversed pi(s) - s not positive at s = " + fmt(pt.s));
}

void criterion_5_periodic_orbit() {
  const HybridSystemDef pin = load_file(config_path("pinball.json"));
  const SectionDef ell = make_section({0.0, 0.0}, {0.0, 1.0}, 8.0);
  ReturnMapOptions opts = ReturnMapOptions::from(pin.tol);
  opts.orientation = 1;
  // bracket the sign change of pi(s) - s
  const double g_lo = return_map(pin, ell, 3.0, opts).s - 3.0;
  const double g_hi = return_map(pin, ell, 3.5, opts).s - 3.5;
  require(g_lo < 0.0 && g_hi > 0.0, "bracket [3.0, 3.5] does not straddle the sign change");
  const FixedPointResult fp = find_fixed_point(pin, ell, 3.0, 3.5, 1e-8, opts);
  require(std::fabs(fp.gap) <= 1e-6, "|pi(s*) - s*| > 1e-6: " + fmt(fp.gap));
  const Vec2 start = ell.at(fp.s_star);
  const double closure = (fp.orbit.final_state() - start).norm();
  require(closure <= 1e-5, "one-period flow misses the start by " + fmt(closure));
}

void criterion_6_bouncing_ball() {
  const HybridSystemDef ball = load_file(config_path("bouncing_ball.json"));
  const HybridTrajectory traj = flow_hybrid(ball, {1.0, 0.0}, 40.0, 6, FlowOptions::from(ball.tol));
  // apexes of the five post-bounce arcs; apex = state where the velocity
  // component crosses zero on the dense output
  std::vector<double> apexes;
  for (const auto& seg : traj.segments) {
    const auto* arc = std::get_if<SmoothArc>(&seg);
    if (!arc) continue;
    double best = -1e300;
    for (const DenseStep& s : arc->steps) {
      for (int i = 0; i < 16; ++i) {
        double lo = s.t0 + (s.t1 - s.t0) * i / 16.0;
        double hi = s.t0 + (s.t1 - s.t0) * (i + 1) / 16.0;
        if (s.eval(lo).y > 0 && s.eval(hi).y < 0) {
          for (int it = 0; it < 60; ++it) {
            const double mid = 0.5 * (lo + hi);
            (s.eval(mid).y > 0 ? lo : hi) = mid;
          }
          best = std::max(best, s.eval(0.5 * (lo + hi)).x);
        }
      }
      best = std::max(best, std::max(s.y0.x, s.y1.x));
    }
    apexes.push_back(best);
  }
  require(apexes.size() >= 6, "expected six arcs (drop plus five bounces)");
  for (int n = 1; n <= 5; ++n) {
    const double want = std::pow(0.25, n);  // h0 rho^{2n} with h0 = 1, rho = 1/2
    const double got = apexes[static_cast<std::size_t>(n)];
    require(std::fabs(got - want) <= 1e-6 * want,
            "apex " + std::to_string(n) + " = " + fmt(got) + ", want " + fmt(want));
  }
  double prev = 1e300;
  for (const auto& seg : traj.segments) {
    if (const auto* ev = std::get_if<JumpEvent>(&seg)) {
      require(std::fabs(ev->pre.y) < prev, "impact speeds do not decrease monotonically");
      prev = std::fabs(ev->pre.y);
    }
  }
}

void criterion_7_dulac() {
  for (const auto& [file, lam, nu] :
       {std::tuple{"linear_saddle_2_1.json", 2.0, -1.0}, {"linear_saddle_1_3.json", 1.0, -3.0}}) {
    const HybridSystemDef sys = load_file(config_path(file));
    std::vector<double> grid;
    for (int i = 0; i < 10; ++i) grid.push_back(1e-4 * std::pow(0.25 / 1e-4, i / 9.0));
    const DulacReport rep = dulac_bounds_check(sys.fields[0], {0.0, 0.0}, 0.1, grid, sys);
    require(rep.all_hold, std::string(file) + ": sandwich bounds violated");
    for (const DulacPoint& pt : rep.points) {
      const double exact = std::pow(pt.x, -nu / lam);  // y0 (x/x0)^{|nu|/lambda}, x0 = y0 = delta = 1
      require(std::fabs(pt.value - exact) <= 1e-6 * exact,
              std::string(file) + ": D(" + fmt(pt.x) + ") = " + fmt(pt.value) + ", closed form " +
                  fmt(exact));
    }
  }
}

void criterion_8_transition_exponents() {
  const Tolerances tol;
  const Expression axis = parse_expression("y");
  for (const auto& [fy, order] : {std::pair{"2*x", 2}, {"3*x^2", 3}, {"4*x^3", 4}}) {
    std::ostringstream cfg;
    cfg << R"json({"manifolds": [], "fields": [{"signs": [], "f": ["1", ")json" << fy
        << R"json("]}]})json";
    const HybridSystemDef sys = load_system(cfg.str());
    const TransitionFit fit =
        empirical_transition_exponent(sys.fields[0], axis, {0.0, 0.0}, 8, 0.02, 0.2, tol);
    require(std::fabs(fit.exponent - order) <= 0.05 * order,
            "order " + std::to_string(order) + " fitted " + fmt(fit.exponent));
  }
}

void criterion_9_reductions() {
  // (i) Filippov specialization: identity jumps, all n_s = 1, n_u = 2
  const HybridSystemDef rt = load_file(config_path("regular_tangential.json"));
  const PolycycleSpec rt_spec =
      load_polycycle_spec(read_file(config_path("regular_tangential.spec.json")), rt);
  const StabilityVerdict rtv = analyze_polycycle(rt, rt_spec, 8);
  for (const auto& rep : rtv.reports) {
    require(rep.power_order && *rep.power_order == 1, "identity jump power order != 1");
    require(rep.n_s == 1 && rep.n_u == 2, "contact orders not (1, 2)");
    require(rep.ratio == 2.0, "corner ratio != 2: " + fmt(rep.ratio));
  }
  require(rtv.verdict == Verdict::Stable, "regular-tangential verdict not Stable");

  // (ii) smooth specialization: two-saddle loop with eigenvalue product 0.5
  const HybridSystemDef loop = load_file(config_path("two_saddle_loop.json"));
  const PolycycleSpec loop_spec =
      load_polycycle_spec(read_file(config_path("two_saddle_loop.spec.json")), loop);
  const StabilityVerdict lv = analyze_polycycle(loop, loop_spec, 8);
  require(std::fabs(lv.r.value - 0.5) <= 1e-10, "loop r != 0.5: " + fmt(lv.r.value));
  require(lv.verdict == Verdict::Unstable, "two-saddle loop verdict not Unstable");
}

void criterion_10_properties() {
  // parser round-trip on 500 generated ASTs
  {
    std::mt19937 rng(20250809);
    for (int i = 0; i < 500; ++i) {
      const Expression e = random_ast(rng, 5);
      require(parse_expression(e.str()).structurally_equal(e), "round-trip broke: " + e.str());
    }
  }
  // symbolic vs central finite differences on 100 random expressions
  {
    std::mt19937 rng(424242);
    std::uniform_real_distribution<double> point(0.2, 2.0);
    int done = 0, generated = 0;
    while (done < 100 && generated < 4000) {
      ++generated;
      const Expression e = random_ast(rng, 4);
      Expression de;
      try {
        de = e.differentiate("x");
      } catch (const Error&) {
        continue;
      }
      for (int attempt = 0; attempt < 20; ++attempt) {
        const double x = point(rng), y = point(rng);
        try {
          const double h = 1e-5;
          const double fd = (e.evaluate({{"x", x + h}, {"y", y}}) -
                             e.evaluate({{"x", x - h}, {"y", y}})) /
                            (2 * h);
          const double sym = de.evaluate({{"x", x}, {"y", y}});
          if (!std::isfinite(fd) || !std::isfinite(sym) || std::fabs(sym) > 1e5) continue;
          require(std::fabs(sym - fd) <= 1e-5 * (1.0 + std::fabs(sym)),
                  "derivative mismatch for " + e.str());
          ++done;
          break;
        } catch (const Error&) {
          continue;
        }
      }
    }
    require(done == 100, "could not evaluate 100 random derivative checks");
  }
  // determinism: bit-identical reruns on every shipped example
  {
    const char* configs[] = {"bouncing_ball.json",      "pinball.json",
                             "pinball_reversed.json",   "harmonic_circle.json",
                             "linear_saddle_2_1.json",  "linear_saddle_1_3.json",
                             "tangency_quadratic.json", "two_saddle_loop.json",
                             "regular_tangential.json"};
    for (const char* name : configs) {
      const HybridSystemDef sys = load_file(config_path(name));
      FlowOptions opts = FlowOptions::from(sys.tol);
      opts.stop_on_singular = false;
      auto run = [&] {
        std::ostringstream csv;
        write_trajectory_csv(flow_hybrid(sys, {0.3, 0.4}, 5.0, 50, opts), csv);
        return csv.str();
      };
      require(run() == run(), std::string(name) + ": reruns differ");
    }
  }
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {"pinball saddle: Jacobian [[0,1],[9.8,0]], eigenvalues +-sqrt(9.8), r0 = 1 (1e-9)",
       criterion_1_saddle},
      {"pinball walls: k0 = 3, n_s = n_u = 1, ratio 3 (1e-9)", criterion_2_jump_singularities},
      {"graphic numbers: Gamma_L -> 3, Gamma_R -> 3, Gamma -> 9, all Stable, exact",
       criterion_3_graphic_numbers},
      {"empirical probe: pi(s) < s at 5 points near 0; reversed system > 0", criterion_4_probe},
      {"periodic orbit: bracketed fixed point, |pi(s*) - s*| <= 1e-6, closure <= 1e-5",
       criterion_5_periodic_orbit},
      {"bouncing ball: apex heights h0 rho^(2n) (1e-6 rel), speeds decrease",
       criterion_6_bouncing_ball},
      {"Dulac bounds: linear saddles match the closed form (1e-6 rel), eps = 0.1",
       criterion_7_dulac},
      {"transition exponents 2, 3, 4 fitted within 5%", criterion_8_transition_exponents},
      {"reductions: regular-tangential r = 2 per corner Stable; two-saddle loop r = 0.5 Unstable",
       criterion_9_reductions},
      {"properties: 500 round-trips, 100 derivative checks (1e-5), bit-identical reruns",
       criterion_10_properties},
  };

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    std::string error;
    try {
      criteria[i].run();
    } catch (const std::exception& e) {
      error = e.what();
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (error.empty()) {
      std::printf("PASS  %2zu. %s  [%.1fs]\n", i + 1, criteria[i].name.c_str(), secs);
    } else {
      std::printf("FAIL  %2zu. %s  [%.1fs]\n      %s\n", i + 1, criteria[i].name.c_str(), secs,
                  error.c_str());
      ++failures;
    }
  }
  if (failures) std::printf("%d of %zu acceptance criteria failed\n", failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
