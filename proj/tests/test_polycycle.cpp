#include <cmath>

#include "doctest.h"
#include "hybstab/polycycle.hpp"
#include "test_support.hpp"

using namespace hybstab;

namespace {

SingularityReport fake_ratio(double r) {
  SingularityReport rep;
  rep.kind = SingularityReport::Kind::JumpSingularity;
  rep.ratio = r;
  return rep;
}

}  // namespace

TEST_CASE("graphic_number") {
  CHECK(graphic_number({fake_ratio(1.0), fake_ratio(3.0)}).value == 3.0);
  CHECK(graphic_number({fake_ratio(1.0), fake_ratio(3.0), fake_ratio(1.0), fake_ratio(3.0)}).value ==
        9.0);

  SingularityReport inf = fake_ratio(0.0);
  inf.ratio_is_infinite = true;
  CHECK(graphic_number({fake_ratio(2.0), inf}).infinite);

  SingularityReport bad = fake_ratio(0.0);
  bad.ratio_indeterminate = true;
  CHECK_THROWS_AS(graphic_number({bad}), NumericError);
}

TEST_CASE("graphic_number is cyclically invariant") {
  const std::vector<double> ratios{0.5, 3.0, 1.25, 2.0};
  std::vector<SingularityReport> reps;
  for (double r : ratios) reps.push_back(fake_ratio(r));
  const double base = graphic_number(reps).value;
  for (std::size_t rot = 1; rot < reps.size(); ++rot) {
    std::rotate(reps.begin(), reps.begin() + 1, reps.end());
    CHECK(graphic_number(reps).value == base);
  }
}

TEST_CASE("classify_stability") {
  const double margin = 1e-6;
  CHECK(classify_stability({3.0, false}, margin).verdict == Verdict::Stable);
  CHECK(classify_stability({0.0, true}, margin).verdict == Verdict::Stable);
  CHECK(classify_stability({0.5, false}, margin).verdict == Verdict::Unstable);
  const StabilityVerdict at_one = classify_stability({1.0, false}, margin);
  CHECK(at_one.verdict == Verdict::Inconclusive);
  CHECK(at_one.inconclusive_reason.find("silent") != std::string::npos);
}

TEST_CASE("load_polycycle_spec") {
  const HybridSystemDef pin = load_file(config_path("pinball.json"));
  const PolycycleSpec spec =
      load_polycycle_spec(read_file(config_path("pinball_gamma.spec.json")), pin);
  CHECK(spec.singularities.size() == 4);
  CHECK(spec.edges.size() == 4);
  CHECK(spec.singularities[1].manifold == 0);
  CHECK(spec.section.length == 4.0);

  CHECK_THROWS_AS(load_polycycle_spec(R"({"singularities": []})", pin), SchemaError);
  CHECK_THROWS_AS(load_polycycle_spec(R"json({
    "singularities": [{"type": "jump", "p": [1, 0], "manifold": "nope",
                       "incoming_side": 1, "outgoing_side": 1}],
    "edges": [{"from": 0, "to": 0}],
    "section": {"base": [0, 0], "direction": [0, 1], "length": 1}
  })json",
                                      pin),
                  SchemaError);
}

TEST_CASE("verify_connections: pinball left lobe closes") {
  const HybridSystemDef pin = load_file(config_path("pinball.json"));
  const PolycycleSpec spec =
      load_polycycle_spec(read_file(config_path("pinball_gamma_L.spec.json")), pin);
  std::vector<SingularityReport> reports;
  for (const auto& q : spec.singularities) reports.push_back(analyze_singularity(pin, q, 8));
  const auto residuals = verify_connections(pin, spec, reports);
  REQUIRE(residuals.size() == 2);
  for (const auto& r : residuals) {
    INFO("edge " << r.edge << " note: " << r.note);
    CHECK(r.pass);
    CHECK(r.residual <= 1e-4);
  }
}

TEST_CASE("verify_connections: perturbed gravity breaks the pinball connections") {
  // g changed by 5% with the jump conjugation constant left at the original
  // separatrix speed: the wall corner no longer matches the saddle loop
  std::string cfg = read_file(config_path("pinball.json"));
  const auto pos = cfg.find("9.8");
  REQUIRE(pos != std::string::npos);
  cfg.replace(pos, 3, "10.29");
  const HybridSystemDef pin = load_system(cfg);
  const PolycycleSpec spec =
      load_polycycle_spec(read_file(config_path("pinball_gamma_L.spec.json")), pin);
  std::vector<SingularityReport> reports;
  for (const auto& q : spec.singularities) reports.push_back(analyze_singularity(pin, q, 8));
  const auto residuals = verify_connections(pin, spec, reports);
  bool some_fail = false;
  for (const auto& r : residuals) some_fail = some_fail || !r.pass;
  CHECK(some_fail);
  CHECK_THROWS_AS(analyze_polycycle(pin, spec, 8), NotHyperbolicError);
}

TEST_CASE("verify_connections: smooth homoclinic fish loop") {
  const HybridSystemDef fish = load_system(R"json({
    "manifolds": [],
    "fields": [{"signs": [], "f": ["y", "x - x^2"]}]
  })json");
  PolycycleSpec spec;
  SingularityQuery saddle;
  saddle.type = SingularityQuery::Type::Saddle;
  saddle.point = {0.05, 0.05};
  spec.singularities.push_back(saddle);
  EdgeDecl loop;
  loop.from = 0;
  loop.to = 0;
  loop.waypoints.push_back({1.5, 0.0});
  spec.edges.push_back(loop);
  spec.section = make_section({0.2, 0.0}, {1.0, 0.0}, 1.0);

  std::vector<SingularityReport> reports{analyze_singularity(fish, spec.singularities[0], 8)};
  const auto residuals = verify_connections(fish, spec, reports);
  REQUIRE(residuals.size() == 1);
  INFO(residuals[0].note);
  CHECK(residuals[0].pass);
  CHECK(residuals[0].residual <= 1e-5);
}

TEST_CASE("analyze_polycycle: pinball verdicts are exact") {
  const HybridSystemDef pin = load_file(config_path("pinball.json"));
  for (const auto& [file, want_r] :
       {std::pair{"pinball_gamma_L.spec.json", 3.0}, {"pinball_gamma_R.spec.json", 3.0},
        {"pinball_gamma.spec.json", 9.0}}) {
    const PolycycleSpec spec = load_polycycle_spec(read_file(config_path(file)), pin);
    const StabilityVerdict v = analyze_polycycle(pin, spec, 8);
    INFO(file);
    CHECK(v.r.value == want_r);
    CHECK(!v.r.infinite);
    CHECK(v.verdict == Verdict::Stable);
  }
}

TEST_CASE("analyze_polycycle: saddle on the switching set is rejected") {
  const HybridSystemDef sys = load_system(R"json({
    "manifolds": [{"name": "m", "h": "x", "jump": ["x", "y"]}],
    "fields": [{"signs": [0], "f": ["2*x", "-y"]}]
  })json");
  PolycycleSpec spec;
  SingularityQuery q;
  q.type = SingularityQuery::Type::Saddle;
  q.point = {0.1, 0.1};
  spec.singularities.push_back(q);
  spec.edges.push_back({0, 0, {}});
  spec.section = make_section({0.5, 0.0}, {0.0, 1.0}, 1.0);
  CHECK_THROWS_AS(analyze_polycycle(sys, spec, 8), NotHyperbolicError);
}

TEST_CASE("analyze_polycycle: two-saddle loop is unstable with r = 0.5") {
  const HybridSystemDef loop = load_file(config_path("two_saddle_loop.json"));
  const PolycycleSpec spec =
      load_polycycle_spec(read_file(config_path("two_saddle_loop.spec.json")), loop);
  const StabilityVerdict v = analyze_polycycle(loop, spec, 8);
  CHECK(v.r.value == doctest::Approx(0.5).epsilon(1e-10));
  CHECK(v.verdict == Verdict::Unstable);
  // each edge crosses the glue line once, at a jump crossing
  for (const auto& c : v.connections) {
    CHECK(c.pass);
    CHECK(c.crossings == 1);
  }
  // smooth specialization: ratios are the eigenvalue ratios
  CHECK(v.reports[0].ratio == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(v.reports[1].ratio == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("analyze_polycycle: regular-tangential loop gives r = 2 per corner") {
  const HybridSystemDef rt = load_file(config_path("regular_tangential.json"));
  const PolycycleSpec spec =
      load_polycycle_spec(read_file(config_path("regular_tangential.spec.json")), rt);
  const StabilityVerdict v = analyze_polycycle(rt, spec, 8);
  CHECK(v.verdict == Verdict::Stable);
  CHECK(v.r.value == doctest::Approx(4.0).epsilon(1e-12));
  for (const auto& rep : v.reports) {
    CHECK(rep.n_s == 1);
    CHECK(rep.n_u == 2);
    REQUIRE(rep.power_order.has_value());
    CHECK(*rep.power_order == 1);  // identity jump: the Filippov specialization
    CHECK(rep.ratio == doctest::Approx(2.0).epsilon(1e-12));
  }
}

TEST_CASE("analyze_polycycle: smooth homoclinic loop has eigenvalue ratio r = 1") {
  const HybridSystemDef fish = load_system(R"json({
    "manifolds": [],
    "fields": [{"signs": [], "f": ["y", "x - x^2"]}]
  })json");
  PolycycleSpec spec;
  SingularityQuery saddle;
  saddle.type = SingularityQuery::Type::Saddle;
  saddle.point = {0.05, 0.05};
  spec.singularities.push_back(saddle);
  spec.edges.push_back({0, 0, {{1.5, 0.0}}});
  spec.section = make_section({0.2, 0.0}, {1.0, 0.0}, 1.0);
  const StabilityVerdict v = analyze_polycycle(fish, spec, 8);
  CHECK(v.r.value == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(v.verdict == Verdict::Inconclusive);
  CHECK(v.inconclusive_reason.find("silent") != std::string::npos);
}
