#include <benchmark/benchmark.h>

#include <fstream>
#include <sstream>

#include "hybstab/flow.hpp"
#include "hybstab/return_map.hpp"
#include "hybstab/singularity.hpp"

using namespace hybstab;

#ifndef HYBSTAB_CONFIG_DIR
#define HYBSTAB_CONFIG_DIR "configs"
#endif

namespace {

HybridSystemDef load(const char* name) {
  std::ifstream in(std::string(HYBSTAB_CONFIG_DIR) + "/" + name);
  std::ostringstream ss;
  ss << in.rdbuf();
  return load_system(ss.str());
}

void BM_compiled_field_eval(benchmark::State& state) {
  const HybridSystemDef pin = load("pinball.json");
  double x = 0.3, y = 0.7;
  for (auto _ : state) {
    benchmark::DoNotOptimize(pin.fields[0].eval({x, y}));
    x += 1e-9;
  }
}
BENCHMARK(BM_compiled_field_eval);

void BM_symbolic_derivative(benchmark::State& state) {
  const Expression quintic = parse_expression("-15/8*v + 5/4*v^3 - 3/8*v^5");
  for (auto _ : state) {
    benchmark::DoNotOptimize(quintic.differentiate("v"));
  }
}
BENCHMARK(BM_symbolic_derivative);

void BM_bouncing_ball_five_bounces(benchmark::State& state) {
  const HybridSystemDef ball = load("bouncing_ball.json");
  const FlowOptions opts = FlowOptions::from(ball.tol);
  for (auto _ : state) {
    benchmark::DoNotOptimize(flow_hybrid(ball, {1.0, 0.0}, 20.0, 5, opts));
  }
}
BENCHMARK(BM_bouncing_ball_five_bounces);

void BM_pinball_return(benchmark::State& state) {
  const HybridSystemDef pin = load("pinball.json");
  const SectionDef ell = make_section({0.0, 0.0}, {0.0, 1.0}, 4.0);
  ReturnMapOptions opts = ReturnMapOptions::from(pin.tol);
  opts.orientation = 1;
  for (auto _ : state) {
    benchmark::DoNotOptimize(return_map(pin, ell, 0.1, opts));
  }
}
BENCHMARK(BM_pinball_return);

void BM_wall_power_order(benchmark::State& state) {
  const HybridSystemDef pin = load("pinball.json");
  const double v0 = pin.params.at("v0");
  for (auto _ : state) {
    benchmark::DoNotOptimize(jump_power_order(pin, 0, {1.0, v0}, 8));
  }
}
BENCHMARK(BM_wall_power_order);

}  // namespace

BENCHMARK_MAIN();
