#include <benchmark/benchmark.h>

#include "corrkal/experiment.hpp"
#include "corrkal/filters.hpp"
#include "corrkal/noise.hpp"
#include "corrkal/rgels.hpp"

using namespace corrkal;

namespace {

struct Fixture {
  ExperimentConfig cfg = preset_config("ex1");
  JointCovariance U = build_joint_covariance(cfg.noise);
  Dataset data = make_dataset(cfg, cfg.noise.rho, 1);
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

void BM_CnkfStep(benchmark::State& state) {
  const auto& f = fixture();
  const auto cfg = cnkf_init(f.cfg.model, f.U.Q(), f.U.R(), f.U.S());
  FilterState s = FilterState::zero(2);
  Eigen::Index t = 0;
  for (auto _ : state) {
    s = cnkf_step(s, cfg, f.data.u(t), f.data.y(t));
    benchmark::DoNotOptimize(s.x_hat.data());
    t = (t + 1) % f.data.length();
  }
}
BENCHMARK(BM_CnkfStep);

void BM_AugkfStep(benchmark::State& state) {
  const auto& f = fixture();
  AugFilterState s = AugFilterState::zero(f.U.Q());
  Eigen::Index t = 0;
  for (auto _ : state) {
    s = augkf_step(s, f.cfg.model, f.U.Q(), f.U.R(), f.U.S(), f.data.u(t), f.data.y(t));
    benchmark::DoNotOptimize(s.x_hat.data());
    t = (t + 1) % f.data.length();
  }
}
BENCHMARK(BM_AugkfStep);

void BM_RlsStep(benchmark::State& state) {
  const auto n = state.range(0);
  RgelsState s = RgelsState::initial(n, n, 1e6, Eigen::VectorXd::Constant(3 * n + 1, 1e-6));
  const Eigen::VectorXd phi = Eigen::VectorXd::LinSpaced(3 * n + 1, -1.0, 1.0);
  for (auto _ : state) {
    s.rls = rls_step(s.rls, phi, 0.5);
    benchmark::DoNotOptimize(s.rls.theta.data());
  }
}
BENCHMARK(BM_RlsStep)->Arg(1)->Arg(2)->Arg(4)->Arg(8);

void BM_RunJoint(benchmark::State& state) {
  const auto& f = fixture();
  RgelsOptions opt;
  opt.algorithm = static_cast<Algorithm>(state.range(0));
  const AssumedNoise noise{f.U.Q(), f.U.R(), f.U.S()};
  for (auto _ : state) {
    auto r = run_joint(f.data, noise, opt);
    benchmark::DoNotOptimize(r.theta_final.data());
  }
  state.SetItemsProcessed(state.iterations() * f.data.length());
}
BENCHMARK(BM_RunJoint)
    ->Arg(static_cast<int>(Algorithm::kKfCnRgels))
    ->Arg(static_cast<int>(Algorithm::kSkf))
    ->Arg(static_cast<int>(Algorithm::kAugKf))
    ->Unit(benchmark::kMillisecond);

void BM_SampleCorrelated(benchmark::State& state) {
  const auto& f = fixture();
  for (auto _ : state) {
    auto s = sample_correlated(f.U, state.range(0), 3);
    benchmark::DoNotOptimize(s.v.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_SampleCorrelated)->Arg(5000)->Arg(100000)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
