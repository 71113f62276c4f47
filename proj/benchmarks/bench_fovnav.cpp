#include <numbers>
#include <random>

#include <benchmark/benchmark.h>

#include "fovnav/cbf.hpp"
#include "fovnav/particle_filter.hpp"
#include "fovnav/planner.hpp"
#include "fovnav/qp.hpp"

using namespace fovnav;

namespace {

std::vector<NeighborBelief> ring(int count) {
  std::vector<NeighborBelief> nb;
  for (int j = 0; j < count; ++j) {
    const double a = 2.0 * std::numbers::pi * (j + 0.5) / count;
    const Eigen::Vector2d m(2.5 * std::cos(a), 2.5 * std::sin(a));
    nb.push_back({j + 1, m, m.norm() - 0.3});
  }
  return nb;
}

void BM_Plan(benchmark::State& state) {
  PlannerParams pp;
  pp.hocbf_samples = static_cast<int>(state.range(1));
  RobotState s;
  s.velocity = {0.4, 0.1};
  const auto nb = ring(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(plan(s, std::nullopt, nb, {4.0, 0.0, 0.0}, pp));
}
BENCHMARK(BM_Plan)->Args({3, 2})->Args({3, 1})->Args({7, 2})->Unit(benchmark::kMillisecond);

void BM_QpSolve(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  std::mt19937_64 rng(5);
  std::normal_distribution<double> N(0.0, 1.0);
  Eigen::MatrixXd M(n, n), A(2 * n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) M(i, j) = N(rng);
  for (int i = 0; i < 2 * n; ++i)
    for (int j = 0; j < n; ++j) A(i, j) = N(rng);
  QpProblem qp = QpProblem::unconstrained(M.transpose() * M + Eigen::MatrixXd::Identity(n, n), Eigen::VectorXd::Zero(n));
  for (int i = 0; i < n; ++i) qp.g[i] = 3.0 * N(rng);
  qp.A_in = A;
  qp.b_in = Eigen::VectorXd::Ones(2 * n);
  for (auto _ : state) benchmark::DoNotOptimize(solve(qp));
}
BENCHMARK(BM_QpSolve)->Arg(10)->Arg(40)->Unit(benchmark::kMicrosecond);

void BM_FilterCycle(benchmark::State& state) {
  FilterParams fp;
  fp.num_particles = static_cast<int>(state.range(0));
  ParticleSet ps = ParticleSet::uniform(fp, 1);
  RobotState obs;
  const SensingModel sm;
  bool seen = false;
  for (auto _ : state) {
    ps = pf_predict(ps, fp, 0.1);
    ps = pf_update(ps, seen ? std::optional<Eigen::Vector2d>(Eigen::Vector2d(2.0, 0.3)) : std::nullopt, obs, sm, fp);
    benchmark::DoNotOptimize(confidence_ellipsoid_95(ps));
    seen = !seen;
  }
}
BENCHMARK(BM_FilterCycle)->Arg(100)->Arg(1000)->Unit(benchmark::kMicrosecond);

void BM_HocbfRows(benchmark::State& state) {
  RobotState s;
  s.velocity = {0.5, -0.2};
  s.yaw_rate = 0.3;
  const SensingModel sm;
  const CbfParams cp;
  for (auto _ : state) benchmark::DoNotOptimize(hocbf_rows(s, {2.0, 0.4}, sm, cp));
}
BENCHMARK(BM_HocbfRows);

}  // namespace

BENCHMARK_MAIN();
