#include <benchmark/benchmark.h>

#include <string>

#include "reldiff/hdtrd.hpp"
#include "reldiff/lasso.hpp"
#include "reldiff/lp.hpp"
#include "reldiff/random.hpp"
#include "reldiff/sim.hpp"
#include "reldiff/spectrum.hpp"

using namespace reldiff;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

struct Problem {
    MatrixXd x;
    VectorXd y;
};

Problem make_problem(Eigen::Index n, Eigen::Index d) {
    Rng rng(1);
    Problem p;
    p.x = sim::ar1_sample(n, d, 0.6, rng);
    VectorXd beta = VectorXd::Zero(d);
    beta.head(5).setConstant(1.0);
    p.y = p.x * beta + standard_normal_vector(n, rng);
    return p;
}

void BM_LassoFit(benchmark::State& state) {
    const Problem p = make_problem(200, state.range(0));
    const double lambda = 0.1 * lasso::lambda_max(p.x, p.y);
    for (auto _ : state) benchmark::DoNotOptimize(lasso::lasso_fit({p.x, p.y, lambda, false}).coef.data());
}
BENCHMARK(BM_LassoFit)->Arg(150)->Arg(300)->Arg(700)->Unit(benchmark::kMillisecond);

void BM_LassoCv(benchmark::State& state) {
    const Problem p = make_problem(200, state.range(0));
    const VectorXd grid = lasso::lambda_grid(lasso::lambda_max(p.x, p.y), 20, 0.01);
    for (auto _ : state) benchmark::DoNotOptimize(lasso::lasso_cv(p.x, p.y, grid, 5, 3).best_lambda);
}
BENCHMARK(BM_LassoCv)->Arg(150)->Arg(300)->Unit(benchmark::kMillisecond);

void BM_MultiLasso(benchmark::State& state) {
    const Eigen::Index p = state.range(0);
    Rng rng(2);
    const MatrixXd u = sim::ar1_sample(200, p, 0.6, rng);
    const MatrixXd x = u.leftCols(p / 2);
    const MatrixXd z = u.rightCols(p - p / 2);
    for (auto _ : state) benchmark::DoNotOptimize(lasso::multi_lasso_fit(x, z, 0.05).h_matrix.data());
}
BENCHMARK(BM_MultiLasso)->Arg(300)->Arg(700)->Unit(benchmark::kMillisecond);

void BM_UStatistic(benchmark::State& state) {
    Rng rng(3);
    const MatrixXd eta = standard_normal_matrix(state.range(0), 150, rng);
    const VectorXd r = standard_normal_vector(state.range(0), rng);
    for (auto _ : state) {
        benchmark::DoNotOptimize(hdtrd::u_statistic(eta, r));
        benchmark::DoNotOptimize(hdtrd::variance_estimate(eta, r));
    }
}
BENCHMARK(BM_UStatistic)->Arg(200)->Arg(1000)->Unit(benchmark::kMicrosecond);

void BM_SpectrumEstimate(benchmark::State& state) {
    Rng rng(4);
    const MatrixXd eta = standard_normal_matrix(200, 150, rng);
    spectrum::EstimatorOptions o;
    o.method = static_cast<spectrum::Method>(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(spectrum::estimate_lambda_max(eta, o).value);
    state.SetLabel(std::string(spectrum::to_string(o.method)));
}
BENCHMARK(BM_SpectrumEstimate)
    ->Arg(static_cast<int>(spectrum::Method::mplp))
    ->Arg(static_cast<int>(spectrum::Method::mpmo))
    ->Unit(benchmark::kMillisecond);

void BM_SimplexL1Fit(benchmark::State& state) {
    Rng rng(5);
    const Eigen::Index rows = state.range(0);
    const MatrixXd d = standard_normal_matrix(rows, 60, rng);
    const VectorXd y = standard_normal_vector(rows, rng);
    const MatrixXd eq = MatrixXd::Ones(1, 60);
    const VectorXd rhs = VectorXd::Ones(1);
    for (auto _ : state) benchmark::DoNotOptimize(lp::solve_l1_fit(d, y, eq, rhs).data());
}
BENCHMARK(BM_SimplexL1Fit)->Arg(100)->Arg(400)->Unit(benchmark::kMillisecond);

void BM_HdtrdTest(benchmark::State& state) {
    sim::ScenarioConfig cfg;
    cfg.p = state.range(0);
    const hdtrd::Dataset d = sim::make_test_dataset(cfg, 0);
    hdtrd::TestOptions o;
    o.delta0 = sim::delta0(cfg);
    for (auto _ : state) benchmark::DoNotOptimize(hdtrd::hdtrd_test(d, o).p_value);
}
BENCHMARK(BM_HdtrdTest)->Arg(300)->Unit(benchmark::kMillisecond)->Iterations(3);

}  // namespace

BENCHMARK_MAIN();
