#include <gtest/gtest.h>

#include <cmath>

#include <Eigen/LU>

#include "oracles.hpp"
#include "reldiff/error.hpp"
#include "reldiff/sim.hpp"

using namespace reldiff;
using Eigen::MatrixXd;
using Eigen::VectorXd;

TEST(Sim, Ar1SampleHasAr1Covariance) {
    Rng rng(1);
    const Eigen::Index n = 40000, p = 6;
    const MatrixXd u = sim::ar1_sample(n, p, 0.6, rng);
    const MatrixXd cov = u.transpose() * u / static_cast<double>(n);
    const MatrixXd target = sim::ar1_covariance(p, 0.6);
    EXPECT_LE((cov - target).cwiseAbs().maxCoeff(), 0.03);
    EXPECT_DOUBLE_EQ(target(0, 3), 0.6 * 0.6 * 0.6);
    EXPECT_EQ(target(2, 2), 1.0);
}

TEST(Sim, Ar1SampleRejectsUnitRho) {
    Rng rng(1);
    EXPECT_THROW(sim::ar1_sample(5, 5, 1.0, rng), InputError);
}

TEST(Sim, SignalVectorsHaveRequestedShape) {
    sim::ScenarioConfig cfg;
    cfg.kappa = 0.3;
    const VectorXd beta = sim::make_beta(cfg);
    ASSERT_EQ(beta.size(), cfg.p1());
    EXPECT_NEAR(beta.norm(), cfg.kappa + sim::delta0(cfg), 1e-12);
    EXPECT_EQ((beta.array() != 0.0).count(), 5);
    cfg.sparsity = sim::Sparsity::proportional;
    EXPECT_EQ((sim::make_beta(cfg).array() != 0.0).count(), cfg.p1() / 2);
    EXPECT_NEAR(sim::delta0(cfg), cfg.c0 * std::sqrt(std::log(300.0) / 200.0), 1e-15);

    const VectorXd gamma = sim::make_gamma(150);
    EXPECT_EQ(gamma(0), 3.0);
    EXPECT_EQ(gamma(1), 1.5);
    EXPECT_EQ(gamma(4), 2.0);
    EXPECT_EQ((gamma.array() != 0.0).count(), 3);
    EXPECT_THROW(sim::make_gamma(4), InputError);
}

TEST(Sim, TrueLambdaMaxMatchesConditionalCovarianceOracle) {
    for (double rho : {0.0, 0.3, 0.6, 0.9}) {
        sim::ScenarioConfig cfg;
        cfg.p = 60;
        cfg.rho = rho;
        EXPECT_NEAR(sim::true_lambda_max_eta(cfg), oracle::ar1_conditional_top_eigenvalue(cfg.p1(), rho), 1e-9)
            << "rho " << rho;
    }
    sim::TransferScenario scn;
    scn.p = 50;
    EXPECT_NEAR(sim::true_lambda_max_contrast(scn), 0.5 * oracle::ar1_top_eigenvalue(50, scn.rho), 1e-9);
}

TEST(Sim, DatasetsAreReproducibleAndDistinctAcrossReps) {
    sim::ScenarioConfig cfg;
    cfg.n = 30;
    cfg.p = 20;
    const hdtrd::Dataset a = sim::make_test_dataset(cfg, 3);
    const hdtrd::Dataset b = sim::make_test_dataset(cfg, 3);
    const hdtrd::Dataset c = sim::make_test_dataset(cfg, 4);
    EXPECT_EQ(a.y, b.y);
    EXPECT_EQ(a.x, b.x);
    EXPECT_NE(a.y, c.y);
    EXPECT_EQ(a.x.cols(), 10);
    EXPECT_EQ(a.z.cols(), 10);
    EXPECT_NE(sim::rep_seed(1, 0), sim::rep_seed(1, 1));
    EXPECT_NE(sim::rep_seed(1, 0), sim::rep_seed(2, 0));
}

TEST(Sim, ScenarioValidation) {
    sim::ScenarioConfig cfg;
    cfg.rho = 1.0;
    EXPECT_THROW(sim::validate(cfg), InputError);
    cfg = {};
    cfg.p = 8;
    EXPECT_THROW(sim::validate(cfg), InputError);
    cfg = {};
    cfg.alpha = 0.0;
    EXPECT_THROW(sim::validate(cfg), InputError);
    sim::TransferScenario scn;
    scn.s = scn.p + 1;
    EXPECT_THROW(sim::validate(scn), InputError);
    EXPECT_EQ(sim::parse_sparsity("prop"), sim::Sparsity::proportional);
    EXPECT_EQ(sim::to_string(sim::Sparsity::point), "point");
    EXPECT_THROW(sim::parse_sparsity("dense"), InputError);
    EXPECT_EQ(sim::parse_transfer_method("pool_all"), sim::TransferMethod::pool_all);
    EXPECT_THROW(sim::parse_transfer_method("oracle"), InputError);
}

TEST(Sim, KsDistance) {
    EXPECT_DOUBLE_EQ(sim::ks_uniform((VectorXd(1) << 0.5).finished()), 0.5);
    EXPECT_DOUBLE_EQ(sim::ks_uniform((VectorXd(4) << 0.125, 0.375, 0.625, 0.875).finished()), 0.125);
    EXPECT_DOUBLE_EQ(sim::ks_uniform(VectorXd::Zero(3)), 1.0);
    Rng rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    VectorXd draws(2000);
    for (auto& v : draws) v = u(rng);
    EXPECT_LT(sim::ks_uniform(draws), 0.04);
    EXPECT_THROW(sim::ks_uniform(VectorXd()), InputError);
}

TEST(Sim, MedianOfEvenAndOddSamples) {
    EXPECT_EQ(sim::median({3.0, 1.0, 2.0}), 2.0);
    EXPECT_EQ(sim::median({4.0, 1.0, 2.0, 3.0}), 2.5);
}

TEST(Sim, SmallMonteCarloIsDeterministic) {
    sim::ScenarioConfig cfg;
    cfg.n = 60;
    cfg.p = 40;
    cfg.reps = 4;
    const std::vector<hdtrd::EigMethod> methods{hdtrd::EigMethod::fixed(1.0), hdtrd::EigMethod::parse("naive")};
    const auto a = sim::run_type1_power(cfg, methods);
    const auto b = sim::run_type1_power(cfg, methods);
    ASSERT_EQ(a.size(), 2u);
    for (std::size_t m = 0; m < 2; ++m) {
        EXPECT_EQ(a[m].per_rep_pvalues, b[m].per_rep_pvalues);
        EXPECT_EQ(a[m].successes + a[m].failures, 4);
        EXPECT_EQ(a[m].records.size(), 4u);
    }
    // Methods share the projection, so the U-statistic agrees across them rep by rep.
    for (std::size_t r = 0; r < 4; ++r) EXPECT_EQ(a[0].records[r].report.t_proj, a[1].records[r].report.t_proj);
}

TEST(Sim, TransferInstanceShiftsOnlyAdversarialSources) {
    sim::TransferScenario scn;
    scn.p = 40;
    scn.n0 = 30;
    scn.nk = 40;
    scn.informative = 2;
    scn.adversarial = 2;
    const sim::TransferInstance inst = sim::make_transfer_instance(scn, 0);
    ASSERT_EQ(inst.data.sources.size(), 4u);
    EXPECT_EQ(inst.source_betas[0], inst.beta0);
    EXPECT_EQ(inst.source_betas[1], inst.beta0);
    for (std::size_t k = 2; k < 4; ++k) {
        const VectorXd diff = inst.source_betas[k] - inst.beta0;
        EXPECT_NEAR(diff.norm(), scn.adversarial_scale * sim::delta0(scn), 1e-12);
        EXPECT_LE((diff.array() != 0.0).count(), scn.s);
    }
    EXPECT_EQ(inst.data.target.n(), 30);
    EXPECT_EQ(inst.data.sources[3].n(), 40);
}

TEST(Sim, LeastSquaresRecoversShrunkenSignal) {
    // n >> p: OLS on x and z jointly puts each coefficient of interest within 2 standard errors.
    sim::ScenarioConfig cfg;
    cfg.n = 4000;
    cfg.p = 10;
    cfg.kappa = 1.0;
    cfg.c0 = 0.0;
    const hdtrd::Dataset d = sim::make_test_dataset(cfg, 0);
    MatrixXd design(d.n(), 10);
    design << d.x, d.z;
    const MatrixXd gram_inv = (design.transpose() * design).inverse();
    const VectorXd ols = gram_inv * design.transpose() * d.y;
    VectorXd truth(10);
    truth << sim::make_beta(cfg), sim::make_gamma(5);
    const double sigma2 = (d.y - design * ols).squaredNorm() / static_cast<double>(d.n() - 10);
    for (Eigen::Index j = 0; j < 5; ++j)
        EXPECT_LE(std::abs(ols(j) - truth(j)), 2.0 * std::sqrt(sigma2 * gram_inv(j, j)) + 1e-12) << "j=" << j;
    EXPECT_NEAR(truth(0), 1.0 / std::sqrt(5.0), 1e-15);
}

TEST(Sim, SingleReplicationRateIsZeroOrOne) {
    sim::ScenarioConfig cfg;
    cfg.n = 40;
    cfg.p = 20;
    cfg.reps = 1;
    cfg.kappa = 2.0;
    const sim::McSummary s = sim::run_type1_power(cfg, hdtrd::EigMethod::fixed(1.0));
    EXPECT_TRUE(s.rejection_rate == 0.0 || s.rejection_rate == 1.0);
}
