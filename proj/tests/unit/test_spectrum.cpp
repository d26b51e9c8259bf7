#include <gtest/gtest.h>

#include "oracles.hpp"
#include "reldiff/error.hpp"
#include "reldiff/random.hpp"
#include "reldiff/spectrum.hpp"

using namespace reldiff;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

MatrixXd scaled_normal(Eigen::Index n, Eigen::Index p, double sd, std::uint64_t seed) {
    Rng rng(seed);
    return standard_normal_matrix(n, p, rng) * sd;
}

}  // namespace

TEST(Spectrum, SampleSpectrumPadsZerosWhenWide) {
    const MatrixXd eta = scaled_normal(10, 25, 1.0, 1);
    const spectrum::SampleSpectrum s = spectrum::sample_spectrum(eta);
    EXPECT_EQ(s.p1, 25);
    EXPECT_EQ(s.n, 10);
    ASSERT_EQ(s.eigenvalues.size(), 25);
    for (Eigen::Index i = 0; i < 15; ++i) EXPECT_EQ(s.eigenvalues(i), 0.0);
    EXPECT_NEAR(s.eigenvalues.sum(), eta.squaredNorm() / 10.0, 1e-10);
}

TEST(Spectrum, StieltjesMatchesLongDoubleSum) {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const MatrixXd eta = scaled_normal(30, seed % 2 ? 20 : 45, 1.3, seed);
        const spectrum::SampleSpectrum s = spectrum::sample_spectrum(eta);
        std::vector<long double> eigs(s.eigenvalues.data(), s.eigenvalues.data() + s.eigenvalues.size());
        Rng rng(seed);
        std::normal_distribution<double> g(0.0, 2.0);
        for (int k = 0; k < 20; ++k) {
            const std::complex<double> z(g(rng), 0.05 + std::abs(g(rng)));
            const std::complex<double> ours = spectrum::stieltjes_empirical(s, z);
            const std::complex<long double> ref = oracle::companion_stieltjes(eigs, s.n, {z.real(), z.imag()});
            EXPECT_NEAR(ours.real(), static_cast<double>(ref.real()), 1e-12 * std::abs(ours) + 1e-14);
            EXPECT_NEAR(ours.imag(), static_cast<double>(ref.imag()), 1e-12 * std::abs(ours) + 1e-14);
            // Stieltjes transforms map the upper half-plane into itself.
            EXPECT_GT(ours.imag(), 0.0);
        }
    }
}

TEST(Spectrum, StieltjesRejectsLowerHalfPlane) {
    const spectrum::SampleSpectrum s = spectrum::sample_spectrum(scaled_normal(10, 5, 1.0, 3));
    EXPECT_THROW(spectrum::stieltjes_empirical(s, {0.5, 0.0}), DomainError);
    EXPECT_THROW(spectrum::stieltjes_empirical(s, {0.5, -1.0}), DomainError);
}

TEST(Spectrum, TianMomentsMatchTraceFormula) {
    for (std::uint64_t seed = 1; seed <= 4; ++seed) {
        const MatrixXd eta = scaled_normal(40, 15 + 10 * static_cast<Eigen::Index>(seed), 1.7, seed);
        const Eigen::Vector4d ours = spectrum::tian_moments(spectrum::sample_spectrum(eta));
        const Eigen::Vector4d ref = oracle::tian_moments(eta);
        for (int k = 0; k < 4; ++k) EXPECT_NEAR(ours(k), ref(k), 1e-9 * std::abs(ref(k))) << "k=" << k;
    }
}

TEST(Spectrum, TianMomentsNeedSevenRows) {
    EXPECT_THROW(spectrum::tian_moments(spectrum::sample_spectrum(scaled_normal(6, 3, 1.0, 1))), InputError);
}

TEST(Spectrum, TianSecondMomentIsUnbiasedForScaledIdentity) {
    // Sigma = 4 I: zeta_2 = 16. Small Monte Carlo; the full-size check lives in the acceptance run.
    double mean = 0.0, mean_unsquared = 0.0;
    const int reps = 60;
    for (int r = 0; r < reps; ++r) {
        const MatrixXd eta = scaled_normal(100, 50, 2.0, 500 + static_cast<std::uint64_t>(r));
        mean += spectrum::tian_moments(spectrum::sample_spectrum(eta))(1) / reps;
        mean_unsquared += oracle::tian_moments(eta, false)(1) / reps;
    }
    EXPECT_NEAR(mean, 16.0, 0.05 * 16.0);
    EXPECT_GT(std::abs(mean_unsquared - 16.0), 0.05 * 16.0);
}

TEST(Spectrum, KongMomentsMatchCycleEnumeration) {
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        const MatrixXd eta = scaled_normal(9, 4 + static_cast<Eigen::Index>(seed), 1.2, seed);
        const VectorXd ours = spectrum::kong_moments(eta, 5);
        const VectorXd ref = oracle::kong_moments_bruteforce(eta, 5);
        for (int k = 0; k < 5; ++k) EXPECT_NEAR(ours(k), ref(k), 1e-10 * std::max(1.0, std::abs(ref(k)))) << "k=" << k;
    }
}

TEST(Spectrum, KongMomentsAreUnbiasedForScaledIdentity) {
    // Sigma = 2 I: zeta_k = 2^k.
    VectorXd mean = VectorXd::Zero(3);
    const int reps = 60;
    for (int r = 0; r < reps; ++r)
        mean += spectrum::kong_moments(scaled_normal(80, 40, std::sqrt(2.0), 900 + static_cast<std::uint64_t>(r)), 3) / reps;
    EXPECT_NEAR(mean(0), 2.0, 0.05 * 2.0);
    EXPECT_NEAR(mean(1), 4.0, 0.05 * 4.0);
    EXPECT_NEAR(mean(2), 8.0, 0.08 * 8.0);
}

TEST(Spectrum, SupportGridSpansScaledRange) {
    const spectrum::SampleSpectrum s = spectrum::make_spectrum((VectorXd(4) << 0.5, 1.0, 2.0, 4.0).finished(), 50);
    const VectorXd grid = spectrum::support_grid(s, 9);
    ASSERT_EQ(grid.size(), 9);
    EXPECT_DOUBLE_EQ(grid(0), 0.5 / 4.0);
    EXPECT_DOUBLE_EQ(grid(8), 4.0);
    for (Eigen::Index i = 1; i < grid.size(); ++i) EXPECT_GT(grid(i), grid(i - 1));
    const VectorXd one = spectrum::support_grid(s, 1);
    ASSERT_EQ(one.size(), 1);
    EXPECT_EQ(one(0), 4.0);
}

TEST(Spectrum, MakeSpectrumValidates) {
    EXPECT_THROW(spectrum::make_spectrum((VectorXd(2) << -1.0, 2.0).finished(), 10), InputError);
    EXPECT_THROW(spectrum::make_spectrum(VectorXd::Zero(3), 10), InputError);
    const spectrum::SampleSpectrum s = spectrum::make_spectrum((VectorXd(3) << 2.0, -1e-15, 1.0).finished(), 10);
    EXPECT_EQ(s.smallest(), 0.0);
    EXPECT_EQ(s.largest(), 2.0);
}

TEST(Spectrum, QuantileRuleOnKnownWeights) {
    spectrum::SpectralModel m;
    m.support = (VectorXd(3) << 1.0, 2.0, 3.0).finished();
    m.weights = (VectorXd(3) << 0.5, 0.3, 0.2).finished();
    EXPECT_EQ(spectrum::lambda_max_from_model(m, 4), 2.0);   // threshold 0.8
    EXPECT_EQ(spectrum::lambda_max_from_model(m, 1), 1.0);   // threshold 0.5
    EXPECT_EQ(spectrum::lambda_max_from_model(m, 100), 3.0);
}

TEST(Spectrum, NaiveEstimatorShrinksTopEigenvalue) {
    const spectrum::SampleSpectrum s = spectrum::make_spectrum((VectorXd(4) << 1.0, 1.0, 1.0, 9.0).finished(), 400);
    // (1 + sqrt(4/400))^2 = 1.21
    EXPECT_NEAR(spectrum::lambda_max_naive(s), 9.0 / 1.21, 1e-12);
}

TEST(Spectrum, MpmoRecoversPointMassFromExactMoments) {
    const VectorXd support = VectorXd::LinSpaced(11, 0.5, 3.0);
    VectorXd moments(4);
    for (int k = 0; k < 4; ++k) moments(k) = std::pow(2.0, k + 1);
    const spectrum::SpectralModel m = spectrum::fit_mpmo(support, moments);
    EXPECT_NEAR(m.weights.sum(), 1.0, 1e-12);
    EXPECT_NEAR(m.weights(6), 1.0, 1e-8);  // 2.0 sits at index 6
    EXPECT_NEAR(m.objective, 0.0, 1e-8);
}

TEST(Spectrum, MpLpProgramShape) {
    const MatrixXd eta = scaled_normal(60, 20, 1.0, 4);
    const spectrum::SampleSpectrum s = spectrum::sample_spectrum(eta);
    const VectorXd support = spectrum::support_grid(s, 8);
    const spectrum::ProbePoints probes = spectrum::make_probes(s, support, 3, 11);
    ASSERT_EQ(probes.z_values.size(), 3u);
    for (const auto& z : probes.z_values) EXPECT_GT(z.imag(), 0.0);
    const Eigen::Vector4d zeta = spectrum::tian_moments(s);
    const lp::LinearProgram program = spectrum::build_mp_lp(s, probes, support, zeta);
    EXPECT_EQ(program.num_vars(), 8 + 6);
    EXPECT_EQ(program.ineq_lhs.rows(), 12);
    EXPECT_EQ(program.eq_lhs.rows(), 5);
    EXPECT_EQ(program.eq_rhs(0), 1.0);
}

TEST(Spectrum, EstimatesAreDeterministicAndOnTheSimplex) {
    const MatrixXd eta = scaled_normal(200, 100, 1.0, 8);
    for (spectrum::Method method : {spectrum::Method::mplp, spectrum::Method::mpmo}) {
        spectrum::EstimatorOptions o;
        o.method = method;
        o.seed = 5;
        const spectrum::LambdaEstimate a = spectrum::estimate_lambda_max(eta, o);
        const spectrum::LambdaEstimate b = spectrum::estimate_lambda_max(eta, o);
        EXPECT_EQ(a.value, b.value);
        EXPECT_NEAR(a.model.weights.sum(), 1.0, 1e-12);
        EXPECT_TRUE((a.model.weights.array() >= 0.0).all());
        EXPECT_GT(a.value, 0.6);
        EXPECT_LT(a.value, 1.5);
        // The sample top eigenvalue overshoots (1 + sqrt(1/2))^2 ~ 2.9; the estimate must sit well below it.
        EXPECT_LT(a.value, a.spectrum.largest());
    }
}

TEST(Spectrum, ParseMethod) {
    EXPECT_EQ(spectrum::parse_method("mplp"), spectrum::Method::mplp);
    EXPECT_EQ(spectrum::parse_method("naive"), spectrum::Method::naive);
    EXPECT_THROW(spectrum::parse_method("true"), InputError);
}
