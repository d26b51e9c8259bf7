#include <gtest/gtest.h>

#include <Eigen/QR>

#include "oracles.hpp"
#include "reldiff/error.hpp"
#include "reldiff/lasso.hpp"
#include "reldiff/random.hpp"

using namespace reldiff;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

double objective(const MatrixXd& x, const VectorXd& y, const VectorXd& b, double lambda) {
    return 0.5 * (y - x * b).squaredNorm() / static_cast<double>(x.rows()) + lambda * b.lpNorm<1>();
}

struct Problem {
    MatrixXd x;
    VectorXd y;
};

Problem random_problem(Eigen::Index n, Eigen::Index d, std::uint64_t seed) {
    Rng rng(seed);
    Problem p;
    p.x = standard_normal_matrix(n, d, rng);
    VectorXd beta = VectorXd::Zero(d);
    for (Eigen::Index j = 0; j < std::min<Eigen::Index>(d, 4); ++j) beta(j) = 1.5 - 0.5 * static_cast<double>(j);
    p.y = p.x * beta + standard_normal_vector(n, rng);
    return p;
}

}  // namespace

TEST(Lasso, SoftThreshold) {
    EXPECT_EQ(lasso::soft_threshold(3.0, 1.0), 2.0);
    EXPECT_EQ(lasso::soft_threshold(-3.0, 1.0), -2.0);
    EXPECT_EQ(lasso::soft_threshold(0.5, 1.0), 0.0);
    EXPECT_EQ(lasso::soft_threshold(-1.0, 1.0), 0.0);
}

TEST(Lasso, MatchesProximalGradientReference) {
    for (std::uint64_t seed = 1; seed <= 6; ++seed) {
        const Eigen::Index d = seed % 2 == 0 ? 40 : 15;
        const Problem p = random_problem(30, d, seed);
        const double lambda = 0.3 * lasso::lambda_max(p.x, p.y);
        const lasso::LassoFit fit = lasso::lasso_fit({p.x, p.y, lambda, false}, 1e-12);
        const VectorXd ref = oracle::fista_lasso(p.x, p.y, lambda, 200000);
        EXPECT_LE((fit.coef - ref).cwiseAbs().maxCoeff(), 1e-6) << "seed " << seed;
        EXPECT_NEAR(fit.objective, objective(p.x, p.y, ref, lambda), 1e-9);
    }
}

TEST(Lasso, OrthonormalDesignIsSoftThresholdOfCorrelations) {
    Rng rng(7);
    const Eigen::Index n = 50, d = 8;
    const MatrixXd q = Eigen::HouseholderQR<MatrixXd>(standard_normal_matrix(n, d, rng)).householderQ() *
                       MatrixXd::Identity(n, d);
    const MatrixXd x = q * std::sqrt(static_cast<double>(n));
    const VectorXd y = standard_normal_vector(n, rng) * 2.0;
    const VectorXd corr = x.transpose() * y / static_cast<double>(n);
    for (double lambda : {0.05, 0.2, 0.5}) {
        const lasso::LassoFit fit = lasso::lasso_fit({x, y, lambda, false}, 1e-13);
        for (Eigen::Index j = 0; j < d; ++j) EXPECT_NEAR(fit.coef(j), lasso::soft_threshold(corr(j), lambda), 1e-8);
    }
}

TEST(Lasso, PenaltyAtOrAboveLambdaMaxGivesExactZeros) {
    const Problem p = random_problem(40, 25, 3);
    const double top = lasso::lambda_max(p.x, p.y);
    for (double f : {1.0, 1.5, 10.0}) {
        const lasso::LassoFit fit = lasso::lasso_fit({p.x, p.y, f * top, false});
        EXPECT_TRUE((fit.coef.array() == 0.0).all());
    }
    const lasso::LassoFit below = lasso::lasso_fit({p.x, p.y, 0.99 * top, false});
    EXPECT_GT(below.coef.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Lasso, ZeroPenaltyReproducesLeastSquares) {
    const Problem p = random_problem(60, 6, 11);
    const lasso::LassoFit fit = lasso::lasso_fit({p.x, p.y, 0.0, false}, 1e-13);
    const VectorXd ols = (p.x.transpose() * p.x).ldlt().solve(p.x.transpose() * p.y);
    EXPECT_LE((fit.coef - ols).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Lasso, KktAndTrivialCandidates) {
    for (std::uint64_t seed = 20; seed < 30; ++seed) {
        const Problem p = random_problem(35, 50, seed);
        const double lambda = 0.1 * lasso::lambda_max(p.x, p.y);
        const lasso::LassoFit fit = lasso::lasso_fit({p.x, p.y, lambda, false});
        EXPECT_LE(fit.kkt_max_violation, 1e-6);
        EXPECT_LE(fit.objective, objective(p.x, p.y, VectorXd::Zero(50), lambda) + 1e-12);
        // Objective trace never increases.
        for (std::size_t i = 1; i < fit.objective_trace.size(); ++i)
            EXPECT_LE(fit.objective_trace[i], fit.objective_trace[i - 1] + 1e-12);
    }
}

TEST(Lasso, StandardizedFitMapsBackToOriginalScale) {
    Problem p = random_problem(80, 5, 5);
    p.x.col(2) *= 50.0;
    p.x.col(3).array() += 7.0;
    const lasso::LassoFit fit = lasso::lasso_fit({p.x, p.y, 0.0, true}, 1e-13);
    MatrixXd with_one(p.x.rows(), p.x.cols() + 1);
    with_one << MatrixXd::Ones(p.x.rows(), 1), p.x;
    const VectorXd ols = (with_one.transpose() * with_one).ldlt().solve(with_one.transpose() * p.y);
    EXPECT_NEAR(fit.intercept, ols(0), 1e-7);
    EXPECT_LE((fit.coef - ols.tail(5)).cwiseAbs().maxCoeff(), 1e-7);
}

TEST(Lasso, MultiResponseRowsEqualSeparateFits) {
    Rng rng(9);
    const MatrixXd z = standard_normal_matrix(40, 12, rng);
    const MatrixXd x = z.leftCols(3) * 0.7 + standard_normal_matrix(40, 3, rng);
    const double lambda = 0.1;
    const lasso::MultiLassoFit multi = lasso::multi_lasso_fit(x, z, lambda, 1e-12);
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
        const VectorXd col = x.col(j);
        const lasso::LassoFit single = lasso::lasso_fit({z, col, lambda, false}, 1e-12);
        EXPECT_LE((multi.h_matrix.row(j).transpose() - single.coef).cwiseAbs().maxCoeff(), 1e-8);
        EXPECT_LE(multi.per_row_kkt(j), 1e-6);
    }
}

TEST(Lasso, GridIsLogSpacedAndDecreasing) {
    const VectorXd g = lasso::lambda_grid(2.0, 20, 0.01);
    ASSERT_EQ(g.size(), 20);
    EXPECT_DOUBLE_EQ(g(0), 2.0);
    EXPECT_NEAR(g(19), 0.02, 1e-15);
    for (Eigen::Index i = 1; i < g.size(); ++i) {
        EXPECT_LT(g(i), g(i - 1));
        EXPECT_NEAR(g(i) / g(i - 1), g(1) / g(0), 1e-12);
    }
}

TEST(Lasso, FoldsPartitionRowsDeterministically) {
    const auto a = lasso::fold_indices(23, 5, 42);
    const auto b = lasso::fold_indices(23, 5, 42);
    EXPECT_EQ(a, b);
    std::vector<int> seen(23, 0);
    for (const auto& f : a) {
        EXPECT_TRUE(f.size() == 4 || f.size() == 5);
        for (Eigen::Index i : f) ++seen[static_cast<std::size_t>(i)];
    }
    for (int s : seen) EXPECT_EQ(s, 1);
    EXPECT_NE(lasso::fold_indices(23, 5, 43), a);
    EXPECT_THROW(lasso::fold_indices(3, 5, 1), InputError);
}

TEST(Lasso, CrossValidationIsSeedDeterministicAndPicksGridPoint) {
    const Problem p = random_problem(60, 30, 13);
    const VectorXd grid = lasso::lambda_grid(lasso::lambda_max(p.x, p.y), 20, 0.01);
    const lasso::CvResult a = lasso::lasso_cv(p.x, p.y, grid, 5, 77);
    const lasso::CvResult b = lasso::lasso_cv(p.x, p.y, grid, 5, 77);
    EXPECT_EQ(a.best_index, b.best_index);
    EXPECT_EQ(a.best_lambda, grid(static_cast<Eigen::Index>(a.best_index)));
    // Unevaluated grid points stay at +inf, so compare exactly.
    EXPECT_EQ(a.cv_errors, b.cv_errors);
    // Early stopping never discards the minimum of the evaluated prefix.
    const lasso::CvResult full = lasso::lasso_cv(p.x, p.y, grid, 5, 77, 0);
    EXPECT_EQ(full.best_index, a.best_index);
}

TEST(Lasso, RejectsBadInput) {
    const Problem p = random_problem(10, 3, 1);
    EXPECT_THROW(lasso::lasso_fit({p.x, p.y, -1.0, false}), InputError);
    MatrixXd bad = p.x;
    bad(0, 0) = std::numeric_limits<double>::quiet_NaN();
    EXPECT_THROW(lasso::lasso_fit({bad, p.y, 0.1, false}), InputError);
    const VectorXd short_y = p.y.head(5);
    EXPECT_THROW(lasso::lasso_fit({p.x, short_y, 0.1, false}), InputError);
}

TEST(Lasso, IterationCapRaisesWithLastIterate) {
    const Problem p = random_problem(30, 20, 2);
    try {
        lasso::lasso_fit({p.x, p.y, 1e-4, false}, 1e-14, 1);
        FAIL() << "expected ConvergenceError";
    } catch (const ConvergenceError& e) {
        EXPECT_EQ(e.last_iterate().size(), 20);
    }
}
