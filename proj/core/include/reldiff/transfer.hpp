#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "reldiff/hdtrd.hpp"
#include "reldiff/lasso.hpp"

namespace reldiff::transfer {

/// One dataset y = X beta + noise.
struct Study {
    Eigen::VectorXd y;
    Eigen::MatrixXd x;

    Eigen::Index n() const noexcept { return y.size(); }
    Eigen::Index p() const noexcept { return x.cols(); }
};

struct MultiSourceData {
    Study target;
    std::vector<Study> sources;

    Eigen::Index p() const noexcept { return target.p(); }
};

/// Throws InputError unless every study is consistent, finite, shares p and has n >= 4.
void validate(const MultiSourceData& data);
void validate(const Study& study, const char* label);

/// delta0 = c0 sqrt(log p / n0)
double delta0_from_c0(double c0, Eigen::Index p, Eigen::Index n0);

/// Differenced model over the first min(n0, nk) rows: y0k = y0 - yk, x0k = x0 - xk.
struct ContrastData {
    Eigen::VectorXd y0k;
    Eigen::MatrixXd x0k;
    Eigen::MatrixXd xk;

    Eigen::Index rows() const noexcept { return y0k.size(); }
};

ContrastData build_contrast(const Study& target, const Study& source);

/// As build_contrast, after independently shuffling the rows of both studies with `seed`.
ContrastData build_contrast_shuffled(const Study& target, const Study& source, std::uint64_t seed);

/// Lasso of y0k on x0k.
Eigen::VectorXd contrast_initial_beta(const ContrastData& cd, const lasso::LambdaChoice& lambda, std::uint64_t seed,
                                      double* lambda_used = nullptr);

struct SourceProjection {
    /// p x p; row j regresses column j of xk on x0k.
    Eigen::MatrixXd h;
    /// xk - x0k h^T
    Eigen::MatrixXd eta;
    double lambda_w = 0.0;
};

SourceProjection source_projection(const ContrastData& cd, const lasso::LambdaChoice& lambda_w, std::uint64_t seed);

struct TransferOptions {
    /// delta0, alpha, eigenvalue method, seed and the lambda_w rule of the per-source tests.
    hdtrd::TestOptions test{};
    /// Penalty rule of the contrast initial estimator.
    lasso::LambdaChoice lambda_init = lasso::LambdaChoice::cross_validated();
    /// Penalty rule of the stacked fit.
    lasso::LambdaChoice lambda_unified = lasso::LambdaChoice::cross_validated();
    bool shuffle_pairing = false;
    /// Upper bound on N * p * (|selected| + 1) entries of the stacked design.
    double max_design_entries = 5e7;
};

/// Ingredients of one source test that do not depend on delta0.
struct SourceStatistics {
    double t_proj = 0.0;
    double var_hat = 0.0;
    double lambda_max = 0.0;
    Eigen::Index n = 0;
    Eigen::Index p = 0;
    bool degenerate = false;
    std::vector<int> dropped_moments;
    double lambda_init = 0.0;
    double lambda_w = 0.0;
    std::string eig_method;
};

/// Projected statistic of one contrast. Degenerate contrasts (zero variance estimate) are flagged, not thrown.
SourceStatistics source_statistics(const ContrastData& cd, const TransferOptions& options);

/// Report at transfer level delta0; degenerate sources get p_value = 1.
hdtrd::TestReport source_report(const SourceStatistics& stats, double delta0, double alpha);

/// Projected test of one contrast. Throws DegenerateDataError when the variance estimate vanishes.
hdtrd::TestReport source_test(const ContrastData& cd, const TransferOptions& options);

/// Test with eta replaced by xk and delta0 = 0.
hdtrd::TestReport source_test_unprojected(const ContrastData& cd, const TransferOptions& options);

/// Pooled-data statistic over the source rows: beta from a Lasso on [X0; Xk], covariates Xk, delta0 = 0.
hdtrd::TestReport baseline_pooled_test(const Study& target, const Study& source, const TransferOptions& options);

struct UnifiedFit {
    Eigen::VectorXd beta0;
    /// All p (|selected| + 1) coefficients: beta0 followed by the contrasts of the selected sources.
    Eigen::VectorXd coefficients;
    double lambda = 0.0;
};

/// Lasso on the stacked block design over the target and the selected sources (0-based indices).
UnifiedFit fit_unified(const MultiSourceData& data, const std::vector<std::size_t>& selected,
                       const lasso::LambdaChoice& lambda, std::uint64_t seed, double max_design_entries = 5e7);

struct TransferReport {
    /// 0-based indices of sources judged transferable.
    std::vector<std::size_t> selected;
    Eigen::VectorXd beta0_hat;
    std::vector<hdtrd::TestReport> per_source;
    double delta0 = 0.0;
    std::optional<double> c0;
    double lambda_unified = 0.0;
};

/// Per-source projected tests at options.test.delta0, selection by p_value > alpha, stacked fit.
TransferReport tutrans(const MultiSourceData& data, const TransferOptions& options);

struct CvDelta0Result {
    double best_c0 = 0.0;
    std::size_t best_index = 0;
    Eigen::VectorXd cv_errors;
};

/// K-fold choice of c0 on the target rows; sources stay intact. Ties go to the smaller c0.
CvDelta0Result cv_delta0(const MultiSourceData& data, const Eigen::VectorXd& c0_grid, int folds,
                         const TransferOptions& options, std::uint64_t seed);

}  // namespace reldiff::transfer
