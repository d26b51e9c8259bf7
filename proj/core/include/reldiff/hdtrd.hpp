#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "reldiff/lasso.hpp"
#include "reldiff/spectrum.hpp"

namespace reldiff::hdtrd {

/// y = x beta + z gamma + noise; z may have zero columns.
struct Dataset {
    Eigen::VectorXd y;
    Eigen::MatrixXd x;
    Eigen::MatrixXd z;

    Eigen::Index n() const noexcept { return y.size(); }
    Eigen::Index p1() const noexcept { return x.cols(); }
    Eigen::Index p2() const noexcept { return z.cols(); }
};

/// Throws InputError unless dimensions agree, entries are finite and n >= 4.
void validate(const Dataset& data);

struct ProjectionResiduals {
    Eigen::MatrixXd eta_hat;
    /// p1 x p2; empty when there are no controls.
    Eigen::MatrixXd h_hat;
    /// y - z gamma_hat
    Eigen::VectorXd resid;
    Eigen::VectorXd gamma_hat;
    double lambda_gamma = 0.0;
    double lambda_w = 0.0;
};

ProjectionResiduals project_and_residualize(const Dataset& data, const lasso::LambdaChoice& lambda_gamma,
                                            const lasso::LambdaChoice& lambda_w, std::uint64_t seed);

/// sum_{i != j} eta_i^T eta_j r_i r_j / (n (n - 1))
double u_statistic(const Eigen::Ref<const Eigen::MatrixXd>& eta, const Eigen::Ref<const Eigen::VectorXd>& resid);

/// sum_{i != j} (eta_i^T eta_j)^2 r_i^2 r_j^2 / (n (n - 1))
double variance_estimate(const Eigen::Ref<const Eigen::MatrixXd>& eta, const Eigen::Ref<const Eigen::VectorXd>& resid);

/// Upper normal tail 1 - Phi(x).
double normal_upper_tail(double x) noexcept;

/// How lambda_max(Sigma_eta) enters the statistic.
struct EigMethod {
    enum class Kind { mplp, mpmo, naive, fixed };

    Kind kind = Kind::mplp;
    /// Used by `fixed` only.
    double value = 0.0;

    static EigMethod fixed(double lambda_max) { return {Kind::fixed, lambda_max}; }
    /// Accepts mplp, mpmo, naive, fixed:<value>. Throws InputError otherwise.
    static EigMethod parse(const std::string& text);
    std::string name() const;
};

struct TestOptions {
    double delta0 = 0.0;
    double alpha = 0.05;
    EigMethod eig{};
    std::uint64_t seed = 0;
    lasso::LambdaChoice lambda_gamma = lasso::LambdaChoice::rate();
    lasso::LambdaChoice lambda_w = lasso::LambdaChoice::cross_validated();
    int support_size = spectrum::kDefaultSupportSize;
    int probe_count = spectrum::kDefaultProbeCount;
    int moments = spectrum::kDefaultKongMoments;
};

/// Throws InputError when delta0 < 0, alpha outside (0, 1) or spectrum sizes are invalid.
void validate(const TestOptions& options);

struct TestReport {
    double t_proj = 0.0;
    double lambda_max = 0.0;
    double lambda_max_sq = 0.0;
    double t_stat = 0.0;
    double var_hat = 0.0;
    double z_score = 0.0;
    double p_value = 1.0;
    double delta0 = 0.0;
    double alpha = 0.05;
    bool reject = false;
    /// Set when the residuals carried no variance; the report then holds p_value = 1.
    bool degenerate = false;
    std::string eig_method;
    Eigen::Index n = 0;
    Eigen::Index p1 = 0;
    Eigen::Index p2 = 0;
    double lambda_gamma = 0.0;
    double lambda_w = 0.0;
    std::vector<int> dropped_moments;
};

/// Statistic, z-score, p-value and decision from the three ingredients.
TestReport finish_report(double t_proj, double var_hat, double lambda_max, Eigen::Index n, double delta0, double alpha);

/// lambda_max(Sigma_eta) estimate by the configured method; fills `dropped` with relaxed moment orders.
double estimate_lambda_max(const Eigen::Ref<const Eigen::MatrixXd>& eta, const TestOptions& options,
                           std::vector<int>* dropped = nullptr);

/// The test on already residualized data. Throws DegenerateDataError when the variance estimate vanishes.
TestReport test_residuals(const Eigen::Ref<const Eigen::MatrixXd>& eta, const Eigen::Ref<const Eigen::VectorXd>& resid,
                          const TestOptions& options);

/// Projection, spectrum estimation, statistic and p-value.
TestReport hdtrd_test(const Dataset& data, const TestOptions& options);

}  // namespace reldiff::hdtrd
