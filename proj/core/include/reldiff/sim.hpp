#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "reldiff/hdtrd.hpp"
#include "reldiff/random.hpp"
#include "reldiff/transfer.hpp"

namespace reldiff::sim {

enum class Sparsity { point, proportional };

std::string_view to_string(Sparsity s) noexcept;
Sparsity parse_sparsity(std::string_view name);

/// Relevance-test scenario: AR(1) covariates split into x (first p/2) and z (last p/2).
struct ScenarioConfig {
    Eigen::Index n = 200;
    Eigen::Index p = 300;
    double rho = 0.6;
    Sparsity sparsity = Sparsity::point;
    double kappa = 0.0;
    double c0 = 0.5;
    Eigen::Index reps = 500;
    std::uint64_t seed = 1;
    double alpha = 0.05;

    Eigen::Index p1() const noexcept { return p / 2; }
    Eigen::Index p2() const noexcept { return p - p / 2; }
};

void validate(const ScenarioConfig& cfg);

/// Rows drawn by u_j = rho u_{j-1} + sqrt(1 - rho^2) e_j, covariance rho^|i-j|.
Eigen::MatrixXd ar1_sample(Eigen::Index n, Eigen::Index p, double rho, Rng& rng);

/// Sigma_ij = rho^|i-j|
Eigen::MatrixXd ar1_covariance(Eigen::Index p, double rho);

double delta0(const ScenarioConfig& cfg);
Eigen::Index support_size(const ScenarioConfig& cfg);
/// ||beta|| = kappa + delta0 spread evenly over the first s coordinates.
Eigen::VectorXd make_beta(const ScenarioConfig& cfg);
/// Nonzeros 3, 1.5, 2 at control positions 1, 2, 5.
Eigen::VectorXd make_gamma(Eigen::Index p2);

/// lambda_max(Sigma_x - Sigma_xz Sigma_z^{-1} Sigma_zx) for the scenario's AR(1) blocks.
double true_lambda_max_eta(const ScenarioConfig& cfg);

hdtrd::Dataset make_test_dataset(const ScenarioConfig& cfg, Eigen::Index rep);

/// Seed of replication `rep`.
std::uint64_t rep_seed(std::uint64_t seed, Eigen::Index rep);

struct RepRecord {
    Eigen::Index rep = 0;
    bool ok = false;
    std::string error;
    hdtrd::TestReport report;
};

struct McSummary {
    std::string method;
    double rejection_rate = 0.0;
    double mc_se = 0.0;
    /// Successful replications only, in replication order.
    Eigen::VectorXd per_rep_pvalues;
    Eigen::Index successes = 0;
    Eigen::Index failures = 0;
    double runtime_seconds = 0.0;
    std::vector<RepRecord> records;
};

/// Per-method Monte Carlo summaries. The projection is computed once per replication and shared
/// by every method; delta0 and alpha come from `cfg`.
std::vector<McSummary> run_type1_power(const ScenarioConfig& cfg, const std::vector<hdtrd::EigMethod>& methods,
                                       const hdtrd::TestOptions& base = {});
McSummary run_type1_power(const ScenarioConfig& cfg, const hdtrd::EigMethod& method, const hdtrd::TestOptions& base = {});

/// Kolmogorov-Smirnov distance between a sample and Uniform(0, 1).
double ks_uniform(const Eigen::VectorXd& sample);

/// Multi-source scenario: target coefficients with s entries of `signal`; each source either equals
/// the target (informative) or is shifted by `adversarial_scale * delta0` along a random sparse direction.
struct TransferScenario {
    Eigen::Index n0 = 150;
    Eigen::Index nk = 200;
    Eigen::Index p = 200;
    Eigen::Index informative = 4;
    Eigen::Index adversarial = 0;
    Eigen::Index s = 10;
    double signal = 0.5;
    double rho = 0.6;
    double c0 = 2.0;
    double adversarial_scale = 10.0;
    Eigen::Index reps = 50;
    std::uint64_t seed = 1;
    double alpha = 0.05;

    Eigen::Index sources() const noexcept { return informative + adversarial; }
};

void validate(const TransferScenario& scn);

double delta0(const TransferScenario& scn);

struct TransferInstance {
    transfer::MultiSourceData data;
    Eigen::VectorXd beta0;
    std::vector<Eigen::VectorXd> source_betas;
    /// Validation set drawn from the target model.
    transfer::Study holdout;
};

TransferInstance make_transfer_instance(const TransferScenario& scn, Eigen::Index rep);

/// lambda_max of the contrast residual covariance, Sigma / 2 for equal source and target designs.
double true_lambda_max_contrast(const TransferScenario& scn);

enum class TransferMethod { tutrans, target_only, pool_all };

std::string_view to_string(TransferMethod m) noexcept;
TransferMethod parse_transfer_method(std::string_view name);

struct TransferRow {
    Eigen::Index rep = 0;
    TransferMethod method = TransferMethod::tutrans;
    bool ok = false;
    std::string error;
    double estimation_error = 0.0;
    double prediction_error = 0.0;
    std::vector<std::size_t> selected;
};

struct TransferSummary {
    std::vector<TransferRow> rows;
    /// Per method, in the order requested.
    std::vector<double> median_estimation_error;
    std::vector<double> median_prediction_error;
    double runtime_seconds = 0.0;
};

TransferSummary run_transfer_experiment(const TransferScenario& scn, const std::vector<TransferMethod>& methods,
                                        const transfer::TransferOptions& base = {});

double median(std::vector<double> values);

}  // namespace reldiff::sim
