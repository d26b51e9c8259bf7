#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

namespace reldiff::lasso {

inline constexpr double kDefaultTol = 1e-7;
inline constexpr int kDefaultMaxIter = 100000;
/// Grid points past the running CV minimum evaluated before a path is cut short.
inline constexpr int kDefaultPatience = 3;

/// Non-owning view of a single-response Lasso problem
///   minimize (1/2n) ||y - X b||^2 + lambda ||b||_1.
/// With `standardize` set, columns are centered and scaled to unit variance and the
/// response is centered before fitting; coefficients are mapped back to the original scale.
struct LassoProblem {
    Eigen::Ref<const Eigen::MatrixXd> design;
    Eigen::Ref<const Eigen::VectorXd> response;
    double lambda = 0.0;
    bool standardize = false;
};

struct LassoFit {
    Eigen::VectorXd coef;
    double intercept = 0.0;
    /// Objective at `coef`, in the (possibly standardized) fitting scale.
    double objective = 0.0;
    int n_iter = 0;
    /// Largest KKT residual, measured on the gradient g = X^T r / n.
    double kkt_max_violation = 0.0;
    /// Objective after every coordinate sweep.
    std::vector<double> objective_trace;
};

struct MultiLassoFit {
    /// Row j is the coefficient vector of response column j on the shared design.
    Eigen::MatrixXd h_matrix;
    Eigen::VectorXd per_row_objectives;
    Eigen::VectorXd per_row_kkt;
};

struct CvResult {
    double best_lambda = 0.0;
    std::size_t best_index = 0;
    /// Mean out-of-fold squared prediction error per grid entry; +inf where early stopping cut the path.
    Eigen::VectorXd cv_errors;
};

double soft_threshold(double value, double threshold) noexcept;

/// Smallest penalty with an all-zero solution: ||X^T y||_inf / n.
double lambda_max(const Eigen::Ref<const Eigen::MatrixXd>& design,
                  const Eigen::Ref<const Eigen::VectorXd>& response);

/// `size` log-spaced values from `lambda_max` down to `lambda_max * min_ratio`.
Eigen::VectorXd lambda_grid(double lambda_max, int size, double min_ratio);

LassoFit lasso_fit(const LassoProblem& problem, double tol = kDefaultTol,
                   int max_iter = kDefaultMaxIter);

/// Same as lasso_fit, starting coordinate descent from `start` (fitting scale).
LassoFit lasso_fit_warm(const LassoProblem& problem, const Eigen::VectorXd& start,
                        double tol = kDefaultTol, int max_iter = kDefaultMaxIter);

/// Warm-started fits along a strictly decreasing grid.
std::vector<LassoFit> lasso_path(const Eigen::Ref<const Eigen::MatrixXd>& design,
                                 const Eigen::Ref<const Eigen::VectorXd>& response,
                                 const Eigen::VectorXd& grid, double tol = kDefaultTol,
                                 int max_iter = kDefaultMaxIter);

/// K-fold cross-validation over a strictly decreasing grid. Ties go to the larger penalty.
/// The path stops after `patience` consecutive points above the running minimum (entries not
/// evaluated are +inf); patience <= 0 evaluates the whole grid.
CvResult lasso_cv(const Eigen::Ref<const Eigen::MatrixXd>& design,
                  const Eigen::Ref<const Eigen::VectorXd>& response, const Eigen::VectorXd& grid,
                  int folds, std::uint64_t seed, int patience = kDefaultPatience);

/// Row-separable multi-response Lasso: row j of the result regresses column j of `x` on `z`
/// with the shared penalty. Uses the Gram matrix of `z`, formed once.
MultiLassoFit multi_lasso_fit(const Eigen::Ref<const Eigen::MatrixXd>& x,
                              const Eigen::Ref<const Eigen::MatrixXd>& z, double lambda,
                              double tol = kDefaultTol, int max_iter = kDefaultMaxIter);

/// Shared-penalty cross-validation for multi_lasso_fit; error is summed over all response columns.
CvResult multi_lasso_cv(const Eigen::Ref<const Eigen::MatrixXd>& x,
                        const Eigen::Ref<const Eigen::MatrixXd>& z, const Eigen::VectorXd& grid,
                        int folds, std::uint64_t seed, int patience = kDefaultPatience);

/// Noise standard deviation per response column from a ridge fit with GCV-selected penalty,
/// sigma^2 = RSS / (n - df).
Eigen::VectorXd ridge_noise_sd(const Eigen::Ref<const Eigen::MatrixXd>& design,
                               const Eigen::Ref<const Eigen::MatrixXd>& responses);

/// How a penalty is chosen when the caller does not pin it.
struct LambdaChoice {
    enum class Rule { fixed, rate, cv };

    Rule rule = Rule::rate;
    /// Penalty for `fixed`, multiplier c in c * sigma * sqrt(2 log d / n) for `rate`.
    double value = 1.0;
    int folds = 5;
    int grid_size = 20;
    double min_ratio = 0.01;
    int patience = kDefaultPatience;

    static LambdaChoice fixed(double lambda) { return {Rule::fixed, lambda}; }
    static LambdaChoice rate(double c = 1.0) { return {Rule::rate, c}; }
    static LambdaChoice cross_validated(int folds = 5) { return {Rule::cv, 1.0, folds}; }
};

/// Held-out row sets of a seeded K-fold split, each sorted ascending.
std::vector<std::vector<Eigen::Index>> fold_indices(Eigen::Index n, int folds, std::uint64_t seed);

double resolve_lambda(const LambdaChoice& choice, const Eigen::Ref<const Eigen::MatrixXd>& design,
                      const Eigen::Ref<const Eigen::VectorXd>& response, std::uint64_t seed);

/// Shared penalty for multi_lasso_fit(x, z, .). The rate rule uses the root-mean-square noise
/// level over response columns.
double resolve_multi_lambda(const LambdaChoice& choice, const Eigen::Ref<const Eigen::MatrixXd>& x,
                            const Eigen::Ref<const Eigen::MatrixXd>& z, std::uint64_t seed);

}  // namespace reldiff::lasso
