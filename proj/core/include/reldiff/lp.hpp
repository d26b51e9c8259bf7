#pragma once

#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace reldiff::lp {

/// minimize cost^T x
///   subject to eq_lhs x = eq_rhs, ineq_lhs x >= ineq_rhs, x_j >= 0 where nonneg_mask[j].
/// Variables outside the mask are free.
struct LinearProgram {
    Eigen::VectorXd cost;
    Eigen::MatrixXd eq_lhs;
    Eigen::VectorXd eq_rhs;
    Eigen::MatrixXd ineq_lhs;
    Eigen::VectorXd ineq_rhs;
    std::vector<bool> nonneg_mask;

    Eigen::Index num_vars() const noexcept { return cost.size(); }
};

enum class LpStatus { optimal, infeasible, unbounded };

std::string_view to_string(LpStatus status) noexcept;

struct LpSolution {
    Eigen::VectorXd x;
    double objective = 0.0;
    LpStatus status = LpStatus::infeasible;
    /// Dual multipliers; filled when status is optimal. Inequality duals are >= 0.
    Eigen::VectorXd eq_duals;
    Eigen::VectorXd ineq_duals;
    /// |primal objective - dual objective| at the returned point.
    double duality_gap = 0.0;
    /// Largest violation of any original constraint (equality, inequality, sign).
    double max_primal_residual = 0.0;
    /// Most negative reduced cost (or largest |reduced cost| of a free variable), zero if dual feasible.
    double max_dual_residual = 0.0;
    int iterations = 0;
};

/// Throws InputError when dimensions disagree or entries are not finite.
void validate(const LinearProgram& lp);

/// Two-phase primal simplex on a dense tableau with Bland's rule on degenerate stalls.
/// Infeasible and unbounded programs are reported through `status`.
LpSolution solve_lp(const LinearProgram& lp, double feas_tol = 1e-9);

/// The program min ||design w - target||_1 s.t. eq_lhs w = eq_rhs, w >= 0, written with an
/// auxiliary block w~ >= +-(design w - target). Variables are ordered (w, w~).
LinearProgram build_l1_fit_program(const Eigen::Ref<const Eigen::MatrixXd>& design,
                                   const Eigen::Ref<const Eigen::VectorXd>& target,
                                   const Eigen::Ref<const Eigen::MatrixXd>& eq_lhs,
                                   const Eigen::Ref<const Eigen::VectorXd>& eq_rhs);

/// Solves build_l1_fit_program and returns w. Throws InfeasibleError if the constraints admit no w.
Eigen::VectorXd solve_l1_fit(const Eigen::Ref<const Eigen::MatrixXd>& design,
                             const Eigen::Ref<const Eigen::VectorXd>& target,
                             const Eigen::Ref<const Eigen::MatrixXd>& eq_lhs,
                             const Eigen::Ref<const Eigen::VectorXd>& eq_rhs);

}  // namespace reldiff::lp
