#include "reldiff/lp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/LU>

#include "reldiff/error.hpp"

namespace reldiff::lp {

namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

constexpr double kPivotTol = 1e-9;
constexpr double kCostTol = 1e-9;
constexpr double kFlush = 1e-13;
constexpr Index kImplicit = -1;

/// Equality rows reduced to an independent set, zero inequality rows dropped, every kept row
/// divided by its largest coefficient. Rows are ordered equalities first.
struct Presolved {
    MatrixXd a;
    VectorXd b;
    Index n_eq = 0;
    std::vector<Index> eq_source;
    std::vector<Index> ineq_source;
    VectorXd row_scale;
    bool infeasible = false;
};

Presolved presolve(const LinearProgram& lp, double feas_tol) {
    Presolved ps;
    const Index nv = lp.num_vars();

    // Row echelon reduction of the equality system; basis rows have unit pivots and are
    // reduced against all earlier pivots.
    std::vector<VectorXd> echelon;
    std::vector<double> echelon_rhs;
    std::vector<Index> pivots;
    for (Index i = 0; i < lp.eq_lhs.rows(); ++i) {
        VectorXd v = lp.eq_lhs.row(i).transpose();
        double rhs = lp.eq_rhs(i);
        const double row_size = std::max(1.0, v.cwiseAbs().maxCoeff());
        for (std::size_t k = 0; k < echelon.size(); ++k) {
            const double f = v(pivots[k]);
            if (f != 0.0) {
                v.noalias() -= f * echelon[k];
                rhs -= f * echelon_rhs[k];
            }
        }
        Index pc = 0;
        const double top = nv > 0 ? v.cwiseAbs().maxCoeff(&pc) : 0.0;
        if (top <= 1e-10 * row_size) {
            if (std::abs(rhs) > feas_tol * std::max(1.0, std::abs(lp.eq_rhs(i)))) {
                ps.infeasible = true;
                return ps;
            }
            continue;
        }
        echelon_rhs.push_back(rhs / v(pc));
        echelon.push_back(v / v(pc));
        pivots.push_back(pc);
        ps.eq_source.push_back(i);
    }
    for (Index i = 0; i < lp.ineq_lhs.rows(); ++i) {
        const double top = nv > 0 ? lp.ineq_lhs.row(i).cwiseAbs().maxCoeff() : 0.0;
        if (top == 0.0) {
            if (lp.ineq_rhs(i) > feas_tol) {
                ps.infeasible = true;
                return ps;
            }
            continue;
        }
        ps.ineq_source.push_back(i);
    }

    ps.n_eq = static_cast<Index>(ps.eq_source.size());
    const Index m = ps.n_eq + static_cast<Index>(ps.ineq_source.size());
    ps.a.resize(m, nv);
    ps.b.resize(m);
    ps.row_scale.resize(m);
    for (Index k = 0; k < ps.n_eq; ++k) {
        const Index src = ps.eq_source[static_cast<std::size_t>(k)];
        ps.a.row(k) = lp.eq_lhs.row(src);
        ps.b(k) = lp.eq_rhs(src);
    }
    for (std::size_t k = 0; k < ps.ineq_source.size(); ++k) {
        const Index src = ps.ineq_source[k];
        ps.a.row(ps.n_eq + static_cast<Index>(k)) = lp.ineq_lhs.row(src);
        ps.b(ps.n_eq + static_cast<Index>(k)) = lp.ineq_rhs(src);
    }
    for (Index i = 0; i < m; ++i) {
        const double s = ps.a.row(i).cwiseAbs().maxCoeff();
        ps.row_scale(i) = s;
        ps.a.row(i) /= s;
        ps.b(i) /= s;
    }
    return ps;
}

class Tableau {
public:
    Tableau(const Presolved& ps, const VectorXd& cost, const std::vector<bool>& mask)
        : nv_(ps.a.cols()), n_eq_(ps.n_eq), m_(ps.a.rows()) {
        n_ineq_ = m_ - n_eq_;
        ncols_ = nv_ + n_ineq_ + n_eq_;
        t_ = MatrixXd::Zero(m_, ncols_);
        t_.leftCols(nv_) = ps.a;
        beta_ = ps.b;
        sign_.assign(static_cast<std::size_t>(m_), 1.0);
        basis_.assign(static_cast<std::size_t>(m_), kImplicit);
        is_basic_.assign(static_cast<std::size_t>(ncols_), 0);
        free_.assign(static_cast<std::size_t>(ncols_), 0);
        can_enter_.assign(static_cast<std::size_t>(ncols_), 1);
        art_row_.assign(static_cast<std::size_t>(m_), 0);
        dead_.assign(static_cast<std::size_t>(m_), 0);
        for (Index j = 0; j < nv_; ++j) free_[static_cast<std::size_t>(j)] = mask[static_cast<std::size_t>(j)] ? 0 : 1;

        for (Index k = 0; k < n_eq_; ++k) {
            const Index col = nv_ + n_ineq_ + k;
            if (beta_(k) < 0.0) negate_row(k);
            t_(k, col) = 1.0;
            set_basic(k, col);
            can_enter_[static_cast<std::size_t>(col)] = 0;
            art_row_[static_cast<std::size_t>(k)] = 1;
        }
        for (Index k = 0; k < n_ineq_; ++k) {
            const Index row = n_eq_ + k;
            const Index col = nv_ + k;
            t_(row, col) = -1.0;
            if (beta_(row) <= 0.0) {
                negate_row(row);
                set_basic(row, col);
            } else {
                art_row_[static_cast<std::size_t>(row)] = 1;
            }
        }

        d1_ = VectorXd::Zero(ncols_);
        d2_ = VectorXd::Zero(ncols_);
        d2_.head(nv_) = cost;
        obj1_ = 0.0;
        obj2_ = 0.0;
        for (Index i = 0; i < m_; ++i) {
            if (!art_row_[static_cast<std::size_t>(i)]) continue;
            d1_ -= t_.row(i).transpose();
            obj1_ += beta_(i);
        }
        for (Index j = 0; j < ncols_; ++j)
            if (is_basic_[static_cast<std::size_t>(j)]) d1_(j) = 0.0;
    }

    enum class Outcome { optimal, unbounded, iteration_limit };

    Outcome run(bool phase_one, int& iterations) {
        VectorXd& d = phase_one ? d1_ : d2_;
        const int limit = 20 * static_cast<int>(m_ + ncols_) + 1000;
        int degenerate_run = 0;
        bool bland = false;
        while (true) {
            if (iterations >= limit) return Outcome::iteration_limit;
            int dir = 0;
            const Index q = choose_entering(d, phase_one, bland, dir);
            if (q < 0) return Outcome::optimal;
            double theta = 0.0;
            const Index r = choose_leaving(q, dir, bland, theta);
            if (r < 0) return Outcome::unbounded;
            pivot(r, q);
            ++iterations;
            if (theta <= 1e-12) {
                if (++degenerate_run > 50) bland = true;
            } else {
                degenerate_run = 0;
                bland = false;
            }
        }
    }

    double phase_one_objective() const { return obj1_; }

    /// After phase one: pivot zero-level artificials out of the basis; rows with no usable
    /// column are redundant and frozen.
    void expel_artificials() {
        for (Index i = 0; i < m_; ++i) {
            const Index b = basis_[static_cast<std::size_t>(i)];
            const bool artificial = b == kImplicit || b >= nv_ + n_ineq_;
            if (!artificial) continue;
            beta_(i) = 0.0;
            Index best = -1;
            double best_val = 1e-7;
            for (Index j = 0; j < ncols_; ++j) {
                if (is_basic_[static_cast<std::size_t>(j)] || !can_enter_[static_cast<std::size_t>(j)]) continue;
                const double v = std::abs(t_(i, j));
                if (v > best_val) {
                    best_val = v;
                    best = j;
                }
            }
            if (best >= 0) pivot(i, best);
            else dead_[static_cast<std::size_t>(i)] = 1;
        }
    }

    Index rows() const { return m_; }
    Index cols() const { return ncols_; }
    Index num_structural() const { return nv_; }
    Index num_eq() const { return n_eq_; }
    Index num_ineq() const { return n_ineq_; }
    const std::vector<Index>& basis() const { return basis_; }
    const VectorXd& beta() const { return beta_; }
    const VectorXd& reduced_costs() const { return d2_; }
    double sign(Index row) const { return sign_[static_cast<std::size_t>(row)]; }
    bool is_free(Index col) const { return free_[static_cast<std::size_t>(col)] != 0; }

    /// Unbounded ray direction is not needed by callers; primal point of the current basis.
    VectorXd primal() const {
        VectorXd x = VectorXd::Zero(nv_);
        for (Index i = 0; i < m_; ++i) {
            const Index b = basis_[static_cast<std::size_t>(i)];
            if (b >= 0 && b < nv_) x(b) = beta_(i);
        }
        return x;
    }

private:
    void negate_row(Index i) {
        t_.row(i) *= -1.0;
        beta_(i) = -beta_(i);
        sign_[static_cast<std::size_t>(i)] = -sign_[static_cast<std::size_t>(i)];
    }

    void set_basic(Index row, Index col) {
        basis_[static_cast<std::size_t>(row)] = col;
        is_basic_[static_cast<std::size_t>(col)] = 1;
    }

    Index choose_entering(const VectorXd& d, bool phase_one, bool bland, int& dir) const {
        Index best = -1;
        double best_score = 0.0;
        bool best_free = false;
        for (Index j = 0; j < ncols_; ++j) {
            const auto js = static_cast<std::size_t>(j);
            if (is_basic_[js] || !can_enter_[js]) continue;
            const double dj = d(j);
            int jdir = 0;
            if (free_[js]) {
                if (std::abs(dj) > kCostTol) jdir = dj < 0.0 ? 1 : -1;
            } else if (dj < -kCostTol) {
                jdir = 1;
            }
            if (jdir == 0) continue;
            if (bland) {
                dir = jdir;
                return j;
            }
            const bool jfree = free_[js] != 0;
            const double score = std::abs(dj);
            // Free columns go in first during phase one: they never leave once basic.
            const bool better = (phase_one && jfree != best_free) ? jfree : score > best_score;
            if (best < 0 || better) {
                best = j;
                best_score = score;
                best_free = jfree;
                dir = jdir;
            }
        }
        return best;
    }

    Index choose_leaving(Index q, int dir, bool bland, double& theta) const {
        Index best = -1;
        double best_theta = std::numeric_limits<double>::infinity();
        double best_alpha = 0.0;
        Index best_key = 0;
        for (Index i = 0; i < m_; ++i) {
            const auto is = static_cast<std::size_t>(i);
            if (dead_[is]) continue;
            const Index b = basis_[is];
            if (b >= 0 && b < nv_ && free_[static_cast<std::size_t>(b)]) continue;
            const double alpha = dir * t_(i, q);
            if (alpha <= kPivotTol) continue;
            const double th = std::max(beta_(i), 0.0) / alpha;
            const Index key = b == kImplicit ? ncols_ + i : b;
            const double slack = 1e-12 * (1.0 + best_theta);
            if (best < 0 || th < best_theta - slack) {
                best = i;
                best_theta = th;
                best_alpha = alpha;
                best_key = key;
            } else if (th <= best_theta + slack) {
                const bool prefer = bland ? key < best_key : alpha > best_alpha;
                if (prefer) {
                    best = i;
                    best_theta = std::min(best_theta, th);
                    best_alpha = alpha;
                    best_key = key;
                }
            }
        }
        theta = best_theta;
        return best;
    }

    void pivot(Index r, Index q) {
        const double piv = t_(r, q);
        nz_cols_.clear();
        for (Index j = 0; j < ncols_; ++j) {
            double& v = t_(r, j);
            if (v == 0.0) continue;
            if (std::abs(v) < kFlush) {
                v = 0.0;
                continue;
            }
            v /= piv;
            nz_cols_.push_back(j);
        }
        beta_(r) /= piv;

        col_ = t_.col(q);
        col_(r) = 0.0;
        nz_rows_.clear();
        for (Index i = 0; i < m_; ++i) {
            if (col_(i) == 0.0) continue;
            if (std::abs(col_(i)) < kFlush) {
                col_(i) = 0.0;
                continue;
            }
            nz_rows_.push_back(i);
        }

        const bool sparse = nz_rows_.size() * 3 < static_cast<std::size_t>(m_);
        for (Index j : nz_cols_) {
            if (j == q) continue;
            const double f = t_(r, j);
            if (sparse) {
                for (Index i : nz_rows_) t_(i, j) -= f * col_(i);
            } else {
                t_.col(j).noalias() -= f * col_;
                t_(r, j) = f;
            }
        }
        t_.col(q).setZero();
        t_(r, q) = 1.0;
        beta_.noalias() -= beta_(r) * col_;

        const double d1q = d1_(q);
        const double d2q = d2_(q);
        for (Index j : nz_cols_) {
            const double f = t_(r, j);
            d1_(j) -= d1q * f;
            d2_(j) -= d2q * f;
        }
        d1_(q) = 0.0;
        d2_(q) = 0.0;
        obj1_ += d1q * beta_(r);
        obj2_ += d2q * beta_(r);

        const Index leaving = basis_[static_cast<std::size_t>(r)];
        if (leaving >= 0) is_basic_[static_cast<std::size_t>(leaving)] = 0;
        set_basic(r, q);
    }

    Index nv_;
    Index n_eq_;
    Index n_ineq_ = 0;
    Index m_;
    Index ncols_ = 0;
    MatrixXd t_;
    VectorXd beta_;
    VectorXd d1_;
    VectorXd d2_;
    double obj1_ = 0.0;
    double obj2_ = 0.0;
    std::vector<double> sign_;
    std::vector<Index> basis_;
    std::vector<char> is_basic_;
    std::vector<char> free_;
    std::vector<char> can_enter_;
    std::vector<char> art_row_;
    std::vector<char> dead_;
    std::vector<Index> nz_cols_;
    std::vector<Index> nz_rows_;
    VectorXd col_;
};

struct Certificate {
    VectorXd y;  ///< duals of the presolved, scaled, unnegated rows
    double gap = 0.0;
    double primal_residual = 0.0;
    double dual_residual = 0.0;
};

double primal_residual(const LinearProgram& lp, const VectorXd& x) {
    double worst = 0.0;
    for (Index i = 0; i < lp.eq_lhs.rows(); ++i) {
        const double s = std::max(1.0, lp.eq_lhs.row(i).cwiseAbs().maxCoeff());
        worst = std::max(worst, std::abs(lp.eq_lhs.row(i).dot(x) - lp.eq_rhs(i)) / s);
    }
    for (Index i = 0; i < lp.ineq_lhs.rows(); ++i) {
        const double s = std::max(1.0, lp.ineq_lhs.row(i).cwiseAbs().maxCoeff());
        worst = std::max(worst, std::max(0.0, lp.ineq_rhs(i) - lp.ineq_lhs.row(i).dot(x)) / s);
    }
    for (Index j = 0; j < x.size(); ++j)
        if (lp.nonneg_mask[static_cast<std::size_t>(j)]) worst = std::max(worst, std::max(0.0, -x(j)));
    return worst;
}

/// Duals and residuals from an optimal basis, given the reduced costs of the unit columns.
Certificate certify(const LinearProgram& lp, const Presolved& ps, const Tableau& tab, const VectorXd& x) {
    Certificate c;
    const Index nv = tab.num_structural();
    const Index n_ineq = tab.num_ineq();
    const VectorXd& d = tab.reduced_costs();
    c.y.resize(tab.rows());
    for (Index k = 0; k < tab.num_eq(); ++k) c.y(k) = -d(nv + n_ineq + k) * tab.sign(k);
    for (Index k = 0; k < n_ineq; ++k) c.y(tab.num_eq() + k) = d(nv + k);

    for (Index j = 0; j < nv + n_ineq; ++j) {
        const bool free_col = j < nv && tab.is_free(j);
        const double v = free_col ? std::abs(d(j)) : std::max(0.0, -d(j));
        c.dual_residual = std::max(c.dual_residual, v);
    }
    const double primal_obj = lp.cost.dot(x);
    const double dual_obj = c.y.dot(ps.b);
    c.gap = std::abs(primal_obj - dual_obj);
    c.primal_residual = primal_residual(lp, x);
    return c;
}

/// Recomputes the basic solution and duals from a fresh factorization of the basis.
Certificate refine(const LinearProgram& lp, const Presolved& ps, const Tableau& tab, VectorXd& x) {
    const Index m = tab.rows();
    const Index nv = tab.num_structural();
    const Index n_ineq = tab.num_ineq();
    MatrixXd basis_matrix = MatrixXd::Zero(m, m);
    VectorXd cb = VectorXd::Zero(m);
    for (Index i = 0; i < m; ++i) {
        const Index b = tab.basis()[static_cast<std::size_t>(i)];
        if (b >= 0 && b < nv) {
            basis_matrix.col(i) = ps.a.col(b);
            cb(i) = lp.cost(b);
        } else if (b >= nv && b < nv + n_ineq) {
            basis_matrix(tab.num_eq() + (b - nv), i) = -1.0;
        } else if (b >= nv + n_ineq) {
            basis_matrix(b - nv - n_ineq, i) = 1.0;
        } else {
            basis_matrix(i, i) = 1.0;
        }
    }
    Eigen::PartialPivLU<MatrixXd> lu(basis_matrix);
    const VectorXd xb = lu.solve(ps.b);
    x.setZero();
    for (Index i = 0; i < m; ++i) {
        const Index b = tab.basis()[static_cast<std::size_t>(i)];
        if (b >= 0 && b < nv) x(b) = xb(i);
    }
    Certificate c;
    c.y = lu.transpose().solve(cb);
    for (Index j = 0; j < nv; ++j) {
        const double dj = lp.cost(j) - c.y.dot(ps.a.col(j));
        const double v = tab.is_free(j) ? std::abs(dj) : std::max(0.0, -dj);
        c.dual_residual = std::max(c.dual_residual, v);
    }
    for (Index k = 0; k < n_ineq; ++k) c.dual_residual = std::max(c.dual_residual, std::max(0.0, -c.y(tab.num_eq() + k)));
    c.gap = std::abs(lp.cost.dot(x) - c.y.dot(ps.b));
    c.primal_residual = primal_residual(lp, x);
    return c;
}

void scatter_duals(const Presolved& ps, const Certificate& c, const LinearProgram& lp, LpSolution& sol) {
    sol.eq_duals = VectorXd::Zero(lp.eq_lhs.rows());
    sol.ineq_duals = VectorXd::Zero(lp.ineq_lhs.rows());
    for (Index k = 0; k < ps.n_eq; ++k)
        sol.eq_duals(ps.eq_source[static_cast<std::size_t>(k)]) = c.y(k) / ps.row_scale(k);
    for (std::size_t k = 0; k < ps.ineq_source.size(); ++k) {
        const Index row = ps.n_eq + static_cast<Index>(k);
        sol.ineq_duals(ps.ineq_source[k]) = c.y(row) / ps.row_scale(row);
    }
}

}  // namespace

std::string_view to_string(LpStatus status) noexcept {
    switch (status) {
        case LpStatus::optimal: return "optimal";
        case LpStatus::infeasible: return "infeasible";
        case LpStatus::unbounded: return "unbounded";
    }
    return "unknown";
}

void validate(const LinearProgram& lp) {
    const Index nv = lp.num_vars();
    if (nv == 0) throw InputError("linear program has no variables");
    if (lp.eq_lhs.rows() > 0 && lp.eq_lhs.cols() != nv)
        throw InputError("equality block has " + std::to_string(lp.eq_lhs.cols()) + " columns, expected " + std::to_string(nv));
    if (lp.ineq_lhs.rows() > 0 && lp.ineq_lhs.cols() != nv)
        throw InputError("inequality block has " + std::to_string(lp.ineq_lhs.cols()) + " columns, expected " + std::to_string(nv));
    if (lp.eq_lhs.rows() != lp.eq_rhs.size()) throw InputError("equality right-hand side has wrong length");
    if (lp.ineq_lhs.rows() != lp.ineq_rhs.size()) throw InputError("inequality right-hand side has wrong length");
    if (static_cast<Index>(lp.nonneg_mask.size()) != nv) throw InputError("nonnegativity mask has wrong length");
    if (!lp.cost.allFinite() || !lp.eq_lhs.allFinite() || !lp.eq_rhs.allFinite() || !lp.ineq_lhs.allFinite() ||
        !lp.ineq_rhs.allFinite())
        throw InputError("linear program contains non-finite entries");
}

LpSolution solve_lp(const LinearProgram& lp, double feas_tol) {
    validate(lp);
    if (!(feas_tol > 0.0)) throw InputError("feasibility tolerance must be > 0");

    LpSolution sol;
    sol.x = VectorXd::Zero(lp.num_vars());
    const Presolved ps = presolve(lp, feas_tol);
    if (ps.infeasible) {
        sol.status = LpStatus::infeasible;
        return sol;
    }
    if (ps.a.rows() == 0) {
        // Only sign constraints remain.
        for (Index j = 0; j < lp.num_vars(); ++j) {
            const bool nonneg = lp.nonneg_mask[static_cast<std::size_t>(j)];
            if (lp.cost(j) < 0.0 || (!nonneg && lp.cost(j) != 0.0)) {
                sol.status = LpStatus::unbounded;
                return sol;
            }
        }
        sol.status = LpStatus::optimal;
        sol.eq_duals = VectorXd::Zero(lp.eq_lhs.rows());
        sol.ineq_duals = VectorXd::Zero(lp.ineq_lhs.rows());
        return sol;
    }

    Tableau tab(ps, lp.cost, lp.nonneg_mask);
    int iterations = 0;
    auto outcome = tab.run(true, iterations);
    if (outcome == Tableau::Outcome::iteration_limit) throw NumericalError("simplex phase one hit its iteration limit");
    const double scale = std::max(1.0, ps.b.cwiseAbs().maxCoeff());
    if (tab.phase_one_objective() > feas_tol * scale * 10.0) {
        sol.status = LpStatus::infeasible;
        sol.iterations = iterations;
        return sol;
    }
    tab.expel_artificials();
    outcome = tab.run(false, iterations);
    sol.iterations = iterations;
    if (outcome == Tableau::Outcome::iteration_limit) throw NumericalError("simplex phase two hit its iteration limit");
    if (outcome == Tableau::Outcome::unbounded) {
        sol.status = LpStatus::unbounded;
        sol.x = tab.primal();
        return sol;
    }

    sol.x = tab.primal();
    Certificate cert = certify(lp, ps, tab, sol.x);
    auto certified = [&](const Certificate& c, double obj) {
        return c.primal_residual <= feas_tol && c.dual_residual <= 10.0 * kCostTol &&
               c.gap <= feas_tol * (1.0 + std::abs(obj));
    };
    if (!certified(cert, lp.cost.dot(sol.x))) {
        VectorXd x = sol.x;
        Certificate fresh = refine(lp, ps, tab, x);
        if (!certified(fresh, lp.cost.dot(x)))
            throw NumericalError("simplex could not certify optimality (primal residual " +
                                 std::to_string(fresh.primal_residual) + ", dual residual " +
                                 std::to_string(fresh.dual_residual) + ", gap " + std::to_string(fresh.gap) + ")");
        sol.x = x;
        cert = fresh;
    }
    for (Index j = 0; j < sol.x.size(); ++j)
        if (lp.nonneg_mask[static_cast<std::size_t>(j)] && sol.x(j) < 0.0) sol.x(j) = 0.0;

    sol.status = LpStatus::optimal;
    sol.objective = lp.cost.dot(sol.x);
    sol.duality_gap = cert.gap;
    sol.max_primal_residual = primal_residual(lp, sol.x);
    sol.max_dual_residual = cert.dual_residual;
    scatter_duals(ps, cert, lp, sol);
    return sol;
}

LinearProgram build_l1_fit_program(const Eigen::Ref<const MatrixXd>& design, const Eigen::Ref<const VectorXd>& target,
                                   const Eigen::Ref<const MatrixXd>& eq_lhs, const Eigen::Ref<const VectorXd>& eq_rhs) {
    const Index q = design.rows();
    const Index m = design.cols();
    if (q == 0 || m == 0) throw InputError("L1 fit needs a nonempty design");
    if (target.size() != q) throw InputError("L1 fit target length does not match design rows");
    if (eq_lhs.rows() != eq_rhs.size()) throw InputError("L1 fit equality block and right-hand side disagree");
    if (eq_lhs.rows() > 0 && eq_lhs.cols() != m) throw InputError("L1 fit equality block has wrong column count");

    LinearProgram lp;
    lp.cost = VectorXd::Zero(m + q);
    lp.cost.tail(q).setOnes();
    lp.eq_lhs = MatrixXd::Zero(eq_lhs.rows(), m + q);
    if (eq_lhs.rows() > 0) lp.eq_lhs.leftCols(m) = eq_lhs;
    lp.eq_rhs = eq_rhs;
    lp.ineq_lhs = MatrixXd::Zero(2 * q, m + q);
    lp.ineq_lhs.topLeftCorner(q, m) = -design;
    lp.ineq_lhs.topRightCorner(q, q).setIdentity();
    lp.ineq_lhs.bottomLeftCorner(q, m) = design;
    lp.ineq_lhs.bottomRightCorner(q, q).setIdentity();
    lp.ineq_rhs.resize(2 * q);
    lp.ineq_rhs.head(q) = -target;
    lp.ineq_rhs.tail(q) = target;
    lp.nonneg_mask.assign(static_cast<std::size_t>(m + q), false);
    for (Index j = 0; j < m; ++j) lp.nonneg_mask[static_cast<std::size_t>(j)] = true;
    return lp;
}

VectorXd solve_l1_fit(const Eigen::Ref<const MatrixXd>& design, const Eigen::Ref<const VectorXd>& target,
                      const Eigen::Ref<const MatrixXd>& eq_lhs, const Eigen::Ref<const VectorXd>& eq_rhs) {
    const LinearProgram lp = build_l1_fit_program(design, target, eq_lhs, eq_rhs);
    const LpSolution sol = solve_lp(lp);
    if (sol.status == LpStatus::infeasible)
        throw InfeasibleError("L1 fit: equality constraints admit no nonnegative solution", "equality");
    if (sol.status == LpStatus::unbounded) throw NumericalError("L1 fit reported unbounded; objective is bounded below by 0");
    return sol.x.head(design.cols());
}

}  // namespace reldiff::lp
