#include "reldiff/lasso.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include <Eigen/SVD>

#include "reldiff/error.hpp"
#include "reldiff/random.hpp"

namespace reldiff::lasso {

namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

void check_finite(const Eigen::Ref<const MatrixXd>& m, const char* what) {
    if (!m.allFinite()) throw InputError(std::string(what) + " contains non-finite entries");
}

void check_problem(const Eigen::Ref<const MatrixXd>& x, const Eigen::Ref<const VectorXd>& y,
                   double lambda) {
    if (x.rows() != y.size())
        throw InputError("design has " + std::to_string(x.rows()) + " rows but response has " +
                         std::to_string(y.size()));
    if (x.rows() < 2) throw InputError("lasso needs at least 2 observations");
    if (x.cols() < 1) throw InputError("lasso needs at least 1 predictor");
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw InputError("lambda must be finite and >= 0");
    check_finite(x, "design");
    if (!y.allFinite()) throw InputError("response contains non-finite entries");
}

void check_grid(const VectorXd& grid) {
    if (grid.size() == 0) throw InputError("lambda grid is empty");
    for (Index i = 0; i < grid.size(); ++i) {
        if (!(grid(i) >= 0.0)) throw InputError("lambda grid entries must be >= 0");
        if (i > 0 && !(grid(i) < grid(i - 1)))
            throw InputError("lambda grid must be strictly decreasing");
    }
}

double kkt_violation(double gradient, double coef, double lambda) {
    if (coef > 0.0) return std::abs(gradient - lambda);
    if (coef < 0.0) return std::abs(gradient + lambda);
    return std::max(0.0, std::abs(gradient) - lambda);
}

/// Coordinate descent with residual updates. `b` holds the start and receives the solution.
LassoFit descend_naive(const Eigen::Ref<const MatrixXd>& x, const Eigen::Ref<const VectorXd>& y,
                       double lambda, VectorXd b, double tol, int max_iter) {
    const Index n = x.rows();
    const Index d = x.cols();
    const double inv_n = 1.0 / static_cast<double>(n);
    const VectorXd col_sq = x.colwise().squaredNorm().transpose() * inv_n;

    VectorXd r = y - x * b;
    LassoFit fit;

    auto objective = [&] { return 0.5 * r.squaredNorm() * inv_n + lambda * b.lpNorm<1>(); };

    // Zero is optimal here; sweeping could still leave roundoff-sized coefficients.
    if (b.isZero(0.0) && lambda >= lambda_max(x, y)) {
        fit.objective = objective();
        fit.objective_trace.push_back(fit.objective);
        fit.coef = std::move(b);
        return fit;
    }

    auto update = [&](Index j) {
        if (col_sq(j) <= 0.0) {
            if (b(j) != 0.0) {
                b(j) = 0.0;
            }
            return 0.0;
        }
        const double old = b(j);
        const double z = x.col(j).dot(r) * inv_n + col_sq(j) * old;
        const double updated = soft_threshold(z, lambda) / col_sq(j);
        const double delta = updated - old;
        if (delta != 0.0) {
            r.noalias() -= x.col(j) * delta;
            b(j) = updated;
        }
        return std::abs(delta);
    };

    std::vector<Index> active;
    int iter = 0;
    while (true) {
        if (iter >= max_iter)
            throw ConvergenceError("lasso coordinate descent exceeded " + std::to_string(max_iter) +
                                       " sweeps",
                                   b);
        double max_change = 0.0;
        for (Index j = 0; j < d; ++j) max_change = std::max(max_change, update(j));
        ++iter;
        fit.objective_trace.push_back(objective());

        if (max_change < tol) {
            r = y - x * b;
            const VectorXd g = x.transpose() * r * inv_n;
            double worst = 0.0;
            for (Index j = 0; j < d; ++j) worst = std::max(worst, kkt_violation(g(j), b(j), lambda));
            if (worst <= tol) {
                fit.kkt_max_violation = worst;
                break;
            }
            continue;
        }

        active.clear();
        for (Index j = 0; j < d; ++j)
            if (b(j) != 0.0) active.push_back(j);
        while (true) {
            if (iter >= max_iter)
                throw ConvergenceError("lasso coordinate descent exceeded " +
                                           std::to_string(max_iter) + " sweeps",
                                       b);
            double inner = 0.0;
            for (Index j : active) inner = std::max(inner, update(j));
            ++iter;
            fit.objective_trace.push_back(objective());
            if (inner < tol) break;
        }
    }

    fit.n_iter = iter;
    fit.objective = objective();
    fit.coef = std::move(b);
    return fit;
}

struct GramFit {
    VectorXd coef;
    double objective = 0.0;
    double kkt = 0.0;
};

/// Coordinate descent on (G, c) = (X^T X / n, X^T y / n); `yty` = y^T y / n only enters the objective.
/// xty - gram * b, touching only the columns where b is nonzero.
VectorXd gram_residual(const Eigen::Ref<const MatrixXd>& gram, const Eigen::Ref<const VectorXd>& xty, const VectorXd& b) {
    VectorXd g = xty;
    for (Index j = 0; j < b.size(); ++j)
        if (b(j) != 0.0) g.noalias() -= gram.col(j) * b(j);
    return g;
}

GramFit descend_gram(const Eigen::Ref<const MatrixXd>& gram, const Eigen::Ref<const VectorXd>& xty,
                     double yty, double lambda, VectorXd b, double tol, int max_iter) {
    const Index d = gram.cols();
    VectorXd g = gram_residual(gram, xty, b);

    auto update = [&](Index j) {
        const double q = gram(j, j);
        if (q <= 0.0) return 0.0;
        const double old = b(j);
        const double updated = soft_threshold(g(j) + q * old, lambda) / q;
        const double delta = updated - old;
        if (delta != 0.0) {
            g.noalias() -= gram.col(j) * delta;
            b(j) = updated;
        }
        return std::abs(delta);
    };

    std::vector<Index> active;
    int iter = 0;
    GramFit out;
    while (true) {
        if (iter >= max_iter)
            throw ConvergenceError("gram coordinate descent exceeded " + std::to_string(max_iter) +
                                       " sweeps",
                                   b);
        double max_change = 0.0;
        for (Index j = 0; j < d; ++j) max_change = std::max(max_change, update(j));
        ++iter;
        if (max_change < tol) {
            g = gram_residual(gram, xty, b);
            double worst = 0.0;
            for (Index j = 0; j < d; ++j) worst = std::max(worst, kkt_violation(g(j), b(j), lambda));
            if (worst <= tol) {
                out.kkt = worst;
                break;
            }
            continue;
        }
        active.clear();
        for (Index j = 0; j < d; ++j)
            if (b(j) != 0.0) active.push_back(j);
        while (true) {
            if (iter >= max_iter)
                throw ConvergenceError("gram coordinate descent exceeded " +
                                           std::to_string(max_iter) + " sweeps",
                                       b);
            double inner = 0.0;
            for (Index j : active) inner = std::max(inner, update(j));
            ++iter;
            if (inner < tol) break;
        }
    }
    // 0.5 * (y'y - 2 c'b + b'Gb) with Gb = c - g.
    out.objective = 0.5 * (yty - 2.0 * xty.dot(b) + b.dot(xty - g)) + lambda * b.lpNorm<1>();
    out.coef = std::move(b);
    return out;
}

struct Standardized {
    MatrixXd x;
    VectorXd y;
    VectorXd center;
    VectorXd scale;
    double y_mean = 0.0;
};

Standardized standardize(const Eigen::Ref<const MatrixXd>& x, const Eigen::Ref<const VectorXd>& y) {
    Standardized s;
    const double n = static_cast<double>(x.rows());
    s.center = x.colwise().mean().transpose();
    s.x = x.rowwise() - s.center.transpose();
    s.scale = (s.x.colwise().squaredNorm().transpose() / n).cwiseSqrt();
    for (Index j = 0; j < s.scale.size(); ++j) {
        if (s.scale(j) > 0.0) s.x.col(j) /= s.scale(j);
        else s.scale(j) = 1.0;
    }
    s.y_mean = y.mean();
    s.y = y.array() - s.y_mean;
    return s;
}

LassoFit fit_impl(const LassoProblem& p, const VectorXd* start, double tol, int max_iter) {
    check_problem(p.design, p.response, p.lambda);
    if (!(tol > 0.0)) throw InputError("tolerance must be > 0");
    const Index d = p.design.cols();
    VectorXd b0 = VectorXd::Zero(d);
    if (start != nullptr) {
        if (start->size() != d) throw InputError("warm start has wrong length");
        b0 = *start;
    }
    if (!p.standardize) return descend_naive(p.design, p.response, p.lambda, std::move(b0), tol, max_iter);

    const Standardized s = standardize(p.design, p.response);
    LassoFit fit = descend_naive(s.x, s.y, p.lambda, std::move(b0), tol, max_iter);
    fit.coef = fit.coef.cwiseQuotient(s.scale);
    fit.intercept = s.y_mean - s.center.dot(fit.coef);
    return fit;
}

std::vector<std::vector<Index>> make_folds(Index n, int folds, std::uint64_t seed) {
    std::vector<Index> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), Index{0});
    Rng rng(seed);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<std::vector<Index>> out(static_cast<std::size_t>(folds));
    for (std::size_t i = 0; i < perm.size(); ++i) out[i % static_cast<std::size_t>(folds)].push_back(perm[i]);
    for (auto& f : out) std::sort(f.begin(), f.end());
    return out;
}

MatrixXd take_rows(const Eigen::Ref<const MatrixXd>& m, const std::vector<Index>& rows) {
    MatrixXd out(static_cast<Index>(rows.size()), m.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Index>(i)) = m.row(rows[i]);
    return out;
}

std::vector<Index> complement(Index n, const std::vector<Index>& sorted_rows) {
    std::vector<Index> out;
    out.reserve(static_cast<std::size_t>(n) - sorted_rows.size());
    std::size_t k = 0;
    for (Index i = 0; i < n; ++i) {
        if (k < sorted_rows.size() && sorted_rows[k] == i) {
            ++k;
            continue;
        }
        out.push_back(i);
    }
    return out;
}

std::size_t argmin_first(const VectorXd& v) {
    std::size_t best = 0;
    for (Index i = 1; i < v.size(); ++i)
        if (v(i) < v(static_cast<Index>(best))) best = static_cast<std::size_t>(i);
    return best;
}

/// Stops a cross-validation path once the error has stayed above its running minimum for
/// `patience` consecutive grid points; the remaining entries are marked +inf.
class PathStop {
public:
    PathStop(Index size, int patience) : size_(size), patience_(patience) {}

    bool done(VectorXd& errors, Index l) {
        if (l == 0 || errors(l) < best_) {
            best_ = errors(l);
            worse_ = 0;
        } else {
            ++worse_;
        }
        if (patience_ <= 0 || worse_ < patience_) return false;
        for (Index k = l + 1; k < size_; ++k) errors(k) = std::numeric_limits<double>::infinity();
        return true;
    }

private:
    Index size_;
    int patience_;
    double best_ = std::numeric_limits<double>::infinity();
    int worse_ = 0;
};

}  // namespace

double soft_threshold(double value, double threshold) noexcept {
    if (value > threshold) return value - threshold;
    if (value < -threshold) return value + threshold;
    return 0.0;
}

double lambda_max(const Eigen::Ref<const MatrixXd>& design, const Eigen::Ref<const VectorXd>& response) {
    if (design.rows() == 0 || design.cols() == 0) return 0.0;
    return (design.transpose() * response).cwiseAbs().maxCoeff() / static_cast<double>(design.rows());
}

VectorXd lambda_grid(double lambda_max, int size, double min_ratio) {
    if (size < 1) throw InputError("lambda grid size must be >= 1");
    if (!(min_ratio > 0.0 && min_ratio < 1.0)) throw InputError("min_ratio must lie in (0, 1)");
    if (!(lambda_max > 0.0)) return VectorXd::Constant(1, 0.0);
    VectorXd grid(size);
    if (size == 1) {
        grid(0) = lambda_max;
        return grid;
    }
    const double step = std::log(min_ratio) / static_cast<double>(size - 1);
    for (int i = 0; i < size; ++i) grid(i) = lambda_max * std::exp(step * i);
    return grid;
}

LassoFit lasso_fit(const LassoProblem& problem, double tol, int max_iter) {
    return fit_impl(problem, nullptr, tol, max_iter);
}

LassoFit lasso_fit_warm(const LassoProblem& problem, const VectorXd& start, double tol, int max_iter) {
    return fit_impl(problem, &start, tol, max_iter);
}

std::vector<LassoFit> lasso_path(const Eigen::Ref<const MatrixXd>& design,
                                 const Eigen::Ref<const VectorXd>& response, const VectorXd& grid,
                                 double tol, int max_iter) {
    check_grid(grid);
    std::vector<LassoFit> out;
    out.reserve(static_cast<std::size_t>(grid.size()));
    VectorXd start = VectorXd::Zero(design.cols());
    for (Index l = 0; l < grid.size(); ++l) {
        out.push_back(lasso_fit_warm({design, response, grid(l)}, start, tol, max_iter));
        start = out.back().coef;
    }
    return out;
}

CvResult lasso_cv(const Eigen::Ref<const MatrixXd>& design, const Eigen::Ref<const VectorXd>& response,
                  const VectorXd& grid, int folds, std::uint64_t seed, int patience) {
    check_problem(design, response, 0.0);
    check_grid(grid);
    if (folds < 2) throw InputError("cross-validation needs at least 2 folds");
    const Index n = design.rows();
    if (n < folds)
        throw InputError("cross-validation needs at least as many observations (" +
                         std::to_string(n) + ") as folds (" + std::to_string(folds) + ")");

    struct Fold {
        MatrixXd xtr;
        VectorXd ytr;
        MatrixXd xte;
        VectorXd yte;
        VectorXd start;
    };
    std::vector<Fold> state;
    if (grid.size() > 1) {
        for (const auto& held : make_folds(n, folds, seed)) {
            const auto train = complement(n, held);
            state.push_back({take_rows(design, train), take_rows(response, train), take_rows(design, held),
                             take_rows(response, held), VectorXd::Zero(design.cols())});
        }
    }
    CvResult res;
    res.cv_errors = VectorXd::Zero(grid.size());
    if (grid.size() > 1) {
        PathStop stop(grid.size(), patience);
        for (Index l = 0; l < grid.size(); ++l) {
            double err = 0.0;
            for (Fold& f : state) {
                LassoFit fit = lasso_fit_warm({f.xtr, f.ytr, grid(l)}, f.start);
                err += (f.yte - f.xte * fit.coef).squaredNorm();
                f.start = std::move(fit.coef);
            }
            res.cv_errors(l) = err / static_cast<double>(n);
            if (stop.done(res.cv_errors, l)) break;
        }
    }
    res.best_index = argmin_first(res.cv_errors);
    res.best_lambda = grid(static_cast<Index>(res.best_index));
    return res;
}

MultiLassoFit multi_lasso_fit(const Eigen::Ref<const MatrixXd>& x, const Eigen::Ref<const MatrixXd>& z,
                              double lambda, double tol, int max_iter) {
    if (x.rows() != z.rows())
        throw InputError("multi-response lasso: x has " + std::to_string(x.rows()) +
                         " rows but z has " + std::to_string(z.rows()));
    if (x.rows() < 2) throw InputError("multi-response lasso needs at least 2 observations");
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw InputError("lambda must be finite and >= 0");
    if (!(tol > 0.0)) throw InputError("tolerance must be > 0");
    check_finite(x, "x");
    check_finite(z, "z");

    const Index p1 = x.cols();
    const Index p2 = z.cols();
    const double inv_n = 1.0 / static_cast<double>(x.rows());
    MultiLassoFit out;
    out.h_matrix = MatrixXd::Zero(p1, p2);
    out.per_row_objectives = VectorXd::Zero(p1);
    out.per_row_kkt = VectorXd::Zero(p1);
    if (p2 == 0) {
        out.per_row_objectives = 0.5 * x.colwise().squaredNorm().transpose() * inv_n;
        return out;
    }

    const MatrixXd gram = z.transpose() * z * inv_n;
    const MatrixXd cross = z.transpose() * x * inv_n;
    const VectorXd xsq = x.colwise().squaredNorm().transpose() * inv_n;
    for (Index j = 0; j < p1; ++j) {
        try {
            GramFit f = descend_gram(gram, cross.col(j), xsq(j), lambda, VectorXd::Zero(p2), tol, max_iter);
            out.h_matrix.row(j) = f.coef.transpose();
            out.per_row_objectives(j) = f.objective;
            out.per_row_kkt(j) = f.kkt;
        } catch (const ConvergenceError& e) {
            throw ConvergenceError("row " + std::to_string(j) + ": " + e.what(), e.last_iterate());
        }
    }
    return out;
}

CvResult multi_lasso_cv(const Eigen::Ref<const MatrixXd>& x, const Eigen::Ref<const MatrixXd>& z,
                        const VectorXd& grid, int folds, std::uint64_t seed, int patience) {
    if (x.rows() != z.rows()) throw InputError("multi-response lasso: row counts differ");
    check_grid(grid);
    if (folds < 2) throw InputError("cross-validation needs at least 2 folds");
    const Index n = x.rows();
    if (n < folds)
        throw InputError("cross-validation needs at least as many observations (" +
                         std::to_string(n) + ") as folds (" + std::to_string(folds) + ")");
    check_finite(x, "x");
    check_finite(z, "z");

    struct Fold {
        MatrixXd gram;
        MatrixXd cross;
        VectorXd xsq;
        MatrixXd xte;
        MatrixXd zte;
        MatrixXd starts;  // row j: warm start of response j
    };
    CvResult res;
    res.cv_errors = VectorXd::Zero(grid.size());
    if (grid.size() > 1 && z.cols() > 0) {
        std::vector<Fold> state;
        for (const auto& held : make_folds(n, folds, seed)) {
            const auto train = complement(n, held);
            const MatrixXd xtr = take_rows(x, train);
            const MatrixXd ztr = take_rows(z, train);
            const double inv_n = 1.0 / static_cast<double>(train.size());
            state.push_back({ztr.transpose() * ztr * inv_n, ztr.transpose() * xtr * inv_n,
                             xtr.colwise().squaredNorm().transpose() * inv_n, take_rows(x, held), take_rows(z, held),
                             MatrixXd::Zero(x.cols(), z.cols())});
        }
        PathStop stop(grid.size(), patience);
        for (Index l = 0; l < grid.size(); ++l) {
            double err = 0.0;
            for (Fold& f : state) {
                for (Index j = 0; j < x.cols(); ++j) {
                    GramFit fit = descend_gram(f.gram, f.cross.col(j), f.xsq(j), grid(l), f.starts.row(j).transpose(),
                                               kDefaultTol, kDefaultMaxIter);
                    err += (f.xte.col(j) - f.zte * fit.coef).squaredNorm();
                    f.starts.row(j) = fit.coef.transpose();
                }
            }
            res.cv_errors(l) = err / static_cast<double>(n);
            if (stop.done(res.cv_errors, l)) break;
        }
    }
    res.best_index = argmin_first(res.cv_errors);
    res.best_lambda = grid(static_cast<Index>(res.best_index));
    return res;
}

VectorXd ridge_noise_sd(const Eigen::Ref<const MatrixXd>& design, const Eigen::Ref<const MatrixXd>& responses) {
    const Index n = design.rows();
    const double nd = static_cast<double>(n);
    VectorXd out(responses.cols());
    if (design.cols() == 0) {
        for (Index k = 0; k < responses.cols(); ++k) out(k) = responses.col(k).norm() / std::sqrt(nd);
        return out;
    }
    Eigen::BDCSVD<MatrixXd> svd(design, Eigen::ComputeThinU);
    const VectorXd eig = svd.singularValues().array().square() / nd;
    const MatrixXd proj = svd.matrixU().transpose() * responses;
    const double scale = std::max(eig.mean(), std::numeric_limits<double>::min());

    constexpr int kGrid = 25;
    for (Index k = 0; k < responses.cols(); ++k) {
        const double total = responses.col(k).squaredNorm();
        const double outside = std::max(0.0, total - proj.col(k).squaredNorm());
        double best_gcv = std::numeric_limits<double>::infinity();
        double best_sigma2 = total / nd;
        for (int g = 0; g < kGrid; ++g) {
            const double mu = scale * std::pow(10.0, -4.0 + 6.0 * g / (kGrid - 1));
            double df = 0.0;
            double rss = outside;
            for (Index i = 0; i < eig.size(); ++i) {
                const double f = eig(i) / (eig(i) + mu);
                df += f;
                const double c = (1.0 - f) * proj(i, k);
                rss += c * c;
            }
            const double resid_df = nd - df;
            if (resid_df < 1.0) continue;
            const double gcv = nd * rss / (resid_df * resid_df);
            if (gcv < best_gcv) {
                best_gcv = gcv;
                best_sigma2 = rss / resid_df;
            }
        }
        out(k) = std::sqrt(best_sigma2);
    }
    return out;
}

std::vector<std::vector<Index>> fold_indices(Index n, int folds, std::uint64_t seed) {
    if (folds < 2) throw InputError("cross-validation needs at least 2 folds");
    if (n < folds)
        throw InputError("cross-validation needs at least as many observations (" + std::to_string(n) +
                         ") as folds (" + std::to_string(folds) + ")");
    return make_folds(n, folds, seed);
}

double resolve_lambda(const LambdaChoice& choice, const Eigen::Ref<const MatrixXd>& design,
                      const Eigen::Ref<const VectorXd>& response, std::uint64_t seed) {
    switch (choice.rule) {
        case LambdaChoice::Rule::fixed:
            if (!(choice.value >= 0.0)) throw InputError("fixed lambda must be >= 0");
            return choice.value;
        case LambdaChoice::Rule::rate: {
            const double n = static_cast<double>(design.rows());
            const double d = static_cast<double>(std::max<Index>(design.cols(), 2));
            const double sigma = ridge_noise_sd(design, response)(0);
            return choice.value * sigma * std::sqrt(2.0 * std::log(d) / n);
        }
        case LambdaChoice::Rule::cv: {
            const double top = lambda_max(design, response);
            if (!(top > 0.0)) return 0.0;
            const VectorXd grid = lambda_grid(top, choice.grid_size, choice.min_ratio);
            return lasso_cv(design, response, grid, choice.folds, seed, choice.patience).best_lambda;
        }
    }
    throw InputError("unknown lambda rule");
}

double resolve_multi_lambda(const LambdaChoice& choice, const Eigen::Ref<const MatrixXd>& x,
                            const Eigen::Ref<const MatrixXd>& z, std::uint64_t seed) {
    switch (choice.rule) {
        case LambdaChoice::Rule::fixed:
            if (!(choice.value >= 0.0)) throw InputError("fixed lambda must be >= 0");
            return choice.value;
        case LambdaChoice::Rule::rate: {
            const double n = static_cast<double>(z.rows());
            const double d = static_cast<double>(std::max<Index>(z.cols(), 2));
            const VectorXd sigma = ridge_noise_sd(z, x);
            const double pooled = std::sqrt(sigma.squaredNorm() / static_cast<double>(std::max<Index>(sigma.size(), 1)));
            return choice.value * pooled * std::sqrt(2.0 * std::log(d) / n);
        }
        case LambdaChoice::Rule::cv: {
            if (z.cols() == 0 || x.cols() == 0) return 0.0;
            const double top = (z.transpose() * x).cwiseAbs().maxCoeff() / static_cast<double>(z.rows());
            if (!(top > 0.0)) return 0.0;
            const VectorXd grid = lambda_grid(top, choice.grid_size, choice.min_ratio);
            return multi_lasso_cv(x, z, grid, choice.folds, seed, choice.patience).best_lambda;
        }
    }
    throw InputError("unknown lambda rule");
}

}  // namespace reldiff::lasso
