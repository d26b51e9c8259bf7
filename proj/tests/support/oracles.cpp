#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Eigenvalues>

namespace oracle {

namespace {

using LMatrix = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;

double soft(double v, double t) { return v > t ? v - t : (v < -t ? v + t : 0.0); }

}  // namespace

VectorXd fista_lasso(const MatrixXd& x, const VectorXd& y, double lambda, int iterations) {
    const double n = static_cast<double>(x.rows());
    const MatrixXd gram = x.transpose() * x / n;
    const VectorXd xty = x.transpose() * y / n;
    const double lip = Eigen::SelfAdjointEigenSolver<MatrixXd>(gram).eigenvalues().maxCoeff();
    const double step = 1.0 / std::max(lip, 1e-12);
    VectorXd b = VectorXd::Zero(x.cols());
    VectorXd v = b;
    double t = 1.0;
    for (int it = 0; it < iterations; ++it) {
        const VectorXd grad = gram * v - xty;
        VectorXd next = v - step * grad;
        for (Index j = 0; j < next.size(); ++j) next(j) = soft(next(j), step * lambda);
        const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
        v = next + ((t - 1.0) / t_next) * (next - b);
        b = next;
        t = t_next;
    }
    return b;
}

long double u_statistic(const MatrixXd& eta, const VectorXd& r) {
    const Index n = eta.rows();
    long double total = 0.0L;
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < n; ++j) {
            if (i == j) continue;
            long double dot = 0.0L;
            for (Index k = 0; k < eta.cols(); ++k) dot += static_cast<long double>(eta(i, k)) * eta(j, k);
            total += dot * r(i) * r(j);
        }
    return total / (static_cast<long double>(n) * (n - 1));
}

long double variance(const MatrixXd& eta, const VectorXd& r) {
    const Index n = eta.rows();
    long double total = 0.0L;
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < n; ++j) {
            if (i == j) continue;
            long double dot = 0.0L;
            for (Index k = 0; k < eta.cols(); ++k) dot += static_cast<long double>(eta(i, k)) * eta(j, k);
            const long double w = dot * r(i) * r(j);
            total += w * w;
        }
    return total / (static_cast<long double>(n) * (n - 1));
}

std::complex<long double> companion_stieltjes(const std::vector<long double>& eigs, long n, std::complex<long double> z) {
    const long double p = static_cast<long double>(eigs.size());
    std::complex<long double> sum = 0.0L;
    for (long double l : eigs) sum += 1.0L / (l - z);
    return -(1.0L - p / n) / z + sum / static_cast<long double>(n);
}

Eigen::Vector4d tian_moments(const MatrixXd& eta, bool square_first) {
    const long double n = static_cast<long double>(eta.rows());
    const long double p = static_cast<long double>(eta.cols());
    const LMatrix e = eta.cast<long double>();
    const LMatrix s = e.transpose() * e / n;
    LMatrix power = s;
    long double xi[5] = {0, 0, 0, 0, 0};
    for (int k = 1; k <= 4; ++k) {
        xi[k] = power.trace() / p;
        power = power * s;
    }
    const long double tau2 = p / n;
    const long double c2 = n * n / ((n - 1) * (n + 2));
    const long double c3 = c2 * n * n / ((n - 2) * (n + 4));
    const long double c4 = c3 * n * (n * n + n + 2) / ((n - 3) * (n + 1) * (n + 6));
    const long double q = n * n + n + 2;
    Eigen::Vector4d out;
    out(0) = static_cast<double>(xi[1]);
    out(1) = static_cast<double>(c2 * (xi[2] - tau2 * (square_first ? xi[1] * xi[1] : xi[1])));
    out(2) = static_cast<double>(c3 * (xi[3] - 3 * tau2 * xi[2] * xi[1] + 2 * tau2 * tau2 * xi[1] * xi[1] * xi[1]));
    out(3) = static_cast<double>(c4 * (xi[4] - 4 * tau2 * xi[3] * xi[1] - tau2 * xi[2] * xi[2] * (2 * n * n + 3 * n - 6) / q +
                                       tau2 * tau2 * xi[1] * xi[1] * (2 * xi[2] - tau2 * xi[1] * xi[1]) * (5 * n * n + 6 * n) / q));
    return out;
}

VectorXd kong_moments_bruteforce(const MatrixXd& eta, int moments) {
    const int n = static_cast<int>(eta.rows());
    const long double p = static_cast<long double>(eta.cols());
    const LMatrix a = (eta * eta.transpose()).cast<long double>();
    VectorXd out(moments);
    for (int k = 1; k <= moments; ++k) {
        // All increasing k-tuples i1 < ... < ik, cycle product A[i1 i2] ... A[ik i1].
        std::vector<int> idx(static_cast<std::size_t>(k));
        for (int i = 0; i < k; ++i) idx[static_cast<std::size_t>(i)] = i;
        long double total = 0.0L;
        long double count = 0.0L;
        while (true) {
            long double prod = 1.0L;
            for (int i = 0; i < k; ++i) prod *= a(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>((i + 1) % k)]);
            total += prod;
            count += 1.0L;
            int pos = k - 1;
            while (pos >= 0 && idx[static_cast<std::size_t>(pos)] == n - k + pos) --pos;
            if (pos < 0) break;
            ++idx[static_cast<std::size_t>(pos)];
            for (int i = pos + 1; i < k; ++i) idx[static_cast<std::size_t>(i)] = idx[static_cast<std::size_t>(i - 1)] + 1;
        }
        out(k - 1) = static_cast<double>(total / (count * p));
    }
    return out;
}

LpResult tableau_lp(const MatrixXd& aeq, const VectorXd& beq, const MatrixXd& ain, const VectorXd& bin, const VectorXd& c,
                    const std::vector<bool>& nonneg) {
    using LD = long double;
    const LD eps = 1e-11L;
    const Index nv = c.size();
    // Column map: original variable j -> (plus column, minus column or -1).
    std::vector<Index> plus(static_cast<std::size_t>(nv)), minus(static_cast<std::size_t>(nv), -1);
    Index cols = 0;
    for (Index j = 0; j < nv; ++j) {
        plus[static_cast<std::size_t>(j)] = cols++;
        if (!nonneg[static_cast<std::size_t>(j)]) minus[static_cast<std::size_t>(j)] = cols++;
    }
    const Index me = aeq.rows();
    const Index mi = ain.rows();
    const Index surplus0 = cols;
    cols += mi;
    const Index m = me + mi;
    const Index art0 = cols;
    const Index total = cols + m;

    LMatrix t = LMatrix::Zero(m + 1, total + 1);
    auto put_row = [&](Index row, const Eigen::RowVectorXd& a, double b) {
        for (Index j = 0; j < nv; ++j) {
            t(row, plus[static_cast<std::size_t>(j)]) = a(j);
            if (minus[static_cast<std::size_t>(j)] >= 0) t(row, minus[static_cast<std::size_t>(j)]) = -a(j);
        }
        t(row, total) = b;
    };
    for (Index i = 0; i < me; ++i) put_row(i, aeq.row(i), beq(i));
    for (Index i = 0; i < mi; ++i) {
        put_row(me + i, ain.row(i), bin(i));
        t(me + i, surplus0 + i) = -1.0L;
    }
    for (Index i = 0; i < m; ++i) {
        if (t(i, total) < 0) t.row(i) = -t.row(i);
        t(i, art0 + i) = 1.0L;
    }
    std::vector<Index> basis(static_cast<std::size_t>(m));
    for (Index i = 0; i < m; ++i) basis[static_cast<std::size_t>(i)] = art0 + i;
    std::vector<bool> live(static_cast<std::size_t>(m), true);

    auto pivot = [&](Index row, Index col) {
        t.row(row) /= t(row, col);
        for (Index i = 0; i <= m; ++i)
            if (i != row && t(i, col) != 0.0L) t.row(i) -= t(i, col) * t.row(row);
        basis[static_cast<std::size_t>(row)] = col;
    };

    // Bland: smallest eligible entering index, ratio ties to the smallest basic index.
    auto simplex = [&](Index allowed_cols) -> bool {
        for (int guard = 0; guard < 100000; ++guard) {
            Index enter = -1;
            for (Index j = 0; j < allowed_cols; ++j)
                if (t(m, j) < -eps) {
                    enter = j;
                    break;
                }
            if (enter < 0) return true;
            Index leave = -1;
            LD best = 0;
            for (Index i = 0; i < m; ++i) {
                if (!live[static_cast<std::size_t>(i)] || t(i, enter) <= eps) continue;
                const LD ratio = t(i, total) / t(i, enter);
                if (leave < 0 || ratio < best - eps ||
                    (std::abs(ratio - best) <= eps && basis[static_cast<std::size_t>(i)] < basis[static_cast<std::size_t>(leave)])) {
                    leave = i;
                    best = ratio;
                }
            }
            if (leave < 0) return false;
            pivot(leave, enter);
        }
        return false;
    };

    // Phase 1 objective: sum of artificials, priced out against the starting basis.
    for (Index i = 0; i < m; ++i) t.row(m) -= t.row(i);
    for (Index i = 0; i < m; ++i) t(m, art0 + i) = 0.0L;
    simplex(art0);
    LpResult res;
    if (-t(m, total) > 1e-9L) {
        res.status = Status::infeasible;
        return res;
    }
    for (Index i = 0; i < m; ++i) {
        if (basis[static_cast<std::size_t>(i)] < art0) continue;
        Index col = -1;
        for (Index j = 0; j < art0; ++j)
            if (std::abs(t(i, j)) > 1e-9L) {
                col = j;
                break;
            }
        if (col >= 0)
            pivot(i, col);
        else
            live[static_cast<std::size_t>(i)] = false;
    }
    // Phase 2.
    t.row(m).setZero();
    for (Index j = 0; j < nv; ++j) {
        t(m, plus[static_cast<std::size_t>(j)]) = c(j);
        if (minus[static_cast<std::size_t>(j)] >= 0) t(m, minus[static_cast<std::size_t>(j)]) = -c(j);
    }
    for (Index i = 0; i < m; ++i) {
        if (!live[static_cast<std::size_t>(i)]) continue;
        const Index b = basis[static_cast<std::size_t>(i)];
        if (t(m, b) != 0.0L) t.row(m) -= t(m, b) * t.row(i);
    }
    if (!simplex(art0)) {
        res.status = Status::unbounded;
        return res;
    }
    std::vector<LD> y(static_cast<std::size_t>(total), 0.0L);
    for (Index i = 0; i < m; ++i)
        if (live[static_cast<std::size_t>(i)]) y[static_cast<std::size_t>(basis[static_cast<std::size_t>(i)])] = t(i, total);
    res.x.assign(static_cast<std::size_t>(nv), 0.0L);
    res.objective = 0.0L;
    for (Index j = 0; j < nv; ++j) {
        LD v = y[static_cast<std::size_t>(plus[static_cast<std::size_t>(j)])];
        if (minus[static_cast<std::size_t>(j)] >= 0) v -= y[static_cast<std::size_t>(minus[static_cast<std::size_t>(j)])];
        res.x[static_cast<std::size_t>(j)] = v;
        res.objective += v * c(j);
    }
    res.status = Status::optimal;
    return res;
}

double top_eigenvalue(const MatrixXd& s) {
    VectorXd v = VectorXd::Ones(s.rows()).normalized();
    double value = 0.0;
    for (int it = 0; it < 100000; ++it) {
        const VectorXd w = s * v;
        const double next = v.dot(w);
        v = w.normalized();
        if (std::abs(next - value) <= 1e-14 * std::abs(next)) {
            value = next;
            break;
        }
        value = next;
    }
    return value;
}

double ar1_top_eigenvalue(Index p, double rho) {
    MatrixXd s(p, p);
    for (Index i = 0; i < p; ++i)
        for (Index j = 0; j < p; ++j) s(i, j) = std::pow(rho, static_cast<double>(std::abs(i - j)));
    return top_eigenvalue(s);
}

double ar1_conditional_top_eigenvalue(Index p1, double rho) {
    // Markov property: given the trailing block, the leading p1 coordinates only see coordinate p1.
    MatrixXd s(p1, p1);
    for (Index i = 0; i < p1; ++i)
        for (Index j = 0; j < p1; ++j)
            s(i, j) = std::pow(rho, static_cast<double>(std::abs(i - j))) -
                      std::pow(rho, static_cast<double>(p1 - i)) * std::pow(rho, static_cast<double>(p1 - j));
    return top_eigenvalue(s);
}

}  // namespace oracle
