#include "reldiff/transfer.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <string>

#include "reldiff/error.hpp"
#include "reldiff/random.hpp"

namespace reldiff::transfer {

namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

constexpr std::uint64_t kInitStream = 11;
constexpr std::uint64_t kProjectionStream = 12;
constexpr std::uint64_t kUnifiedStream = 13;
constexpr std::uint64_t kPairingStream = 14;

Study take(const Study& s, const std::vector<Index>& rows) {
    Study out;
    out.y.resize(static_cast<Index>(rows.size()));
    out.x.resize(static_cast<Index>(rows.size()), s.p());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        out.y(static_cast<Index>(i)) = s.y(rows[i]);
        out.x.row(static_cast<Index>(i)) = s.x.row(rows[i]);
    }
    return out;
}

void check_contrast(const ContrastData& cd) {
    if (cd.rows() < 4) throw InputError("contrast has " + std::to_string(cd.rows()) + " rows; need >= 4");
}

}  // namespace

void validate(const Study& study, const char* label) {
    if (study.x.rows() != study.n())
        throw InputError(std::string(label) + ": x has " + std::to_string(study.x.rows()) + " rows, y has " +
                         std::to_string(study.n()));
    if (study.n() < 4) throw InputError(std::string(label) + ": need n >= 4, got " + std::to_string(study.n()));
    if (study.p() < 1) throw InputError(std::string(label) + ": no covariates");
    if (!study.y.allFinite() || !study.x.allFinite()) throw InputError(std::string(label) + ": non-finite entries");
}

void validate(const MultiSourceData& data) {
    validate(data.target, "target");
    for (std::size_t k = 0; k < data.sources.size(); ++k) {
        const std::string label = "source " + std::to_string(k + 1);
        validate(data.sources[k], label.c_str());
        if (data.sources[k].p() != data.p())
            throw InputError(label + ": has " + std::to_string(data.sources[k].p()) + " covariates, target has " +
                             std::to_string(data.p()));
    }
}

double delta0_from_c0(double c0, Index p, Index n0) {
    if (!(c0 >= 0.0) || !std::isfinite(c0)) throw InputError("c0 must be finite and >= 0");
    if (p < 1 || n0 < 1) throw InputError("delta0 needs p >= 1 and n0 >= 1");
    return c0 * std::sqrt(std::log(static_cast<double>(p)) / static_cast<double>(n0));
}

ContrastData build_contrast(const Study& target, const Study& source) {
    if (target.p() != source.p())
        throw InputError("target has " + std::to_string(target.p()) + " covariates, source has " +
                         std::to_string(source.p()));
    if (target.x.rows() != target.n() || source.x.rows() != source.n())
        throw InputError("study response and design row counts differ");
    const Index m = std::min(target.n(), source.n());
    ContrastData cd;
    cd.y0k = target.y.head(m) - source.y.head(m);
    cd.x0k = target.x.topRows(m) - source.x.topRows(m);
    cd.xk = source.x.topRows(m);
    return cd;
}

ContrastData build_contrast_shuffled(const Study& target, const Study& source, std::uint64_t seed) {
    auto shuffled = [](const Study& s, std::uint64_t stream_key) {
        std::vector<Index> rows(static_cast<std::size_t>(s.n()));
        std::iota(rows.begin(), rows.end(), Index{0});
        Rng rng(stream_key);
        std::shuffle(rows.begin(), rows.end(), rng);
        return take(s, rows);
    };
    return build_contrast(shuffled(target, stream_seed(seed, 0)), shuffled(source, stream_seed(seed, 1)));
}

VectorXd contrast_initial_beta(const ContrastData& cd, const lasso::LambdaChoice& lambda, std::uint64_t seed,
                               double* lambda_used) {
    if (cd.rows() < 2) throw InputError("contrast needs at least 2 rows");
    const double lam = lasso::resolve_lambda(lambda, cd.x0k, cd.y0k, seed);
    if (lambda_used) *lambda_used = lam;
    return lasso::lasso_fit({cd.x0k, cd.y0k, lam, false}).coef;
}

SourceProjection source_projection(const ContrastData& cd, const lasso::LambdaChoice& lambda_w, std::uint64_t seed) {
    if (cd.rows() < 2) throw InputError("contrast needs at least 2 rows");
    SourceProjection out;
    out.lambda_w = lasso::resolve_multi_lambda(lambda_w, cd.xk, cd.x0k, seed);
    out.h = lasso::multi_lasso_fit(cd.xk, cd.x0k, out.lambda_w).h_matrix;
    out.eta = cd.xk - cd.x0k * out.h.transpose();
    return out;
}

SourceStatistics source_statistics(const ContrastData& cd, const TransferOptions& options) {
    hdtrd::validate(options.test);
    check_contrast(cd);
    const std::uint64_t seed = options.test.seed;
    SourceStatistics st;
    st.n = cd.rows();
    st.p = cd.xk.cols();
    st.eig_method = options.test.eig.name();
    const VectorXd beta = contrast_initial_beta(cd, options.lambda_init, stream_seed(seed, kInitStream), &st.lambda_init);
    const SourceProjection proj = source_projection(cd, options.test.lambda_w, stream_seed(seed, kProjectionStream));
    st.lambda_w = proj.lambda_w;
    const VectorXd resid = cd.y0k - cd.x0k * beta;
    st.t_proj = hdtrd::u_statistic(proj.eta, resid);
    st.var_hat = std::max(0.0, hdtrd::variance_estimate(proj.eta, resid));
    if (!(st.var_hat > 0.0) || !std::isfinite(st.var_hat)) {
        st.degenerate = true;
        return st;
    }
    st.lambda_max = hdtrd::estimate_lambda_max(proj.eta, options.test, &st.dropped_moments);
    return st;
}

hdtrd::TestReport source_report(const SourceStatistics& stats, double delta0, double alpha) {
    hdtrd::TestReport r;
    if (stats.degenerate) {
        r.t_proj = stats.t_proj;
        r.var_hat = stats.var_hat;
        r.delta0 = delta0;
        r.alpha = alpha;
        r.n = stats.n;
        r.p_value = 1.0;
        r.reject = false;
        r.degenerate = true;
    } else {
        r = hdtrd::finish_report(stats.t_proj, stats.var_hat, stats.lambda_max, stats.n, delta0, alpha);
    }
    r.eig_method = stats.eig_method;
    r.p1 = stats.p;
    r.p2 = stats.p;
    r.lambda_gamma = stats.lambda_init;
    r.lambda_w = stats.lambda_w;
    r.dropped_moments = stats.dropped_moments;
    return r;
}

hdtrd::TestReport source_test(const ContrastData& cd, const TransferOptions& options) {
    const SourceStatistics st = source_statistics(cd, options);
    if (st.degenerate)
        throw DegenerateDataError("contrast residuals carry no variation; the source reproduces the target");
    return source_report(st, options.test.delta0, options.test.alpha);
}

hdtrd::TestReport source_test_unprojected(const ContrastData& cd, const TransferOptions& options) {
    hdtrd::validate(options.test);
    check_contrast(cd);
    double lambda_init = 0.0;
    const VectorXd beta =
        contrast_initial_beta(cd, options.lambda_init, stream_seed(options.test.seed, kInitStream), &lambda_init);
    const VectorXd resid = cd.y0k - cd.x0k * beta;
    const double t = hdtrd::u_statistic(cd.xk, resid);
    const double var = std::max(0.0, hdtrd::variance_estimate(cd.xk, resid));
    if (!(var > 0.0) || !std::isfinite(var))
        throw DegenerateDataError("contrast residuals carry no variation; the source reproduces the target");
    hdtrd::TestReport r = hdtrd::finish_report(t, var, 0.0, cd.rows(), 0.0, options.test.alpha);
    r.eig_method = "none";
    r.p1 = cd.xk.cols();
    r.lambda_gamma = lambda_init;
    return r;
}

hdtrd::TestReport baseline_pooled_test(const Study& target, const Study& source, const TransferOptions& options) {
    hdtrd::validate(options.test);
    validate(target, "target");
    if (source.x.rows() != source.n()) throw InputError("source: x and y row counts differ");
    if (source.n() < 2) throw InputError("source: need n >= 2");
    if (source.p() != target.p()) throw InputError("source and target covariate counts differ");
    const Index n0 = target.n();
    const Index nk = source.n();
    MatrixXd x(n0 + nk, target.p());
    VectorXd y(n0 + nk);
    x.topRows(n0) = target.x;
    x.bottomRows(nk) = source.x;
    y.head(n0) = target.y;
    y.tail(nk) = source.y;
    const double lam = lasso::resolve_lambda(options.lambda_init, x, y, stream_seed(options.test.seed, kInitStream));
    const VectorXd beta = lasso::lasso_fit({x, y, lam, false}).coef;
    const VectorXd resid = source.y - source.x * beta;
    const double t = hdtrd::u_statistic(source.x, resid);
    const double var = std::max(0.0, hdtrd::variance_estimate(source.x, resid));
    if (!(var > 0.0) || !std::isfinite(var)) throw DegenerateDataError("pooled residuals carry no variation");
    hdtrd::TestReport r = hdtrd::finish_report(t, var, 0.0, nk, 0.0, options.test.alpha);
    r.eig_method = "none";
    r.p1 = source.p();
    r.lambda_gamma = lam;
    return r;
}

UnifiedFit fit_unified(const MultiSourceData& data, const std::vector<std::size_t>& selected,
                       const lasso::LambdaChoice& lambda, std::uint64_t seed, double max_design_entries) {
    validate(data);
    std::vector<std::size_t> sel = selected;
    std::sort(sel.begin(), sel.end());
    if (std::adjacent_find(sel.begin(), sel.end()) != sel.end()) throw InputError("selected sources repeat an index");
    for (std::size_t k : sel)
        if (k >= data.sources.size()) throw InputError("selected source index " + std::to_string(k) + " out of range");

    const Index p = data.p();
    Index rows = data.target.n();
    for (std::size_t k : sel) rows += data.sources[k].n();
    const Index blocks = static_cast<Index>(sel.size()) + 1;
    const double entries = static_cast<double>(rows) * static_cast<double>(p) * static_cast<double>(blocks);
    if (entries > max_design_entries)
        throw InputError("stacked design would hold " + std::to_string(entries) + " entries, above the cap of " +
                         std::to_string(max_design_entries));

    MatrixXd x = MatrixXd::Zero(rows, p * blocks);
    VectorXd y(rows);
    Index r = data.target.n();
    x.topLeftCorner(r, p) = data.target.x;
    y.head(r) = data.target.y;
    for (std::size_t b = 0; b < sel.size(); ++b) {
        const Study& s = data.sources[sel[b]];
        x.block(r, 0, s.n(), p) = s.x;
        x.block(r, p * static_cast<Index>(b + 1), s.n(), p) = s.x;
        y.segment(r, s.n()) = s.y;
        r += s.n();
    }
    UnifiedFit out;
    out.lambda = lasso::resolve_lambda(lambda, x, y, seed);
    out.coefficients = lasso::lasso_fit({x, y, out.lambda, false}).coef;
    out.beta0 = out.coefficients.head(p);
    return out;
}

TransferReport tutrans(const MultiSourceData& data, const TransferOptions& options) {
    validate(data);
    hdtrd::validate(options.test);
    TransferReport rep;
    rep.delta0 = options.test.delta0;
    for (std::size_t k = 0; k < data.sources.size(); ++k) {
        const ContrastData cd =
            options.shuffle_pairing
                ? build_contrast_shuffled(data.target, data.sources[k], stream_seed(options.test.seed, kPairingStream))
                : build_contrast(data.target, data.sources[k]);
        SourceStatistics st;
        try {
            st = source_statistics(cd, options);
        } catch (const Error&) {
            rethrow_with_context("source " + std::to_string(k + 1) + ": ");
        }
        rep.per_source.push_back(source_report(st, options.test.delta0, options.test.alpha));
        if (rep.per_source.back().p_value > options.test.alpha) rep.selected.push_back(k);
    }
    const UnifiedFit fit = fit_unified(data, rep.selected, options.lambda_unified,
                                       stream_seed(options.test.seed, kUnifiedStream), options.max_design_entries);
    rep.beta0_hat = fit.beta0;
    rep.lambda_unified = fit.lambda;
    return rep;
}

CvDelta0Result cv_delta0(const MultiSourceData& data, const VectorXd& c0_grid, int folds, const TransferOptions& options,
                         std::uint64_t seed) {
    validate(data);
    hdtrd::validate(options.test);
    if (c0_grid.size() == 0) throw InputError("c0 grid is empty");
    for (double c : c0_grid)
        if (!(c >= 0.0) || !std::isfinite(c)) throw InputError("c0 grid entries must be finite and >= 0");
    const Index n0 = data.target.n();
    const auto held_sets = lasso::fold_indices(n0, folds, seed);
    for (const auto& held : held_sets)
        if (n0 - static_cast<Index>(held.size()) < 4)
            throw InputError("cross-validation folds leave fewer than 4 target rows for training");

    CvDelta0Result res;
    res.cv_errors = VectorXd::Zero(c0_grid.size());
    for (std::size_t f = 0; f < held_sets.size(); ++f) {
        const auto& held = held_sets[f];
        std::vector<Index> train;
        std::size_t h = 0;
        for (Index i = 0; i < n0; ++i) {
            if (h < held.size() && held[h] == i) {
                ++h;
                continue;
            }
            train.push_back(i);
        }
        MultiSourceData fold_data;
        fold_data.target = take(data.target, train);
        fold_data.sources = data.sources;
        const Study test = take(data.target, held);

        // Per-source statistics do not depend on delta0; only the selection does.
        std::vector<SourceStatistics> stats;
        for (std::size_t k = 0; k < data.sources.size(); ++k) {
            const ContrastData cd =
                options.shuffle_pairing
                    ? build_contrast_shuffled(fold_data.target, data.sources[k],
                                              stream_seed(options.test.seed, kPairingStream))
                    : build_contrast(fold_data.target, data.sources[k]);
            try {
                stats.push_back(source_statistics(cd, options));
            } catch (const Error&) {
                rethrow_with_context("fold " + std::to_string(f + 1) + ", source " + std::to_string(k + 1) + ": ");
            }
        }
        std::map<std::vector<std::size_t>, VectorXd> fits;
        for (Index c = 0; c < c0_grid.size(); ++c) {
            const double delta0 = delta0_from_c0(c0_grid(c), data.p(), n0);
            std::vector<std::size_t> sel;
            for (std::size_t k = 0; k < stats.size(); ++k)
                if (source_report(stats[k], delta0, options.test.alpha).p_value > options.test.alpha) sel.push_back(k);
            auto it = fits.find(sel);
            if (it == fits.end()) {
                const UnifiedFit fit = fit_unified(fold_data, sel, options.lambda_unified,
                                                   stream_seed(options.test.seed, kUnifiedStream), options.max_design_entries);
                it = fits.emplace(sel, fit.beta0).first;
            }
            res.cv_errors(c) += (test.y - test.x * it->second).squaredNorm();
        }
    }
    res.cv_errors /= static_cast<double>(n0);
    res.best_index = 0;
    for (Index c = 1; c < c0_grid.size(); ++c) {
        const auto b = static_cast<Index>(res.best_index);
        if (res.cv_errors(c) < res.cv_errors(b) || (res.cv_errors(c) == res.cv_errors(b) && c0_grid(c) < c0_grid(b)))
            res.best_index = static_cast<std::size_t>(c);
    }
    res.best_c0 = c0_grid(static_cast<Index>(res.best_index));
    return res;
}

}  // namespace reldiff::transfer
