#include "reldiff/hdtrd.hpp"

#include <cmath>
#include <cstdio>
#include <limits>

#include "reldiff/error.hpp"
#include "reldiff/random.hpp"

namespace reldiff::hdtrd {

namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

// Substream labels under the caller's seed.
constexpr std::uint64_t kGammaStream = 1;
constexpr std::uint64_t kProjectionStream = 2;
constexpr std::uint64_t kProbeStream = 3;

void check_pair(const Eigen::Ref<const MatrixXd>& eta, const Eigen::Ref<const VectorXd>& resid) {
    if (eta.rows() != resid.size())
        throw InputError("residual matrix has " + std::to_string(eta.rows()) + " rows but residual vector has " +
                         std::to_string(resid.size()));
    if (eta.rows() < 2) throw InputError("U-statistic needs n >= 2");
}

}  // namespace

void validate(const Dataset& data) {
    const Index n = data.n();
    if (data.x.rows() != n) throw InputError("x has " + std::to_string(data.x.rows()) + " rows, y has " + std::to_string(n));
    if (data.z.cols() > 0 && data.z.rows() != n)
        throw InputError("z has " + std::to_string(data.z.rows()) + " rows, y has " + std::to_string(n));
    if (n < 4) throw InputError("need n >= 4 observations, got " + std::to_string(n));
    if (data.p1() < 1) throw InputError("need at least one covariate of interest");
    if (!data.y.allFinite() || !data.x.allFinite() || !data.z.allFinite())
        throw InputError("dataset contains non-finite entries");
}

ProjectionResiduals project_and_residualize(const Dataset& data, const lasso::LambdaChoice& lambda_gamma,
                                            const lasso::LambdaChoice& lambda_w, std::uint64_t seed) {
    validate(data);
    ProjectionResiduals out;
    if (data.p2() == 0) {
        out.eta_hat = data.x;
        out.resid = data.y;
        out.h_hat.resize(data.p1(), 0);
        out.gamma_hat.resize(0);
        return out;
    }
    out.lambda_gamma = lasso::resolve_lambda(lambda_gamma, data.z, data.y, stream_seed(seed, kGammaStream));
    const lasso::LassoFit gamma = lasso::lasso_fit({data.z, data.y, out.lambda_gamma, false});
    out.gamma_hat = gamma.coef;
    out.resid = data.y - data.z * gamma.coef;

    out.lambda_w = lasso::resolve_multi_lambda(lambda_w, data.x, data.z, stream_seed(seed, kProjectionStream));
    out.h_hat = lasso::multi_lasso_fit(data.x, data.z, out.lambda_w).h_matrix;
    out.eta_hat = data.x - data.z * out.h_hat.transpose();
    return out;
}

double u_statistic(const Eigen::Ref<const MatrixXd>& eta, const Eigen::Ref<const VectorXd>& resid) {
    check_pair(eta, resid);
    const double n = static_cast<double>(eta.rows());
    const VectorXd weighted_sum = eta.transpose() * resid;
    const double diagonal = (eta.rowwise().squaredNorm().array() * resid.array().square()).sum();
    return (weighted_sum.squaredNorm() - diagonal) / (n * (n - 1.0));
}

double variance_estimate(const Eigen::Ref<const MatrixXd>& eta, const Eigen::Ref<const VectorXd>& resid) {
    check_pair(eta, resid);
    const Index n = eta.rows();
    const MatrixXd w = resid.asDiagonal() * eta;
    MatrixXd gram(n, n);
    gram.setZero();
    gram.selfadjointView<Eigen::Lower>().rankUpdate(w);
    // Off-diagonal squares summed directly; subtracting the diagonal would cancel badly.
    double total = 0.0;
    for (Index j = 0; j < n; ++j)
        for (Index i = j + 1; i < n; ++i) total += gram(i, j) * gram(i, j);
    const double nd = static_cast<double>(n);
    return 2.0 * total / (nd * (nd - 1.0));
}

double normal_upper_tail(double x) noexcept { return 0.5 * std::erfc(x / std::sqrt(2.0)); }

EigMethod EigMethod::parse(const std::string& text) {
    if (text == "mplp") return {Kind::mplp, 0.0};
    if (text == "mpmo") return {Kind::mpmo, 0.0};
    if (text == "naive") return {Kind::naive, 0.0};
    const std::string prefix = "fixed:";
    if (text.rfind(prefix, 0) == 0) {
        const std::string number = text.substr(prefix.size());
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(number, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || used != number.size() || !std::isfinite(v) || v < 0.0)
            throw InputError("fixed eigenvalue must be a finite number >= 0, got '" + number + "'");
        return fixed(v);
    }
    throw InputError("unknown eigenvalue method '" + text + "' (expected mplp, mpmo, naive or fixed:<value>)");
}

std::string EigMethod::name() const {
    switch (kind) {
        case Kind::mplp: return "mplp";
        case Kind::mpmo: return "mpmo";
        case Kind::naive: return "naive";
        case Kind::fixed: {
            char buf[64];
            std::snprintf(buf, sizeof buf, "fixed:%.17g", value);
            return buf;
        }
    }
    return "unknown";
}

void validate(const TestOptions& options) {
    if (!(options.delta0 >= 0.0) || !std::isfinite(options.delta0)) throw InputError("delta0 must be finite and >= 0");
    if (!(options.alpha > 0.0 && options.alpha < 1.0)) throw InputError("alpha must lie in (0, 1)");
    if (options.eig.kind == EigMethod::Kind::mplp && !(options.probe_count > options.support_size && options.support_size >= 2))
        throw InputError("mplp needs probe count > support size >= 2");
    if (options.eig.kind == EigMethod::Kind::mpmo && (options.support_size < 1 || options.moments < 1))
        throw InputError("mpmo needs support size >= 1 and moments >= 1");
}

TestReport finish_report(double t_proj, double var_hat, double lambda_max, Index n, double delta0, double alpha) {
    TestReport r;
    r.t_proj = t_proj;
    r.var_hat = var_hat;
    r.lambda_max = lambda_max;
    r.lambda_max_sq = lambda_max * lambda_max;
    r.delta0 = delta0;
    r.alpha = alpha;
    r.n = n;
    r.t_stat = t_proj - delta0 * delta0 * r.lambda_max_sq;
    r.z_score = static_cast<double>(n) * r.t_stat / std::sqrt(2.0 * var_hat);
    r.p_value = normal_upper_tail(r.z_score);
    r.reject = r.p_value < alpha;
    return r;
}

double estimate_lambda_max(const Eigen::Ref<const MatrixXd>& eta, const TestOptions& options, std::vector<int>* dropped) {
    if (options.eig.kind == EigMethod::Kind::fixed) return options.eig.value;
    spectrum::EstimatorOptions eo;
    eo.support_size = options.support_size;
    eo.probe_count = options.probe_count;
    eo.moments = options.moments;
    eo.seed = stream_seed(options.seed, kProbeStream);
    switch (options.eig.kind) {
        case EigMethod::Kind::mplp: eo.method = spectrum::Method::mplp; break;
        case EigMethod::Kind::mpmo: eo.method = spectrum::Method::mpmo; break;
        default: eo.method = spectrum::Method::naive; break;
    }
    const spectrum::LambdaEstimate est = spectrum::estimate_lambda_max(eta, eo);
    if (dropped) *dropped = est.model.dropped_moments;
    return est.value;
}

TestReport test_residuals(const Eigen::Ref<const MatrixXd>& eta, const Eigen::Ref<const VectorXd>& resid,
                          const TestOptions& options) {
    validate(options);
    check_pair(eta, resid);
    const double t_proj = u_statistic(eta, resid);
    const double var_hat = std::max(0.0, variance_estimate(eta, resid));
    if (!(var_hat > 0.0) || !std::isfinite(var_hat))
        throw DegenerateDataError("variance estimate is zero; residuals or projected covariates carry no variation");
    std::vector<int> dropped;
    const double lmax = estimate_lambda_max(eta, options, &dropped);
    TestReport r = finish_report(t_proj, var_hat, lmax, eta.rows(), options.delta0, options.alpha);
    r.eig_method = options.eig.name();
    r.p1 = eta.cols();
    r.dropped_moments = std::move(dropped);
    return r;
}

TestReport hdtrd_test(const Dataset& data, const TestOptions& options) {
    validate(options);
    const ProjectionResiduals proj = project_and_residualize(data, options.lambda_gamma, options.lambda_w, options.seed);
    // Relative cut well above the coordinate-descent tolerance: what survives below it is solver noise.
    constexpr double kVanishing = 1e-6;
    if (proj.eta_hat.norm() <= kVanishing * data.x.norm())
        throw DegenerateDataError("projected covariates vanish; x is (numerically) spanned by the controls");
    if (proj.resid.norm() <= kVanishing * data.y.norm() || data.y.norm() == 0.0)
        throw DegenerateDataError("residuals vanish; y is (numerically) explained by the controls");
    TestReport r = test_residuals(proj.eta_hat, proj.resid, options);
    r.p2 = data.p2();
    r.lambda_gamma = proj.lambda_gamma;
    r.lambda_w = proj.lambda_w;
    return r;
}

}  // namespace reldiff::hdtrd
