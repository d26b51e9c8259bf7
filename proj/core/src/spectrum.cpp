#include "reldiff/spectrum.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Eigenvalues>

#include "reldiff/error.hpp"
#include "reldiff/random.hpp"

namespace reldiff::spectrum {

namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

constexpr double kSingularProbe = 1e-12;
constexpr int kProbeAttempts = 10;

void check_spectrum(const SampleSpectrum& spec) {
    if (spec.eigenvalues.size() == 0) throw InputError("spectrum has no eigenvalues");
    if (spec.n < 1) throw InputError("spectrum sample size must be >= 1");
    if (spec.p1 != spec.eigenvalues.size()) throw InputError("spectrum dimension does not match eigenvalue count");
}

MatrixXd moment_rows(const VectorXd& support, Index orders) {
    MatrixXd a(orders + 1, support.size());
    a.row(0).setOnes();
    for (Index k = 1; k <= orders; ++k) a.row(k) = a.row(k - 1).cwiseProduct(support.transpose());
    return a;
}

bool moments_feasible(const VectorXd& support, const VectorXd& rhs) {
    lp::LinearProgram lp;
    lp.cost = VectorXd::Zero(support.size());
    lp.eq_lhs = moment_rows(support, rhs.size() - 1);
    lp.eq_rhs = rhs;
    lp.ineq_lhs.resize(0, support.size());
    lp.ineq_rhs.resize(0);
    lp.nonneg_mask.assign(static_cast<std::size_t>(support.size()), true);
    return lp::solve_lp(lp).status == lp::LpStatus::optimal;
}

/// Clears roundoff below zero and renormalizes onto the simplex.
VectorXd clean_weights(VectorXd w) {
    w = w.cwiseMax(0.0);
    const double total = w.sum();
    if (!(total > 0.0)) throw EstimationError("spectral weights vanished");
    return w / total;
}

void check_support(const VectorXd& support) {
    if (support.size() == 0) throw InputError("support is empty");
    for (Index j = 1; j < support.size(); ++j)
        if (support(j) < support(j - 1)) throw InputError("support must be sorted ascending");
    if (!support.allFinite()) throw InputError("support contains non-finite points");
}

}  // namespace

SampleSpectrum make_spectrum(VectorXd eigenvalues, Index n) {
    if (eigenvalues.size() == 0) throw InputError("spectrum has no eigenvalues");
    if (n < 1) throw InputError("spectrum sample size must be >= 1");
    if (!eigenvalues.allFinite()) throw InputError("eigenvalues must be finite");
    const double top = eigenvalues.maxCoeff();
    const double floor = -std::max(1e-10, 1e-12 * std::abs(top));
    for (double& v : eigenvalues) {
        if (v < floor) throw InputError("eigenvalue " + std::to_string(v) + " is negative; S must be PSD");
        v = std::max(v, 0.0);
    }
    std::sort(eigenvalues.begin(), eigenvalues.end());
    if (!(eigenvalues(eigenvalues.size() - 1) > 0.0)) throw InputError("all eigenvalues are zero");
    SampleSpectrum spec;
    spec.p1 = eigenvalues.size();
    spec.n = n;
    spec.eigenvalues = std::move(eigenvalues);
    return spec;
}

SampleSpectrum sample_spectrum(const Eigen::Ref<const MatrixXd>& eta) {
    const Index n = eta.rows();
    const Index p1 = eta.cols();
    if (n < 1 || p1 < 1) throw InputError("residual matrix must be nonempty");
    if (!eta.allFinite()) throw InputError("residual matrix contains non-finite entries");
    VectorXd eig = VectorXd::Zero(p1);
    // The nonzero spectrum is shared by eta^T eta and eta eta^T; decompose the smaller one.
    if (p1 <= n) {
        const MatrixXd s = (eta.transpose() * eta) / static_cast<double>(n);
        eig = Eigen::SelfAdjointEigenSolver<MatrixXd>(s, Eigen::EigenvaluesOnly).eigenvalues();
    } else {
        const MatrixXd g = (eta * eta.transpose()) / static_cast<double>(n);
        eig.tail(n) = Eigen::SelfAdjointEigenSolver<MatrixXd>(g, Eigen::EigenvaluesOnly).eigenvalues();
    }
    return make_spectrum(std::move(eig), n);
}

std::string_view to_string(Method method) noexcept {
    switch (method) {
        case Method::mplp: return "mplp";
        case Method::mpmo: return "mpmo";
        case Method::naive: return "naive";
    }
    return "unknown";
}

Method parse_method(std::string_view name) {
    if (name == "mplp") return Method::mplp;
    if (name == "mpmo") return Method::mpmo;
    if (name == "naive") return Method::naive;
    throw InputError("unknown eigenvalue method '" + std::string(name) + "' (expected mplp, mpmo or naive)");
}

Complex stieltjes_empirical(const SampleSpectrum& spec, Complex z) {
    if (!(z.imag() > 0.0)) throw DomainError("Stieltjes transform needs IM(z) > 0");
    check_spectrum(spec);
    Complex sum = 0.0;
    for (double lambda : spec.eigenvalues) sum += 1.0 / (lambda - z);
    const double n = static_cast<double>(spec.n);
    return -(1.0 - spec.ratio()) / z + sum / n;
}

Eigen::Vector4d tian_moments(const SampleSpectrum& spec) {
    check_spectrum(spec);
    if (spec.n < 7) throw InputError("moment corrections need n >= 7, got " + std::to_string(spec.n));
    const double n = static_cast<double>(spec.n);
    const VectorXd& l = spec.eigenvalues;
    const double x1 = l.mean();
    const double x2 = l.array().square().mean();
    const double x3 = l.array().cube().mean();
    const double x4 = l.array().square().square().mean();
    const double t2 = spec.ratio();
    const double t4 = t2 * t2;
    const double c2 = n * n / ((n - 1.0) * (n + 2.0));
    const double c3 = c2 * n * n / ((n - 2.0) * (n + 4.0));
    const double c4 = c3 * n * (n * n + n + 2.0) / ((n - 3.0) * (n + 1.0) * (n + 6.0));
    const double q = n * n + n + 2.0;

    Eigen::Vector4d z;
    z(0) = x1;
    z(1) = c2 * (x2 - t2 * x1 * x1);
    z(2) = c3 * (x3 - 3.0 * t2 * x2 * x1 + 2.0 * t4 * x1 * x1 * x1);
    z(3) = c4 * (x4 - 4.0 * t2 * x3 * x1 - t2 * x2 * x2 * (2.0 * n * n + 3.0 * n - 6.0) / q +
                 t4 * x1 * x1 * (2.0 * x2 - t2 * x1 * x1) * (5.0 * n * n + 6.0 * n) / q);
    return z;
}

VectorXd kong_moments(const Eigen::Ref<const MatrixXd>& eta, int moments) {
    const Index n = eta.rows();
    const Index p1 = eta.cols();
    if (moments < 1) throw InputError("number of moments must be >= 1");
    if (n < 1 || p1 < 1) throw InputError("residual matrix must be nonempty");
    if (moments > n) throw InputError("cannot estimate " + std::to_string(moments) + " moments from " + std::to_string(n) + " rows");
    const double nd = static_cast<double>(n);
    const MatrixXd s = (eta * eta.transpose()) / nd;
    MatrixXd power = s;
    VectorXd out(moments);
    for (int k = 1; k <= moments; ++k) {
        const double kd = static_cast<double>(k);
        const double log_pref = kd * std::log(nd) - std::log(static_cast<double>(p1)) - std::lgamma(nd + 1.0) +
                                std::lgamma(kd + 1.0) + std::lgamma(nd - kd + 1.0);
        out(k - 1) = std::exp(log_pref) * power.trace();
        if (k < moments) power = (s.triangularView<Eigen::StrictlyUpper>() * power).eval();
    }
    return out;
}

VectorXd support_grid(const SampleSpectrum& spec, int support_size) {
    check_spectrum(spec);
    if (support_size < 1) throw InputError("support size must be >= 1");
    const double b = spec.largest();
    const double a = spec.smallest() / b;
    if (support_size == 1) return VectorXd::Constant(1, b);
    if (a > b) {
        // Only when lambda_max < 1 and the spectrum is nearly flat; keep the grid ordered.
        return VectorXd::LinSpaced(support_size, b, a);
    }
    return VectorXd::LinSpaced(support_size, a, b);
}

ProbePoints make_probes(const SampleSpectrum& spec, const VectorXd& support, int probe_count, std::uint64_t seed) {
    check_spectrum(spec);
    if (probe_count < 1) throw InputError("probe count must be >= 1");
    Rng rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const double height = 1.0 / std::sqrt(static_cast<double>(spec.n));
    ProbePoints probes;
    probes.u_seed = seed;
    probes.z_values.reserve(static_cast<std::size_t>(probe_count));
    for (int k = 0; k < probe_count; ++k) {
        bool accepted = false;
        for (int attempt = 0; attempt < kProbeAttempts && !accepted; ++attempt) {
            const Complex z(normal(rng), height);
            const Complex m = stieltjes_empirical(spec, z);
            accepted = std::abs(m) > 0.0;
            for (Index j = 0; j < support.size() && accepted; ++j)
                accepted = std::abs(1.0 + support(j) * m) >= kSingularProbe;
            if (accepted) probes.z_values.push_back(z);
        }
        if (!accepted) throw EstimationError("probe " + std::to_string(k) + " stayed singular after 10 draws");
    }
    return probes;
}

lp::LinearProgram build_mp_lp(const SampleSpectrum& spec, const ProbePoints& probes, const VectorXd& support,
                              const VectorXd& moments) {
    check_spectrum(spec);
    check_support(support);
    const Index jz = static_cast<Index>(probes.z_values.size());
    const Index jt = support.size();
    if (jz == 0) throw InputError("no probe points");
    const double tau2 = spec.ratio();
    MatrixXd x(2 * jz, jt);
    VectorXd y(2 * jz);
    for (Index k = 0; k < jz; ++k) {
        const Complex z = probes.z_values[static_cast<std::size_t>(k)];
        if (!(z.imag() > 0.0)) throw DomainError("probe " + std::to_string(k) + " is not in the upper half-plane");
        const Complex m = stieltjes_empirical(spec, z);
        const Complex lhs = z + 1.0 / m;
        y(k) = lhs.real();
        y(jz + k) = lhs.imag();
        for (Index j = 0; j < jt; ++j) {
            const Complex denom = 1.0 + support(j) * m;
            if (std::abs(denom) < kSingularProbe) throw NumericalError("probe " + std::to_string(k) + " is singular on the support");
            const Complex v = tau2 * support(j) / denom;
            x(k, j) = v.real();
            x(jz + k, j) = v.imag();
        }
    }
    VectorXd rhs(moments.size() + 1);
    rhs(0) = 1.0;
    rhs.tail(moments.size()) = moments;
    return lp::build_l1_fit_program(x, y, moment_rows(support, moments.size()), rhs);
}

SpectralModel estimate_spectrum_mplp(const SampleSpectrum& spec, const VectorXd& support, int probe_count,
                                     std::uint64_t seed) {
    check_spectrum(spec);
    check_support(support);
    if (probe_count <= support.size())
        throw InputError("probe count (" + std::to_string(probe_count) + ") must exceed support size (" +
                         std::to_string(support.size()) + ")");
    const Eigen::Vector4d zeta = tian_moments(spec);
    const ProbePoints probes = make_probes(spec, support, probe_count, seed);

    SpectralModel model;
    model.method = Method::mplp;
    model.support = support;
    for (Index keep = 4; keep >= 0; --keep) {
        VectorXd rhs(keep + 1);
        rhs(0) = 1.0;
        rhs.tail(keep) = zeta.head(keep);
        if (keep == 0 || moments_feasible(support, rhs)) {
            const lp::LinearProgram program = build_mp_lp(spec, probes, support, zeta.head(keep));
            const lp::LpSolution sol = lp::solve_lp(program);
            if (sol.status == lp::LpStatus::optimal) {
                model.weights = clean_weights(sol.x.head(support.size()));
                model.moments_used = zeta.head(keep);
                model.objective = sol.objective;
                return model;
            }
            if (sol.status == lp::LpStatus::unbounded) throw EstimationError("spectral program reported unbounded");
        }
        model.dropped_moments.push_back(static_cast<int>(keep));
    }
    throw EstimationError("spectral program infeasible even with only the simplex constraint");
}

SpectralModel estimate_spectrum_mplp(const SampleSpectrum& spec, int support_size, int probe_count, std::uint64_t seed) {
    if (support_size < 2) throw InputError("support size must be >= 2");
    if (probe_count <= support_size) throw InputError("probe count must exceed support size");
    return estimate_spectrum_mplp(spec, support_grid(spec, support_size), probe_count, seed);
}

SpectralModel fit_mpmo(const VectorXd& support, const VectorXd& moments) {
    check_support(support);
    if (moments.size() < 1) throw InputError("at least one moment is required");
    SpectralModel model;
    model.method = Method::mpmo;
    model.support = support;
    model.moments_used = moments;
    if (support.size() == 1) {
        model.weights = VectorXd::Ones(1);
        model.objective = std::abs(support(0) - moments(0));
        return model;
    }
    const double b = support.cwiseAbs().maxCoeff();
    const double scale = b > 0.0 ? 1.0 / b : 1.0;
    const Index m = moments.size();
    MatrixXd v(m, support.size());
    VectorXd target(m);
    VectorXd scaled_t = support * scale;
    VectorXd row = VectorXd::Ones(support.size());
    double factor = 1.0;
    for (Index i = 0; i < m; ++i) {
        row = row.cwiseProduct(scaled_t);
        factor *= scale;
        v.row(i) = row.transpose();
        target(i) = moments(i) * factor;
    }
    const VectorXd w = lp::solve_l1_fit(v, target, MatrixXd::Ones(1, support.size()), VectorXd::Ones(1));
    model.weights = clean_weights(w);
    model.objective = (v * model.weights - target).lpNorm<1>();
    return model;
}

SpectralModel estimate_spectrum_mpmo(const Eigen::Ref<const MatrixXd>& eta, const SampleSpectrum& spec, int support_size,
                                     int moments) {
    if (support_size < 1) throw InputError("support size must be >= 1");
    if (moments < 1) throw InputError("number of moments must be >= 1");
    return fit_mpmo(support_grid(spec, support_size), kong_moments(eta, moments));
}

SpectralModel estimate_spectrum_mpmo(const Eigen::Ref<const MatrixXd>& eta, int support_size, int moments) {
    return estimate_spectrum_mpmo(eta, sample_spectrum(eta), support_size, moments);
}

double lambda_max_from_model(const SpectralModel& model, Index p1) {
    if (model.support.size() == 0 || model.support.size() != model.weights.size())
        throw InputError("spectral model support and weights disagree");
    const double threshold = static_cast<double>(p1) / static_cast<double>(p1 + 1);
    double cumulative = 0.0;
    for (Index j = 0; j < model.weights.size(); ++j) {
        cumulative += model.weights(j);
        if (cumulative >= threshold) return model.support(j);
    }
    return model.support(model.support.size() - 1);
}

double lambda_max_naive(const SampleSpectrum& spec) {
    check_spectrum(spec);
    const double f = 1.0 + std::sqrt(spec.ratio());
    return spec.largest() / (f * f);
}

LambdaEstimate estimate_lambda_max(const Eigen::Ref<const MatrixXd>& eta, const EstimatorOptions& options) {
    LambdaEstimate out;
    out.spectrum = sample_spectrum(eta);
    switch (options.method) {
        case Method::mplp:
            out.model = estimate_spectrum_mplp(out.spectrum, options.support_size, options.probe_count, options.seed);
            out.value = lambda_max_from_model(out.model, out.spectrum.p1);
            break;
        case Method::mpmo:
            out.model = estimate_spectrum_mpmo(eta, out.spectrum, options.support_size, options.moments);
            out.value = lambda_max_from_model(out.model, out.spectrum.p1);
            break;
        case Method::naive:
            out.value = lambda_max_naive(out.spectrum);
            out.model.method = Method::naive;
            out.model.support = VectorXd::Constant(1, out.value);
            out.model.weights = VectorXd::Ones(1);
            break;
    }
    return out;
}

}  // namespace reldiff::spectrum
