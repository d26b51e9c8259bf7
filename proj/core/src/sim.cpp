#include "reldiff/sim.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "reldiff/error.hpp"

namespace reldiff::sim {

namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

constexpr Index kHoldoutRows = 500;

}  // namespace

std::string_view to_string(Sparsity s) noexcept { return s == Sparsity::point ? "point" : "prop"; }

Sparsity parse_sparsity(std::string_view name) {
    if (name == "point") return Sparsity::point;
    if (name == "prop" || name == "proportional") return Sparsity::proportional;
    throw InputError("unknown sparsity '" + std::string(name) + "' (expected point or prop)");
}

void validate(const ScenarioConfig& cfg) {
    if (cfg.n < 4) throw InputError("scenario needs n >= 4");
    if (cfg.p < 10) throw InputError("scenario needs p >= 10 (five controls carry gamma)");
    if (!(std::abs(cfg.rho) < 1.0)) throw InputError("rho must lie in (-1, 1)");
    if (!(cfg.kappa >= 0.0) || !std::isfinite(cfg.kappa)) throw InputError("kappa must be finite and >= 0");
    if (!(cfg.c0 >= 0.0) || !std::isfinite(cfg.c0)) throw InputError("c0 must be finite and >= 0");
    if (cfg.reps < 1) throw InputError("reps must be >= 1");
    if (!(cfg.alpha > 0.0 && cfg.alpha < 1.0)) throw InputError("alpha must lie in (0, 1)");
    if (support_size(cfg) > cfg.p1()) throw InputError("support size exceeds p1");
}

MatrixXd ar1_sample(Index n, Index p, double rho, Rng& rng) {
    if (!(std::abs(rho) < 1.0)) throw InputError("rho must lie in (-1, 1)");
    if (n < 0 || p < 1) throw InputError("AR(1) sample needs p >= 1");
    std::normal_distribution<double> normal(0.0, 1.0);
    const double innovation = std::sqrt(1.0 - rho * rho);
    MatrixXd out(n, p);
    for (Index i = 0; i < n; ++i) {
        double u = normal(rng);
        out(i, 0) = u;
        for (Index j = 1; j < p; ++j) {
            u = rho * u + innovation * normal(rng);
            out(i, j) = u;
        }
    }
    return out;
}

MatrixXd ar1_covariance(Index p, double rho) {
    MatrixXd s(p, p);
    for (Index i = 0; i < p; ++i)
        for (Index j = 0; j < p; ++j) s(i, j) = std::pow(rho, static_cast<double>(std::abs(i - j)));
    return s;
}

double delta0(const ScenarioConfig& cfg) {
    return cfg.c0 * std::sqrt(std::log(static_cast<double>(cfg.p)) / static_cast<double>(cfg.n));
}

Index support_size(const ScenarioConfig& cfg) {
    return cfg.sparsity == Sparsity::point ? Index{5} : std::max<Index>(cfg.p1() / 2, 1);
}

VectorXd make_beta(const ScenarioConfig& cfg) {
    const Index s = support_size(cfg);
    VectorXd beta = VectorXd::Zero(cfg.p1());
    const double norm = cfg.kappa + delta0(cfg);
    beta.head(s).setConstant(norm / std::sqrt(static_cast<double>(s)));
    return beta;
}

VectorXd make_gamma(Index p2) {
    if (p2 < 5) throw InputError("gamma needs at least 5 controls");
    VectorXd g = VectorXd::Zero(p2);
    g(0) = 3.0;
    g(1) = 1.5;
    g(4) = 2.0;
    return g;
}

double true_lambda_max_eta(const ScenarioConfig& cfg) {
    const MatrixXd s = ar1_covariance(cfg.p, cfg.rho);
    const Index p1 = cfg.p1();
    const Index p2 = cfg.p2();
    const MatrixXd sxz = s.topRightCorner(p1, p2);
    const Eigen::LLT<MatrixXd> llt(s.bottomRightCorner(p2, p2));
    const MatrixXd eta = s.topLeftCorner(p1, p1) - sxz * llt.solve(sxz.transpose());
    return Eigen::SelfAdjointEigenSolver<MatrixXd>(eta, Eigen::EigenvaluesOnly).eigenvalues().maxCoeff();
}

std::uint64_t rep_seed(std::uint64_t seed, Index rep) { return stream_seed(seed, static_cast<std::uint64_t>(rep)); }

hdtrd::Dataset make_test_dataset(const ScenarioConfig& cfg, Index rep) {
    validate(cfg);
    Rng rng(rep_seed(cfg.seed, rep));
    const MatrixXd u = ar1_sample(cfg.n, cfg.p, cfg.rho, rng);
    const VectorXd noise = standard_normal_vector(cfg.n, rng);
    hdtrd::Dataset d;
    d.x = u.leftCols(cfg.p1());
    d.z = u.rightCols(cfg.p2());
    d.y = d.x * make_beta(cfg) + d.z * make_gamma(cfg.p2()) + noise;
    return d;
}

std::vector<McSummary> run_type1_power(const ScenarioConfig& cfg, const std::vector<hdtrd::EigMethod>& methods,
                                       const hdtrd::TestOptions& base) {
    validate(cfg);
    if (methods.empty()) throw InputError("no eigenvalue methods requested");
    std::vector<McSummary> out(methods.size());
    std::vector<double> elapsed(methods.size(), 0.0);
    for (std::size_t m = 0; m < methods.size(); ++m) out[m].method = methods[m].name();

    for (Index rep = 0; rep < cfg.reps; ++rep) {
        const auto started = Clock::now();
        const std::uint64_t seed = rep_seed(cfg.seed, rep);
        hdtrd::ProjectionResiduals proj;
        std::string failure;
        try {
            proj = hdtrd::project_and_residualize(make_test_dataset(cfg, rep), base.lambda_gamma, base.lambda_w, seed);
        } catch (const Error& e) {
            failure = e.what();
        }
        const double shared = seconds_since(started);
        for (std::size_t m = 0; m < methods.size(); ++m) {
            const auto t0 = Clock::now();
            RepRecord rec;
            rec.rep = rep;
            if (failure.empty()) {
                hdtrd::TestOptions opts = base;
                opts.delta0 = delta0(cfg);
                opts.alpha = cfg.alpha;
                opts.eig = methods[m];
                opts.seed = seed;
                try {
                    rec.report = hdtrd::test_residuals(proj.eta_hat, proj.resid, opts);
                    rec.report.p2 = cfg.p2();
                    rec.report.lambda_gamma = proj.lambda_gamma;
                    rec.report.lambda_w = proj.lambda_w;
                    rec.ok = true;
                } catch (const Error& e) {
                    rec.error = e.what();
                }
            } else {
                rec.error = failure;
            }
            elapsed[m] += shared + seconds_since(t0);
            out[m].records.push_back(std::move(rec));
        }
    }

    for (std::size_t m = 0; m < methods.size(); ++m) {
        McSummary& s = out[m];
        std::vector<double> pv;
        Index rejections = 0;
        for (const RepRecord& r : s.records) {
            if (!r.ok) {
                ++s.failures;
                continue;
            }
            ++s.successes;
            pv.push_back(r.report.p_value);
            if (r.report.reject) ++rejections;
        }
        s.per_rep_pvalues = Eigen::Map<const VectorXd>(pv.data(), static_cast<Index>(pv.size()));
        if (s.successes > 0) {
            const double reps = static_cast<double>(s.successes);
            s.rejection_rate = static_cast<double>(rejections) / reps;
            s.mc_se = std::sqrt(s.rejection_rate * (1.0 - s.rejection_rate) / reps);
        }
        s.runtime_seconds = elapsed[m];
    }
    return out;
}

McSummary run_type1_power(const ScenarioConfig& cfg, const hdtrd::EigMethod& method, const hdtrd::TestOptions& base) {
    return run_type1_power(cfg, std::vector<hdtrd::EigMethod>{method}, base).front();
}

double ks_uniform(const VectorXd& sample) {
    if (sample.size() == 0) throw InputError("KS distance of an empty sample");
    std::vector<double> v(sample.data(), sample.data() + sample.size());
    std::sort(v.begin(), v.end());
    const double n = static_cast<double>(v.size());
    double d = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double u = std::clamp(v[i], 0.0, 1.0);
        d = std::max({d, static_cast<double>(i + 1) / n - u, u - static_cast<double>(i) / n});
    }
    return d;
}

void validate(const TransferScenario& scn) {
    if (scn.n0 < 8 || scn.nk < 4) throw InputError("transfer scenario needs n0 >= 8 and nk >= 4");
    if (scn.p < 2) throw InputError("transfer scenario needs p >= 2");
    if (scn.informative < 0 || scn.adversarial < 0) throw InputError("source counts must be >= 0");
    if (scn.s < 1 || scn.s > scn.p) throw InputError("support size must lie in [1, p]");
    if (!(std::abs(scn.rho) < 1.0)) throw InputError("rho must lie in (-1, 1)");
    if (!(scn.c0 >= 0.0) || !std::isfinite(scn.c0)) throw InputError("c0 must be finite and >= 0");
    if (scn.reps < 1) throw InputError("reps must be >= 1");
    if (!(scn.alpha > 0.0 && scn.alpha < 1.0)) throw InputError("alpha must lie in (0, 1)");
}

double delta0(const TransferScenario& scn) { return transfer::delta0_from_c0(scn.c0, scn.p, scn.n0); }

double true_lambda_max_contrast(const TransferScenario& scn) {
    const MatrixXd s = ar1_covariance(scn.p, scn.rho);
    return 0.5 * Eigen::SelfAdjointEigenSolver<MatrixXd>(s, Eigen::EigenvaluesOnly).eigenvalues().maxCoeff();
}

TransferInstance make_transfer_instance(const TransferScenario& scn, Index rep) {
    validate(scn);
    Rng rng(rep_seed(scn.seed, rep));
    TransferInstance inst;
    inst.beta0 = VectorXd::Zero(scn.p);
    inst.beta0.head(scn.s).setConstant(scn.signal);

    auto draw = [&](Index rows, const VectorXd& beta) {
        transfer::Study st;
        st.x = ar1_sample(rows, scn.p, scn.rho, rng);
        st.y = st.x * beta + standard_normal_vector(rows, rng);
        return st;
    };
    inst.data.target = draw(scn.n0, inst.beta0);
    const double shift = scn.adversarial_scale * delta0(scn);
    for (Index k = 0; k < scn.sources(); ++k) {
        VectorXd beta = inst.beta0;
        if (k >= scn.informative) {
            std::vector<Index> coords(static_cast<std::size_t>(scn.p));
            std::iota(coords.begin(), coords.end(), Index{0});
            std::shuffle(coords.begin(), coords.end(), rng);
            VectorXd dir = VectorXd::Zero(scn.p);
            const VectorXd values = standard_normal_vector(scn.s, rng);
            for (Index j = 0; j < scn.s; ++j) dir(coords[static_cast<std::size_t>(j)]) = values(j);
            beta += shift * dir / dir.norm();
        }
        inst.source_betas.push_back(beta);
        inst.data.sources.push_back(draw(scn.nk, beta));
    }
    inst.holdout = draw(kHoldoutRows, inst.beta0);
    return inst;
}

std::string_view to_string(TransferMethod m) noexcept {
    switch (m) {
        case TransferMethod::tutrans: return "tutrans";
        case TransferMethod::target_only: return "target_only";
        case TransferMethod::pool_all: return "pool_all";
    }
    return "unknown";
}

TransferMethod parse_transfer_method(std::string_view name) {
    if (name == "tutrans") return TransferMethod::tutrans;
    if (name == "target_only") return TransferMethod::target_only;
    if (name == "pool_all") return TransferMethod::pool_all;
    throw InputError("unknown transfer method '" + std::string(name) + "'");
}

double median(std::vector<double> values) {
    if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(values.begin(), values.end());
    const std::size_t mid = values.size() / 2;
    return values.size() % 2 == 1 ? values[mid] : 0.5 * (values[mid - 1] + values[mid]);
}

TransferSummary run_transfer_experiment(const TransferScenario& scn, const std::vector<TransferMethod>& methods,
                                        const transfer::TransferOptions& base) {
    validate(scn);
    if (methods.empty()) throw InputError("no transfer methods requested");
    const auto started = Clock::now();
    TransferSummary out;
    std::vector<std::vector<double>> est(methods.size());
    std::vector<std::vector<double>> pred(methods.size());
    std::vector<std::size_t> everyone(static_cast<std::size_t>(scn.sources()));
    std::iota(everyone.begin(), everyone.end(), std::size_t{0});

    for (Index rep = 0; rep < scn.reps; ++rep) {
        const TransferInstance inst = make_transfer_instance(scn, rep);
        const std::uint64_t seed = rep_seed(scn.seed, rep);
        for (std::size_t m = 0; m < methods.size(); ++m) {
            TransferRow row;
            row.rep = rep;
            row.method = methods[m];
            try {
                VectorXd beta;
                if (methods[m] == TransferMethod::tutrans) {
                    transfer::TransferOptions opts = base;
                    opts.test.delta0 = delta0(scn);
                    opts.test.alpha = scn.alpha;
                    opts.test.seed = seed;
                    const transfer::TransferReport rpt = transfer::tutrans(inst.data, opts);
                    beta = rpt.beta0_hat;
                    row.selected = rpt.selected;
                } else {
                    const auto& sel = methods[m] == TransferMethod::pool_all ? everyone : std::vector<std::size_t>{};
                    beta = transfer::fit_unified(inst.data, sel, base.lambda_unified, stream_seed(seed, 13),
                                                 base.max_design_entries)
                               .beta0;
                    row.selected = sel;
                }
                row.estimation_error = (beta - inst.beta0).norm();
                row.prediction_error =
                    (inst.holdout.y - inst.holdout.x * beta).squaredNorm() / static_cast<double>(inst.holdout.n());
                row.ok = true;
                est[m].push_back(row.estimation_error);
                pred[m].push_back(row.prediction_error);
            } catch (const Error& e) {
                row.error = e.what();
            }
            out.rows.push_back(std::move(row));
        }
    }
    for (std::size_t m = 0; m < methods.size(); ++m) {
        out.median_estimation_error.push_back(median(est[m]));
        out.median_prediction_error.push_back(median(pred[m]));
    }
    out.runtime_seconds = seconds_since(started);
    return out;
}

}  // namespace reldiff::sim
