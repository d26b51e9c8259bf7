#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "reldiff/error.hpp"
#include "reldiff/hdtrd.hpp"
#include "reldiff/io.hpp"
#include "reldiff/random.hpp"
#include "reldiff/sim.hpp"
#include "reldiff/spectrum.hpp"
#include "reldiff/transfer.hpp"
#include "reldiff/version.hpp"

namespace reldiff::cli {

namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

constexpr std::uint64_t kCvStream = 21;

struct Outcome {
    std::string body;
    int code = kOk;
    std::string message;
};

std::string_view command_name(Subcommand s) {
    switch (s) {
        case Subcommand::test: return "test";
        case Subcommand::spectrum: return "spectrum";
        case Subcommand::transfer: return "transfer";
        case Subcommand::simulate: return "simulate";
    }
    return "none";
}

std::string_view status_name(int code) {
    switch (code) {
        case kOk: return "ok";
        case kDegenerate: return "degenerate";
        case kInputError: return "input_error";
        default: return "failure";
    }
}

void emit_status(std::ostream& out, int code, std::string_view command, const std::string& message) {
    io::Record r;
    r.add("status", std::string(status_name(code))).add("code", code).add("command", std::string(command));
    if (!message.empty()) r.add("message", message);
    out << r.line() << '\n';
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c == '\n' ? ' ' : c;
    }
    return out + '"';
}

std::string join_indices(const std::vector<std::size_t>& idx, char sep) {
    std::string out;
    for (std::size_t i = 0; i < idx.size(); ++i) {
        if (i) out += sep;
        out += std::to_string(idx[i] + 1);
    }
    return out;
}

std::vector<std::string> int_strings(const std::vector<int>& v) {
    std::vector<std::string> out;
    for (int x : v) out.push_back(std::to_string(x));
    return out;
}

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(item);
    return out;
}

void center_columns(MatrixXd& m) {
    if (m.cols() > 0) m.rowwise() -= m.colwise().mean();
}

void center(VectorXd& v) { v.array() -= v.mean(); }

void apply_spectrum_sizes(hdtrd::TestOptions& o, const RunConfig& cfg) {
    o.support_size = cfg.jt;
    o.probe_count = cfg.jz;
    o.moments = cfg.moments;
}

void add_report_fields(io::Record& r, const hdtrd::TestReport& t) {
    r.add("t_proj", t.t_proj)
        .add("lambda_max", t.lambda_max)
        .add("t_stat", t.t_stat)
        .add("var_hat", t.var_hat)
        .add("z_score", t.z_score)
        .add("p_value", t.p_value)
        .add("reject", t.reject);
}

Outcome run_test(const RunConfig& cfg) {
    hdtrd::Dataset d = io::read_test_csv(cfg.data, cfg.p1);
    if (cfg.center) {
        center(d.y);
        center_columns(d.x);
        center_columns(d.z);
    }
    hdtrd::TestOptions o;
    const double p = static_cast<double>(d.p1() + d.p2());
    o.delta0 = cfg.delta0 ? *cfg.delta0 : *cfg.c0 * std::sqrt(std::log(p) / static_cast<double>(d.n()));
    o.alpha = cfg.alpha;
    o.eig = hdtrd::EigMethod::parse(cfg.eig_method);
    o.seed = cfg.seed;
    apply_spectrum_sizes(o, cfg);
    const hdtrd::TestReport t = hdtrd::hdtrd_test(d, o);

    io::Record r;
    r.add("command", "test").add("n", t.n).add("p1", t.p1).add("p2", t.p2).add("delta0", t.delta0);
    if (cfg.c0) r.add("c0", *cfg.c0);
    r.add("alpha", t.alpha).add("eig_method", t.eig_method);
    add_report_fields(r, t);
    r.add("lambda_gamma", t.lambda_gamma).add("lambda_w", t.lambda_w);
    r.add_list("dropped_moments", int_strings(t.dropped_moments));
    r.add("seed", static_cast<long long>(cfg.seed));

    std::ostringstream body;
    body << r.line() << '\n';
    body << "# " << (t.reject ? "reject" : "do not reject") << " ||beta|| <= " << io::format_double(t.delta0)
         << " at level " << io::format_double(t.alpha) << " (p = " << io::format_double(t.p_value) << ")\n";
    return {body.str(), kOk, {}};
}

Outcome run_spectrum(const RunConfig& cfg) {
    const MatrixXd eta = io::read_matrix_csv(cfg.data);
    spectrum::EstimatorOptions eo;
    eo.method = spectrum::parse_method(cfg.method);
    eo.support_size = cfg.jt;
    eo.probe_count = cfg.jz;
    eo.moments = cfg.moments;
    eo.seed = cfg.seed;
    const spectrum::LambdaEstimate est = spectrum::estimate_lambda_max(eta, eo);

    io::Record r;
    r.add("command", "spectrum")
        .add("method", std::string(spectrum::to_string(eo.method)))
        .add("n", est.spectrum.n)
        .add("p1", est.spectrum.p1)
        .add("lambda_max", est.value)
        .add("sample_lambda_max", est.spectrum.largest())
        .add("objective", est.model.objective);
    std::vector<std::string> used;
    for (double m : est.model.moments_used) used.push_back(io::format_double(m));
    r.add_list("moments_used", used);
    r.add_list("dropped_moments", int_strings(est.model.dropped_moments));
    if (est.spectrum.n >= 7) {
        const Eigen::Vector4d tian = spectrum::tian_moments(est.spectrum);
        for (int k = 0; k < 4; ++k) r.add("zeta" + std::to_string(k + 1), tian(k));
    }
    r.add("seed", static_cast<long long>(cfg.seed));

    std::ostringstream body;
    body << r.line() << '\n';
    body << "support,weight\n";
    for (Index i = 0; i < est.model.support.size(); ++i)
        body << io::format_double(est.model.support(i)) << ',' << io::format_double(est.model.weights(i)) << '\n';
    return {body.str(), kOk, {}};
}

Outcome run_transfer(const RunConfig& cfg) {
    transfer::MultiSourceData data;
    data.target = io::read_study_csv(cfg.target);
    for (const std::string& path : cfg.sources) data.sources.push_back(io::read_study_csv(path));
    if (cfg.center) {
        center(data.target.y);
        center_columns(data.target.x);
        for (auto& s : data.sources) {
            center(s.y);
            center_columns(s.x);
        }
    }
    transfer::validate(data);

    transfer::TransferOptions o;
    o.test.alpha = cfg.alpha;
    o.test.eig = hdtrd::EigMethod::parse(cfg.eig_method);
    o.test.seed = cfg.seed;
    apply_spectrum_sizes(o.test, cfg);
    o.shuffle_pairing = cfg.shuffle_pairing;

    std::optional<double> c0 = cfg.c0;
    transfer::CvDelta0Result cv;
    const bool use_cv = !cfg.cv_c0.empty();
    if (use_cv) {
        const VectorXd grid = Eigen::Map<const VectorXd>(cfg.cv_c0.data(), static_cast<Index>(cfg.cv_c0.size()));
        cv = transfer::cv_delta0(data, grid, cfg.folds, o, stream_seed(cfg.seed, kCvStream));
        c0 = cv.best_c0;
    }
    o.test.delta0 = cfg.delta0 ? *cfg.delta0 : transfer::delta0_from_c0(*c0, data.p(), data.target.n());
    transfer::TransferReport rep = transfer::tutrans(data, o);
    rep.c0 = c0;

    std::vector<std::size_t> degenerate;
    for (std::size_t k = 0; k < rep.per_source.size(); ++k)
        if (rep.per_source[k].degenerate) degenerate.push_back(k);

    io::Record r;
    r.add("command", "transfer")
        .add("sources", data.sources.size())
        .add("n0", data.target.n())
        .add("p", data.p())
        .add("delta0", rep.delta0);
    if (c0) r.add("c0", *c0);
    r.add("alpha", cfg.alpha)
        .add("eig_method", o.test.eig.name())
        .add("selected", rep.selected.empty() ? std::string("none") : join_indices(rep.selected, ','))
        .add("selected_count", rep.selected.size())
        .add("degenerate_sources", degenerate.empty() ? std::string("none") : join_indices(degenerate, ','))
        .add("lambda_unified", rep.lambda_unified)
        .add("seed", static_cast<long long>(cfg.seed));

    std::ostringstream body;
    body << r.line() << '\n';
    body << "source,n,t_proj,lambda_max,t_stat,z_score,p_value,degenerate,selected\n";
    for (std::size_t k = 0; k < rep.per_source.size(); ++k) {
        const hdtrd::TestReport& t = rep.per_source[k];
        const bool sel = std::find(rep.selected.begin(), rep.selected.end(), k) != rep.selected.end();
        body << k + 1 << ',' << t.n << ',' << io::format_double(t.t_proj) << ',' << io::format_double(t.lambda_max) << ','
             << io::format_double(t.t_stat) << ',' << io::format_double(t.z_score) << ','
             << io::format_double(t.p_value) << ',' << (t.degenerate ? "true" : "false") << ','
             << (sel ? "true" : "false") << '\n';
    }
    if (use_cv) {
        body << "c0,cv_error\n";
        for (std::size_t i = 0; i < cfg.cv_c0.size(); ++i)
            body << io::format_double(cfg.cv_c0[i]) << ',' << io::format_double(cv.cv_errors(static_cast<Index>(i)))
                 << '\n';
    }
    if (!degenerate.empty())
        body << "# sources " << join_indices(degenerate, ',')
             << " reproduce the target exactly (zero residual variance); kept as trivially transferable\n";
    if (!cfg.beta_out.empty()) io::write_atomic(cfg.beta_out, io::to_csv({"beta0"}, rep.beta0_hat));
    return {body.str(), kOk, {}};
}

std::vector<hdtrd::EigMethod> sim_methods(const RunConfig& cfg, const sim::ScenarioConfig& scn) {
    std::vector<hdtrd::EigMethod> out;
    for (const std::string& tag : split_list(cfg.eig_method)) {
        if (tag == "true")
            out.push_back(hdtrd::EigMethod::fixed(sim::true_lambda_max_eta(scn)));
        else
            out.push_back(hdtrd::EigMethod::parse(tag));
    }
    if (out.empty()) throw InputError("--eig-method lists no methods");
    return out;
}

std::string type1_rows(const std::vector<sim::McSummary>& summaries) {
    std::ostringstream os;
    os << "rep,method,ok,t_proj,lambda_max,t_stat,var_hat,z_score,p_value,reject,error\n";
    if (summaries.empty()) return os.str();
    for (std::size_t i = 0; i < summaries.front().records.size(); ++i) {
        for (const sim::McSummary& s : summaries) {
            const sim::RepRecord& rec = s.records[i];
            const hdtrd::TestReport& t = rec.report;
            os << rec.rep << ',' << s.method << ',' << (rec.ok ? "true" : "false") << ',';
            if (rec.ok)
                os << io::format_double(t.t_proj) << ',' << io::format_double(t.lambda_max) << ','
                   << io::format_double(t.t_stat) << ',' << io::format_double(t.var_hat) << ','
                   << io::format_double(t.z_score) << ',' << io::format_double(t.p_value) << ','
                   << (t.reject ? "true" : "false") << ",\n";
            else
                os << ",,,,,,," << csv_field(rec.error) << '\n';
        }
    }
    return os.str();
}

Outcome run_simulate_testing(const RunConfig& cfg) {
    sim::ScenarioConfig scn;
    scn.n = cfg.n;
    scn.p = cfg.p.value_or(300);
    scn.rho = cfg.rho;
    scn.sparsity = sim::parse_sparsity(cfg.sparsity);
    scn.kappa = cfg.scenario == "type1" ? 0.0 : cfg.kappa;
    if (cfg.c0) scn.c0 = *cfg.c0;
    scn.reps = cfg.reps;
    scn.seed = cfg.seed;
    scn.alpha = cfg.alpha;
    sim::validate(scn);

    hdtrd::TestOptions base;
    apply_spectrum_sizes(base, cfg);
    const auto methods = sim_methods(cfg, scn);
    const auto summaries = sim::run_type1_power(scn, methods, base);

    std::ostringstream body;
    for (const sim::McSummary& s : summaries) {
        io::Record r;
        r.add("command", "simulate")
            .add("scenario", cfg.scenario)
            .add("method", s.method)
            .add("n", scn.n)
            .add("p", scn.p)
            .add("rho", scn.rho)
            .add("sparsity", std::string(sim::to_string(scn.sparsity)))
            .add("kappa", scn.kappa)
            .add("c0", scn.c0)
            .add("delta0", sim::delta0(scn))
            .add("alpha", scn.alpha)
            .add("reps", scn.reps)
            .add("successes", s.successes)
            .add("failures", s.failures)
            .add("rejection_rate", s.rejection_rate)
            .add("mc_se", s.mc_se);
        if (s.successes > 0) r.add("ks_uniform", sim::ks_uniform(s.per_rep_pvalues));
        r.add("seed", static_cast<long long>(scn.seed));
        body << r.line() << '\n';
    }
    if (!cfg.out.empty()) io::write_atomic(cfg.out, type1_rows(summaries));

    if (!cfg.curve_out.empty()) {
        std::vector<double> kappas = cfg.curve_kappas;
        if (kappas.empty()) kappas = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5};
        std::ostringstream curve;
        curve << "kappa,method,rejection_rate,mc_se,successes\n";
        for (double k : kappas) {
            sim::ScenarioConfig point = scn;
            point.kappa = k;
            sim::validate(point);
            for (const sim::McSummary& s : sim::run_type1_power(point, sim_methods(cfg, point), base))
                curve << io::format_double(k) << ',' << s.method << ',' << io::format_double(s.rejection_rate) << ','
                      << io::format_double(s.mc_se) << ',' << s.successes << '\n';
        }
        io::write_atomic(cfg.curve_out, curve.str());
    }
    return {body.str(), kOk, {}};
}

Outcome run_simulate_transfer(const RunConfig& cfg) {
    sim::TransferScenario scn;
    scn.n0 = cfg.n0;
    scn.nk = cfg.nk;
    scn.p = cfg.p.value_or(200);
    scn.informative = cfg.informative;
    scn.adversarial = cfg.adversarial;
    scn.rho = cfg.rho;
    if (cfg.c0) scn.c0 = *cfg.c0;
    scn.reps = cfg.reps;
    scn.seed = cfg.seed;
    scn.alpha = cfg.alpha;
    sim::validate(scn);

    std::vector<sim::TransferMethod> methods;
    for (const std::string& m : cfg.methods) methods.push_back(sim::parse_transfer_method(m));
    if (methods.empty())
        methods = {sim::TransferMethod::tutrans, sim::TransferMethod::target_only, sim::TransferMethod::pool_all};

    transfer::TransferOptions base;
    base.test.eig = hdtrd::EigMethod::parse(cfg.eig_method);
    apply_spectrum_sizes(base.test, cfg);
    const sim::TransferSummary res = sim::run_transfer_experiment(scn, methods, base);

    std::ostringstream body;
    for (std::size_t m = 0; m < methods.size(); ++m) {
        Index ok = 0;
        for (const sim::TransferRow& row : res.rows) ok += row.method == methods[m] && row.ok;
        io::Record r;
        r.add("command", "simulate")
            .add("scenario", "transfer")
            .add("method", std::string(sim::to_string(methods[m])))
            .add("n0", scn.n0)
            .add("nk", scn.nk)
            .add("p", scn.p)
            .add("informative", scn.informative)
            .add("adversarial", scn.adversarial)
            .add("c0", scn.c0)
            .add("delta0", sim::delta0(scn))
            .add("reps", scn.reps)
            .add("successes", ok)
            .add("median_estimation_error", res.median_estimation_error[m])
            .add("median_prediction_error", res.median_prediction_error[m])
            .add("seed", static_cast<long long>(scn.seed));
        body << r.line() << '\n';
    }
    if (!cfg.out.empty()) {
        std::ostringstream rows;
        rows << "rep,method,ok,estimation_error,prediction_error,selected,error\n";
        for (const sim::TransferRow& row : res.rows) {
            rows << row.rep << ',' << sim::to_string(row.method) << ',' << (row.ok ? "true" : "false") << ',';
            if (row.ok)
                rows << io::format_double(row.estimation_error) << ',' << io::format_double(row.prediction_error) << ','
                     << (row.selected.empty() ? std::string("none") : join_indices(row.selected, ';')) << ",\n";
            else
                rows << ",,," << csv_field(row.error) << '\n';
        }
        io::write_atomic(cfg.out, rows.str());
    }
    return {body.str(), kOk, {}};
}

Outcome dispatch(const RunConfig& cfg) {
    switch (cfg.subcommand) {
        case Subcommand::test: return run_test(cfg);
        case Subcommand::spectrum: return run_spectrum(cfg);
        case Subcommand::transfer: return run_transfer(cfg);
        case Subcommand::simulate:
            if (cfg.scenario == "transfer") return run_simulate_transfer(cfg);
            return run_simulate_testing(cfg);
    }
    throw InputError("unknown subcommand");
}

void check_config(const RunConfig& cfg) {
    if (!(cfg.alpha > 0.0 && cfg.alpha < 1.0))
        throw InputError("--alpha must lie in (0, 1), got " + io::format_double(cfg.alpha));
    if (cfg.delta0 && !(*cfg.delta0 >= 0.0)) throw InputError("--delta0 must be >= 0");
    if (cfg.c0 && !(*cfg.c0 >= 0.0)) throw InputError("--c0 must be >= 0");
    switch (cfg.subcommand) {
        case Subcommand::test:
            if (cfg.delta0.has_value() == cfg.c0.has_value()) throw InputError("give exactly one of --delta0 and --c0");
            break;
        case Subcommand::transfer: {
            const int given = cfg.delta0.has_value() + cfg.c0.has_value() + !cfg.cv_c0.empty();
            if (given != 1) throw InputError("give exactly one of --delta0, --c0 and --cv-c0");
            break;
        }
        case Subcommand::simulate:
            if (cfg.scenario != "type1" && cfg.scenario != "power" && cfg.scenario != "transfer")
                throw InputError("--scenario must be type1, power or transfer");
            break;
        case Subcommand::spectrum: break;
    }
}

/// CLI11 check for the open interval (lo, hi).
CLI::Validator open_interval(double lo, double hi) {
    return CLI::Validator(
        [lo, hi](std::string& s) -> std::string {
            double v = 0.0;
            if (!CLI::detail::lexical_cast(s, v)) return "value " + s + " is not a number";
            if (!(v > lo && v < hi))
                return "value " + s + " outside (" + io::format_double(lo) + ", " + io::format_double(hi) + ")";
            return {};
        },
        "in (" + io::format_double(lo) + ", " + io::format_double(hi) + ")");
}

}  // namespace

std::vector<double> parse_number_list(const std::string& text) {
    auto number = [&](const std::string& s) {
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(s, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || used != s.size() || !std::isfinite(v)) throw InputError("cannot read number '" + s + "' in '" + text + "'");
        return v;
    };
    std::vector<double> out;
    const std::size_t dots = text.find("..");
    if (dots != std::string::npos) {
        const double lo = number(text.substr(0, dots));
        const double hi = number(text.substr(dots + 2));
        if (lo != std::floor(lo) || hi != std::floor(hi) || hi < lo)
            throw InputError("range '" + text + "' needs integer bounds lo <= hi");
        for (double v = lo; v <= hi; v += 1.0) out.push_back(v);
        return out;
    }
    for (const std::string& item : split_list(text)) out.push_back(number(item));
    if (out.empty()) throw InputError("empty number list");
    return out;
}

std::string version_text() {
    std::ostringstream os;
    os << "reldiff " << kVersion << "\n"
       << "subcommand  module    procedure\n"
       << "test        hdtrd     projected relevance test: lasso projection, U-statistic, spectral margin\n"
       << "spectrum    spectrum  largest population eigenvalue via Marchenko-Pastur LP (mplp), moment LP (mpmo) or naive shrinkage\n"
       << "transfer    transfer  per-source relevance tests on contrasts, then stacked lasso on the selected sources (TUTrans)\n"
       << "simulate    sim       Monte Carlo size, power and transfer experiments\n"
       << "            lasso     coordinate descent lasso, K-fold cross-validation\n"
       << "            lp        two-phase dense simplex with Bland fallback\n";
    return os.str();
}

Parsed parse_args(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    Parsed parsed;
    RunConfig& c = parsed.config;
    CLI::App app{"Relevant-difference testing and transfer learning for high-dimensional linear models", "reldiff"};
    app.require_subcommand(1);
    app.set_version_flag("--version", [] { return version_text(); }, "Print version and the procedure table");

    std::string cv_c0_text, curve_kappas_text, sources_text, methods_text;
    std::optional<double> delta0, c0;
    std::optional<long> p;

    auto add_alpha = [&](CLI::App* s) {
        s->add_option("--alpha", c.alpha, "Test level")->check(open_interval(0.0, 1.0))->capture_default_str();
    };
    auto add_seed = [&](CLI::App* s) { s->add_option("--seed", c.seed, "Random seed")->capture_default_str(); };
    auto add_spectrum_sizes = [&](CLI::App* s) {
        s->add_option("--jt", c.jt, "Support grid size")->check(CLI::PositiveNumber)->capture_default_str();
        s->add_option("--jz", c.jz, "Probe count")->check(CLI::PositiveNumber)->capture_default_str();
        s->add_option("--moments", c.moments, "Moment count for mpmo")->check(CLI::PositiveNumber)->capture_default_str();
    };

    CLI::App* test = app.add_subcommand("test", "Projected relevance test on one dataset");
    test->add_option("--data", c.data, "CSV: y, then p1 columns of x, then z")->required();
    test->add_option("--p1", c.p1, "Number of covariates of interest")->required()->check(CLI::PositiveNumber);
    auto* t_delta = test->add_option("--delta0", delta0, "Relevance margin");
    auto* t_c0 = test->add_option("--c0", c0, "Margin multiplier, delta0 = c0 sqrt(log p / n)");
    t_delta->excludes(t_c0);
    add_alpha(test);
    test->add_option("--eig-method", c.eig_method, "mplp, mpmo, naive or fixed:<value>")->capture_default_str();
    test->add_flag("--center", c.center, "Center y and every covariate column");
    test->add_option("--out", c.out, "Write the report here instead of stdout");
    add_seed(test);
    add_spectrum_sizes(test);

    CLI::App* spec = app.add_subcommand("spectrum", "Largest population eigenvalue from a residual matrix");
    spec->add_option("--data", c.data, "CSV matrix, n rows by p1 columns")->required();
    spec->add_option("--method", c.method, "mplp, mpmo or naive")->capture_default_str();
    spec->add_option("--out", c.out, "Write the report here instead of stdout");
    add_seed(spec);
    add_spectrum_sizes(spec);

    CLI::App* tr = app.add_subcommand("transfer", "Source selection and stacked fit");
    tr->add_option("--target", c.target, "CSV: y, then p columns of X")->required();
    tr->add_option("--sources", sources_text, "Comma-separated source CSV paths");
    auto* tr_delta = tr->add_option("--delta0", delta0, "Transfer level");
    auto* tr_c0 = tr->add_option("--c0", c0, "delta0 = c0 sqrt(log p / n0)");
    auto* tr_cv = tr->add_option("--cv-c0", cv_c0_text, "Cross-validated c0 grid, e.g. 1..20");
    tr_delta->excludes(tr_c0, tr_cv);
    tr_c0->excludes(tr_cv);
    tr->add_option("--folds", c.folds, "Folds for --cv-c0")->check(CLI::Range(2, 1000))->capture_default_str();
    add_alpha(tr);
    tr->add_option("--eig-method", c.eig_method, "mplp, mpmo, naive or fixed:<value>")->capture_default_str();
    tr->add_flag("--shuffle-pairing", c.shuffle_pairing, "Pair target and source rows by a seeded shuffle");
    tr->add_flag("--center", c.center, "Center every response and covariate column");
    tr->add_option("--beta-out", c.beta_out, "CSV file for the target coefficient estimate");
    tr->add_option("--out", c.out, "Write the report here instead of stdout");
    add_seed(tr);
    add_spectrum_sizes(tr);

    CLI::App* simc = app.add_subcommand("simulate", "Monte Carlo experiments");
    simc->add_option("--scenario", c.scenario, "type1, power or transfer")
        ->check(CLI::IsMember({"type1", "power", "transfer"}))
        ->capture_default_str();
    simc->add_option("--sparsity", c.sparsity, "point or prop")->check(CLI::IsMember({"point", "prop"}))->capture_default_str();
    simc->add_option("--n", c.n, "Sample size")->capture_default_str();
    simc->add_option("--p", p, "Covariate count (default 300; 200 for transfer)");
    simc->add_option("--rho", c.rho, "AR(1) correlation")->check(open_interval(-1.0, 1.0))->capture_default_str();
    simc->add_option("--c0", c0, "Margin multiplier (default 0.5; 2 for transfer)");
    simc->add_option("--kappa", c.kappa, "Signal offset for the power scenario")->capture_default_str();
    simc->add_option("--reps", c.reps, "Replications")->check(CLI::PositiveNumber)->capture_default_str();
    simc->add_option("--eig-method", c.eig_method, "Comma list of mplp, mpmo, naive, true, fixed:<value>")
        ->capture_default_str();
    add_alpha(simc);
    simc->add_option("--n0", c.n0, "Target rows (transfer)")->capture_default_str();
    simc->add_option("--nk", c.nk, "Rows per source (transfer)")->capture_default_str();
    simc->add_option("--informative", c.informative, "Sources equal to the target (transfer)")->capture_default_str();
    simc->add_option("--adversarial", c.adversarial, "Shifted sources (transfer)")->capture_default_str();
    simc->add_option("--methods", methods_text, "Comma list of tutrans, target_only, pool_all (transfer)");
    simc->add_option("--out", c.out, "Per-replication CSV");
    simc->add_option("--emit-curve", c.curve_out, "Power-curve CSV over --curve-kappas");
    simc->add_option("--curve-kappas", curve_kappas_text, "Kappa values for --emit-curve, e.g. 0,0.1,0.2");
    add_seed(simc);
    add_spectrum_sizes(simc);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        emit_status(out, kOk, "help", {});
        parsed.early_exit = kOk;
        return parsed;
    } catch (const CLI::CallForVersion& e) {
        out << e.what();
        emit_status(out, kOk, "version", {});
        parsed.early_exit = kOk;
        return parsed;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        emit_status(out, kInputError, "none", e.what());
        parsed.early_exit = kInputError;
        return parsed;
    }

    c.delta0 = delta0;
    c.c0 = c0;
    c.p = p;
    if (test->parsed()) c.subcommand = Subcommand::test;
    if (spec->parsed()) c.subcommand = Subcommand::spectrum;
    if (tr->parsed()) c.subcommand = Subcommand::transfer;
    if (simc->parsed()) c.subcommand = Subcommand::simulate;
    try {
        c.sources = split_list(sources_text);
        c.methods = split_list(methods_text);
        if (!cv_c0_text.empty()) c.cv_c0 = parse_number_list(cv_c0_text);
        if (!curve_kappas_text.empty()) c.curve_kappas = parse_number_list(curve_kappas_text);
    } catch (const InputError& e) {
        err << "error: " << e.what() << '\n';
        emit_status(out, kInputError, command_name(c.subcommand), e.what());
        parsed.early_exit = kInputError;
    }
    return parsed;
}

int run(const RunConfig& config, std::ostream& out, std::ostream& err) {
    const std::string_view command = command_name(config.subcommand);
    int code = kOk;
    std::string message;
    try {
        check_config(config);
        const Outcome o = dispatch(config);
        if (!config.out.empty() && config.subcommand != Subcommand::simulate) {
            io::write_atomic(config.out, o.body);
            out << o.body.substr(0, o.body.find('\n') + 1);
        } else {
            out << o.body;
        }
        code = o.code;
        message = o.message;
    } catch (const DegenerateDataError& e) {
        code = kDegenerate;
        message = e.what();
    } catch (const InputError& e) {
        code = kInputError;
        message = e.what();
    } catch (const DomainError& e) {
        code = kInputError;
        message = e.what();
    } catch (const Error& e) {
        code = kFailure;
        message = e.what();
    } catch (const std::exception& e) {
        code = kFailure;
        message = std::string("unexpected: ") + e.what();
    }
    if (code != kOk) err << "error: " << message << '\n';
    emit_status(out, code, command, message);
    return code;
}

int main_entry(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    const Parsed parsed = parse_args(argc, argv, out, err);
    if (parsed.early_exit) return *parsed.early_exit;
    return run(parsed.config, out, err);
}

}  // namespace reldiff::cli
