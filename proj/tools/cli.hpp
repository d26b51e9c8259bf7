#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace reldiff::cli {

enum ExitCode : int { kOk = 0, kDegenerate = 1, kInputError = 2, kFailure = 3 };

enum class Subcommand { test, spectrum, transfer, simulate };

struct RunConfig {
    Subcommand subcommand = Subcommand::test;

    // inputs
    std::string data;
    std::string target;
    std::vector<std::string> sources;
    std::string out;
    std::string beta_out;
    std::string curve_out;

    // test / transfer
    long p1 = 0;
    std::optional<double> delta0;
    std::optional<double> c0;
    std::vector<double> cv_c0;
    int folds = 5;
    double alpha = 0.05;
    std::string eig_method = "mplp";
    bool center = false;
    bool shuffle_pairing = false;

    // spectrum
    std::string method = "mplp";
    int jt = 100;
    int jz = 200;
    int moments = 6;

    // simulate
    std::string scenario = "type1";
    std::string sparsity = "point";
    long n = 200;
    std::optional<long> p;
    double rho = 0.6;
    double kappa = 0.3;
    std::vector<double> curve_kappas;
    long reps = 500;
    long n0 = 150;
    long nk = 200;
    long informative = 4;
    long adversarial = 0;
    std::vector<std::string> methods;

    std::uint64_t seed = 0;
};

/// Parses argv into a config. Returns an exit code and prints to `out`/`err` when parsing ends the
/// run (help, version, bad flags); std::nullopt otherwise.
struct Parsed {
    RunConfig config;
    std::optional<int> early_exit;
};
Parsed parse_args(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// Executes a config. Writes the report to `out` (or to config.out) and ends with one status line.
int run(const RunConfig& config, std::ostream& out, std::ostream& err);

/// parse_args followed by run.
int main_entry(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// "1..20" or "0.5,1,2".
std::vector<double> parse_number_list(const std::string& text);

std::string version_text();

}  // namespace reldiff::cli
