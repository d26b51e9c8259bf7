#pragma once

#include <complex>
#include <cstdint>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "reldiff/lp.hpp"

namespace reldiff::spectrum {

using Complex = std::complex<double>;

inline constexpr int kDefaultSupportSize = 100;
inline constexpr int kDefaultProbeCount = 200;
inline constexpr int kDefaultKongMoments = 6;

/// Eigenvalues of S = eta^T eta / n, sorted ascending, together with the dimensions that produced them.
struct SampleSpectrum {
    Eigen::VectorXd eigenvalues;
    Eigen::Index n = 0;
    Eigen::Index p1 = 0;

    double largest() const { return eigenvalues(eigenvalues.size() - 1); }
    double smallest() const { return eigenvalues(0); }
    double ratio() const { return static_cast<double>(p1) / static_cast<double>(n); }
};

/// Validates, clamps tiny negatives to zero and sorts. p1 is the number of eigenvalues.
SampleSpectrum make_spectrum(Eigen::VectorXd eigenvalues, Eigen::Index n);

/// Spectrum of eta^T eta / n for an n x p1 matrix of rows eta_i.
SampleSpectrum sample_spectrum(const Eigen::Ref<const Eigen::MatrixXd>& eta);

enum class Method { mplp, mpmo, naive };

std::string_view to_string(Method method) noexcept;
/// Throws InputError on an unknown name.
Method parse_method(std::string_view name);

/// Discrete population spectral distribution.
struct SpectralModel {
    Eigen::VectorXd support;
    Eigen::VectorXd weights;
    /// Moment values the weights were fitted to (after any relaxation).
    Eigen::VectorXd moments_used;
    /// Orders k of moment constraints dropped by the relaxation ladder, highest first.
    std::vector<int> dropped_moments;
    Method method = Method::mplp;
    double objective = 0.0;
};

struct ProbePoints {
    std::vector<Complex> z_values;
    std::uint64_t u_seed = 0;
};

/// -(1 - p1/n)/z + (1/n) sum_i 1/(lambda_i - z). Throws DomainError unless IM(z) > 0.
Complex stieltjes_empirical(const SampleSpectrum& spec, Complex z);

/// Unbiased estimates of the first four population spectral moments.
Eigen::Vector4d tian_moments(const SampleSpectrum& spec);

/// First M moments from the strictly upper-triangular Gram recursion on the n x p1 matrix eta.
Eigen::VectorXd kong_moments(const Eigen::Ref<const Eigen::MatrixXd>& eta, int moments);

/// J_t equally spaced points on [lambda_min / lambda_max, lambda_max].
Eigen::VectorXd support_grid(const SampleSpectrum& spec, int support_size);

/// Probes u_k + i / sqrt(n) with u_k standard normal; probes at which some 1 + t_j m(z_k) is
/// within 1e-12 of zero are redrawn, at most 10 times each.
ProbePoints make_probes(const SampleSpectrum& spec, const Eigen::VectorXd& support, int probe_count,
                        std::uint64_t seed);

/// The moment-constrained L1 fit of the discretized MP equation. Variables (w, w~); the
/// equality block holds one row per entry of (1, moments).
lp::LinearProgram build_mp_lp(const SampleSpectrum& spec, const ProbePoints& probes,
                              const Eigen::VectorXd& support, const Eigen::VectorXd& moments);

/// Moment constraints are relaxed from the highest order down until the moment block is feasible.
SpectralModel estimate_spectrum_mplp(const SampleSpectrum& spec, int support_size = kDefaultSupportSize,
                                     int probe_count = kDefaultProbeCount, std::uint64_t seed = 0);
SpectralModel estimate_spectrum_mplp(const SampleSpectrum& spec, const Eigen::VectorXd& support, int probe_count,
                                     std::uint64_t seed);

/// Weights on `support` minimizing sum_i |sum_j w_j t_j^i - moments_i| over the simplex.
SpectralModel fit_mpmo(const Eigen::VectorXd& support, const Eigen::VectorXd& moments);

/// Moment-matching fit on the support grid of `spec`, the spectrum of the same eta.
SpectralModel estimate_spectrum_mpmo(const Eigen::Ref<const Eigen::MatrixXd>& eta, const SampleSpectrum& spec,
                                     int support_size = kDefaultSupportSize, int moments = kDefaultKongMoments);
SpectralModel estimate_spectrum_mpmo(const Eigen::Ref<const Eigen::MatrixXd>& eta,
                                     int support_size = kDefaultSupportSize, int moments = kDefaultKongMoments);

/// Smallest support point whose cumulative weight reaches p1 / (p1 + 1).
double lambda_max_from_model(const SpectralModel& model, Eigen::Index p1);

/// lambda_max(S) / (1 + sqrt(p1/n))^2.
double lambda_max_naive(const SampleSpectrum& spec);

/// Estimate of lambda_max(Sigma_eta) from residual rows eta by the chosen method.
struct LambdaEstimate {
    double value = 0.0;
    SpectralModel model;
    SampleSpectrum spectrum;
};

struct EstimatorOptions {
    Method method = Method::mplp;
    int support_size = kDefaultSupportSize;
    int probe_count = kDefaultProbeCount;
    int moments = kDefaultKongMoments;
    std::uint64_t seed = 0;
};

LambdaEstimate estimate_lambda_max(const Eigen::Ref<const Eigen::MatrixXd>& eta, const EstimatorOptions& options);

}  // namespace reldiff::spectrum
