#pragma once

#include <stdexcept>
#include <string>
#include <utility>

#include <Eigen/Core>

namespace reldiff {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed or out-of-range input: bad dimensions, non-finite data, flags outside their range.
class InputError : public Error {
public:
    using Error::Error;
};

/// A complex argument fell outside the domain of a transform (e.g. a probe not in the upper half-plane).
class DomainError : public Error {
public:
    using Error::Error;
};

/// Iterative solver hit its iteration cap. Carries the last iterate.
class ConvergenceError : public Error {
public:
    ConvergenceError(std::string what, Eigen::VectorXd last_iterate)
        : Error(std::move(what)), last_iterate_(std::move(last_iterate)) {}

    const Eigen::VectorXd& last_iterate() const noexcept { return last_iterate_; }

private:
    Eigen::VectorXd last_iterate_;
};

/// The data admit no test: the variance estimate of the statistic is zero.
class DegenerateDataError : public Error {
public:
    using Error::Error;
};

/// Spectrum estimation failed (infeasible program, unusable probes).
class EstimationError : public Error {
public:
    using Error::Error;
};

/// A linear program has no feasible point; `block` names the offending constraint block.
class InfeasibleError : public Error {
public:
    InfeasibleError(std::string what, std::string block)
        : Error(std::move(what)), block_(std::move(block)) {}

    const std::string& block() const noexcept { return block_; }

private:
    std::string block_;
};

/// Floating-point breakdown the solver could not certify its way out of.
class NumericalError : public Error {
public:
    using Error::Error;
};

/// Rethrows the in-flight library error with `prefix` prepended, keeping its type. Call only
/// from inside a catch block.
[[noreturn]] inline void rethrow_with_context(const std::string& prefix) {
    try {
        throw;
    } catch (const InputError& e) {
        throw InputError(prefix + e.what());
    } catch (const DomainError& e) {
        throw DomainError(prefix + e.what());
    } catch (const ConvergenceError& e) {
        throw ConvergenceError(prefix + e.what(), e.last_iterate());
    } catch (const DegenerateDataError& e) {
        throw DegenerateDataError(prefix + e.what());
    } catch (const EstimationError& e) {
        throw EstimationError(prefix + e.what());
    } catch (const InfeasibleError& e) {
        throw InfeasibleError(prefix + e.what(), e.block());
    } catch (const NumericalError& e) {
        throw NumericalError(prefix + e.what());
    } catch (const Error& e) {
        throw Error(prefix + e.what());
    }
}

}  // namespace reldiff
