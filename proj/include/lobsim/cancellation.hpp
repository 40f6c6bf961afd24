#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "lobsim/types.hpp"

namespace lobsim {

/// Priority-index cancellation law (alpha, sigma) and per-order hazard theta (1/s).
struct CancellationParams {
    double alpha = -1.0;
    double sigma = 1.0;
    double theta = 0.01;

    void validate() const;
};

enum class CancellationErrc { invalid_argument, removable_singularity, unbracketable, nonconvergence };

class CancellationError : public Error {
public:
    CancellationError(CancellationErrc code, const std::string& what) : Error(what), code_(code) {}
    CancellationErrc code() const noexcept { return code_; }

private:
    CancellationErrc code_;
};

/// Below this |alpha + 1| the density uses its alpha = -1 limit.
inline constexpr double kAlphaLimitTolerance = 1e-8;

/// Log of the normalizing constant sigma (alpha+1) / ((1+sigma)^(alpha+1) - 1).
double priority_log_norm(double alpha, double sigma);
double priority_pdf(double alpha, double sigma, double xi);
double priority_cdf(double alpha, double sigma, double xi);
double priority_cdf_inverse(double alpha, double sigma, double x);
double priority_loglik(double alpha, double sigma, std::span<const double> xi);
/// Analytic d/d(alpha), d/d(sigma) of priority_loglik.
std::array<double, 2> priority_loglik_gradient(double alpha, double sigma, std::span<const double> xi);

/// Gauss hypergeometric series 2F1(a, b; c; z) for |z| < 1, summed until the
/// geometric tail bound falls below 1e-12 of the partial sum.
double hyp2f1(double a, double b, double c, double z);

class Hyp2f1Error : public CancellationError {
public:
    Hyp2f1Error(const std::string& what, double partial_sum, std::size_t terms)
        : CancellationError(CancellationErrc::nonconvergence, what), partial_sum_(partial_sum), terms_(terms) {}
    double partial_sum() const noexcept { return partial_sum_; }
    std::size_t terms() const noexcept { return terms_; }

private:
    double partial_sum_;
    std::size_t terms_;
};

/// Inputs of the Poisson-book depth model: per-side rates and mean sizes.
struct DepthModelInputs {
    double limit_rate = 0.0;   ///< lambda_L, events/s
    double market_rate = 0.0;  ///< lambda_M, events/s
    double limit_size = 0.0;   ///< sigma_L, volume units
    double market_size = 0.0;  ///< sigma_M, volume units

    double size_ratio() const noexcept { return market_size / limit_size; }
    void validate() const;
};

/// Relative shift applied to the size ratio when it is exactly 1.
inline constexpr double kUnitRatioPerturbation = 1e-6;

/// Returns inputs with sigma_M nudged by kUnitRatioPerturbation when
/// sigma_M == sigma_L, leaving everything else untouched.
DepthModelInputs perturb_unit_ratio(DepthModelInputs inputs);

/// Probability that the Poisson book is empty, i.e. the ratio
/// q^(nu/(1-q)) / 2F1(delta, -nu/(1-q); 1+delta; 1-q).
double empty_book_probability(double nu, double delta, double q);

/// Expected total liquidity
///   Q = sigma_M (nu/q - delta + delta q^(nu/(1-q)) / 2F1(delta, -nu/(1-q); 1+delta; 1-q))
/// with nu = lambda_L/theta, delta = lambda_M/theta, q = sigma_M/sigma_L.
double expected_depth(const DepthModelInputs& inputs, double theta);

inline constexpr double kThetaMin = 1e-6;
inline constexpr double kThetaMax = 1e3;

/// Solves expected_depth(inputs, theta) = target over [kThetaMin, kThetaMax]
/// by a log-spaced bracket scan followed by bisection.
double calibrate_theta(const DepthModelInputs& inputs, double target_depth);

}  // namespace lobsim
