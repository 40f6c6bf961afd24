#pragma once

#include <array>
#include <string>

#include "lobsim/types.hpp"

namespace lobsim {

/// Which volume variable an intensity was fitted against: the best-quote volume
/// (market orders) or the ten-level depth (limit orders).
enum class VolumeCovariate { q1, q10 };

std::string to_string(VolumeCovariate v);
VolumeCovariate volume_covariate_from_string(const std::string& s);

inline constexpr std::size_t kIntensityDim = 6;
using Coefficients = std::array<double, kIntensityDim>;
using CovariateVector = std::array<double, kIntensityDim>;

/// Coefficients (b0, b1, b11, b2, b22, b12) of
///   rate = exp(b0 + b1 ln S + b11 ln^2 S + b2 ln(1+v) + b22 ln^2(1+v) + b12 ln S ln(1+v)),
/// S in ticks, v in normalized volume units, rate in events per second.
struct IntensityParams {
    Coefficients beta{};
    VolumeCovariate covariate = VolumeCovariate::q1;
};

class IntensityError : public Error {
public:
    using Error::Error;
};

/// (1, ln S, ln^2 S, ln(1+v), ln^2(1+v), ln S ln(1+v)). Throws for S < 1 or v < 0.
CovariateVector covariate_vector(double spread, double volume);

double linear_predictor(const Coefficients& beta, const CovariateVector& x) noexcept;

/// exp(beta . x(S, v)). Throws IntensityError when the exponent would overflow.
double eval_state_intensity(const IntensityParams& params, double spread, double volume);

/// The homogeneous Poisson baseline. Throws for rate <= 0.
double eval_constant_intensity(double rate);

/// Re-expresses coefficients fitted with the spread in currency units as the
/// equivalent tick-unit coefficients (ln S_currency = ln S_ticks + ln ticksize).
IntensityParams spread_in_ticks(const IntensityParams& currency_params, double ticksize);

}  // namespace lobsim
