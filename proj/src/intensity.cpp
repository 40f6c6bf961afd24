#include "lobsim/intensity.hpp"

#include <cmath>
#include <sstream>

namespace lobsim {

namespace {
// exp() overflows just above 709.78.
constexpr double kMaxExponent = 700.0;
}  // namespace

std::string to_string(VolumeCovariate v) { return v == VolumeCovariate::q1 ? "q1" : "Q10"; }

VolumeCovariate volume_covariate_from_string(const std::string& s) {
    if (s == "q1") return VolumeCovariate::q1;
    if (s == "Q10" || s == "q10") return VolumeCovariate::q10;
    throw Error("unknown volume covariate '" + s + "'");
}

CovariateVector covariate_vector(double spread, double volume) {
    if (!(spread >= 1.0)) throw IntensityError("invalid spread: covariates need S >= 1 tick");
    if (!(volume >= 0.0)) throw IntensityError("invalid volume: covariates need v >= 0");
    const double ls = std::log(spread);
    const double lv = std::log1p(volume);
    return {1.0, ls, ls * ls, lv, lv * lv, ls * lv};
}

double linear_predictor(const Coefficients& beta, const CovariateVector& x) noexcept {
    double eta = 0.0;
    for (std::size_t k = 0; k < kIntensityDim; ++k) eta += beta[k] * x[k];
    return eta;
}

double eval_state_intensity(const IntensityParams& params, double spread, double volume) {
    const double eta = linear_predictor(params.beta, covariate_vector(spread, volume));
    if (!(eta < kMaxExponent)) {
        std::ostringstream msg;
        msg << "intensity exponent " << eta << " saturates at S=" << spread << ", v=" << volume
            << " (" << to_string(params.covariate) << " model, b0=" << params.beta[0] << ")";
        throw IntensityError(msg.str());
    }
    return std::exp(eta);
}

double eval_constant_intensity(double rate) {
    if (!(rate > 0.0)) throw IntensityError("constant intensity must be positive");
    return rate;
}

IntensityParams spread_in_ticks(const IntensityParams& p, double ticksize) {
    if (!(ticksize > 0.0)) throw IntensityError("ticksize must be positive");
    const double c = std::log(ticksize);
    const auto& b = p.beta;
    IntensityParams out = p;
    out.beta[0] = b[0] + b[1] * c + b[2] * c * c;
    out.beta[1] = b[1] + 2.0 * b[2] * c;
    out.beta[3] = b[3] + b[5] * c;
    return out;
}

}  // namespace lobsim
