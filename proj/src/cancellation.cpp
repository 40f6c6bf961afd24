#include "lobsim/cancellation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace lobsim {

namespace {

void check_shape(double alpha, double sigma) {
    if (!std::isfinite(alpha)) throw CancellationError(CancellationErrc::invalid_argument, "alpha must be finite");
    if (!(sigma > 0.0) || !std::isfinite(sigma))
        throw CancellationError(CancellationErrc::invalid_argument, "sigma must be positive");
}

void check_unit(double v, const char* what) {
    if (!(v >= 0.0 && v <= 1.0))
        throw CancellationError(CancellationErrc::invalid_argument, std::string(what) + " must lie in [0, 1]");
}

bool near_limit(double alpha) { return std::abs(alpha + 1.0) < kAlphaLimitTolerance; }

}  // namespace

void CancellationParams::validate() const {
    check_shape(alpha, sigma);
    if (!(theta > 0.0) || !std::isfinite(theta))
        throw CancellationError(CancellationErrc::invalid_argument, "theta must be positive");
}

double priority_log_norm(double alpha, double sigma) {
    check_shape(alpha, sigma);
    const double l = std::log1p(sigma);
    if (near_limit(alpha)) return std::log(sigma) - std::log(l);
    const double a1 = alpha + 1.0;
    return std::log(sigma) + std::log(a1 / std::expm1(a1 * l));
}

double priority_pdf(double alpha, double sigma, double xi) {
    check_unit(xi, "priority index");
    return std::exp(priority_log_norm(alpha, sigma) + alpha * std::log1p(sigma * xi));
}

double priority_cdf(double alpha, double sigma, double xi) {
    check_shape(alpha, sigma);
    check_unit(xi, "priority index");
    const double l = std::log1p(sigma);
    if (near_limit(alpha)) return std::log1p(sigma * xi) / l;
    const double a1 = alpha + 1.0;
    return std::expm1(a1 * std::log1p(sigma * xi)) / std::expm1(a1 * l);
}

double priority_cdf_inverse(double alpha, double sigma, double x) {
    check_shape(alpha, sigma);
    check_unit(x, "probability");
    const double l = std::log1p(sigma);
    double xi = 0.0;
    if (near_limit(alpha)) {
        xi = std::expm1(x * l) / sigma;
    } else {
        const double a1 = alpha + 1.0;
        xi = std::expm1(std::log1p(std::expm1(a1 * l) * x) / a1) / sigma;
    }
    return std::clamp(xi, 0.0, 1.0);
}

double priority_loglik(double alpha, double sigma, std::span<const double> xi) {
    if (xi.empty()) throw CancellationError(CancellationErrc::invalid_argument, "empty priority-index sample");
    double sum_log = 0.0;
    for (double x : xi) {
        check_unit(x, "priority index");
        sum_log += std::log1p(sigma * x);
    }
    return static_cast<double>(xi.size()) * priority_log_norm(alpha, sigma) + alpha * sum_log;
}

std::array<double, 2> priority_loglik_gradient(double alpha, double sigma, std::span<const double> xi) {
    check_shape(alpha, sigma);
    if (xi.empty()) throw CancellationError(CancellationErrc::invalid_argument, "empty priority-index sample");
    const double l = std::log1p(sigma);
    const double a1 = alpha + 1.0;
    double dnorm_da = 0.0;
    double dnorm_ds = 0.0;
    if (near_limit(alpha)) {
        dnorm_da = -0.5 * l;
        dnorm_ds = 1.0 / sigma - 1.0 / ((1.0 + sigma) * l);
    } else {
        const double em = std::expm1(a1 * l);
        dnorm_da = 1.0 / a1 - l * (em + 1.0) / em;
        dnorm_ds = 1.0 / sigma - a1 * std::exp(alpha * l) / em;
    }
    double sum_log = 0.0;
    double sum_ratio = 0.0;
    for (double x : xi) {
        check_unit(x, "priority index");
        sum_log += std::log1p(sigma * x);
        sum_ratio += x / (1.0 + sigma * x);
    }
    const auto n = static_cast<double>(xi.size());
    return {n * dnorm_da + sum_log, n * dnorm_ds + alpha * sum_ratio};
}

double hyp2f1(double a, double b, double c, double z) {
    if (c <= 0.0 && c == std::floor(c))
        throw CancellationError(CancellationErrc::invalid_argument, "2F1 undefined for non-positive integer c");
    if (!(std::abs(z) < 1.0))
        throw CancellationError(CancellationErrc::invalid_argument, "2F1 series needs |z| < 1");

    constexpr double kTol = 1e-12;
    constexpr std::size_t kMaxTerms = 1'000'000;
    double sum = 1.0;
    double term = 1.0;
    for (std::size_t k = 0; k < kMaxTerms; ++k) {
        const double kd = static_cast<double>(k);
        const double ratio = (a + kd) * (b + kd) / ((c + kd) * (kd + 1.0)) * z;
        term *= ratio;
        if (term == 0.0) return sum;  // terminating series
        sum += term;
        if (!std::isfinite(sum)) break;
        // The term ratio tends to z; once it and the next ratio are below one the
        // tail is bounded by a geometric series.
        const double next = std::max(std::abs(z),
                                     std::abs((a + kd + 1.0) * (b + kd + 1.0) / ((c + kd + 1.0) * (kd + 2.0)) * z));
        if (next < 1.0 && std::abs(term) * next / (1.0 - next) <= kTol * std::abs(sum)) return sum;
    }
    std::ostringstream msg;
    msg << "2F1(" << a << ", " << b << "; " << c << "; " << z << ") did not converge; partial sum " << sum;
    throw Hyp2f1Error(msg.str(), sum, kMaxTerms);
}

void DepthModelInputs::validate() const {
    if (!(limit_rate > 0.0 && market_rate > 0.0 && limit_size > 0.0 && market_size > 0.0))
        throw CancellationError(CancellationErrc::invalid_argument, "depth model inputs must all be positive");
}

DepthModelInputs perturb_unit_ratio(DepthModelInputs inputs) {
    if (inputs.market_size == inputs.limit_size) inputs.market_size *= 1.0 + kUnitRatioPerturbation;
    return inputs;
}

namespace {

// Series route: Pfaff's transformation turns the ratio into 1/2F1(1, -m; 1+delta; (q-1)/q)
// with m = nu/(1-q), whose terms all share one sign (no cancellation).
double empty_probability_series(double m, double delta, double q) {
    return 1.0 / hyp2f1(1.0, -m, 1.0 + delta, (q - 1.0) / q);
}

// Integral route: 1/P = int_0^inf exp(g(t)) dt with
//   g(t) = m ln(1 + k (1 - exp(-t/delta))) - t,  k = (1-q)/q,
// a concave exponent; integrate exp(g - max g) around the mode.
double empty_probability_integral(double m, double delta, double q) {
    const double k = (1.0 - q) / q;
    const double a = m * k;  // = nu / q > 0
    const auto g = [&](double t) { return m * std::log1p(k * -std::expm1(-t / delta)) - t; };
    const auto dg = [&](double t) {
        const double y = std::exp(-t / delta);
        return a * (y / delta) / (1.0 + k - k * y) - 1.0;
    };
    const auto d2g = [&](double t) {
        const double y = std::exp(-t / delta);
        const double den = 1.0 + k - k * y;
        return -a * (1.0 + k) * y / (delta * delta * den * den);
    };

    double mode = 0.0;
    if (dg(0.0) > 0.0) {
        double hi = std::max(1.0, delta);
        while (dg(hi) > 0.0) hi *= 2.0;
        double lo = 0.0;
        for (int i = 0; i < 200 && hi - lo > 1e-12 * std::max(1.0, hi); ++i) {
            const double mid = 0.5 * (lo + hi);
            (dg(mid) > 0.0 ? lo : hi) = mid;
        }
        mode = 0.5 * (lo + hi);
    }
    const double gmax = g(mode);
    const double curvature = std::max(std::sqrt(-d2g(mode)), std::abs(dg(mode)));
    const double h = 1.0 / std::max(curvature, 1e-12);

    std::vector<double> cuts{0.0};
    for (int j = 60; j >= 0; --j) {
        const double t = mode - h * std::ldexp(1.0, j - 4);
        if (t > 0.0 && t > cuts.back()) cuts.push_back(t);
    }
    if (mode > cuts.back()) cuts.push_back(mode);
    for (int j = 0; j < 2000; ++j) {
        const double t = mode + h * std::ldexp(1.0, std::min(j, 60) - 4) * (j >= 60 ? j - 59 : 1);
        if (t <= cuts.back()) continue;
        cuts.push_back(t);
        if (g(t) - gmax < -745.0) break;
    }

    using boost::math::quadrature::gauss_kronrod;
    const auto f = [&](double t) { return std::exp(g(t) - gmax); };
    double integral = 0.0;
    for (std::size_t i = 1; i < cuts.size(); ++i)
        integral += gauss_kronrod<double, 61>::integrate(f, cuts[i - 1], cuts[i], 12, 1e-13);
    return std::exp(-gmax - std::log(integral));
}

}  // namespace

double empty_book_probability(double nu, double delta, double q) {
    if (!(nu > 0.0 && delta > 0.0 && q > 0.0))
        throw CancellationError(CancellationErrc::invalid_argument, "depth model parameters must be positive");
    if (q == 1.0)
        throw CancellationError(CancellationErrc::removable_singularity,
                                "size ratio q = 1 is a removable singularity; perturb sigma_M (see perturb_unit_ratio)");
    if (!(std::abs(1.0 - q) < 1.0))
        throw CancellationError(CancellationErrc::invalid_argument,
                                "size ratio must satisfy |1 - q| < 1 (sigma_M < 2 sigma_L)");
    const double m = nu / (1.0 - q);
    const double w = (q - 1.0) / q;
    if (std::abs(w) <= 0.5 && std::abs(m) <= 1e5) {
        const double p = empty_probability_series(m, delta, q);
        if (std::isfinite(p) && p > 0.0) return p;
    }
    return empty_probability_integral(m, delta, q);
}

double expected_depth(const DepthModelInputs& inputs, double theta) {
    inputs.validate();
    if (!(theta > 0.0)) throw CancellationError(CancellationErrc::invalid_argument, "theta must be positive");
    const double nu = inputs.limit_rate / theta;
    const double delta = inputs.market_rate / theta;
    const double q = inputs.size_ratio();
    const double p0 = empty_book_probability(nu, delta, q);
    return inputs.market_size * (nu / q - delta + delta * p0);
}

double calibrate_theta(const DepthModelInputs& inputs, double target) {
    inputs.validate();
    if (!(target > 0.0)) throw CancellationError(CancellationErrc::invalid_argument, "target depth must be positive");

    constexpr int kScanPoints = 91;  // 10 per decade over [1e-6, 1e3]
    const double log_lo = std::log(kThetaMin);
    const double log_hi = std::log(kThetaMax);
    std::vector<std::pair<double, double>> scanned;
    double prev_theta = 0.0;
    for (int i = 0; i < kScanPoints; ++i) {
        const double theta = std::exp(log_lo + (log_hi - log_lo) * i / (kScanPoints - 1));
        const double depth = expected_depth(inputs, theta);
        scanned.emplace_back(theta, depth);
        if (depth <= target) {
            if (i == 0) break;
            double lo = std::log(prev_theta);
            double hi = std::log(theta);
            while (hi - lo > 1e-9) {
                const double mid = 0.5 * (lo + hi);
                (expected_depth(inputs, std::exp(mid)) >= target ? lo : hi) = mid;
            }
            return std::exp(0.5 * (lo + hi));
        }
        prev_theta = theta;
    }
    std::ostringstream msg;
    msg << "no theta in [" << kThetaMin << ", " << kThetaMax << "] brackets target depth " << target
        << "; Q(theta_min)=" << scanned.front().second << ", Q(last scanned theta=" << scanned.back().first
        << ")=" << scanned.back().second;
    throw CancellationError(CancellationErrc::unbracketable, msg.str());
}

}  // namespace lobsim
