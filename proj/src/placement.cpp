#include "lobsim/placement.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <boost/math/distributions/students_t.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace lobsim {

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

double normal_pdf(double x, double mu, double sigma) {
    const double z = (x - mu) / sigma;
    return kInvSqrt2Pi / sigma * std::exp(-0.5 * z * z);
}

// P(a < X < b) for X ~ N(mu, sigma), computed on the tail that keeps precision.
double normal_mass(double a, double b, double mu, double sigma) {
    const double za = (a - mu) / sigma;
    const double zb = (b - mu) / sigma;
    if (za > 0.0) return 0.5 * (std::erfc(za * kInvSqrt2) - std::erfc(zb * kInvSqrt2));
    return 0.5 * (std::erfc(-zb * kInvSqrt2) - std::erfc(-za * kInvSqrt2));
}

double student_mass(const StudentParams& p, double a, double b) {
    const boost::math::students_t_distribution<double> t(p.nu);
    const double za = (a - p.mu) / p.sigma;
    const double zb = (b - p.mu) / p.sigma;
    const auto upper = [&](double z) { return std::isinf(z) ? (z > 0 ? 0.0 : 1.0) : boost::math::cdf(complement(t, z)); };
    const auto lower = [&](double z) { return std::isinf(z) ? (z > 0 ? 1.0 : 0.0) : boost::math::cdf(t, z); };
    if (za > 0.0) return upper(za) - upper(zb);
    return lower(zb) - lower(za);
}

template <class CellMass>
TickPmf build_pmf(Tick n_min, Tick n_max, CellMass&& mass) {
    if (n_min > n_max) throw PlacementError("discretization range is empty");
    constexpr double inf = std::numeric_limits<double>::infinity();
    TickPmf pmf;
    pmf.n_min = n_min;
    pmf.n_max = n_max;
    pmf.probabilities.resize(static_cast<std::size_t>(n_max - n_min + 1));
    for (Tick n = n_min; n <= n_max; ++n)
        pmf.probabilities[static_cast<std::size_t>(n - n_min)] = std::max(0.0, mass(n - 0.5, n + 0.5));
    pmf.lower_tail = std::max(0.0, mass(-inf, n_min - 0.5));
    pmf.upper_tail = std::max(0.0, mass(n_max + 0.5, inf));
    return pmf;
}

}  // namespace

void StudentParams::validate() const {
    if (!std::isfinite(mu)) throw PlacementError("student location must be finite");
    if (!(sigma > 0.0) || !std::isfinite(sigma)) throw PlacementError("student scale must be positive");
    if (!(nu > 0.0) || !std::isfinite(nu)) throw PlacementError("student degrees of freedom must be positive");
}

void MixtureParams::validate() const {
    const std::size_t g = weights.size();
    if (g == 0 || means.size() != g || sigmas.size() != g)
        throw PlacementError("mixture needs matching, non-empty weight/mean/sigma vectors");
    double total = 0.0;
    for (std::size_t i = 0; i < g; ++i) {
        if (!(weights[i] > 0.0)) throw PlacementError("mixture weights must be positive");
        if (!(sigmas[i] > 0.0)) throw PlacementError("mixture standard deviations must be positive");
        if (!std::isfinite(means[i])) throw PlacementError("mixture means must be finite");
        total += weights[i];
    }
    if (std::abs(total - 1.0) > 1e-9) throw PlacementError("mixture weights must sum to 1");
}

double student_pdf(const StudentParams& p, double x) {
    const double z = (x - p.mu) / p.sigma;
    const double log_norm = std::lgamma(0.5 * (p.nu + 1.0)) - std::lgamma(0.5 * p.nu) -
                            0.5 * std::log(M_PI * p.nu) - std::log(p.sigma);
    return std::exp(log_norm - 0.5 * (p.nu + 1.0) * std::log1p(z * z / p.nu));
}

double student_cdf(const StudentParams& p, double x) {
    const boost::math::students_t_distribution<double> t(p.nu);
    return boost::math::cdf(t, (x - p.mu) / p.sigma);
}

double mixture_pdf(const MixtureParams& p, double x) {
    double sum = 0.0;
    for (std::size_t i = 0; i < p.components(); ++i) sum += p.weights[i] * normal_pdf(x, p.means[i], p.sigmas[i]);
    return sum;
}

double mixture_cdf(const MixtureParams& p, double x) {
    double sum = 0.0;
    for (std::size_t i = 0; i < p.components(); ++i)
        sum += p.weights[i] * 0.5 * std::erfc(-(x - p.means[i]) / p.sigmas[i] * kInvSqrt2);
    return sum;
}

double TickPmf::at(Tick n) const noexcept {
    if (n < n_min || n > n_max) return 0.0;
    return probabilities[static_cast<std::size_t>(n - n_min)];
}

double TickPmf::covered_mass() const noexcept {
    return std::accumulate(probabilities.begin(), probabilities.end(), 0.0);
}

TickPmf discretize_to_ticks(const std::function<double(double)>& density, Tick n_min, Tick n_max) {
    using boost::math::quadrature::gauss_kronrod;
    return build_pmf(n_min, n_max, [&](double a, double b) {
        double err = 0.0;
        return gauss_kronrod<double, 61>::integrate(density, a, b, 15, 1e-13, &err);
    });
}

TickPmf discretize_to_ticks(const MixtureParams& params, Tick n_min, Tick n_max) {
    params.validate();
    return build_pmf(n_min, n_max, [&](double a, double b) {
        double sum = 0.0;
        for (std::size_t i = 0; i < params.components(); ++i)
            sum += params.weights[i] * normal_mass(a, b, params.means[i], params.sigmas[i]);
        return sum;
    });
}

TickPmf discretize_to_ticks(const StudentParams& params, Tick n_min, Tick n_max) {
    params.validate();
    return build_pmf(n_min, n_max, [&](double a, double b) { return student_mass(params, a, b); });
}

PlacementSampler::PlacementSampler(const PlacementParams& params, Tick n_min, Tick n_max)
    : PlacementSampler(std::visit([&](const auto& p) { return discretize_to_ticks(p, n_min, n_max); }, params)) {}

PlacementSampler::PlacementSampler(TickPmf pmf) : n_min_(pmf.n_min) {
    const double covered = pmf.covered_mass();
    if (!(covered > 0.0)) throw PlacementError("placement law puts no mass on the sampling range");
    cdf_.resize(pmf.probabilities.size());
    double run = 0.0;
    for (std::size_t i = 0; i < cdf_.size(); ++i) {
        run += pmf.probabilities[i] / covered;
        cdf_[i] = run;
    }
    cdf_.back() = 1.0;
}

Tick PlacementSampler::sample(Rng& rng) const {
    const double u = uniform01(rng);
    const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
    return n_min_ + static_cast<Tick>(std::min<std::ptrdiff_t>(it - cdf_.begin(), std::ssize(cdf_) - 1));
}

double PlacementSampler::probability(Tick n) const noexcept {
    if (n < n_min_ || n > max_offset()) return 0.0;
    const auto i = static_cast<std::size_t>(n - n_min_);
    return i == 0 ? cdf_[0] : cdf_[i] - cdf_[i - 1];
}

double PlacementSampler::mass_at_or_above(Tick n) const noexcept {
    if (n <= n_min_) return 1.0;
    if (n > max_offset()) return 0.0;
    return 1.0 - cdf_[static_cast<std::size_t>(n - n_min_ - 1)];
}

}  // namespace lobsim
