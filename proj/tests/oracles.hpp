#pragma once

// Independent reference implementations used by the unit and acceptance tests.

#include <algorithm>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "lobsim/calibration.hpp"
#include "lobsim/intensity.hpp"
#include "lobsim/random.hpp"

namespace oracle {

struct FuzzReport {
    std::size_t operations = 0;
    std::size_t violations = 0;
    std::string first_violation;
    std::size_t limits = 0, markets = 0, cancels = 0, rejected_crossing = 0;
};

/// Random limit/market/cancel traffic against an OrderBook. After every
/// operation: structural invariants, no cross, fill conservation and FIFO of
/// the reported fills; every `index_every` operations the priority indices are
/// enumerated and checked for monotonicity.
FuzzReport fuzz_book(std::size_t operations, std::uint64_t seed, std::size_t index_every = 1000);

/// Gillespie simulation of the Poisson book behind the depth formula: the
/// book holds n units of size sigma_M; a limit order adds a geometric number
/// of units with mean sigma_L / sigma_M, a market order removes one unit, each
/// unit is cancelled at rate theta. Returns the time-average of sigma_M * n.
double poisson_book_depth(double limit_rate, double market_rate, double limit_size, double market_size, double theta,
                          std::size_t events, std::uint64_t seed);

/// Piecewise-constant covariate path with random spreads and volumes, and
/// events of one stream drawn by thinning a dominating Poisson process.
struct SyntheticPath {
    lobsim::CovariatePath path;
    std::size_t events = 0;
};
SyntheticPath thinning_path(const lobsim::IntensityParams& params, double duration, std::uint64_t seed,
                            lobsim::Tick max_spread = 6, lobsim::Volume max_volume = 40, double mean_holding = 2.0);

/// One-sample Kolmogorov-Smirnov statistic against a continuous CDF.
template <class Cdf>
double ks_statistic(std::vector<double> sample, Cdf cdf) {
    std::sort(sample.begin(), sample.end());
    const double n = static_cast<double>(sample.size());
    double d = 0.0;
    for (std::size_t i = 0; i < sample.size(); ++i) {
        const double f = cdf(sample[i]);
        d = std::max({d, f - static_cast<double>(i) / n, static_cast<double>(i + 1) / n - f});
    }
    return d;
}

/// Asymptotic p-value of sqrt(n) * D under the Kolmogorov distribution.
double ks_pvalue(double statistic, std::size_t n);

/// Pearson chi-square p-value of observed counts against expected counts
/// (bins with expected < 5 pooled into their neighbour).
double chi_square_pvalue(std::span<const double> observed, std::span<const double> expected, std::size_t fitted = 0);

/// Adaptive Simpson quadrature.
template <class F>
double integrate(F f, double a, double b, double tol = 1e-12, int depth = 50);

}  // namespace oracle

#include "oracles_impl.hpp"
