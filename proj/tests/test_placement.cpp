#include "doctest.h"

#include <cmath>
#include <numbers>

#include "lobsim/placement.hpp"
#include "oracles.hpp"

using namespace lobsim;

namespace {

const MixtureParams kAirp{{0.211, 0.309, 0.480}, {0.050, 2.751, 4.849}, {0.793, 1.249, 2.903}};
const MixtureParams kStandardNormal{{1.0}, {0.0}, {1.0}};

double normal_density(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }

}  // namespace

TEST_CASE("student density") {
    const StudentParams cauchy{0.0, 1.0, 1.0};
    CHECK(student_pdf(cauchy, 0.0) == doctest::Approx(1.0 / std::numbers::pi).epsilon(1e-14));
    const StudentParams p{1.5, 2.0, 3.0};
    CHECK(student_pdf(p, 1.5 + 2.5) == doctest::Approx(student_pdf(p, 1.5 - 2.5)).epsilon(1e-15));
    for (const StudentParams& s : {StudentParams{0.0, 1.0, 1.0}, StudentParams{1.5, 1.5, 1.5}, StudentParams{2.0, 0.7, 8.0}}) {
        const double inside = oracle::integrate([&](double x) { return student_pdf(s, x); }, s.mu - 50 * s.sigma,
                                                s.mu + 50 * s.sigma, 1e-12);
        // Heavy tails beyond 50 sigma are added back from the exact tail mass.
        const double tails = 2.0 * student_cdf(s, s.mu - 50 * s.sigma);
        CHECK(inside + tails == doctest::Approx(1.0).epsilon(1e-6));
        CHECK(student_cdf(s, s.mu) == doctest::Approx(0.5).epsilon(1e-14));
    }
    CHECK_THROWS_AS((StudentParams{0.0, 0.0, 1.0}.validate()), PlacementError);
    CHECK_THROWS_AS((StudentParams{0.0, 1.0, -1.0}.validate()), PlacementError);
}

TEST_CASE("mixture density") {
    double sum = 0.0;
    for (double w : kAirp.weights) sum += w;
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(mixture_pdf(kStandardNormal, 0.0) == doctest::Approx(0.39894).epsilon(1e-5));
    const double mass = oracle::integrate([](double x) { return mixture_pdf(kAirp, x); }, -60.0, 70.0, 1e-12);
    CHECK(mass == doctest::Approx(1.0).epsilon(1e-6));
    for (double x = -10.0; x <= 20.0; x += 0.37) {
        const double f = mixture_pdf(kAirp, x);
        for (std::size_t i = 0; i < 3; ++i) {
            const double z = (x - kAirp.means[i]) / kAirp.sigmas[i];
            CHECK(f >= kAirp.weights[i] * normal_density(z) / kAirp.sigmas[i] * (1.0 - 1e-14));
        }
    }
    CHECK(mixture_pdf(kAirp, 1e3) < 1e-100);
    CHECK(mixture_pdf(kAirp, -1e3) < 1e-100);
    CHECK_THROWS_AS((MixtureParams{{0.5, 0.6}, {0.0, 1.0}, {1.0, 1.0}}.validate()), PlacementError);
    CHECK_THROWS_AS((MixtureParams{{0.5, 0.5}, {0.0, 1.0}, {1.0, 0.0}}.validate()), PlacementError);
}

TEST_CASE("discretization") {
    const TickPmf pmf = discretize_to_ticks(kStandardNormal, -50, 50);
    CHECK(pmf.at(0) == doctest::Approx(std::erf(0.5 / std::sqrt(2.0))).epsilon(1e-12));
    CHECK(pmf.at(0) == doctest::Approx(0.38292).epsilon(1e-5));
    for (Tick n = 1; n <= 50; ++n) CHECK(pmf.at(n) == doctest::Approx(pmf.at(-n)).epsilon(1e-12));
    CHECK(pmf.covered_mass() == doctest::Approx(1.0).epsilon(1e-10));

    const std::function<double(double)> density = [](double x) { return mixture_pdf(kAirp, x); };
    const TickPmf quad = discretize_to_ticks(density, -20, 60);
    const TickPmf exact = discretize_to_ticks(kAirp, -20, 60);
    for (Tick n = -20; n <= 60; ++n) CHECK(std::abs(quad.at(n) - exact.at(n)) < 1e-8);
    CHECK(quad.covered_mass() + quad.truncated_mass() == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(exact.covered_mass() + exact.truncated_mass() == doctest::Approx(1.0).epsilon(1e-10));

    const TickPmf student = discretize_to_ticks(StudentParams{1.5, 1.5, 1.5}, -20, 200);
    CHECK(student.covered_mass() + student.truncated_mass() == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(student.upper_tail > 0.0);
}

TEST_CASE("sampler matches its pmf") {
    const PlacementSampler sampler(PlacementParams{kAirp});
    Rng rng(2024);
    constexpr std::size_t draws = 1'000'000;
    const Tick lo = sampler.min_offset(), hi = sampler.max_offset();
    std::vector<double> counts(static_cast<std::size_t>(hi - lo + 1), 0.0), expected(counts.size());
    for (std::size_t i = 0; i < draws; ++i) {
        const Tick n = sampler.sample(rng);
        REQUIRE((n >= lo && n <= hi));
        counts[static_cast<std::size_t>(n - lo)] += 1.0;
    }
    double total = 0.0;
    for (Tick n = lo; n <= hi; ++n) {
        expected[static_cast<std::size_t>(n - lo)] = sampler.probability(n) * draws;
        total += sampler.probability(n);
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(oracle::chi_square_pvalue(counts, expected) > 0.01);
}

TEST_CASE("degenerate mixture is a point mass") {
    const PlacementSampler sampler(PlacementParams{MixtureParams{{1.0}, {0.0}, {1e-6}}});
    Rng rng(1);
    for (int i = 0; i < 1000; ++i) CHECK(sampler.sample(rng) == 0);
}

TEST_CASE("sampler is deterministic under a seed") {
    const PlacementSampler sampler(PlacementParams{StudentParams{1.5, 1.5, 1.5}});
    Rng a(99), b(99);
    for (int i = 0; i < 10000; ++i) REQUIRE(sampler.sample(a) == sampler.sample(b));
}
