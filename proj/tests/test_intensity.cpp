#include "doctest.h"

#include <cmath>

#include "lobsim/calibration.hpp"
#include "lobsim/intensity.hpp"

using namespace lobsim;

namespace {

const IntensityParams kBnppMarket{{3.713, 3.100, 0.482, -1.463, 0.160, -0.126}, VolumeCovariate::q1};

}  // namespace

TEST_CASE("covariate vector") {
    const CovariateVector zero = covariate_vector(1.0, 0.0);
    CHECK(zero == CovariateVector{1, 0, 0, 0, 0, 0});

    const CovariateVector unit = covariate_vector(std::exp(1.0), std::exp(1.0) - 1.0);
    for (double x : unit) CHECK(x == doctest::Approx(1.0).epsilon(1e-14));

    const CovariateVector x = covariate_vector(2.0, 3.0);
    const double l2 = std::log(2.0), l4 = std::log(4.0);
    CHECK(x[1] == doctest::Approx(l2));
    CHECK(x[2] == doctest::Approx(l2 * l2));
    CHECK(x[3] == doctest::Approx(l4));
    CHECK(x[4] == doctest::Approx(l4 * l4));
    CHECK(x[5] == doctest::Approx(l2 * l4));

    CHECK_THROWS_AS(covariate_vector(0.5, 1.0), IntensityError);
    CHECK_THROWS_AS(covariate_vector(1.0, -1.0), IntensityError);
}

TEST_CASE("state intensity values") {
    CHECK(eval_state_intensity(kBnppMarket, 1.0, 0.0) == doctest::Approx(40.97).epsilon(1e-3));
    CHECK(eval_state_intensity(kBnppMarket, 1.0, 0.0) == doctest::Approx(std::exp(3.713)).epsilon(1e-14));
    const IntensityParams zero{};
    CHECK(eval_state_intensity(zero, 7.0, 123.0) == 1.0);
    IntensityParams huge = kBnppMarket;
    huge.beta[0] = 800.0;
    CHECK_THROWS_AS(eval_state_intensity(huge, 1.0, 0.0), IntensityError);
}

TEST_CASE("log-linearity and positivity") {
    for (double s : {1.0, 2.0, 3.0, 7.0, 20.0})
        for (double v : {0.0, 1.0, 5.0, 40.0, 500.0}) {
            const double rate = eval_state_intensity(kBnppMarket, s, v);
            CHECK(rate > 0.0);
            CHECK(std::log(rate) ==
                  doctest::Approx(linear_predictor(kBnppMarket.beta, covariate_vector(s, v))).epsilon(1e-14));
        }
}

TEST_CASE("market intensity falls as the best volume grows") {
    CHECK(eval_state_intensity(kBnppMarket, 1.0, 1.0) > eval_state_intensity(kBnppMarket, 1.0, 8.0));
}

TEST_CASE("constant intensity") {
    CHECK(eval_constant_intensity(2.5) == 2.5);
    CHECK(eval_constant_intensity(fit_poisson_rate(100, 50.0).rate) == doctest::Approx(2.0));
    CHECK_THROWS(eval_constant_intensity(0.0));
}

TEST_CASE("currency coefficients re-expressed in ticks") {
    const IntensityParams ticks = spread_in_ticks(kBnppMarket, 0.01);
    for (double s : {1.0, 2.0, 5.0})
        for (double v : {0.0, 3.0, 17.0})
        {
            const double ls = std::log(0.01 * s), lv = std::log1p(v);
            const auto& b = kBnppMarket.beta;
            const double currency = b[0] + b[1] * ls + b[2] * ls * ls + b[3] * lv + b[4] * lv * lv + b[5] * ls * lv;
            CHECK(std::log(eval_state_intensity(ticks, s, v)) == doctest::Approx(currency).epsilon(1e-12));
        }
}

TEST_CASE("covariate names round trip") {
    CHECK(volume_covariate_from_string(to_string(VolumeCovariate::q10)) == VolumeCovariate::q10);
    CHECK(volume_covariate_from_string(to_string(VolumeCovariate::q1)) == VolumeCovariate::q1);
    CHECK_THROWS(volume_covariate_from_string("q5"));
}
