#include "doctest.h"

#include <cmath>
#include <string>

#include "lobsim/bundle.hpp"
#include "lobsim/distributions.hpp"
#include "lobsim/flow.hpp"
#include "lobsim/replay.hpp"
#include "lobsim/simulator.hpp"
#include "oracles.hpp"

using namespace lobsim;

namespace {

SimConfig reference_config(double seconds, std::uint64_t seed) {
    SimConfig c;
    c.bundle = load_bundle(LOBSIM_DATA_DIR "/reference_bundle.json");
    c.session_seconds = seconds;
    c.seed = seed;
    return c;
}

}  // namespace

TEST_CASE("competing clocks") {
    Rng rng(1);
    const std::vector<double> ones(6, 1.0);
    std::vector<double> counts(6, 0.0);
    std::vector<double> waits;
    constexpr std::size_t n = 100000;
    for (std::size_t i = 0; i < n; ++i) {
        const CompetingDraw d = draw_competing(ones, rng);
        counts[d.index] += 1.0;
        waits.push_back(d.wait);
    }
    const double sd = std::sqrt(n * (1.0 / 6) * (5.0 / 6));
    for (double c : counts) CHECK(std::abs(c - n / 6.0) < 3.0 * sd);
    CHECK(oracle::ks_pvalue(oracle::ks_statistic(waits, [](double x) { return 1.0 - std::exp(-6.0 * x); }), n) > 0.01);

    const std::vector<double> single{0.0, 0.0, 2.5, 0.0, 0.0, 0.0};
    waits.clear();
    for (std::size_t i = 0; i < n; ++i) {
        const CompetingDraw d = draw_competing(single, rng);
        REQUIRE(d.index == 2);
        waits.push_back(d.wait);
    }
    CHECK(oracle::ks_pvalue(oracle::ks_statistic(waits, [](double x) { return 1.0 - std::exp(-2.5 * x); }), n) > 0.01);

    const std::vector<double> mixed{0.3, 1.2, 0.0, 4.0, 0.5, 2.0};
    waits.clear();
    for (std::size_t i = 0; i < n; ++i) {
        const CompetingDraw d = draw_competing(mixed, rng);
        REQUIRE(d.index != 2);
        waits.push_back(d.wait);
    }
    CHECK(oracle::ks_pvalue(oracle::ks_statistic(waits, [](double x) { return 1.0 - std::exp(-8.0 * x); }), n) > 0.01);

    const std::vector<double> dead(6, 0.0);
    try {
        draw_competing(dead, rng);
        FAIL("dead market accepted");
    } catch (const SimulationError& e) {
        CHECK(e.code() == SimErrc::dead_market);
    }
}

TEST_CASE("order sizes") {
    Rng rng(2);
    constexpr std::size_t n = 1'000'000;
    double ones = 0.0, sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) ones += draw_order_size(1.0, rng) == 1 ? 1.0 : 0.0;
    const double p = 1.0 - std::exp(-1.0);
    CHECK(std::abs(ones / n - p) < 3.0 * std::sqrt(p * (1 - p) / n));
    for (std::size_t i = 0; i < n; ++i) sum += static_cast<double>(draw_order_size(10.0, rng));
    CHECK(sum / n == doctest::Approx(10.5).epsilon(0.01));
    CHECK(sum / n == doctest::Approx(1.0 / (1.0 - std::exp(-0.1))).epsilon(0.005));
    for (int i = 0; i < 1000; ++i) CHECK(draw_order_size(1e-12, rng) == 1);
    CHECK_THROWS_AS(draw_order_size(0.0, rng), SimulationError);
}

TEST_CASE("same seed, same session") {
    const SimConfig c = reference_config(2000.0, 5);
    const SessionResult a = run_session(c), b = run_session(c);
    const auto fa = to_flow_records(a.events, true), fb = to_flow_records(b.events, true);
    CHECK(format_order_flow_csv(fa, true) == format_order_flow_csv(fb, true));
    CHECK(format_state_samples_csv(a.samples) == format_state_samples_csv(b.samples));
    SimConfig other = c;
    other.seed = 6;
    CHECK(format_order_flow_csv(to_flow_records(run_session(other).events, true), true) != format_order_flow_csv(fa, true));
}

TEST_CASE("event log is consistent") {
    const SessionResult r = run_session(reference_config(3000.0, 9));
    REQUIRE(r.events.size() > 1000);
    for (std::size_t i = 1; i < r.events.size(); ++i) CHECK(r.events[i].time >= r.events[i - 1].time);
    CHECK(r.samples.size() == 3001);
    CHECK(r.samples.front().time == 0.0);
    CHECK(r.samples.back().time == 3000.0);
}

TEST_CASE("book invariants hold along a long run") {
    Simulator sim(reference_config(1e9, 3));
    std::size_t bad = 0;
    std::string first;
    for (int i = 0; i < 200000; ++i) {
        REQUIRE(sim.step());
        if (auto v = sim.book().check_invariants()) {
            if (bad++ == 0) first = *v;
        }
        const auto bid = sim.book().best(Side::bid), ask = sim.book().best(Side::ask);
        if (bid && ask && *bid >= *ask) ++bad;
    }
    INFO(first);
    CHECK(bad == 0);
}

TEST_CASE("unbalanced Poisson flow builds depth") {
    SimConfig c = reference_config(2000.0, 4);
    c.mode = SimMode::poisson_reference;
    c.bundle.limit_rate = 5.0;
    c.bundle.market_rate = 0.05;
    c.bundle.cancellation.theta = 1e-7;
    const SessionResult r = run_session(c);
    double early = 0.0, late = 0.0;
    for (std::size_t i = 0; i < 200; ++i) early += static_cast<double>(r.samples[i].state.total[0] + r.samples[i].state.total[1]);
    for (std::size_t i = r.samples.size() - 200; i < r.samples.size(); ++i)
        late += static_cast<double>(r.samples[i].state.total[0] + r.samples[i].state.total[1]);
    CHECK(late > 5.0 * early);
    Volume prev = 0;
    for (std::size_t k = 0; k < r.samples.size(); k += 250) {
        const Volume v = r.samples[k].state.total[0] + r.samples[k].state.total[1];
        CHECK(v > prev);
        prev = v;
    }
}

TEST_CASE("stream counts match the compensator of the recorded path") {
    const SimConfig c = reference_config(20000.0, 12);
    const SessionResult r = run_session(c);
    const ModelBundle& b = c.bundle;
    std::array<double, kStreamCount> expected{}, observed{};
    const auto accumulate = [&](const MarketState& st, double dt) {
        const auto spread = static_cast<double>(st.reference_spread);
        for (Side s : {Side::bid, Side::ask}) {
            expected[stream_index(EventType::limit, s)] +=
                dt * eval_state_intensity(b.limit_intensity, spread, static_cast<double>(st.q10_of(s)));
            expected[stream_index(EventType::market, s)] +=
                dt * eval_state_intensity(b.market_intensity, spread, static_cast<double>(st.q1_of(s)));
            expected[stream_index(EventType::cancel, s)] += dt * b.cancellation.theta * static_cast<double>(st.orders_of(s));
        }
    };
    double last = 0.0;
    for (const EventRecord& e : r.events) {
        if (e.time <= 0.0) continue;  // seed book
        accumulate(e.state, e.time - last);
        last = e.time;
        observed[stream_index(e.type, e.side)] += 1.0;
    }
    accumulate(r.final_state, c.session_seconds - last);
    // Market clocks that rang on an empty side were discarded.
    const double markets = observed[2] + observed[3] + static_cast<double>(r.stats.discarded_market);
    const double market_expected = expected[2] + expected[3];
    CHECK(std::abs(markets - market_expected) < 3.0 * std::sqrt(market_expected));
    for (std::size_t i : {0, 1, 4, 5}) {
        INFO("stream " << i << " observed " << observed[i] << " expected " << expected[i]);
        CHECK(std::abs(observed[i] - expected[i]) < 3.0 * std::sqrt(expected[i]));
    }

    // The same check through calibration's compensator on the recorded path.
    const CovariatePath path = recorded_path(r.events, r.final_state);
    const StreamSpec limits{EventType::limit, VolumeCovariate::q10};
    const double lambda = compensator(b.limit_intensity, path, limits);
    CHECK(std::abs(observed[0] + observed[1] - lambda) < 3.0 * std::sqrt(lambda));
}

TEST_CASE("cancellation clock split and the validation metrics") {
    SimConfig per_side = reference_config(30000.0, 31);
    SimConfig global = per_side;
    global.cancel_clock = CancelClock::global;
    SimConfig reseeded = per_side;
    reseeded.seed = 32;
    const auto da = compute_distributions(run_session(per_side).samples);
    const auto m = compare_distributions(da, compute_distributions(run_session(global).samples));
    const auto noise = compare_distributions(da, compute_distributions(run_session(reseeded).samples));
    MESSAGE("per-side vs global clock TV: spread " << m.at("spread").total_variation << ", q1 "
                                                    << m.at("q1").total_variation << ", q10 "
                                                    << m.at("q10").total_variation);
    MESSAGE("per-side vs per-side reseeded TV: spread " << noise.at("spread").total_variation << ", q1 "
                                                         << noise.at("q1").total_variation << ", q10 "
                                                         << noise.at("q10").total_variation);
    CHECK(m.at("spread").total_variation < 0.05);
    CHECK(m.at("q1").total_variation < 0.05);
}

TEST_CASE("invalid configurations") {
    SimConfig c = reference_config(10.0, 1);
    c.session_seconds = 0.0;
    CHECK_THROWS_AS(run_session(c), SimulationError);
    c = reference_config(10.0, 1);
    c.bundle.limit_size = -1.0;
    CHECK_THROWS_AS(run_session(c), SimulationError);
}
