#include "lobsim/simulator.hpp"

#include <cmath>
#include <sstream>

namespace lobsim {

namespace {

PlacementParams placement_for(const SimConfig& c) {
    if (c.mode == SimMode::poisson_reference) return c.bundle.student;
    return c.bundle.mixture;
}

}  // namespace

void ModelBundle::validate() const {
    if (!(ticksize > 0.0)) throw SimulationError(SimErrc::invalid_config, "ticksize must be positive");
    if (!(median_trade_size > 0.0)) throw SimulationError(SimErrc::invalid_config, "median trade size must be positive");
    if (!(limit_size > 0.0 && market_size > 0.0))
        throw SimulationError(SimErrc::invalid_config, "order size means must be positive");
    if (limit_intensity.covariate != VolumeCovariate::q10 || market_intensity.covariate != VolumeCovariate::q1)
        throw SimulationError(SimErrc::invalid_config, "limit intensity must use Q10 and market intensity q1");
    for (double b : limit_intensity.beta)
        if (!std::isfinite(b)) throw SimulationError(SimErrc::invalid_config, "limit intensity coefficients must be finite");
    for (double b : market_intensity.beta)
        if (!std::isfinite(b)) throw SimulationError(SimErrc::invalid_config, "market intensity coefficients must be finite");
    if (!(limit_rate >= 0.0 && market_rate >= 0.0))
        throw SimulationError(SimErrc::invalid_config, "Poisson reference rates must be nonnegative");
    mixture.validate();
    student.validate();
    cancellation.validate();
}

std::string to_string(SimMode m) { return m == SimMode::state_dependent ? "state_dependent" : "poisson_reference"; }

SimMode sim_mode_from_string(const std::string& s) {
    if (s == "state_dependent") return SimMode::state_dependent;
    if (s == "poisson_reference") return SimMode::poisson_reference;
    throw Error("unknown simulation mode '" + s + "'");
}

void SimConfig::validate() const {
    bundle.validate();
    if (!(session_seconds > 0.0)) throw SimulationError(SimErrc::invalid_config, "session length must be positive");
    if (!(sample_interval > 0.0)) throw SimulationError(SimErrc::invalid_config, "sample interval must be positive");
    if (initial.spread < 1) throw SimulationError(SimErrc::invalid_config, "initial spread must be at least one tick");
}

CompetingDraw draw_competing(std::span<const double> rates, Rng& rng) {
    double total = 0.0;
    for (double r : rates) {
        if (!(r >= 0.0) || !std::isfinite(r)) throw SimulationError(SimErrc::invalid_config, "stream rates must be finite and nonnegative");
        total += r;
    }
    if (!(total > 0.0)) throw SimulationError(SimErrc::dead_market, "every stream rate is zero");
    CompetingDraw d;
    d.wait = exponential(rng, total);
    const double u = uniform01(rng) * total;
    double run = 0.0;
    d.index = rates.size() - 1;
    for (std::size_t i = 0; i < rates.size(); ++i) {
        run += rates[i];
        if (u < run && rates[i] > 0.0) {
            d.index = i;
            break;
        }
    }
    while (rates[d.index] <= 0.0) --d.index;
    return d;
}

Volume draw_order_size(double mean, Rng& rng) {
    if (!(mean > 0.0)) throw SimulationError(SimErrc::invalid_config, "order size mean must be positive");
    const double x = exponential(rng, 1.0 / mean);
    return std::max<Volume>(1, static_cast<Volume>(std::ceil(x)));
}

Simulator::Simulator(SimConfig config)
    : config_((config.validate(), std::move(config))), rng_(config_.seed), sampler_(placement_for(config_)) {
    const InitialBook& init = config_.initial;
    const Volume depth = init.depth > 0 ? init.depth
                                        : std::max<Volume>(1, static_cast<Volume>(std::lround(config_.bundle.limit_size)));
    const Tick best_ask = init.best_bid + init.spread;
    for (std::size_t k = 0; k < init.levels; ++k) {
        for (Side s : {Side::bid, Side::ask}) {
            const Tick price = s == Side::bid ? init.best_bid - static_cast<Tick>(k) : best_ask + static_cast<Tick>(k);
            const MarketState pre = book_.snapshot_state();
            book_.apply_limit(s, price, depth);
            seed_.push_back(record(EventType::limit, s, price, depth, pre));
        }
    }
}

std::array<double, kStreamCount> Simulator::rates() const {
    const MarketState st = book_.snapshot_state();
    std::array<double, kStreamCount> r{};
    const ModelBundle& b = config_.bundle;
    const auto spread = static_cast<double>(st.reference_spread);
    for (Side s : {Side::bid, Side::ask}) {
        if (config_.mode == SimMode::state_dependent) {
            r[stream_index(EventType::limit, s)] =
                eval_state_intensity(b.limit_intensity, spread, static_cast<double>(st.q10_of(s)));
            r[stream_index(EventType::market, s)] =
                eval_state_intensity(b.market_intensity, spread, static_cast<double>(st.q1_of(s)));
        } else {
            r[stream_index(EventType::limit, s)] = b.limit_rate;
            r[stream_index(EventType::market, s)] = b.market_rate;
        }
        r[stream_index(EventType::cancel, s)] = b.cancellation.theta * static_cast<double>(st.orders_of(s));
    }
    if (config_.cancel_clock == CancelClock::global) {
        const double total = b.cancellation.theta * static_cast<double>(st.orders[0] + st.orders[1]);
        const int live = (st.orders[0] > 0) + (st.orders[1] > 0);
        for (Side s : {Side::bid, Side::ask})
            r[stream_index(EventType::cancel, s)] = st.orders_of(s) > 0 ? total / live : 0.0;
    }
    return r;
}

EventRecord Simulator::record(EventType type, Side side, Tick price, Volume size, const MarketState& pre) const {
    EventRecord r;
    r.time = time_;
    r.timestamp_ms = config_.session_start_ms + static_cast<std::int64_t>(std::floor(time_ * 1000.0));
    r.type = type;
    r.side = side;
    r.price = price;
    r.size = size;
    r.state = pre;
    return r;
}

Tick Simulator::place(Side side, const MarketState& pre) {
    const auto ref = book_.best(side) ? book_.best(side) : book_.last_best(side);
    const auto opposite_best = book_.best(opposite(side));
    if (!ref) {
        // Never quoted on this side: anchor one tick away from the other side.
        if (!opposite_best) throw SimulationError(SimErrc::dead_market, "both sides empty with no quote history");
    }
    for (int attempt = 0; attempt < 100; ++attempt) {
        const Tick n = sampler_.sample(rng_);
        const Tick anchor = ref ? *ref : (side == Side::ask ? *opposite_best + 1 : *opposite_best - 1);
        const Tick price = side == Side::ask ? anchor + n : anchor - n;
        const bool ok = !opposite_best || (side == Side::ask ? price > *opposite_best : price < *opposite_best);
        if (ok) return price;
        ++stats_.placement_resamples;
    }
    std::ostringstream msg;
    msg << "no admissible limit price after 100 draws (side " << to_string(side) << ", spread " << pre.reference_spread
        << ")";
    throw SimulationError(SimErrc::placement_stuck, msg.str());
}

std::optional<EventRecord> Simulator::step() {
    const CancellationParams& c = config_.bundle.cancellation;
    for (;;) {
        const auto r = rates();
        const CompetingDraw d = draw_competing(r, rng_);
        if (time_ + d.wait > config_.session_seconds) {
            time_ = config_.session_seconds;
            return std::nullopt;
        }
        time_ += d.wait;
        const auto type = static_cast<EventType>(d.index / 2);
        const Side side = d.index % 2 == 0 ? Side::bid : Side::ask;
        const MarketState pre = book_.snapshot_state();

        switch (type) {
            case EventType::limit: {
                const Volume size = draw_order_size(config_.bundle.limit_size, rng_);
                const Tick price = place(side, pre);
                book_.apply_limit(side, price, size);
                ++stats_.events[d.index];
                return record(type, side, price, size, pre);
            }
            case EventType::market: {
                const Volume size = draw_order_size(config_.bundle.market_size, rng_);
                const auto best = book_.best(side);
                if (!best) {
                    ++stats_.discarded_market;
                    continue;
                }
                book_.apply_market(opposite(side), size);
                ++stats_.events[d.index];
                return record(type, side, *best, size, pre);
            }
            case EventType::cancel: {
                Order victim;
                if (config_.mode == SimMode::state_dependent) {
                    const double xi = priority_cdf_inverse(c.alpha, c.sigma, uniform01(rng_));
                    victim = book_.apply_cancel_by_index(side, xi);
                } else {
                    victim = book_.cancel_nth(side, uniform_index(rng_, book_.side(side).order_count()));
                }
                ++stats_.events[d.index];
                return record(type, side, victim.price, victim.size, pre);
            }
        }
    }
}

SessionResult run_session(const SimConfig& config) {
    Simulator sim(config);
    SessionResult out;
    out.events = sim.seed_records();
    std::size_t sample_count = 0;
    MarketState current = sim.book().snapshot_state();
    const auto emit_samples_until = [&](double t) {
        for (double ts = 0.0; (ts = static_cast<double>(sample_count) * config.sample_interval) < t; ++sample_count)
            out.samples.push_back({ts, current});
    };
    while (auto ev = sim.step()) {
        emit_samples_until(ev->time);
        out.events.push_back(std::move(*ev));
        current = sim.book().snapshot_state();
    }
    emit_samples_until(std::nextafter(config.session_seconds, 1e300));
    out.stats = sim.stats();
    out.final_state = current;
    out.duration = config.session_seconds;
    return out;
}

}  // namespace lobsim
