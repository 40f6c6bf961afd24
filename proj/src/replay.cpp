#include "lobsim/replay.hpp"

#include <algorithm>

namespace lobsim {

double half_queue_priority(const BookSide& side, Tick price) {
    const Volume total = side.total_volume();
    if (total <= 0) return 0.0;
    Volume better = 0;
    const Volume same = side.volume_at(price);
    side.for_each_in_priority([&](const Order& o) {
        if (side.side() == Side::ask ? o.price < price : o.price > price) better += o.size;
    });
    return (static_cast<double>(better) + 0.5 * static_cast<double>(same)) / static_cast<double>(total);
}

PriorityInterval selection_interval(const BookSide& side, Tick price) {
    struct Level {
        Tick price;
        Volume volume;
        Volume last;
    };
    std::vector<Level> levels;
    side.for_each_in_priority([&](const Order& o) {
        if (levels.empty() || levels.back().price != o.price) levels.push_back({o.price, 0, 0});
        levels.back().volume += o.size;
        levels.back().last = o.size;
    });
    const auto total = static_cast<double>(side.total_volume());
    Volume ahead = 0;
    for (std::size_t j = 0; j < levels.size(); ++j) {
        const Level& l = levels[j];
        if (l.price != price) {
            ahead += l.volume;
            continue;
        }
        PriorityInterval iv;
        iv.lower = j == 0 ? 0.0 : static_cast<double>(ahead - levels[j - 1].last) / total;
        iv.upper = j + 1 == levels.size() ? 1.0 : static_cast<double>(ahead + l.volume - l.last) / total;
        // A lone order at the front is only reachable by a zero draw; the
        // reconstructed queue may also differ from the true one. Fall back to
        // the level's own volume.
        if (!(iv.upper > iv.lower)) iv.upper = std::min(1.0, iv.lower + static_cast<double>(l.volume) / total);
        return iv;
    }
    throw Error("no liquidity at the cancelled price");
}

namespace {

bool crosses(const OrderBook& book, Side side, Tick price) {
    const auto opp = book.best(opposite(side));
    if (!opp) return false;
    return side == Side::ask ? price <= *opp : price >= *opp;
}

bool matches(const BookColumns& c, const MarketState& s) {
    return c.spread == s.spread && c.bid_q1 == s.q1[0] && c.ask_q1 == s.q1[1] && c.bid_q10 == s.q10[0] &&
           c.ask_q10 == s.q10[1];
}

}  // namespace

ReplayResult replay_order_flow(std::span<const OrderFlowRecord> records, const ReplayOptions& options) {
    if (records.empty()) throw Error("cannot replay an empty order flow");
    ReplayResult out;
    out.records = records.size();
    OrderBook book;
    DistributionAccumulator dist(options.shape_ticks);
    MarketState current = book.snapshot_state(options.shape_ticks);
    double last_time = records.front().time;
    out.path = CovariatePath(last_time, PathState::from(current));

    for (const OrderFlowRecord& r : records) {
        dist.add(current, r.time - last_time);
        last_time = r.time;
        const MarketState& pre = current;
        if (r.book && !matches(*r.book, pre)) ++out.quality.state_mismatches;

        switch (r.type) {
            case EventType::limit: {
                if (crosses(book, r.side, r.price)) {
                    ++out.quality.crossing_limits;
                    continue;
                }
                const auto own = book.best(r.side) ? book.best(r.side) : book.last_best(r.side);
                if (own) {
                    const auto opp = book.best(opposite(r.side));
                    const Tick n = r.side == Side::ask ? r.price - *own : *own - r.price;
                    Tick lower = options.offset_min;
                    if (opp) lower = std::max(lower, r.side == Side::ask ? *opp - *own + 1 : *own - *opp + 1);
                    if (n < lower || n > options.offset_max) ++out.quality.offsets_out_of_range;
                    else out.offsets.push_back({n, lower, 1.0});
                } else {
                    ++out.quality.offsets_without_reference;
                }
                out.limit_sizes.push_back(static_cast<double>(r.size));
                book.apply_limit(r.side, r.price, r.size);
                break;
            }
            case EventType::market: {
                const BookSide& hit = book.side(r.side);
                if (hit.empty()) {
                    ++out.quality.empty_markets;
                    continue;
                }
                if (r.size > hit.total_volume()) ++out.quality.partial_markets;
                out.market_sizes.push_back(static_cast<double>(r.size));
                book.apply_market(opposite(r.side), r.size);
                break;
            }
            case EventType::cancel: {
                const BookSide& bs = book.side(r.side);
                if (bs.volume_at(r.price) < r.size) {
                    ++out.quality.missing_cancels;
                    continue;
                }
                out.cancel_priority.push_back(half_queue_priority(bs, r.price));
                out.cancel_intervals.push_back(selection_interval(bs, r.price));
                book.cancel_volume_at(r.side, r.price, r.size);
                break;
            }
        }
        ++out.events[stream_index(r.type, r.side)];
        out.path.record_event(r.time, r.type, r.side);
        current = book.snapshot_state(options.shape_ticks);
        out.path.advance(r.time, PathState::from(current));
    }
    out.path.close(last_time);
    out.distributions = dist.report();
    return out;
}

CovariatePath build_covariate_path(std::span<const OrderFlowRecord> records) {
    return replay_order_flow(records, ReplayOptions{.shape_ticks = 0}).path;
}

CovariatePath recorded_path(std::span<const EventRecord> events, const MarketState& final_state) {
    if (events.empty()) throw Error("cannot build a path from an empty event log");
    const std::int64_t first = events.front().timestamp_ms;
    const auto clock = [&](const EventRecord& e) { return static_cast<double>(e.timestamp_ms - first) / 1000.0; };
    CovariatePath path(clock(events.front()), PathState::from(events.front().state));
    for (std::size_t i = 0; i < events.size(); ++i) {
        const double t = clock(events[i]);
        path.record_event(t, events[i].type, events[i].side);
        path.advance(t, PathState::from(i + 1 < events.size() ? events[i + 1].state : final_state));
    }
    path.close(clock(events.back()));
    return path;
}

}  // namespace lobsim
