#include "oracles.hpp"

#include <boost/math/distributions/chi_squared.hpp>

#include "lobsim/book.hpp"

namespace oracle {

using namespace lobsim;

namespace {

std::vector<Order> priority_orders(const BookSide& side, std::size_t limit) {
    std::vector<Order> out;
    side.for_each_in_priority([&](const Order& o) {
        if (out.size() < limit) out.push_back(o);
    });
    return out;
}

}  // namespace

FuzzReport fuzz_book(std::size_t operations, std::uint64_t seed, std::size_t index_every) {
    FuzzReport rep;
    OrderBook book;
    Rng rng(seed);
    const auto violation = [&](const std::string& what) {
        if (rep.violations++ == 0) rep.first_violation = "op " + std::to_string(rep.operations) + ": " + what;
    };
    const auto book_volume = [&] { return book.side(Side::bid).total_volume() + book.side(Side::ask).total_volume(); };

    for (; rep.operations < operations; ++rep.operations) {
        const Side side = uniform01(rng) < 0.5 ? Side::bid : Side::ask;
        const std::size_t count = book.order_count();
        const double u = uniform01(rng);
        const double p_limit = count < 50 ? 0.7 : (count > 400 ? 0.3 : 0.5);
        const Volume before = book_volume();

        if (u < p_limit) {
            const Volume size = 1 + static_cast<Volume>(uniform_index(rng, 8));
            const Tick price = 9970 + static_cast<Tick>(uniform_index(rng, 61));
            const auto opp = book.best(opposite(side));
            const bool crossing = opp && (side == Side::bid ? price >= *opp : price <= *opp);
            try {
                book.apply_limit(side, price, size);
                if (crossing) violation("crossing limit accepted");
                ++rep.limits;
                if (book_volume() != before + size) violation("limit volume not added");
            } catch (const BookError& e) {
                if (!crossing || e.code() != BookErrc::crossing) violation(std::string("unexpected limit error: ") + e.what());
                ++rep.rejected_crossing;
            }
        } else if (u < p_limit + 0.2) {
            const Volume size = 1 + static_cast<Volume>(uniform_index(rng, 15));
            const BookSide& hit = book.side(opposite(side));
            const auto ahead = priority_orders(hit, 64);
            const Volume depth = hit.total_volume();
            try {
                const MarketResult r = book.apply_market(side, size);
                ++rep.markets;
                if (depth == 0) violation("market order filled against an empty side");
                Volume sum = 0;
                for (const Fill& f : r.fills) sum += f.quantity;
                if (sum != r.filled || r.filled + r.residual != size) violation("fill accounting");
                if (before - book_volume() != r.filled) violation("volume not conserved by market order");
                if (r.filled != std::min(size, depth)) violation("market order did not fill what existed");
                for (std::size_t i = 0; i < r.fills.size() && i < ahead.size(); ++i) {
                    if (r.fills[i].id != ahead[i].id || r.fills[i].price != ahead[i].price)
                        violation("fills out of price-time priority");
                    if (i + 1 < r.fills.size() && r.fills[i].quantity != ahead[i].size)
                        violation("order skipped before being exhausted");
                }
                if (!r.fills.empty() && r.fills.back().quantity < ahead[r.fills.size() - 1].size) {
                    const Order* rest = book.find(r.fills.back().id);
                    if (!rest || rest->seq != ahead[r.fills.size() - 1].seq) violation("partial fill lost its priority");
                    else if (priority_orders(hit, 1).front().id != rest->id) violation("partial fill not at the front");
                }
            } catch (const BookError& e) {
                if (depth != 0 || e.code() != BookErrc::no_liquidity) violation(std::string("unexpected market error: ") + e.what());
            }
        } else if (book.side(side).order_count() > 0) {
            const BookSide& bs = book.side(side);
            const double v = uniform01(rng);
            Volume removed = 0;
            if (v < 0.4) {
                const double xi = uniform01(rng);
                std::vector<std::pair<OrderId, double>> idx;
                Volume ahead = 0;
                bs.for_each_in_priority([&](const Order& o) {
                    idx.emplace_back(o.id, static_cast<double>(ahead) / static_cast<double>(bs.total_volume()));
                    ahead += o.size;
                });
                OrderId expect = idx.back().first;
                for (const auto& [id, x] : idx)
                    if (x >= xi) {
                        expect = id;
                        break;
                    }
                const Order o = book.apply_cancel_by_index(side, xi);
                if (o.id != expect) violation("cancel by index picked the wrong order");
                removed = o.size;
            } else if (v < 0.7) {
                removed = book.cancel_nth(side, uniform_index(rng, bs.order_count())).size;
            } else {
                const auto orders = priority_orders(bs, bs.order_count());
                const Order& pick = orders[uniform_index(rng, orders.size())];
                const Volume level = bs.volume_at(pick.price);
                const Volume size = 1 + static_cast<Volume>(uniform_index(rng, static_cast<std::uint64_t>(level)));
                book.cancel_volume_at(side, pick.price, size);
                removed = size;
            }
            ++rep.cancels;
            if (before - book_volume() != removed) violation("cancel volume mismatch");
        }

        if (auto bad = book.check_invariants()) violation(*bad);
        if (index_every && rep.operations % index_every == 0) {
            for (Side s : {Side::bid, Side::ask}) {
                double prev = -1.0;
                bool first = true;
                Volume ahead = 0;
                const double total = static_cast<double>(book.side(s).total_volume());
                book.side(s).for_each_in_priority([&](const Order& o) {
                    const double xi = book.priority_index_of(o.id);
                    if (first && xi != 0.0) violation("front order index is not 0");
                    if (xi < prev) violation("priority index decreased");
                    if (std::abs(xi - static_cast<double>(ahead) / total) > 1e-15) violation("priority index value");
                    prev = xi;
                    first = false;
                    ahead += o.size;
                });
            }
        }
    }
    return rep;
}

double poisson_book_depth(double limit_rate, double market_rate, double limit_size, double market_size, double theta,
                          std::size_t events, std::uint64_t seed) {
    Rng rng(seed);
    const double q = market_size / limit_size;
    std::int64_t n = 0;
    double t = 0.0, area = 0.0;
    // Burn-in of several lifetimes before averaging.
    const std::size_t burn = events / 20;
    for (std::size_t e = 0; e < events + burn; ++e) {
        const double cancel = theta * static_cast<double>(n);
        const double total = limit_rate + market_rate + cancel;
        const double dt = exponential(rng, total);
        if (e >= burn) {
            area += static_cast<double>(n) * dt;
            t += dt;
        }
        const double u = uniform01(rng) * total;
        if (u < limit_rate) {
            // Geometric on {1, 2, ...} with success probability q.
            std::int64_t k = 1;
            if (q < 1.0) k += static_cast<std::int64_t>(std::floor(std::log(uniform_open0(rng)) / std::log1p(-q)));
            n += k;
        } else if (u < limit_rate + market_rate) {
            if (n > 0) --n;
        } else {
            --n;
        }
    }
    return market_size * area / t;
}

SyntheticPath thinning_path(const IntensityParams& params, double duration, std::uint64_t seed, Tick max_spread,
                            Volume max_volume, double mean_holding) {
    Rng rng(seed);
    const auto draw_state = [&] {
        PathState s;
        // Spread skewed towards small values, volumes uniform.
        const double u = uniform01(rng);
        s.spread = 1 + static_cast<Tick>(std::floor(static_cast<double>(max_spread) * u * u));
        for (int i = 0; i < 2; ++i) {
            s.q1[i] = static_cast<Volume>(uniform_index(rng, static_cast<std::uint64_t>(max_volume) + 1));
            s.q10[i] = s.q1[i];
        }
        return s;
    };
    double bound = 0.0;
    for (Tick s = 1; s <= max_spread; ++s)
        for (Volume v = 0; v <= max_volume; ++v)
            bound = std::max(bound, eval_state_intensity(params, static_cast<double>(s), static_cast<double>(v)));

    SyntheticPath out;
    PathState state = draw_state();
    out.path = CovariatePath(0.0, state);
    double t = 0.0;
    double next_change = exponential(rng, 1.0 / mean_holding);
    // Dominating process of rate 2 * bound (both sides), thinned per side.
    while (true) {
        const double cand = t + exponential(rng, 2.0 * bound);
        while (next_change < std::min(cand, duration)) {
            state = draw_state();
            out.path.advance(next_change, state);
            next_change += exponential(rng, 1.0 / mean_holding);
        }
        if (cand >= duration) break;
        t = cand;
        const Side side = uniform01(rng) < 0.5 ? Side::bid : Side::ask;
        const double rate = eval_state_intensity(params, static_cast<double>(state.spread),
                                                 static_cast<double>(state.volume(params.covariate, side)));
        if (uniform01(rng) * bound < rate) {
            out.path.record_event(t, params.covariate == VolumeCovariate::q1 ? EventType::market : EventType::limit, side);
            ++out.events;
        }
    }
    out.path.close(duration);
    return out;
}

double ks_pvalue(double statistic, std::size_t n) {
    const double sn = std::sqrt(static_cast<double>(n));
    // Small-sample correction of Stephens.
    const double x = statistic * (sn + 0.12 + 0.11 / sn);
    if (x < 0.2) return 1.0;
    double p = 0.0;
    for (int k = 1; k <= 100; ++k) p += 2.0 * ((k % 2) ? 1.0 : -1.0) * std::exp(-2.0 * k * k * x * x);
    return std::clamp(p, 0.0, 1.0);
}

double chi_square_pvalue(std::span<const double> observed, std::span<const double> expected, std::size_t fitted) {
    double stat = 0.0, o = 0.0, e = 0.0;
    std::size_t bins = 0;
    for (std::size_t i = 0; i < observed.size(); ++i) {
        o += observed[i];
        e += expected[i];
        if (e >= 5.0) {
            stat += (o - e) * (o - e) / e;
            ++bins;
            o = e = 0.0;
        }
    }
    if (e > 0.0) {
        stat += (o - e) * (o - e) / e;
        ++bins;
    }
    const double dof = static_cast<double>(bins) - 1.0 - static_cast<double>(fitted);
    if (dof < 1.0) return 1.0;
    return boost::math::cdf(boost::math::complement(boost::math::chi_squared(dof), stat));
}

}  // namespace oracle
