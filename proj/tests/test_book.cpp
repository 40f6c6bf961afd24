#include "doctest.h"

#include <algorithm>
#include <vector>

#include "lobsim/book.hpp"
#include "oracles.hpp"

using namespace lobsim;

namespace {

std::vector<OrderId> ask_queue(OrderBook& book, std::initializer_list<Volume> sizes, Tick price = 10000) {
    std::vector<OrderId> ids;
    for (Volume v : sizes) ids.push_back(book.apply_limit(Side::ask, price, v));
    return ids;
}

}  // namespace

TEST_CASE("limit orders on an empty book") {
    OrderBook book;
    book.apply_limit(Side::ask, 10000, 5);
    const MarketState s = book.snapshot_state();
    CHECK(book.best(Side::ask) == 10000);
    CHECK(s.q1_of(Side::ask) == 5);
    CHECK(s.orders_of(Side::ask) == 1);
}

TEST_CASE("same level keeps arrival order") {
    OrderBook book;
    const auto ids = ask_queue(book, {5, 7});
    CHECK(book.snapshot_state().q1_of(Side::ask) == 12);
    std::vector<OrderId> seen;
    book.side(Side::ask).for_each_in_priority([&](const Order& o) { seen.push_back(o.id); });
    CHECK(seen == ids);
    CHECK(book.find(ids[0])->seq < book.find(ids[1])->seq);
}

TEST_CASE("crossing limit is rejected") {
    OrderBook book;
    book.apply_limit(Side::ask, 10000, 5);
    for (Tick p : {10000, 10003}) {
        try {
            book.apply_limit(Side::bid, p, 1);
            FAIL("crossing order accepted");
        } catch (const BookError& e) {
            CHECK(e.code() == BookErrc::crossing);
        }
    }
    CHECK(book.order_count() == 1);
    CHECK_THROWS_AS(book.apply_limit(Side::bid, 9990, 0), BookError);
}

TEST_CASE("market order walks one level in FIFO") {
    OrderBook book;
    const auto ids = ask_queue(book, {5, 7});
    const MarketResult r = book.apply_market(Side::bid, 8);
    REQUIRE(r.fills.size() == 2);
    CHECK(r.fills[0].id == ids[0]);
    CHECK(r.fills[0].quantity == 5);
    CHECK(r.fills[1].id == ids[1]);
    CHECK(r.fills[1].quantity == 3);
    CHECK(r.residual == 0);
    REQUIRE(book.find(ids[1]));
    CHECK(book.find(ids[1])->size == 4);
    CHECK(book.find(ids[0]) == nullptr);
}

TEST_CASE("market order respects price priority") {
    OrderBook book;
    const OrderId a = book.apply_limit(Side::ask, 10001, 7);
    const OrderId b = book.apply_limit(Side::ask, 10000, 5);
    const MarketResult r = book.apply_market(Side::bid, 6);
    REQUIRE(r.fills.size() == 2);
    CHECK(r.fills[0].id == b);
    CHECK(r.fills[0].price == 10000);
    CHECK(r.fills[0].quantity == 5);
    CHECK(r.fills[1].id == a);
    CHECK(r.fills[1].price == 10001);
    CHECK(r.fills[1].quantity == 1);
}

TEST_CASE("market order larger than the book") {
    OrderBook book;
    ask_queue(book, {5, 7});
    const MarketResult r = book.apply_market(Side::bid, 100);
    CHECK(r.filled == 12);
    CHECK(r.residual == 88);
    CHECK(book.side(Side::ask).empty());
    try {
        book.apply_market(Side::bid, 1);
        FAIL("market order against an empty side accepted");
    } catch (const BookError& e) {
        CHECK(e.code() == BookErrc::no_liquidity);
    }
}

TEST_CASE("priority index") {
    OrderBook book;
    const auto ids = ask_queue(book, {5, 7, 8});
    CHECK(book.priority_index_of(ids[0]) == 0.0);
    CHECK(book.priority_index_of(ids[1]) == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(book.priority_index_of(ids[2]) == doctest::Approx(0.6).epsilon(1e-15));
    CHECK_THROWS_AS(book.priority_index_of(999), BookError);

    OrderBook single;
    const OrderId only = single.apply_limit(Side::bid, 9990, 3);
    CHECK(single.priority_index_of(only) == 0.0);
}

TEST_CASE("priority index spans price levels") {
    OrderBook book;
    const OrderId far = book.apply_limit(Side::bid, 9990, 4);
    const OrderId near = book.apply_limit(Side::bid, 9995, 6);
    CHECK(book.priority_index_of(near) == 0.0);
    CHECK(book.priority_index_of(far) == doctest::Approx(0.6));
}

TEST_CASE("cancel by index") {
    const auto check = [](double xi, std::size_t expected) {
        OrderBook book;
        const auto ids = ask_queue(book, {5, 7, 8});
        const Order o = book.apply_cancel_by_index(Side::ask, xi);
        CHECK(o.id == ids[expected]);
        CHECK(book.find(ids[expected]) == nullptr);
        CHECK(book.order_count() == 2);
    };
    check(0.3, 2);
    check(0.0, 0);
    check(0.25, 1);
    check(0.99, 2);
    check(1.0, 2);

    OrderBook book;
    CHECK_THROWS_AS(book.apply_cancel_by_index(Side::bid, 0.5), BookError);
    book.apply_limit(Side::bid, 9990, 1);
    CHECK_THROWS_AS(book.apply_cancel_by_index(Side::bid, 1.5), BookError);
}

TEST_CASE("snapshot") {
    OrderBook book;
    book.apply_limit(Side::bid, 9998, 3);
    book.apply_limit(Side::ask, 10000, 5);
    MarketState s = book.snapshot_state();
    CHECK(s.spread == 2);
    CHECK(s.q1_of(Side::bid) == 3);
    CHECK(s.q1_of(Side::ask) == 5);

    for (Tick p = 10001; p <= 10011; ++p) book.apply_limit(Side::ask, p, 1);
    s = book.snapshot_state();
    CHECK(book.side(Side::ask).level_count() == 12);
    CHECK(s.q10_of(Side::ask) == 5 + 9);
    CHECK(s.total[index_of(Side::ask)] == 16);

    book.apply_market(Side::ask, 3);
    s = book.snapshot_state(4);
    CHECK(s.spread == kUndefinedSpread);
    CHECK_FALSE(s.spread_defined());
    CHECK(s.q1_of(Side::bid) == 0);
    CHECK(s.reference_spread == 2);
    CHECK(s.depth_profile[index_of(Side::ask)] == std::vector<Volume>{5, 1, 1, 1});
}

TEST_CASE("cancel volume at a level takes the newest orders") {
    OrderBook book;
    const auto ids = ask_queue(book, {5, 7, 8});
    book.cancel_volume_at(Side::ask, 10000, 10);
    CHECK(book.find(ids[2]) == nullptr);
    REQUIRE(book.find(ids[1]));
    CHECK(book.find(ids[1])->size == 5);
    CHECK(book.side(Side::ask).total_volume() == 10);
    CHECK_THROWS_AS(book.cancel_volume_at(Side::ask, 10000, 11), BookError);
    CHECK_THROWS_AS(book.cancel_volume_at(Side::ask, 10001, 1), BookError);
}

TEST_CASE("uniform draws over equal orders") {
    // Indices are k/n. The first index at or above a uniform draw is order k
    // for draws in ((k-1)/n, k/n]; draws above (n-1)/n fall back to the last
    // order, and the front order is only reached by an exact zero.
    constexpr std::size_t n = 10, draws = 100000;
    Rng rng(42);
    std::vector<double> counts(n, 0.0);
    OrderBook book;
    for (std::size_t i = 0; i < n; ++i) book.apply_limit(Side::ask, 10000, 1);
    for (std::size_t d = 0; d < draws; ++d) {
        std::vector<OrderId> queue;
        book.side(Side::ask).for_each_in_priority([&](const Order& o) { queue.push_back(o.id); });
        const Order o = book.apply_cancel_by_index(Side::ask, uniform01(rng));
        const auto pos = static_cast<std::size_t>(std::find(queue.begin(), queue.end(), o.id) - queue.begin());
        REQUIRE(pos < n);
        counts[pos] += 1.0;
        book.apply_limit(Side::ask, 10000, 1);
    }
    std::vector<double> expected(n, static_cast<double>(draws) / n);
    expected.front() = 0.0;
    expected.back() *= 2.0;
    CHECK(counts.front() == 0.0);
    const std::vector<double> inner(counts.begin() + 1, counts.end());
    const std::vector<double> inner_expected(expected.begin() + 1, expected.end());
    CHECK(oracle::chi_square_pvalue(inner, inner_expected) > 0.01);
}

TEST_CASE("random traffic keeps every invariant") {
    const oracle::FuzzReport rep = oracle::fuzz_book(100000, 7, 500);
    INFO(rep.first_violation);
    CHECK(rep.violations == 0);
    CHECK(rep.limits > 10000);
    CHECK(rep.markets > 10000);
    CHECK(rep.cancels > 10000);
    CHECK(rep.rejected_crossing > 0);
}
