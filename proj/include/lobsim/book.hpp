#pragma once

#include <array>
#include <cstddef>
#include <deque>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "lobsim/types.hpp"

namespace lobsim {

struct Order {
    OrderId id = 0;
    Side side = Side::bid;
    Tick price = 0;
    Volume size = 0;
    std::uint64_t seq = 0;
};

enum class BookErrc { crossing, no_liquidity, no_orders, unknown_order, invalid_size, invalid_index, missing_liquidity };

class BookError : public Error {
public:
    BookError(BookErrc code, const std::string& what) : Error(what), code_(code) {}
    BookErrc code() const noexcept { return code_; }

private:
    BookErrc code_;
};

struct Fill {
    OrderId id = 0;
    Tick price = 0;
    Volume quantity = 0;
};

struct MarketResult {
    std::vector<Fill> fills;
    Volume filled = 0;
    /// Requested quantity that found no liquidity.
    Volume residual = 0;
};

inline constexpr Tick kUndefinedSpread = 0;
inline constexpr std::size_t kCovariateLevels = 10;

/// Observable covariates at one instant.
struct MarketState {
    /// best_ask - best_bid, or kUndefinedSpread when a side is empty.
    Tick spread = kUndefinedSpread;
    /// Spread computed with the last observed best quote standing in for an
    /// empty side. Equal to `spread` whenever both sides are populated.
    Tick reference_spread = kUndefinedSpread;
    std::array<Volume, 2> q1{};
    std::array<Volume, 2> q10{};
    std::array<Volume, 2> total{};
    std::array<std::size_t, 2> orders{};
    /// Volume by tick distance from the same-side best quote; only filled when
    /// a profile length is requested from snapshot_state().
    std::array<std::vector<Volume>, 2> depth_profile;

    bool spread_defined() const noexcept { return spread != kUndefinedSpread; }
    Volume q1_of(Side s) const noexcept { return q1[index_of(s)]; }
    Volume q10_of(Side s) const noexcept { return q10[index_of(s)]; }
    std::size_t orders_of(Side s) const noexcept { return orders[index_of(s)]; }
};

/// One side of the book: price levels in execution priority, FIFO within a level.
class BookSide {
public:
    explicit BookSide(Side side) : side_(side) {}

    Side side() const noexcept { return side_; }
    bool empty() const noexcept { return levels_.empty(); }
    std::optional<Tick> best() const;
    Volume best_volume() const;
    Volume total_volume() const noexcept { return total_; }
    std::size_t order_count() const noexcept { return count_; }
    std::size_t level_count() const noexcept { return levels_.size(); }
    Volume volume_at(Tick price) const;
    /// Summed volume over the `levels` best populated price levels.
    Volume depth(std::size_t levels) const;
    /// out[k] = volume at best +/- k ticks (away from the spread).
    void depth_profile(std::span<Volume> out) const;

    /// Visits orders from the next to execute to the last.
    template <class F>
    void for_each_in_priority(F&& f) const {
        for (const auto& [key, level] : levels_)
            for (const Order& o : level.queue) f(o);
    }

private:
    friend class OrderBook;

    struct Level {
        std::deque<Order> queue;
        Volume volume = 0;
    };

    // Keyed so that begin() is always the best level on either side.
    Tick key(Tick price) const noexcept { return side_ == Side::ask ? price : -price; }
    Tick price_of(Tick key) const noexcept { return side_ == Side::ask ? key : -key; }

    Side side_;
    std::map<Tick, Level> levels_;
    Volume total_ = 0;
    std::size_t count_ = 0;
};

/// Two-sided limit order book under price-time priority.
///
/// Single writer. Snapshots are plain values and may be shared freely.
class OrderBook {
public:
    OrderBook();

    /// Rests a limit order. Throws BookError(crossing) if the price reaches the
    /// opposite best quote.
    OrderId apply_limit(Side side, Tick price, Volume size);

    /// Executes a market order sent by `aggressor` against the opposite side.
    /// Throws BookError(no_liquidity) when that side is empty.
    MarketResult apply_market(Side aggressor, Volume size);

    /// Volume strictly ahead in execution priority over same-side volume.
    double priority_index_of(OrderId id) const;

    /// Cancels the first order, in priority order, whose index is >= threshold;
    /// the last order when no index reaches it.
    Order apply_cancel_by_index(Side side, double threshold);

    /// Cancels the order of rank `rank` (0 = next to execute).
    Order cancel_nth(Side side, std::size_t rank);

    Order cancel_order(OrderId id);

    /// Removes `size` from the level at `price` without knowing which order it
    /// belonged to: the newest order of exactly that size if one exists,
    /// otherwise volume is taken from the back of the queue.
    void cancel_volume_at(Side side, Tick price, Volume size);

    MarketState snapshot_state(std::size_t profile_ticks = 0) const;

    const BookSide& side(Side s) const noexcept { return sides_[index_of(s)]; }
    std::optional<Tick> best(Side s) const { return side(s).best(); }
    std::optional<Tick> last_best(Side s) const noexcept { return last_best_[index_of(s)]; }
    const Order* find(OrderId id) const;
    std::size_t order_count() const noexcept;

    /// Full structural check; returns a description of the first violation.
    std::optional<std::string> check_invariants() const;

private:
    BookSide& mut(Side s) noexcept { return sides_[index_of(s)]; }
    Order remove_at(Side s, std::map<Tick, BookSide::Level>::iterator level, std::size_t pos);
    void refresh_last_best();

    struct Locator {
        Side side;
        Tick price;
    };

    std::array<BookSide, 2> sides_;
    std::unordered_map<OrderId, Locator> where_;
    std::array<std::optional<Tick>, 2> last_best_;
    OrderId next_id_ = 1;
};

}  // namespace lobsim
