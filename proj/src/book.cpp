#include "lobsim/book.hpp"

#include <algorithm>
#include <sstream>

namespace lobsim {

std::string_view to_string(Side s) noexcept { return s == Side::bid ? "bid" : "ask"; }

std::string_view to_string(EventType t) noexcept {
    switch (t) {
        case EventType::limit: return "limit";
        case EventType::market: return "market";
        case EventType::cancel: return "cancel";
    }
    return "unknown";
}

// ---------------------------------------------------------------------------
// BookSide

std::optional<Tick> BookSide::best() const {
    if (levels_.empty()) return std::nullopt;
    return price_of(levels_.begin()->first);
}

Volume BookSide::best_volume() const { return levels_.empty() ? 0 : levels_.begin()->second.volume; }

Volume BookSide::volume_at(Tick price) const {
    auto it = levels_.find(key(price));
    return it == levels_.end() ? 0 : it->second.volume;
}

Volume BookSide::depth(std::size_t levels) const {
    Volume sum = 0;
    std::size_t n = 0;
    for (auto it = levels_.begin(); it != levels_.end() && n < levels; ++it, ++n) sum += it->second.volume;
    return sum;
}

void BookSide::depth_profile(std::span<Volume> out) const {
    std::fill(out.begin(), out.end(), Volume{0});
    if (levels_.empty()) return;
    const Tick best_key = levels_.begin()->first;
    for (const auto& [k, level] : levels_) {
        const auto distance = static_cast<std::size_t>(k - best_key);
        if (distance >= out.size()) break;
        out[distance] = level.volume;
    }
}

// ---------------------------------------------------------------------------
// OrderBook

OrderBook::OrderBook() : sides_{BookSide(Side::bid), BookSide(Side::ask)} {}

OrderId OrderBook::apply_limit(Side side, Tick price, Volume size) {
    if (size < 1) throw BookError(BookErrc::invalid_size, "limit order size must be >= 1");
    if (auto opp = best(opposite(side))) {
        const bool crosses = side == Side::bid ? price >= *opp : price <= *opp;
        if (crosses) {
            std::ostringstream msg;
            msg << "limit " << to_string(side) << " at " << price << " crosses opposite best " << *opp;
            throw BookError(BookErrc::crossing, msg.str());
        }
    }
    BookSide& bs = mut(side);
    const OrderId id = next_id_++;
    auto& level = bs.levels_[bs.key(price)];
    level.queue.push_back(Order{id, side, price, size, id});
    level.volume += size;
    bs.total_ += size;
    ++bs.count_;
    where_.emplace(id, Locator{side, price});
    refresh_last_best();
    return id;
}

MarketResult OrderBook::apply_market(Side aggressor, Volume size) {
    if (size < 1) throw BookError(BookErrc::invalid_size, "market order size must be >= 1");
    BookSide& bs = mut(opposite(aggressor));
    if (bs.empty()) throw BookError(BookErrc::no_liquidity, "market order against an empty side");

    MarketResult result;
    Volume remaining = size;
    while (remaining > 0 && !bs.levels_.empty()) {
        auto level_it = bs.levels_.begin();
        auto& level = level_it->second;
        Order& front = level.queue.front();
        const Volume take = std::min(remaining, front.size);
        result.fills.push_back(Fill{front.id, front.price, take});
        remaining -= take;
        front.size -= take;
        level.volume -= take;
        bs.total_ -= take;
        if (front.size == 0) {
            where_.erase(front.id);
            level.queue.pop_front();
            --bs.count_;
            if (level.queue.empty()) bs.levels_.erase(level_it);
        }
    }
    result.filled = size - remaining;
    result.residual = remaining;
    refresh_last_best();
    return result;
}

double OrderBook::priority_index_of(OrderId id) const {
    auto it = where_.find(id);
    if (it == where_.end()) throw BookError(BookErrc::unknown_order, "unknown order id " + std::to_string(id));
    const BookSide& bs = side(it->second.side);
    Volume ahead = 0;
    for (const auto& [k, level] : bs.levels_) {
        for (const Order& o : level.queue) {
            if (o.id == id) return static_cast<double>(ahead) / static_cast<double>(bs.total_);
            ahead += o.size;
        }
    }
    throw BookError(BookErrc::unknown_order, "order index out of sync for id " + std::to_string(id));
}

Order OrderBook::remove_at(Side s, std::map<Tick, BookSide::Level>::iterator level_it, std::size_t pos) {
    BookSide& bs = mut(s);
    auto& level = level_it->second;
    const Order victim = level.queue[pos];
    level.queue.erase(level.queue.begin() + static_cast<std::ptrdiff_t>(pos));
    level.volume -= victim.size;
    bs.total_ -= victim.size;
    --bs.count_;
    if (level.queue.empty()) bs.levels_.erase(level_it);
    where_.erase(victim.id);
    refresh_last_best();
    return victim;
}

Order OrderBook::apply_cancel_by_index(Side s, double threshold) {
    if (!(threshold >= 0.0 && threshold <= 1.0))
        throw BookError(BookErrc::invalid_index, "cancellation index must lie in [0, 1]");
    BookSide& bs = mut(s);
    if (bs.empty()) throw BookError(BookErrc::no_orders, "cancellation on an empty side");

    const auto total = static_cast<double>(bs.total_);
    Volume ahead = 0;
    for (auto level_it = bs.levels_.begin(); level_it != bs.levels_.end(); ++level_it) {
        auto& queue = level_it->second.queue;
        for (std::size_t pos = 0; pos < queue.size(); ++pos) {
            if (static_cast<double>(ahead) / total >= threshold) return remove_at(s, level_it, pos);
            ahead += queue[pos].size;
        }
    }
    // No index reaches the threshold: cancel the lowest-priority order.
    auto last_level = std::prev(bs.levels_.end());
    return remove_at(s, last_level, last_level->second.queue.size() - 1);
}

Order OrderBook::cancel_nth(Side s, std::size_t rank) {
    BookSide& bs = mut(s);
    if (rank >= bs.count_) throw BookError(BookErrc::no_orders, "cancellation rank beyond the side's order count");
    for (auto level_it = bs.levels_.begin(); level_it != bs.levels_.end(); ++level_it) {
        const std::size_t n = level_it->second.queue.size();
        if (rank < n) return remove_at(s, level_it, rank);
        rank -= n;
    }
    throw BookError(BookErrc::no_orders, "order count out of sync");
}

Order OrderBook::cancel_order(OrderId id) {
    auto it = where_.find(id);
    if (it == where_.end()) throw BookError(BookErrc::unknown_order, "unknown order id " + std::to_string(id));
    const Locator loc = it->second;
    BookSide& bs = mut(loc.side);
    auto level_it = bs.levels_.find(bs.key(loc.price));
    auto& queue = level_it->second.queue;
    auto pos = std::find_if(queue.begin(), queue.end(), [id](const Order& o) { return o.id == id; });
    return remove_at(loc.side, level_it, static_cast<std::size_t>(pos - queue.begin()));
}

void OrderBook::cancel_volume_at(Side s, Tick price, Volume size) {
    if (size < 1) throw BookError(BookErrc::invalid_size, "cancelled size must be >= 1");
    BookSide& bs = mut(s);
    auto level_it = bs.levels_.find(bs.key(price));
    if (level_it == bs.levels_.end() || level_it->second.volume < size) {
        std::ostringstream msg;
        msg << "cancel of " << size << " at " << price << " exceeds resting volume "
            << (level_it == bs.levels_.end() ? 0 : level_it->second.volume);
        throw BookError(BookErrc::missing_liquidity, msg.str());
    }
    auto& queue = level_it->second.queue;
    for (std::size_t pos = queue.size(); pos-- > 0;) {
        if (queue[pos].size == size) {
            remove_at(s, level_it, pos);
            return;
        }
    }
    // No exact match: shave volume off the newest orders.
    Volume remaining = size;
    while (remaining > 0) {
        Order& back = queue.back();
        if (back.size <= remaining) {
            remaining -= back.size;
            remove_at(s, level_it, queue.size() - 1);
            if (remaining > 0) level_it = bs.levels_.find(bs.key(price));
        } else {
            back.size -= remaining;
            level_it->second.volume -= remaining;
            bs.total_ -= remaining;
            remaining = 0;
        }
    }
}

MarketState OrderBook::snapshot_state(std::size_t profile_ticks) const {
    MarketState st;
    for (Side s : {Side::bid, Side::ask}) {
        const BookSide& bs = side(s);
        const auto i = index_of(s);
        st.q1[i] = bs.best_volume();
        st.q10[i] = bs.depth(kCovariateLevels);
        st.total[i] = bs.total_volume();
        st.orders[i] = bs.order_count();
        if (profile_ticks > 0) {
            st.depth_profile[i].resize(profile_ticks);
            bs.depth_profile(st.depth_profile[i]);
        }
    }
    const auto bid = best(Side::bid);
    const auto ask = best(Side::ask);
    if (bid && ask) st.spread = *ask - *bid;
    const auto ref_bid = bid ? bid : last_best_[0];
    const auto ref_ask = ask ? ask : last_best_[1];
    if (ref_bid && ref_ask) st.reference_spread = std::max<Tick>(1, *ref_ask - *ref_bid);
    return st;
}

const Order* OrderBook::find(OrderId id) const {
    auto it = where_.find(id);
    if (it == where_.end()) return nullptr;
    const BookSide& bs = side(it->second.side);
    const auto& queue = bs.levels_.at(bs.key(it->second.price)).queue;
    auto pos = std::find_if(queue.begin(), queue.end(), [id](const Order& o) { return o.id == id; });
    return pos == queue.end() ? nullptr : &*pos;
}

std::size_t OrderBook::order_count() const noexcept { return sides_[0].count_ + sides_[1].count_; }

void OrderBook::refresh_last_best() {
    for (Side s : {Side::bid, Side::ask})
        if (auto b = best(s)) last_best_[index_of(s)] = b;
}

std::optional<std::string> OrderBook::check_invariants() const {
    std::size_t ids = 0;
    for (Side s : {Side::bid, Side::ask}) {
        const BookSide& bs = side(s);
        Volume total = 0;
        std::size_t count = 0;
        for (const auto& [k, level] : bs.levels_) {
            if (level.queue.empty()) return "empty level retained at " + std::to_string(bs.price_of(k));
            Volume vol = 0;
            std::uint64_t prev_seq = 0;
            for (const Order& o : level.queue) {
                if (o.size < 1) return "non-positive order size";
                if (o.price != bs.price_of(k) || o.side != s) return "order filed under the wrong level";
                if (o.seq <= prev_seq) return "FIFO order violated at " + std::to_string(o.price);
                prev_seq = o.seq;
                vol += o.size;
                auto w = where_.find(o.id);
                if (w == where_.end() || w->second.price != o.price || w->second.side != s)
                    return "id index out of sync";
            }
            if (vol != level.volume) return "level volume out of sync";
            total += vol;
            count += level.queue.size();
        }
        if (total != bs.total_) return "side volume out of sync";
        if (count != bs.count_) return "side order count out of sync";
        ids += count;
    }
    if (ids != where_.size()) return "id index size mismatch";
    const auto bid = best(Side::bid);
    const auto ask = best(Side::ask);
    if (bid && ask && *ask <= *bid) return "crossed book";
    return std::nullopt;
}

}  // namespace lobsim
