#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lobsim/book.hpp"
#include "lobsim/cancellation.hpp"
#include "lobsim/intensity.hpp"
#include "lobsim/placement.hpp"
#include "lobsim/random.hpp"

namespace lobsim {

/// Every parameter the simulator needs, one set shared by both sides.
struct ModelBundle {
    double ticksize = 0.01;
    /// Shares per normalized volume unit.
    double median_trade_size = 1.0;

    IntensityParams limit_intensity{{}, VolumeCovariate::q10};
    IntensityParams market_intensity{{}, VolumeCovariate::q1};
    /// Per-side constant rates of the Poisson reference (events/s).
    double limit_rate = 1.0;
    double market_rate = 1.0;

    MixtureParams mixture;
    StudentParams student;
    CancellationParams cancellation;

    /// Exponential means of the order sizes, normalized units.
    double limit_size = 1.0;
    double market_size = 1.0;

    void validate() const;
};

enum class SimMode { state_dependent, poisson_reference };

std::string to_string(SimMode m);
SimMode sim_mode_from_string(const std::string& s);

/// Per side: each side cancels at theta times its own order count. Global: one
/// clock at theta times the book's order count, the side drawn evenly among
/// the non-empty ones.
enum class CancelClock { per_side, global };

struct InitialBook {
    std::size_t levels = 10;
    /// Volume per level; 0 means the rounded mean limit order size.
    Volume depth = 0;
    Tick spread = 2;
    Tick best_bid = 9999;
};

/// 09:05:00 in milliseconds after midnight.
inline constexpr std::int64_t kSessionOpenMs = 32'700'000;
/// 17:25:00 in milliseconds after midnight.
inline constexpr std::int64_t kSessionCloseMs = 62'700'000;

struct SimConfig {
    ModelBundle bundle;
    double session_seconds = 30'000.0;
    std::uint64_t seed = 1;
    SimMode mode = SimMode::state_dependent;
    CancelClock cancel_clock = CancelClock::per_side;
    InitialBook initial;
    /// State samples are written every sample_interval seconds.
    double sample_interval = 1.0;
    std::int64_t session_start_ms = kSessionOpenMs;

    void validate() const;
};

enum class SimErrc { dead_market, placement_stuck, invalid_config };

class SimulationError : public Error {
public:
    SimulationError(SimErrc code, const std::string& what) : Error(what), code_(code) {}
    SimErrc code() const noexcept { return code_; }

private:
    SimErrc code_;
};

struct EventRecord {
    double time = 0.0;  ///< seconds since session start
    std::int64_t timestamp_ms = 0;
    EventType type = EventType::limit;
    /// Book side affected: where the order rests, is cancelled, or is hit.
    Side side = Side::bid;
    Tick price = 0;
    Volume size = 0;
    /// Covariates just before the event.
    MarketState state;
};

struct StateSample {
    double time = 0.0;
    MarketState state;
};

/// Six competing streams, indexed by stream_index().
inline constexpr std::size_t kStreamCount = 6;
constexpr std::size_t stream_index(EventType type, Side side) noexcept {
    return 2 * static_cast<std::size_t>(type) + index_of(side);
}

struct CompetingDraw {
    double wait = 0.0;
    std::size_t index = 0;
};

/// Time to the first of several independent exponential clocks and which one
/// rang. Throws SimulationError(dead_market) when every rate is zero.
CompetingDraw draw_competing(std::span<const double> rates, Rng& rng);

/// ceil(Exp(mean)), at least 1.
Volume draw_order_size(double mean, Rng& rng);

struct SimStats {
    std::array<std::size_t, kStreamCount> events{};
    std::size_t discarded_market = 0;
    std::size_t placement_resamples = 0;
};

/// Exact event-by-event simulation: all intensities are functions of the book
/// state, which only changes at events, so the competing clocks are exact.
class Simulator {
public:
    explicit Simulator(SimConfig config);

    /// Advances to the next recorded event; nullopt once the session is over.
    std::optional<EventRecord> step();

    /// Rates of the six streams in the current state.
    std::array<double, kStreamCount> rates() const;

    double time() const noexcept { return time_; }
    const OrderBook& book() const noexcept { return book_; }
    const SimStats& stats() const noexcept { return stats_; }
    const SimConfig& config() const noexcept { return config_; }
    /// Limit orders that built the seed book, as records at time 0.
    const std::vector<EventRecord>& seed_records() const noexcept { return seed_; }

private:
    EventRecord record(EventType type, Side side, Tick price, Volume size, const MarketState& pre) const;
    Tick place(Side side, const MarketState& pre);

    SimConfig config_;
    Rng rng_;
    OrderBook book_;
    PlacementSampler sampler_;
    double time_ = 0.0;
    SimStats stats_;
    std::vector<EventRecord> seed_;
};

struct SessionResult {
    std::vector<EventRecord> events;  ///< seed book first, then the session
    std::vector<StateSample> samples;
    SimStats stats;
    double duration = 0.0;
    MarketState final_state;
};

SessionResult run_session(const SimConfig& config);

}  // namespace lobsim
