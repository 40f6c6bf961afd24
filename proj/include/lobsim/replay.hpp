#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "lobsim/book.hpp"
#include "lobsim/calibration.hpp"
#include "lobsim/distributions.hpp"
#include "lobsim/flow.hpp"
#include "lobsim/placement.hpp"
#include "lobsim/simulator.hpp"

namespace lobsim {

/// Counts of records that could not be replayed consistently.
struct ReplayQuality {
    std::size_t crossing_limits = 0;   ///< limit priced through the opposite best: skipped
    std::size_t missing_cancels = 0;   ///< cancel larger than the level volume: skipped
    std::size_t empty_markets = 0;     ///< market order against an empty side: skipped
    std::size_t partial_markets = 0;   ///< market order larger than the whole side: applied
    std::size_t state_mismatches = 0;  ///< book-state columns disagreeing with the replayed book
    std::size_t offsets_out_of_range = 0;
    std::size_t offsets_without_reference = 0;

    std::size_t skipped() const noexcept { return crossing_limits + missing_cancels + empty_markets; }
};

struct ReplayOptions {
    Tick offset_min = kPlacementMinOffset;
    Tick offset_max = kPlacementMaxOffset;
    std::size_t shape_ticks = kDefaultShapeTicks;
};

struct ReplayResult {
    CovariatePath path;
    /// Priority index of each cancellation, half of the same-price volume counted ahead.
    std::vector<double> cancel_priority;
    /// Selection interval of each cancellation (see selection_interval).
    std::vector<PriorityInterval> cancel_intervals;
    std::vector<BinnedOffset> offsets;
    std::vector<double> limit_sizes;
    std::vector<double> market_sizes;
    std::array<std::size_t, kStreamCount> events{};
    ReplayQuality quality;
    DistributionReport distributions;
    std::size_t records = 0;
};

/// Priority index of a cancellation at `price`, computed before removal:
/// (volume at better prices + half the volume at `price`) / side volume.
double half_queue_priority(const BookSide& side, Tick price);

/// Drawn indices that select an order at `price` when the victim is the first
/// order whose priority index reaches the draw: from the index of the last
/// order of the better level to the index of the last order at `price`
/// (1 for the worst level, which also takes the fallback).
PriorityInterval selection_interval(const BookSide& side, Tick price);

/// Replays the flow through an (initially empty) book, recording the
/// covariate path and the per-model samples. Inconsistent records are counted
/// in the quality summary and skipped.
ReplayResult replay_order_flow(std::span<const OrderFlowRecord> records, const ReplayOptions& options = {});

CovariatePath build_covariate_path(std::span<const OrderFlowRecord> records);

/// The path the simulator itself observed, on the millisecond clock of its event log.
CovariatePath recorded_path(std::span<const EventRecord> events, const MarketState& final_state);

}  // namespace lobsim
