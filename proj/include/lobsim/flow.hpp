#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lobsim/simulator.hpp"
#include "lobsim/types.hpp"

namespace lobsim {

class FlowError : public Error {
public:
    using Error::Error;
};

/// Book-state columns that may accompany a record (pre-event values).
struct BookColumns {
    Tick spread = kUndefinedSpread;
    Volume bid_q1 = 0;
    Volume ask_q1 = 0;
    Volume bid_q10 = 0;
    Volume ask_q10 = 0;
};

struct OrderFlowRecord {
    std::int64_t timestamp_ms = 0;
    /// Seconds on the continuous (glued) session clock.
    double time = 0.0;
    /// Book side affected: B/A of the resting order, or the side a market order hits.
    Side side = Side::bid;
    EventType type = EventType::limit;
    Tick price = 0;
    /// Shares on input, normalized units after normalize_volumes().
    Volume size = 0;
    std::optional<BookColumns> book;
};

/// Sidecar written next to simulated flows (<file>.meta.json).
struct FlowMetadata {
    double ticksize = 0.01;
    bool normalized = true;
    double median_trade_size = 1.0;
    std::uint64_t seed = 0;
    std::string mode;
    std::int64_t session_start_ms = kSessionOpenMs;
    double seconds = 0.0;
};

std::string sidecar_path(const std::string& flow_path);
std::optional<FlowMetadata> read_sidecar(const std::string& flow_path);
void write_sidecar(const std::string& flow_path, const FlowMetadata& meta);

struct SessionSpec {
    std::int64_t open_ms = kSessionOpenMs;
    std::int64_t close_ms = kSessionCloseMs;
    /// Keep only rows whose timestamp lies in [open_ms, close_ms].
    bool filter_window = true;
    double ticksize = 0.01;
    /// Shares per unit; 0 means the median market order size of the input.
    double median_trade_size = 0.0;

    void validate() const;
};

struct DayInfo {
    std::string path;
    std::size_t rows = 0;
    std::size_t filtered = 0;
    std::int64_t first_ms = 0;
    std::int64_t last_ms = 0;
    /// Clock value of the day's first record.
    double offset = 0.0;
};

struct OrderFlow {
    std::vector<OrderFlowRecord> records;
    std::vector<DayInfo> days;
    bool normalized = false;
    double median_trade_size = 0.0;
};

/// Parses one CSV with header `timestamp_ms,side,type,price_ticks,size` plus
/// optional spread,bid_q1,ask_q1,bid_q10,ask_q10 columns.
std::vector<OrderFlowRecord> parse_order_flow_csv(const std::string& text, const std::string& source);

/// Reads each file as one day, filters to the session window and glues the
/// days with zero gap: a day's first record takes the previous day's last
/// clock value. Times within a day are seconds since its first record.
OrderFlow load_order_flow(std::span<const std::string> paths, const SessionSpec& spec);

/// size <- ceil(size / median).
void normalize_volumes(std::span<OrderFlowRecord> records, double median_trade_size);

/// Median raw size of the market orders.
double median_market_size(std::span<const OrderFlowRecord> records);

/// Writes the canonical CSV (optionally with the book-state columns).
std::string format_order_flow_csv(std::span<const OrderFlowRecord> records, bool with_book_columns);

std::vector<OrderFlowRecord> to_flow_records(std::span<const EventRecord> events, bool with_book_columns);

std::string format_state_samples_csv(std::span<const StateSample> samples);

/// Whole-file write through a temporary and a rename.
void write_file_atomic(const std::string& path, const std::string& content);
std::string read_file(const std::string& path);

}  // namespace lobsim
