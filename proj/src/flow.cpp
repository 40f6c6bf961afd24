#include "lobsim/flow.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"

namespace lobsim {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const auto comma = line.find(',', start);
        out.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

[[noreturn]] void fail(const std::string& source, std::size_t line, const std::string& what) {
    throw FlowError(source + ":" + std::to_string(line) + ": " + what);
}

std::int64_t to_int(std::string_view field, const char* name, const std::string& source, std::size_t line) {
    std::int64_t v = 0;
    const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
    if (ec != std::errc() || ptr != field.data() + field.size() || field.empty())
        fail(source, line, std::string("field '") + name + "' is not an integer: '" + std::string(field) + "'");
    return v;
}

}  // namespace

std::vector<OrderFlowRecord> parse_order_flow_csv(const std::string& text, const std::string& source) {
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    if (!std::getline(in, line)) throw FlowError(source + ": empty file");
    ++line_no;
    const auto header = split(line);
    std::map<std::string, std::size_t, std::less<>> col;
    for (std::size_t i = 0; i < header.size(); ++i) col[std::string(header[i])] = i;
    for (const char* required : {"timestamp_ms", "side", "type", "price_ticks", "size"})
        if (!col.count(required)) fail(source, 1, std::string("missing column '") + required + "'");
    const bool has_book = col.count("spread") && col.count("bid_q1") && col.count("ask_q1") && col.count("bid_q10") &&
                          col.count("ask_q10");

    std::vector<OrderFlowRecord> out;
    std::int64_t prev_ts = std::numeric_limits<std::int64_t>::min();
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto f = split(line);
        if (f.size() != header.size())
            fail(source, line_no, "expected " + std::to_string(header.size()) + " fields, found " + std::to_string(f.size()));
        OrderFlowRecord r;
        r.timestamp_ms = to_int(f[col.find("timestamp_ms")->second], "timestamp_ms", source, line_no);
        if (r.timestamp_ms < prev_ts) fail(source, line_no, "timestamps must be non-decreasing");
        prev_ts = r.timestamp_ms;
        const auto side = f[col.find("side")->second];
        if (side == "B") r.side = Side::bid;
        else if (side == "A") r.side = Side::ask;
        else fail(source, line_no, "side must be B or A, found '" + std::string(side) + "'");
        const auto type = f[col.find("type")->second];
        if (type == "L") r.type = EventType::limit;
        else if (type == "M") r.type = EventType::market;
        else if (type == "C") r.type = EventType::cancel;
        else fail(source, line_no, "type must be L, M or C, found '" + std::string(type) + "'");
        r.price = to_int(f[col.find("price_ticks")->second], "price_ticks", source, line_no);
        r.size = to_int(f[col.find("size")->second], "size", source, line_no);
        if (r.size <= 0) fail(source, line_no, "size must be positive");
        if (has_book) {
            BookColumns b;
            b.spread = to_int(f[col.find("spread")->second], "spread", source, line_no);
            b.bid_q1 = to_int(f[col.find("bid_q1")->second], "bid_q1", source, line_no);
            b.ask_q1 = to_int(f[col.find("ask_q1")->second], "ask_q1", source, line_no);
            b.bid_q10 = to_int(f[col.find("bid_q10")->second], "bid_q10", source, line_no);
            b.ask_q10 = to_int(f[col.find("ask_q10")->second], "ask_q10", source, line_no);
            r.book = b;
        }
        out.push_back(r);
    }
    return out;
}

void SessionSpec::validate() const {
    if (!(open_ms < close_ms)) throw FlowError("session window start must precede its end");
    if (!(ticksize > 0.0)) throw FlowError("ticksize must be positive");
    if (median_trade_size < 0.0) throw FlowError("median trade size must be positive");
}

std::string sidecar_path(const std::string& flow_path) { return flow_path + ".meta.json"; }

std::optional<FlowMetadata> read_sidecar(const std::string& flow_path) {
    const std::string p = sidecar_path(flow_path);
    if (!std::filesystem::exists(p)) return std::nullopt;
    try {
        const auto j = nlohmann::json::parse(read_file(p));
        FlowMetadata m;
        m.ticksize = j.at("ticksize").get<double>();
        m.normalized = j.at("normalized").get<bool>();
        m.median_trade_size = j.at("median_trade_size").get<double>();
        m.seed = j.value("seed", std::uint64_t{0});
        m.mode = j.value("mode", std::string{});
        m.session_start_ms = j.value("session_start_ms", kSessionOpenMs);
        m.seconds = j.value("seconds", 0.0);
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw FlowError(p + ": " + e.what());
    }
}

void write_sidecar(const std::string& flow_path, const FlowMetadata& m) {
    nlohmann::ordered_json j;
    j["ticksize"] = m.ticksize;
    j["normalized"] = m.normalized;
    j["median_trade_size"] = m.median_trade_size;
    j["seed"] = m.seed;
    j["mode"] = m.mode;
    j["session_start_ms"] = m.session_start_ms;
    j["seconds"] = m.seconds;
    write_file_atomic(sidecar_path(flow_path), j.dump(2) + "\n");
}

OrderFlow load_order_flow(std::span<const std::string> paths, const SessionSpec& spec) {
    spec.validate();
    if (paths.empty()) throw FlowError("no order-flow files given");
    OrderFlow flow;
    std::optional<bool> normalized;
    double clock = 0.0;
    for (const std::string& path : paths) {
        const auto meta = read_sidecar(path);
        const bool day_normalized = meta && meta->normalized;
        if (normalized && *normalized != day_normalized)
            throw FlowError("cannot glue normalized and raw order flows (" + path + ")");
        normalized = day_normalized;

        std::vector<OrderFlowRecord> rows = parse_order_flow_csv(read_file(path), path);
        DayInfo day;
        day.path = path;
        day.rows = rows.size();
        // Simulated sessions carry their own clock and may run past the window.
        if (spec.filter_window && !meta) {
            std::erase_if(rows, [&](const OrderFlowRecord& r) {
                return r.timestamp_ms < spec.open_ms || r.timestamp_ms > spec.close_ms;
            });
        }
        day.filtered = day.rows - rows.size();
        if (rows.empty()) {
            flow.days.push_back(day);
            continue;
        }
        day.first_ms = rows.front().timestamp_ms;
        day.last_ms = rows.back().timestamp_ms;
        day.offset = clock;
        for (OrderFlowRecord& r : rows) r.time = clock + static_cast<double>(r.timestamp_ms - day.first_ms) / 1000.0;
        clock = rows.back().time;
        flow.records.insert(flow.records.end(), rows.begin(), rows.end());
        flow.days.push_back(day);
    }
    if (flow.records.empty()) throw FlowError("no order-flow records inside the session window");

    if (*normalized) {
        flow.normalized = true;
        flow.median_trade_size = 1.0;
    } else {
        flow.median_trade_size = spec.median_trade_size > 0.0 ? spec.median_trade_size : median_market_size(flow.records);
        normalize_volumes(flow.records, flow.median_trade_size);
        flow.normalized = true;
    }
    return flow;
}

void normalize_volumes(std::span<OrderFlowRecord> records, double median) {
    if (!(median > 0.0)) throw FlowError("median trade size must be positive");
    for (OrderFlowRecord& r : records) {
        const double q = static_cast<double>(r.size) / median;
        const double nearest = std::round(q);
        const double units = std::abs(q - nearest) <= 1e-9 * std::max(1.0, q) ? nearest : std::ceil(q);
        r.size = std::max<Volume>(1, static_cast<Volume>(units));
        if (r.book) {
            // Book-state volumes are in shares as well.
            for (Volume* v : {&r.book->bid_q1, &r.book->ask_q1, &r.book->bid_q10, &r.book->ask_q10})
                *v = static_cast<Volume>(std::ceil(static_cast<double>(*v) / median - 1e-9));
        }
    }
}

double median_market_size(std::span<const OrderFlowRecord> records) {
    std::vector<Volume> sizes;
    for (const OrderFlowRecord& r : records)
        if (r.type == EventType::market) sizes.push_back(r.size);
    if (sizes.empty()) throw FlowError("no market orders to take the median trade size from");
    std::sort(sizes.begin(), sizes.end());
    const std::size_t n = sizes.size();
    return n % 2 ? static_cast<double>(sizes[n / 2]) : 0.5 * static_cast<double>(sizes[n / 2 - 1] + sizes[n / 2]);
}

std::string format_order_flow_csv(std::span<const OrderFlowRecord> records, bool with_book_columns) {
    std::string out = "timestamp_ms,side,type,price_ticks,size";
    if (with_book_columns) out += ",spread,bid_q1,ask_q1,bid_q10,ask_q10";
    out += '\n';
    out.reserve(records.size() * 40);
    for (const OrderFlowRecord& r : records) {
        out += std::to_string(r.timestamp_ms);
        out += ',';
        out += side_code(r.side);
        out += ',';
        out += type_code(r.type);
        out += ',';
        out += std::to_string(r.price);
        out += ',';
        out += std::to_string(r.size);
        if (with_book_columns) {
            const BookColumns b = r.book.value_or(BookColumns{});
            for (std::int64_t v : {b.spread, b.bid_q1, b.ask_q1, b.bid_q10, b.ask_q10}) {
                out += ',';
                out += std::to_string(v);
            }
        }
        out += '\n';
    }
    return out;
}

std::vector<OrderFlowRecord> to_flow_records(std::span<const EventRecord> events, bool with_book_columns) {
    std::vector<OrderFlowRecord> out;
    out.reserve(events.size());
    for (const EventRecord& e : events) {
        OrderFlowRecord r;
        r.timestamp_ms = e.timestamp_ms;
        r.time = e.time;
        r.side = e.side;
        r.type = e.type;
        r.price = e.price;
        r.size = e.size;
        if (with_book_columns)
            r.book = BookColumns{e.state.spread, e.state.q1[0], e.state.q1[1], e.state.q10[0], e.state.q10[1]};
        out.push_back(r);
    }
    return out;
}

std::string format_state_samples_csv(std::span<const StateSample> samples) {
    std::ostringstream out;
    out << "time_s,spread,bid_q1,ask_q1,bid_q10,ask_q10,bid_orders,ask_orders\n";
    for (const StateSample& s : samples)
        out << s.time << ',' << s.state.spread << ',' << s.state.q1[0] << ',' << s.state.q1[1] << ',' << s.state.q10[0]
            << ',' << s.state.q10[1] << ',' << s.state.orders[0] << ',' << s.state.orders[1] << '\n';
    return out.str();
}

void write_file_atomic(const std::string& path, const std::string& content) {
    const std::filesystem::path target(path);
    if (target.has_parent_path()) std::filesystem::create_directories(target.parent_path());
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot open " + tmp + " for writing");
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) throw Error("write to " + tmp + " failed");
    }
    std::filesystem::rename(tmp, target);
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace lobsim
