#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace lobsim {

/// Price on the integer tick grid.
using Tick = std::int64_t;
/// Volume in normalized units (shares / median trade size, rounded up).
using Volume = std::int64_t;
using OrderId = std::uint64_t;

enum class Side : std::uint8_t { bid = 0, ask = 1 };

constexpr Side opposite(Side s) noexcept { return s == Side::bid ? Side::ask : Side::bid; }
constexpr std::size_t index_of(Side s) noexcept { return static_cast<std::size_t>(s); }

enum class EventType : std::uint8_t { limit, market, cancel };

constexpr char side_code(Side s) noexcept { return s == Side::bid ? 'B' : 'A'; }

constexpr char type_code(EventType t) noexcept {
    switch (t) {
        case EventType::limit: return 'L';
        case EventType::market: return 'M';
        case EventType::cancel: return 'C';
    }
    return '?';
}

std::string_view to_string(Side s) noexcept;
std::string_view to_string(EventType t) noexcept;

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace lobsim
