#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace pfguard {

// Hex with or without a 0x prefix. Throws std::invalid_argument otherwise.
std::uint64_t parse_hex(std::string_view token);

// Signed integer in hex (0x-prefixed) or decimal, with an optional sign.
std::int64_t parse_signed(std::string_view token);

std::string hex(std::uint64_t value);
std::string signed_hex(std::int64_t value);

}  // namespace pfguard
