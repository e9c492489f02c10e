#include "pfguard/hex.h"

#include <charconv>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace pfguard {

std::uint64_t parse_hex(std::string_view token) {
  if (token.starts_with("0x") || token.starts_with("0X")) token.remove_prefix(2);
  if (token.empty()) throw std::invalid_argument("empty hex value");
  std::uint64_t value = 0;
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value, 16);
  if (ec != std::errc() || ptr != token.data() + token.size()) {
    throw std::invalid_argument("bad hex value '" + std::string(token) + "'");
  }
  return value;
}

std::int64_t parse_signed(std::string_view token) {
  const std::string original(token);
  bool negative = false;
  if (!token.empty() && (token.front() == '-' || token.front() == '+')) {
    negative = token.front() == '-';
    token.remove_prefix(1);
  }
  std::uint64_t magnitude = 0;
  if (token.starts_with("0x") || token.starts_with("0X")) {
    magnitude = parse_hex(token);
  } else {
    auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), magnitude);
    if (token.empty() || ec != std::errc() || ptr != token.data() + token.size()) {
      throw std::invalid_argument("bad integer '" + original + "'");
    }
  }
  const auto limit = static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::max());
  if (magnitude > limit + (negative ? 1 : 0)) {
    throw std::invalid_argument("integer out of range '" + original + "'");
  }
  return negative ? static_cast<std::int64_t>(0 - magnitude) : static_cast<std::int64_t>(magnitude);
}

std::string hex(std::uint64_t value) {
  std::ostringstream os;
  os << "0x" << std::hex << value;
  return os.str();
}

std::string signed_hex(std::int64_t value) {
  if (value < 0) return "-" + hex(0 - static_cast<std::uint64_t>(value));
  return hex(static_cast<std::uint64_t>(value));
}

}  // namespace pfguard
