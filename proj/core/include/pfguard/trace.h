#pragma once

// Timeline events and the line-oriented trace file format:
//
//   L <pid> <ip-hex> <addr-hex>     load
//   CS <from> <to>                  context switch
//   F <pid> <addr-hex>              flush one line
//   FA <pid>                        flush every line
//
// `#` starts a comment. Two comment forms carry metadata and survive a
// format/parse round trip: `# seed: <n>` and `# description: <text>`.

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "pfguard/hex.h"
#include "pfguard/prefetcher.h"

namespace pfguard {

using Pid = std::int64_t;

struct Load {
  Pid pid = 0;
  Addr ip = 0;
  Addr addr = 0;
  friend bool operator==(const Load&, const Load&) = default;
};

struct ContextSwitch {
  Pid from_pid = 0;
  Pid to_pid = 0;
  friend bool operator==(const ContextSwitch&, const ContextSwitch&) = default;
};

struct Flush {
  Pid pid = 0;
  Addr addr = 0;
  friend bool operator==(const Flush&, const Flush&) = default;
};

struct FlushAll {
  Pid pid = 0;
  friend bool operator==(const FlushAll&, const FlushAll&) = default;
};

using Event = std::variant<Load, ContextSwitch, Flush, FlushAll>;

struct Timeline {
  std::vector<Event> events;
  std::uint64_t seed = 0;
  std::string description;

  friend bool operator==(const Timeline&, const Timeline&) = default;
};

class TraceParseError : public std::runtime_error {
 public:
  TraceParseError(std::size_t line, const std::string& what);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

Timeline parse_trace(std::string_view text);
std::string format_trace(const Timeline& timeline);
std::string format_event(const Event& event);

}  // namespace pfguard
