#pragma once

// Small interpreter for the listing subset. It exists to check that a
// rewritten listing behaves like the original: both are run from the same
// initial state and their observable traces (memory writes and calls) are
// compared.

#include <cstddef>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "pfguard/listing.h"

namespace pfguard {

struct Observation {
  enum class Kind { kWrite, kCall };
  Kind kind = Kind::kWrite;
  Addr address = 0;         // write address or call target
  std::string symbol;       // call symbol, if known
  std::uint64_t value = 0;  // written value, or %rdi at the call
  unsigned size = 0;        // bytes written; 0 for calls

  friend bool operator==(const Observation&, const Observation&) = default;
};

using ObservableTrace = std::vector<Observation>;

std::string to_string(const Observation& obs);

struct Flags {
  bool zf = false;
  bool sf = false;
  bool cf = false;
  bool of = false;
  friend bool operator==(const Flags&, const Flags&) = default;
};

// Whether `jcc` is taken under `flags`. Throws std::invalid_argument for
// anything outside the 14 conditions.
bool condition_holds(std::string_view jcc, const Flags& flags);

// Flags after `cmp src, dst` (dst - src) on `bits`-wide operands.
Flags compare_flags(std::uint64_t dst, std::uint64_t src, unsigned bits);
// Flags after `test src, dst` (dst & src).
Flags test_flags(std::uint64_t dst, std::uint64_t src, unsigned bits);

struct MachineStateLite {
  std::map<std::string, std::uint64_t> registers;  // canonical 64-bit names
  std::map<Addr, std::uint8_t> memory;             // unset bytes read as 0
  Flags flags;
  ObservableTrace observable_trace;

  std::uint64_t read_register(std::string_view name) const;
  void write_register(std::string_view name, std::uint64_t value);
  std::uint64_t read_memory(Addr addr, unsigned size) const;
  void write_memory(Addr addr, std::uint64_t value, unsigned size);
};

class InterpreterError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DivergenceError : public InterpreterError {
 public:
  using InterpreterError::InterpreterError;
};

class WildJumpError : public InterpreterError {
 public:
  using InterpreterError::InterpreterError;
};

struct ExecutionInfo {
  std::size_t steps = 0;
  std::vector<Addr> executed;  // instruction addresses in execution order
  MachineStateLite final_state;
};

inline constexpr std::size_t kDefaultFuel = 10000;

// Runs from `entry_label` until `ret`, the end of the listing, or `fuel`
// instructions. Calls are logged and return immediately.
ObservableTrace interpret(const Program& program, const MachineStateLite& initial,
                          std::string_view entry_label, std::size_t fuel = kDefaultFuel,
                          ExecutionInfo* info = nullptr);

}  // namespace pfguard
