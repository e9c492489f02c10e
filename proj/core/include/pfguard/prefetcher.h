#pragma once

// Model of the IP-stride prefetcher entry table.
//
// Entries are keyed by the low 8 bits of the load instruction address. Each
// entry tracks the last requested data address, the stride between the last
// two requests, and a saturating 2-bit confidence counter. A load whose tag
// matches an entry with confidence >= 2 prefetches `addr + stride`.
//
// Trigger rule:
//   * stride-equal match: confidence is incremented (saturating at 3); the
//     load triggers when the incremented confidence is >= 2.
//   * stride mismatch: the load triggers when the confidence *before* the
//     update is >= 2, using the stride stored before the update. The entry
//     then takes the new stride and confidence drops to 1.
// Fresh entries start with an undefined stride and confidence 0, so a constant
// stride stream first triggers on its third access.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace pfguard {

using Addr = std::uint64_t;
using Stride = std::int64_t;

inline constexpr Addr kLineSize = 64;
inline constexpr Addr kPageSize = 4096;
inline constexpr std::size_t kDefaultPrefetcherCapacity = 24;
inline constexpr int kMaxConfidence = 3;
inline constexpr int kTriggerConfidence = 2;

constexpr Addr line_of(Addr addr) { return addr & ~(kLineSize - 1); }
constexpr Addr page_of(Addr addr) { return addr / kPageSize; }

// Low 8 bits of an instruction address.
struct IpTag {
  std::uint8_t value = 0;

  friend constexpr bool operator==(IpTag, IpTag) = default;
  friend constexpr auto operator<=>(IpTag, IpTag) = default;
};

constexpr IpTag tag_of(Addr ip) { return IpTag{static_cast<std::uint8_t>(ip & 0xff)}; }

struct PrefetcherEntry {
  IpTag tag;
  Addr last_address = 0;
  std::optional<Stride> stride;  // undefined until the second access
  int confidence = 0;
  int lru_rank = 0;  // 0 = most recently used

  friend bool operator==(const PrefetcherEntry&, const PrefetcherEntry&) = default;
};

struct PrefetchDecision {
  bool triggered = false;
  std::optional<Addr> prefetch_address;

  static PrefetchDecision none() { return {}; }
  static PrefetchDecision fire(Addr target) { return {true, target}; }

  friend bool operator==(const PrefetchDecision&, const PrefetchDecision&) = default;
};

// Page-granularity residency model gating prefetcher updates.
class TlbModel {
 public:
  bool always_resident() const { return always_resident_; }
  void set_always_resident(bool v) { always_resident_ = v; }

  void map_page_of(Addr addr) { pages_.insert(page_of(addr)); }
  void unmap_page_of(Addr addr) { pages_.erase(page_of(addr)); }
  bool resident(Addr addr) const {
    return always_resident_ || pages_.count(page_of(addr)) != 0;
  }
  const std::set<Addr>& pages() const { return pages_; }

 private:
  bool always_resident_ = true;
  std::set<Addr> pages_;
};

class InvalidPrefetcherState : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class PrefetcherState {
 public:
  explicit PrefetcherState(std::size_t capacity = kDefaultPrefetcherCapacity);

  // Builds a state from explicit entries (lru_rank decides the order).
  // Throws InvalidPrefetcherState when the entries violate the table
  // invariants.
  static PrefetcherState from_entries(std::size_t capacity,
                                      std::vector<PrefetcherEntry> entries);

  PrefetchDecision observe_load(Addr ip, Addr addr);

  // Entries ordered by lru_rank (MRU first).
  std::vector<PrefetcherEntry> snapshot() const;

  // Empty string when every invariant holds, otherwise a description.
  std::string check_invariants() const;

  std::size_t capacity() const { return capacity_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

  TlbModel& tlb() { return tlb_; }
  const TlbModel& tlb() const { return tlb_; }

 private:
  struct Slot {
    IpTag tag;
    Addr last_address;
    std::optional<Stride> stride;
    int confidence;
  };

  std::size_t capacity_;
  std::vector<Slot> entries_;  // index is the LRU rank
  TlbModel tlb_;
};

}  // namespace pfguard
