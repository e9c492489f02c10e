#pragma once

// Trace-driven simulation loop. One prefetcher and one cache are shared by
// every pid; addresses live in a single flat space. With injection enabled,
// every context switch first runs the complete two-round injection and only
// then hands over to the next process.

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "pfguard/injection.h"
#include "pfguard/prefetcher.h"
#include "pfguard/trace.h"

namespace pfguard {

inline constexpr std::uint64_t kDefaultSeed = 0xAF7E1;
inline constexpr Addr kDefaultInjectionCodeBase = 0xffffffff81a00000;
inline constexpr Addr kDefaultInjectionDataPage = 0xffff888000200000;

struct EngineConfig {
  std::size_t prefetcher_capacity = kDefaultPrefetcherCapacity;
  bool vli_enabled = false;
  double noise = 0.0;  // probability that a reported hit/miss is flipped
  std::uint64_t seed = kDefaultSeed;
  Addr injection_code_base = kDefaultInjectionCodeBase;
  Addr injection_data_page = kDefaultInjectionDataPage;
};

struct AccessRecord {
  std::size_t event_index = 0;
  Pid pid = 0;
  Addr ip = 0;
  Addr addr = 0;
  bool hit = false;
  friend bool operator==(const AccessRecord&, const AccessRecord&) = default;
};

struct PrefetchRecord {
  std::size_t event_index = 0;
  Addr prefetch_address = 0;
  bool during_injection = false;
  friend bool operator==(const PrefetchRecord&, const PrefetchRecord&) = default;
};

struct InjectionRecord {
  std::size_t event_index = 0;
  std::size_t loads_injected = 0;
  friend bool operator==(const InjectionRecord&, const InjectionRecord&) = default;
};

struct SimulationResult {
  std::vector<AccessRecord> access_log;
  std::vector<PrefetchRecord> prefetch_log;
  std::vector<InjectionRecord> injection_log;
  std::vector<PrefetcherEntry> final_snapshot;
  friend bool operator==(const SimulationResult&, const SimulationResult&) = default;
};

class SimulationError : public std::runtime_error {
 public:
  SimulationError(std::size_t event_index, const std::string& what);
  std::size_t event_index() const { return event_index_; }

 private:
  std::size_t event_index_;
};

// Throws SimulationError naming the offending event for malformed input.
void validate_timeline(const Timeline& timeline);

SimulationResult run(const Timeline& timeline, const EngineConfig& config = {});

}  // namespace pfguard
