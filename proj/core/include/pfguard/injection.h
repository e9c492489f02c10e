#pragma once

// Two-round load injection run at the start of every context switch.
//
// Round 1 issues `capacity` loads with distinct IP tags. Whatever the table
// held before, every entry afterwards carries one of those tags: each round-1
// load either refreshes a matching entry or allocates a new one, and
// `capacity` distinct tags fill the table. Round 2 issues `capacity` more loads
// whose tags are disjoint from round 1, so each one allocates and together
// they evict every entry left by round 1. A single round is not enough: a
// trained entry whose tag equals an injected tag and whose
// `last_address + stride` equals the injected data address keeps its
// confidence and survives.

#include <cstddef>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "pfguard/prefetcher.h"

namespace pfguard {

inline constexpr Addr kInjectionIpSpacing = 5;  // coprime with 256

struct InjectedLoad {
  Addr ip = 0;
  Addr addr = 0;
  friend bool operator==(const InjectedLoad&, const InjectedLoad&) = default;
};

struct InjectionPlan {
  Addr base_address = 0;  // data page
  std::size_t round_size = kDefaultPrefetcherCapacity;
  std::vector<InjectedLoad> loads;  // 2 * round_size, round 1 first

  std::span<const InjectedLoad> round(int which) const;  // 1 or 2
  std::vector<IpTag> round_tags(int which) const;
};

// ips are code_base + 5k, addrs are data_page + 64k (wrapping inside the page
// once 2 * capacity exceeds 64 lines). Throws std::invalid_argument if
// data_page is not page aligned or 2 * capacity > 256.
InjectionPlan make_plan(Addr code_base, Addr data_page,
                        std::size_t capacity = kDefaultPrefetcherCapacity);

// Empty when the plan satisfies its invariants.
std::string check_plan(const InjectionPlan& plan);

using InjectionObserver = std::function<void(const InjectedLoad&, const PrefetchDecision&)>;

// Marks the plan page resident, then replays both rounds through the
// prefetcher. The observer sees every injected load and its decision.
void inject(PrefetcherState& state, const InjectionPlan& plan,
            const InjectionObserver& observer = {});
void inject_round(PrefetcherState& state, const InjectionPlan& plan, int which,
                  const InjectionObserver& observer = {});

// Snapshot inject() produces from any starting state, built directly from the
// plan without running the prefetcher.
std::vector<PrefetcherEntry> expected_post_injection_snapshot(const InjectionPlan& plan);

struct SingleRoundWitness {
  PrefetcherState state;
  InjectionPlan plan;
  InjectedLoad probe;              // attacker load issued after the injection
  Addr expected_prefetch = 0;      // prefetch the probe triggers after round 1
  std::size_t colliding_load = 0;  // index of the round-1 load that matches
};

// Builds a full 24-entry table in which one trained entry survives round 1.
SingleRoundWitness single_round_counterexample();

struct ErasureCheck {
  bool snapshot_matches = false;
  std::size_t probes = 0;          // one per trained pre-injection entry
  std::size_t probe_triggers = 0;  // probes that still prefetched
  bool erased() const { return snapshot_matches && probe_triggers == 0; }
};

// Injects into a copy of `before`, compares the result with
// expected_post_injection_snapshot(plan), then replays, for every pre-injection
// entry with a stride, the next load of its trained stream against the
// post-injection table.
ErasureCheck check_erasure(const PrefetcherState& before, const InjectionPlan& plan);

// Full or partial table biased toward injection collisions: plan tags,
// last_address/stride pairs that the injected loads continue, saturated
// confidence.
PrefetcherState random_adversarial_state(std::mt19937_64& rng, const InjectionPlan& plan);

// Every single-entry table over 256 tags x strides {-64, 0, 64, colliding} x
// confidence 0..3. "Colliding" places last_address one line below the data
// address of the plan load sharing the tag (stride 64), so that load
// continues the stream; for tags outside the plan it uses the first load.
std::vector<PrefetcherState> single_entry_grid(const InjectionPlan& plan);

}  // namespace pfguard
