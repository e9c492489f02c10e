#include "pfguard/injection.h"

#include <set>
#include <sstream>
#include <stdexcept>

namespace pfguard {

std::span<const InjectedLoad> InjectionPlan::round(int which) const {
  if (which != 1 && which != 2) throw std::out_of_range("round must be 1 or 2");
  std::span<const InjectedLoad> all(loads);
  return which == 1 ? all.first(round_size) : all.subspan(round_size, round_size);
}

std::vector<IpTag> InjectionPlan::round_tags(int which) const {
  std::vector<IpTag> tags;
  for (const auto& l : round(which)) tags.push_back(tag_of(l.ip));
  return tags;
}

InjectionPlan make_plan(Addr code_base, Addr data_page, std::size_t capacity) {
  if (data_page % kPageSize != 0) {
    throw std::invalid_argument("injection data page " + std::to_string(data_page) +
                                " is not page aligned");
  }
  if (capacity == 0 || 2 * capacity > 256) {
    throw std::invalid_argument("injection needs 2 * capacity distinct 8-bit tags");
  }
  InjectionPlan plan;
  plan.base_address = data_page;
  plan.round_size = capacity;
  plan.loads.reserve(2 * capacity);
  for (std::size_t k = 0; k < 2 * capacity; ++k) {
    plan.loads.push_back(InjectedLoad{code_base + kInjectionIpSpacing * k,
                                      data_page + (kLineSize * k) % kPageSize});
  }
  return plan;
}

std::string check_plan(const InjectionPlan& plan) {
  std::ostringstream problem;
  if (plan.loads.size() != 2 * plan.round_size) {
    problem << "plan has " << plan.loads.size() << " loads, expected " << 2 * plan.round_size;
    return problem.str();
  }
  std::set<IpTag> all;
  for (std::size_t k = 0; k < plan.loads.size(); ++k) {
    const IpTag t = tag_of(plan.loads[k].ip);
    if (!all.insert(t).second) {
      problem << "load " << k << " repeats tag 0x" << std::hex << int{t.value};
      return problem.str();
    }
  }
  const Addr page = page_of(plan.base_address);
  for (std::size_t k = 0; k < plan.loads.size(); ++k) {
    if (page_of(plan.loads[k].addr) != page) {
      problem << "load " << k << " leaves the injection page";
      return problem.str();
    }
    if (k > 0 && plan.loads.size() * kLineSize <= kPageSize &&
        plan.loads[k].addr - plan.loads[k - 1].addr != kLineSize) {
      problem << "load " << k << " is not one line after its predecessor";
      return problem.str();
    }
  }
  return {};
}

void inject_round(PrefetcherState& state, const InjectionPlan& plan, int which,
                  const InjectionObserver& observer) {
  state.tlb().map_page_of(plan.base_address);
  for (const auto& load : plan.round(which)) {
    const PrefetchDecision d = state.observe_load(load.ip, load.addr);
    if (observer) observer(load, d);
  }
}

void inject(PrefetcherState& state, const InjectionPlan& plan,
            const InjectionObserver& observer) {
  inject_round(state, plan, 1, observer);
  inject_round(state, plan, 2, observer);
}

std::vector<PrefetcherEntry> expected_post_injection_snapshot(const InjectionPlan& plan) {
  const auto round2 = plan.round(2);
  std::vector<PrefetcherEntry> out;
  int rank = 0;
  for (auto it = round2.rbegin(); it != round2.rend(); ++it) {
    out.push_back(PrefetcherEntry{tag_of(it->ip), it->addr, std::nullopt, 0, rank++});
  }
  return out;
}

SingleRoundWitness single_round_counterexample() {
  constexpr Addr kCodeBase = 0xffffffff81004000;
  constexpr Addr kDataPage = 0xffff888000010000;
  constexpr std::size_t kCollide = 7;

  InjectionPlan plan = make_plan(kCodeBase, kDataPage);
  const InjectedLoad& hit = plan.loads[kCollide];
  const IpTag colliding_tag = tag_of(hit.ip);
  const Stride stride = static_cast<Stride>(kLineSize);

  // The trained entry is MRU: the round-1 allocations ahead of load kCollide
  // evict fillers from the LRU end, then load kCollide refreshes it and the
  // remaining allocations evict the rest of the fillers.
  std::set<IpTag> used;
  for (const auto& l : plan.loads) used.insert(tag_of(l.ip));
  const std::size_t cap = kDefaultPrefetcherCapacity;
  std::vector<PrefetcherEntry> entries;
  entries.push_back(PrefetcherEntry{colliding_tag, hit.addr - kLineSize, stride, 3, 0});
  int filler_tag = 0;
  for (std::size_t rank = 1; rank < cap; ++rank) {
    while (used.count(IpTag{static_cast<std::uint8_t>(filler_tag)})) ++filler_tag;
    const IpTag t{static_cast<std::uint8_t>(filler_tag++)};
    const Addr base = 0x10000000 + 0x1000 * rank;
    entries.push_back(PrefetcherEntry{t, base + 3 * 0x100, Stride{0x100}, 3,
                                      static_cast<int>(rank)});
  }

  SingleRoundWitness w{PrefetcherState::from_entries(cap, std::move(entries)), plan, {}, 0,
                       kCollide};
  // Attacker load with the colliding tag continuing the trained stride.
  w.probe = InjectedLoad{Addr{0x400000} + colliding_tag.value, hit.addr + kLineSize};
  w.expected_prefetch = hit.addr + 2 * kLineSize;
  return w;
}

ErasureCheck check_erasure(const PrefetcherState& before, const InjectionPlan& plan) {
  ErasureCheck check;
  PrefetcherState after = before;
  inject(after, plan);
  check.snapshot_matches = after.snapshot() == expected_post_injection_snapshot(plan);
  for (const auto& e : before.snapshot()) {
    if (!e.stride) continue;
    ++check.probes;
    PrefetcherState probe_state = after;
    const Addr ip = 0x400000 | e.tag.value;
    if (probe_state.observe_load(ip, e.last_address + static_cast<Addr>(*e.stride)).triggered) {
      ++check.probe_triggers;
    }
  }
  return check;
}

PrefetcherState random_adversarial_state(std::mt19937_64& rng, const InjectionPlan& plan) {
  const std::size_t cap = plan.round_size;
  const std::size_t count = rng() % (cap + 1);
  std::set<IpTag> used;
  std::vector<PrefetcherEntry> entries;
  while (entries.size() < count) {
    PrefetcherEntry e;
    const auto pick = rng() % 4;
    std::size_t k = rng() % plan.loads.size();
    if (pick == 0) {
      e.tag = IpTag{static_cast<std::uint8_t>(rng() & 0xff)};
    } else {
      // round-1 tags twice as often as round-2 tags
      if (pick < 3) k %= plan.round_size;
      e.tag = tag_of(plan.loads[k].ip);
    }
    if (!used.insert(e.tag).second) continue;

    switch (rng() % 5) {
      case 0:
        e.stride = std::nullopt;
        e.last_address = rng();
        e.confidence = 0;
        break;
      case 1: {
        // The injected load sharing this tag continues the stream.
        const Stride s = static_cast<Stride>(kLineSize) * (static_cast<Stride>(rng() % 9) - 4);
        e.stride = s;
        e.last_address = plan.loads[k].addr - static_cast<Addr>(s);
        e.confidence = static_cast<int>(rng() % 4);
        break;
      }
      case 2:
        e.stride = static_cast<Stride>(rng());
        e.last_address = rng();
        e.confidence = static_cast<int>(rng() % 4);
        break;
      default:
        e.stride = static_cast<Stride>(kLineSize) * static_cast<Stride>(1 + rng() % 16);
        e.last_address = 0x10000000 + (rng() % 0x100000) * kLineSize;
        e.confidence = kMaxConfidence;
        break;
    }
    e.lru_rank = static_cast<int>(entries.size());
    entries.push_back(e);
  }
  // Shuffle recency so that colliding entries land at every LRU position.
  for (std::size_t i = entries.size(); i > 1; --i) {
    std::swap(entries[i - 1].lru_rank, entries[rng() % i].lru_rank);
  }
  return PrefetcherState::from_entries(cap, std::move(entries));
}

std::vector<PrefetcherState> single_entry_grid(const InjectionPlan& plan) {
  std::vector<PrefetcherState> out;
  out.reserve(256 * 4 * 4);
  for (int t = 0; t < 256; ++t) {
    const IpTag tag{static_cast<std::uint8_t>(t)};
    Addr colliding_addr = plan.loads.front().addr;
    for (const auto& l : plan.loads) {
      if (tag_of(l.ip) == tag) colliding_addr = l.addr;
    }
    for (int variant = 0; variant < 4; ++variant) {
      for (int conf = 0; conf <= kMaxConfidence; ++conf) {
        PrefetcherEntry e;
        e.tag = tag;
        e.confidence = conf;
        if (variant < 3) {
          e.stride = static_cast<Stride>(kLineSize) * (variant - 1);
          e.last_address = 0x10000000 + kLineSize * static_cast<Addr>(t);
        } else {
          e.stride = static_cast<Stride>(kLineSize);
          e.last_address = colliding_addr - kLineSize;
        }
        out.push_back(PrefetcherState::from_entries(plan.round_size, {e}));
      }
    }
  }
  return out;
}

}  // namespace pfguard
