#include "pfguard/prefetcher.h"

#include <algorithm>
#include <sstream>

namespace pfguard {

PrefetcherState::PrefetcherState(std::size_t capacity) : capacity_(capacity) {
  if (capacity_ == 0) {
    throw InvalidPrefetcherState("prefetcher capacity must be positive");
  }
  entries_.reserve(capacity_);
}

PrefetcherState PrefetcherState::from_entries(std::size_t capacity,
                                              std::vector<PrefetcherEntry> entries) {
  PrefetcherState state(capacity);
  if (entries.size() > capacity) {
    throw InvalidPrefetcherState("more entries than prefetcher capacity");
  }
  std::sort(entries.begin(), entries.end(),
            [](const auto& a, const auto& b) { return a.lru_rank < b.lru_rank; });
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& e = entries[i];
    if (e.lru_rank != static_cast<int>(i)) {
      throw InvalidPrefetcherState("lru ranks are not a permutation of 0..n-1");
    }
    if (e.confidence < 0 || e.confidence > kMaxConfidence) {
      throw InvalidPrefetcherState("confidence outside 0..3");
    }
    state.entries_.push_back(Slot{e.tag, e.last_address, e.stride, e.confidence});
  }
  if (auto problem = state.check_invariants(); !problem.empty()) {
    throw InvalidPrefetcherState(problem);
  }
  return state;
}

PrefetchDecision PrefetcherState::observe_load(Addr ip, Addr addr) {
  if (!tlb_.resident(addr)) return PrefetchDecision::none();

  const IpTag tag = tag_of(ip);
  auto it = std::find_if(entries_.begin(), entries_.end(),
                         [tag](const Slot& s) { return s.tag == tag; });

  if (it == entries_.end()) {
    if (entries_.size() == capacity_) entries_.pop_back();
    entries_.insert(entries_.begin(), Slot{tag, addr, std::nullopt, 0});
    return PrefetchDecision::none();
  }

  Slot& slot = *it;
  const auto new_stride = static_cast<Stride>(addr - slot.last_address);
  const std::optional<Stride> old_stride = slot.stride;
  const int old_confidence = slot.confidence;

  PrefetchDecision decision;
  if (old_stride && *old_stride == new_stride) {
    slot.confidence = std::min(old_confidence + 1, kMaxConfidence);
    if (slot.confidence >= kTriggerConfidence) {
      decision = PrefetchDecision::fire(addr + static_cast<Addr>(*old_stride));
    }
  } else {
    if (old_stride && old_confidence >= kTriggerConfidence) {
      decision = PrefetchDecision::fire(addr + static_cast<Addr>(*old_stride));
    }
    slot.stride = new_stride;
    slot.confidence = 1;
  }
  slot.last_address = addr;

  std::rotate(entries_.begin(), it, it + 1);
  return decision;
}

std::vector<PrefetcherEntry> PrefetcherState::snapshot() const {
  std::vector<PrefetcherEntry> out;
  out.reserve(entries_.size());
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const Slot& s = entries_[i];
    out.push_back(PrefetcherEntry{s.tag, s.last_address, s.stride, s.confidence,
                                  static_cast<int>(i)});
  }
  return out;
}

std::string PrefetcherState::check_invariants() const {
  std::ostringstream problem;
  if (entries_.size() > capacity_) {
    problem << "entry count " << entries_.size() << " exceeds capacity " << capacity_;
    return problem.str();
  }
  std::set<IpTag> tags;
  for (const auto& s : entries_) {
    if (!tags.insert(s.tag).second) {
      problem << "duplicate tag 0x" << std::hex << int{s.tag.value};
      return problem.str();
    }
    if (s.confidence < 0 || s.confidence > kMaxConfidence) {
      problem << "confidence " << s.confidence << " outside 0..3";
      return problem.str();
    }
    if (!s.stride && s.confidence != 0) {
      problem << "entry without stride has confidence " << s.confidence;
      return problem.str();
    }
  }
  return {};
}

}  // namespace pfguard
