#include "pfguard/prefetcher.h"

#include <gtest/gtest.h>

#include <random>
#include <set>

#include "oracles.h"

namespace pfguard {
namespace {

TEST(TagOf, KeepsLowEightBits) {
  EXPECT_EQ(tag_of(0x1151).value, 0x51);
  EXPECT_EQ(tag_of(0x0000).value, 0x00);
  EXPECT_EQ(tag_of(0x7f12345651).value, 0x51);
}

TEST(ObserveLoad, ThirdLoadOfStrideStreamTriggers) {
  PrefetcherState s;
  EXPECT_FALSE(s.observe_load(0x1151, 0x1000).triggered);
  EXPECT_FALSE(s.observe_load(0x1151, 0x1100).triggered);
  EXPECT_EQ(s.observe_load(0x1151, 0x1200), PrefetchDecision::fire(0x1300));
  EXPECT_EQ(s.observe_load(0x1151, 0x1300), PrefetchDecision::fire(0x1400));
}

TEST(ObserveLoad, FirstLoadAllocatesWithoutStride) {
  PrefetcherState s;
  EXPECT_EQ(s.observe_load(0x400123, 0xdead0000), PrefetchDecision::none());
  const auto snap = s.snapshot();
  ASSERT_EQ(snap.size(), 1u);
  EXPECT_EQ(snap[0].tag.value, 0x23);
  EXPECT_EQ(snap[0].confidence, 0);
  EXPECT_FALSE(snap[0].stride.has_value());
  EXPECT_EQ(snap[0].last_address, 0xdead0000u);
  EXPECT_EQ(snap[0].lru_rank, 0);
}

TEST(ObserveLoad, MismatchTriggersThenResetsToOne) {
  auto s = PrefetcherState::from_entries(24, {{IpTag{0x51}, 0x1300, 0x100, 3, 0}});
  // Victim load from another process; only the tag matters.
  EXPECT_EQ(s.observe_load(0x555555555151, 0x9000), PrefetchDecision::fire(0x9100));
  const auto e = s.snapshot().at(0);
  EXPECT_EQ(e.stride, Stride{0x7d00});
  EXPECT_EQ(e.confidence, 1);
  EXPECT_EQ(e.last_address, 0x9000u);
}

TEST(ObserveLoad, MismatchBelowThresholdIsSilent) {
  auto s = PrefetcherState::from_entries(24, {{IpTag{0x51}, 0x1300, 0x100, 1, 0}});
  EXPECT_FALSE(s.observe_load(0x1151, 0x9000).triggered);
  EXPECT_EQ(s.snapshot()[0].confidence, 1);
}

TEST(ObserveLoad, ConfidenceSaturatesAtThree) {
  PrefetcherState s;
  for (Addr k = 0; k < 10; ++k) s.observe_load(0x10, 0x5000 + 0x40 * k);
  EXPECT_EQ(s.snapshot()[0].confidence, 3);
  EXPECT_TRUE(s.observe_load(0x10, 0x5000 + 0x40 * 10).triggered);
}

TEST(ObserveLoad, ZeroStrideTriggersOnSameAddress) {
  PrefetcherState s;
  s.observe_load(0x42, 0x8000);
  s.observe_load(0x42, 0x8000);
  EXPECT_EQ(s.observe_load(0x42, 0x8000), PrefetchDecision::fire(0x8000));
}

TEST(ObserveLoad, NegativeStride) {
  PrefetcherState s;
  s.observe_load(0x42, 0x8000);
  s.observe_load(0x42, 0x7f00);
  EXPECT_EQ(s.observe_load(0x42, 0x7e00), PrefetchDecision::fire(0x7d00));
}

TEST(ObserveLoad, TlbGateBlocksUnmappedPages) {
  PrefetcherState s;
  s.tlb().set_always_resident(false);
  EXPECT_EQ(s.observe_load(0x42, 0x8000), PrefetchDecision::none());
  EXPECT_TRUE(s.empty());
  s.tlb().map_page_of(0x8000);
  s.observe_load(0x42, 0x8000);
  s.observe_load(0x42, 0x8040);
  EXPECT_EQ(s.observe_load(0x42, 0x8080), PrefetchDecision::fire(0x80c0));
  // Leaving the page is gated; the entry is left untouched.
  const auto before = s.snapshot();
  EXPECT_FALSE(s.observe_load(0x42, 0x9000).triggered);
  EXPECT_EQ(s.snapshot(), before);
}

TEST(Snapshot, EmptyAndSingle) {
  PrefetcherState s;
  EXPECT_TRUE(s.snapshot().empty());
  s.observe_load(1, 2);
  ASSERT_EQ(s.snapshot().size(), 1u);
  EXPECT_EQ(s.snapshot()[0].lru_rank, 0);
}

TEST(Snapshot, ThirtyDistinctTagsKeepLastTwentyFour) {
  PrefetcherState s;
  for (Addr k = 0; k < 30; ++k) s.observe_load(0x1000 + k, 0x40000 + 0x40 * k);
  const auto snap = s.snapshot();
  ASSERT_EQ(snap.size(), 24u);
  // Hand-run LRU: tags 0x1d (newest) down to 0x06.
  for (int r = 0; r < 24; ++r) {
    EXPECT_EQ(snap[r].tag.value, 0x1d - r);
    EXPECT_EQ(snap[r].lru_rank, r);
  }
}

TEST(Snapshot, HitRefreshesRecency) {
  PrefetcherState s(3);
  s.observe_load(0xa, 0x100);
  s.observe_load(0xb, 0x200);
  s.observe_load(0xc, 0x300);
  s.observe_load(0xa, 0x140);  // refresh a
  s.observe_load(0xd, 0x400);  // evicts b
  std::vector<int> tags;
  for (const auto& e : s.snapshot()) tags.push_back(e.tag.value);
  EXPECT_EQ(tags, (std::vector<int>{0xd, 0xa, 0xc}));
}

TEST(FromEntries, RejectsInvalidTables) {
  EXPECT_THROW(PrefetcherState::from_entries(1, {{IpTag{1}, 0, 0, 0, 0}, {IpTag{2}, 0, 0, 0, 1}}),
               InvalidPrefetcherState);
  EXPECT_THROW(PrefetcherState::from_entries(4, {{IpTag{1}, 0, 0, 0, 0}, {IpTag{1}, 0, 0, 0, 1}}),
               InvalidPrefetcherState);
  EXPECT_THROW(PrefetcherState::from_entries(4, {{IpTag{1}, 0, 64, 4, 0}}), InvalidPrefetcherState);
  EXPECT_THROW(PrefetcherState::from_entries(4, {{IpTag{1}, 0, std::nullopt, 2, 0}}),
               InvalidPrefetcherState);
  EXPECT_THROW(PrefetcherState::from_entries(4, {{IpTag{1}, 0, 0, 0, 1}}), InvalidPrefetcherState);
  EXPECT_THROW(PrefetcherState(0), InvalidPrefetcherState);
}

TEST(FromEntries, RoundTripsSnapshot) {
  PrefetcherState s;
  std::mt19937_64 rng(7);
  for (int i = 0; i < 200; ++i) s.observe_load(rng() % 40, (rng() % 64) * 64);
  const auto again = PrefetcherState::from_entries(s.capacity(), s.snapshot());
  EXPECT_EQ(again.snapshot(), s.snapshot());
}

// Random load sequences over a small tag pool with mostly regular strides so
// that every transition is exercised.
struct Load {
  Addr ip;
  Addr addr;
};

std::vector<Load> random_sequence(std::mt19937_64& rng, std::size_t n, unsigned tags) {
  std::vector<Load> out;
  std::vector<Addr> cursor(tags, 0x100000);
  for (std::size_t i = 0; i < n; ++i) {
    const unsigned t = static_cast<unsigned>(rng() % tags);
    const Addr ip = 0x400000 + (rng() % 16) * 256 + t;
    switch (rng() % 4) {
      case 0: cursor[t] = rng(); break;
      case 1: cursor[t] += 0; break;
      default: cursor[t] += 64 * (1 + t % 3); break;
    }
    out.push_back({ip, cursor[t]});
  }
  return out;
}

TEST(PrefetcherProperties, MatchesReferenceModel) {
  std::mt19937_64 rng(0x5eed);
  for (int seq = 0; seq < 200; ++seq) {
    const std::size_t cap = 1 + rng() % 30;
    PrefetcherState s(cap);
    oracle::RefPrefetcher ref(cap);
    for (const auto& l : random_sequence(rng, 400, 1 + rng() % 40)) {
      const auto got = s.observe_load(l.ip, l.addr);
      const auto want = ref.observe(l.ip, l.addr);
      ASSERT_EQ(got.triggered, want.triggered);
      if (want.triggered) {
        ASSERT_EQ(got.prefetch_address, want.address);
      }
      ASSERT_EQ(s.snapshot(), ref.entries());
    }
  }
}

TEST(PrefetcherProperties, InvariantsHoldAfterEveryLoad) {
  std::mt19937_64 rng(11);
  PrefetcherState s;
  for (const auto& l : random_sequence(rng, 20000, 60)) {
    s.observe_load(l.ip, l.addr);
    ASSERT_EQ(s.check_invariants(), "");
    const auto snap = s.snapshot();
    ASSERT_LE(snap.size(), s.capacity());
    std::set<IpTag> tags;
    for (std::size_t r = 0; r < snap.size(); ++r) {
      ASSERT_EQ(snap[r].lru_rank, static_cast<int>(r));
      ASSERT_TRUE(tags.insert(snap[r].tag).second);
      ASSERT_GE(snap[r].confidence, 0);
      ASSERT_LE(snap[r].confidence, 3);
    }
  }
}

const PrefetcherEntry* find_tag(const std::vector<PrefetcherEntry>& snap, IpTag t) {
  for (const auto& e : snap) {
    if (e.tag == t) return &e;
  }
  return nullptr;
}

TEST(PrefetcherProperties, ConfidenceAndTriggerSoundness) {
  std::mt19937_64 rng(12);
  PrefetcherState s;
  for (const auto& l : random_sequence(rng, 20000, 30)) {
    const auto before = s.snapshot();
    const auto d = s.observe_load(l.ip, l.addr);
    const auto after = s.snapshot();
    const auto* old = find_tag(before, tag_of(l.ip));
    const auto* now = find_tag(after, tag_of(l.ip));
    ASSERT_NE(now, nullptr);
    ASSERT_EQ(now->lru_rank, 0);
    if (!old) {
      ASSERT_FALSE(d.triggered);
      ASSERT_EQ(now->confidence, 0);
      continue;
    }
    const auto new_stride = static_cast<Stride>(l.addr - old->last_address);
    if (old->stride == new_stride) {
      ASSERT_EQ(now->confidence, std::min(old->confidence + 1, 3));
    } else {
      ASSERT_EQ(now->confidence, 1);
    }
    if (d.triggered) {
      ASSERT_TRUE(old->stride.has_value());
      ASSERT_EQ(static_cast<Stride>(*d.prefetch_address - l.addr), *old->stride);
      ASSERT_GE(old->stride == new_stride ? now->confidence : old->confidence, 2);
    }
  }
}

TEST(PrefetcherProperties, Deterministic) {
  std::mt19937_64 rng(13);
  const auto seq = random_sequence(rng, 5000, 50);
  PrefetcherState a;
  PrefetcherState b;
  for (const auto& l : seq) ASSERT_EQ(a.observe_load(l.ip, l.addr), b.observe_load(l.ip, l.addr));
  EXPECT_EQ(a.snapshot(), b.snapshot());
}

TEST(PrefetcherProperties, ConstantStrideFirstTriggersOnThirdLoad) {
  std::mt19937_64 rng(14);
  for (int i = 0; i < 100; ++i) {
    const Addr ip = rng();
    const Addr addr = rng();
    Stride s = 0;
    while (s == 0) s = static_cast<Stride>(rng()) >> (rng() % 60);
    PrefetcherState p;
    EXPECT_FALSE(p.observe_load(ip, addr).triggered);
    EXPECT_FALSE(p.observe_load(ip, addr + static_cast<Addr>(s)).triggered);
    EXPECT_EQ(p.observe_load(ip, addr + 2 * static_cast<Addr>(s)),
              PrefetchDecision::fire(addr + 3 * static_cast<Addr>(s)));
  }
}

}  // namespace
}  // namespace pfguard
