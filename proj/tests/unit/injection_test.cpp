#include "pfguard/injection.h"

#include <gtest/gtest.h>

#include <map>
#include <random>
#include <set>

#include "oracles.h"

namespace pfguard {
namespace {

std::set<int> tag_set(const std::vector<IpTag>& tags) {
  std::set<int> out;
  for (auto t : tags) out.insert(t.value);
  return out;
}

TEST(MakePlan, DefaultExample) {
  const auto plan = make_plan(0x4000, 0x10000);
  ASSERT_EQ(plan.loads.size(), 48u);
  std::set<int> tags;
  for (std::size_t k = 0; k < 48; ++k) {
    EXPECT_EQ(plan.loads[k].ip, 0x4000 + 5 * k);
    EXPECT_EQ(plan.loads[k].addr, 0x10000 + 64 * k);
    tags.insert(tag_of(plan.loads[k].ip).value);
  }
  EXPECT_EQ(tags.size(), 48u);
  EXPECT_EQ(*tags.begin(), 0x00);
  EXPECT_EQ(*tags.rbegin(), 0xeb);
  EXPECT_EQ(plan.loads.front().addr, 0x10000u);
  EXPECT_EQ(plan.loads.back().addr, 0x10bc0u);
  EXPECT_EQ(check_plan(plan), "");
}

TEST(MakePlan, Rejects) {
  EXPECT_THROW(make_plan(0, 0x10010), std::invalid_argument);
  EXPECT_THROW(make_plan(0, 0x10000, 129), std::invalid_argument);
  EXPECT_THROW(make_plan(0, 0x10000, 0), std::invalid_argument);
}

TEST(MakePlan, ValidForRandomBasesAndCapacities) {
  std::mt19937_64 rng(21);
  for (int i = 0; i < 2000; ++i) {
    const Addr code = rng();
    const Addr page = rng() & ~Addr{0xfff};
    const std::size_t cap = i % 3 == 0 ? 24 : 1 + rng() % 128;
    const auto plan = make_plan(code, page, cap);
    ASSERT_EQ(check_plan(plan), "");
    const auto r1 = tag_set(plan.round_tags(1));
    const auto r2 = tag_set(plan.round_tags(2));
    ASSERT_EQ(r1.size(), cap);
    ASSERT_EQ(r2.size(), cap);
    for (int t : r1) ASSERT_EQ(r2.count(t), 0u);
    for (const auto& l : plan.loads) ASSERT_EQ(l.addr / 4096, page / 4096);
  }
}

TEST(CheckPlan, DetectsBrokenPlans) {
  auto plan = make_plan(0x4000, 0x10000);
  auto dup = plan;
  dup.loads[30].ip = dup.loads[2].ip;
  EXPECT_NE(check_plan(dup), "");
  auto off_page = plan;
  off_page.loads[47].addr += 0x1000;
  EXPECT_NE(check_plan(off_page), "");
  auto gap = plan;
  gap.loads[5].addr += 8;
  EXPECT_NE(check_plan(gap), "");
  auto short_plan = plan;
  short_plan.loads.pop_back();
  EXPECT_NE(check_plan(short_plan), "");
}

TEST(Inject, EmptyTableEndsWithRoundTwo) {
  const auto plan = make_plan(0x4000, 0x10000);
  PrefetcherState s;
  inject(s, plan);
  const auto snap = s.snapshot();
  ASSERT_EQ(snap.size(), 24u);
  const auto r2 = tag_set(plan.round_tags(2));
  for (const auto& e : snap) {
    EXPECT_EQ(r2.count(e.tag.value), 1u);
    EXPECT_EQ(e.confidence, 0);
  }
  EXPECT_EQ(snap, oracle::post_injection_snapshot(0x4000, 0x10000));
  EXPECT_EQ(expected_post_injection_snapshot(plan), oracle::post_injection_snapshot(0x4000, 0x10000));
}

TEST(Inject, ObserverSeesEveryLoad) {
  const auto plan = make_plan(0x4000, 0x10000);
  PrefetcherState s;
  std::vector<InjectedLoad> seen;
  inject(s, plan, [&](const InjectedLoad& l, const PrefetchDecision&) { seen.push_back(l); });
  EXPECT_EQ(seen, plan.loads);
}

TEST(Inject, WorksBehindTlbGate) {
  const auto plan = make_plan(0x4000, 0x10000);
  PrefetcherState s;
  s.tlb().set_always_resident(false);
  inject(s, plan);
  EXPECT_EQ(s.snapshot(), oracle::post_injection_snapshot(0x4000, 0x10000));
}

TEST(SingleRound, CounterexampleSurvivesOneRoundOnly) {
  const auto w = single_round_counterexample();
  const auto& plan = w.plan;
  const InjectedLoad hit = plan.loads[w.colliding_load];
  ASSERT_LT(w.colliding_load, plan.round_size);
  ASSERT_EQ(w.state.size(), 24u);

  // The trained entry satisfies load_address - last_address = stride for the
  // colliding injected load.
  const PrefetcherEntry* trained = nullptr;
  const auto before = w.state.snapshot();
  for (const auto& e : before) {
    if (e.tag == tag_of(hit.ip)) trained = &e;
  }
  ASSERT_NE(trained, nullptr);
  EXPECT_EQ(trained->stride, Stride{64});
  EXPECT_EQ(trained->confidence, 3);
  EXPECT_EQ(hit.addr - trained->last_address, 64u);

  PrefetcherState one = w.state;
  inject_round(one, plan, 1);
  bool survived = false;
  for (const auto& e : one.snapshot()) {
    if (e.tag == trained->tag) {
      survived = e.confidence == 3 && e.stride == Stride{64} && e.last_address == hit.addr;
    }
  }
  EXPECT_TRUE(survived);
  EXPECT_EQ(tag_of(w.probe.ip), trained->tag);
  EXPECT_EQ(w.probe.addr, hit.addr + 64);
  EXPECT_EQ(w.expected_prefetch, hit.addr + 128);
  EXPECT_EQ(one.observe_load(w.probe.ip, w.probe.addr), PrefetchDecision::fire(hit.addr + 128));

  PrefetcherState two = w.state;
  inject(two, plan);
  EXPECT_FALSE(two.observe_load(w.probe.ip, w.probe.addr).triggered);
}

TEST(SingleRound, EmptyStateIsTriviallyErased) {
  const auto plan = make_plan(0x4000, 0x10000);
  PrefetcherState s;
  inject_round(s, plan, 1);
  for (const auto& e : s.snapshot()) {
    EXPECT_FALSE(e.stride.has_value());
    EXPECT_EQ(e.confidence, 0);
  }
}

TEST(Erasure, RandomAdversarialStates) {
  const Addr code = 0xffffffff81a00000;
  const Addr page = 0xffff888000200000;
  const auto plan = make_plan(code, page);
  const auto want = oracle::post_injection_snapshot(code, page);
  const auto r1 = tag_set(plan.round_tags(1));
  std::mt19937_64 rng(0xe2a5e);
  std::size_t probes = 0;
  for (int i = 0; i < 10000; ++i) {
    const auto s = random_adversarial_state(rng, plan);
    ASSERT_EQ(s.check_invariants(), "");
    PrefetcherState after1 = s;
    inject_round(after1, plan, 1);
    for (const auto& e : after1.snapshot()) ASSERT_EQ(r1.count(e.tag.value), 1u);
    PrefetcherState after = s;
    inject(after, plan);
    ASSERT_EQ(after.snapshot(), want);
    const auto check = check_erasure(s, plan);
    ASSERT_TRUE(check.erased());
    probes += check.probes;
  }
  EXPECT_GT(probes, 10000u);
}

TEST(Erasure, SingleEntryGrid) {
  const auto plan = make_plan(0x4000, 0x10000);
  const auto grid = single_entry_grid(plan);
  ASSERT_EQ(grid.size(), 256u * 4 * 4);
  std::set<std::tuple<int, Stride, int>> seen;
  const auto want = oracle::post_injection_snapshot(0x4000, 0x10000);
  for (const auto& s : grid) {
    const auto snap = s.snapshot();
    ASSERT_EQ(snap.size(), 1u);
    seen.insert({snap[0].tag.value, snap[0].stride.value_or(-1), snap[0].confidence});
    PrefetcherState after = s;
    inject(after, plan);
    ASSERT_EQ(after.snapshot(), want);
    // Attacker continues the trained stream with any IP carrying the tag.
    const Addr ip = 0x7f0000000000 | snap[0].tag.value;
    const Addr next = snap[0].last_address + static_cast<Addr>(snap[0].stride.value_or(0));
    ASSERT_FALSE(after.observe_load(ip, next).triggered);
  }
  EXPECT_EQ(seen.size(), 256u * 3 * 4);  // colliding shares stride 64
}

TEST(Erasure, OtherCapacities) {
  std::mt19937_64 rng(8);
  for (std::size_t cap : {1u, 2u, 8u, 24u, 33u, 64u, 128u}) {
    const auto plan = make_plan(0x4000, 0x10000, cap);
    const auto want = oracle::post_injection_snapshot(0x4000, 0x10000, cap);
    for (int i = 0; i < 200; ++i) {
      PrefetcherState s = random_adversarial_state(rng, plan);
      inject(s, plan);
      ASSERT_EQ(s.snapshot(), want) << "capacity " << cap;
    }
  }
}

// After injection an attacker needs a fresh stride. The first further load
// never fires; a second fires only when it continues the stride implied by the
// injected address of a round-2 tag; a constant stream fires on its third.
TEST(PostState, NoPreInjectionTrainingSurvives) {
  const auto plan = make_plan(0x4000, 0x10000);
  const auto r2 = tag_set(plan.round_tags(2));
  std::map<int, Addr> injected_addr;
  for (const auto& l : plan.round(2)) injected_addr[tag_of(l.ip).value] = l.addr;

  std::mt19937_64 rng(31);
  for (int i = 0; i < 3000; ++i) {
    PrefetcherState a = random_adversarial_state(rng, plan);
    PrefetcherState b = random_adversarial_state(rng, plan);
    inject(a, plan);
    inject(b, plan);
    const int tag = static_cast<int>(rng() % 256);
    const Addr ip = 0x500000 + tag;
    const bool continue_injected = r2.count(tag) && rng() % 2;
    const Addr a1 = continue_injected ? injected_addr[tag] + 64 : rng();
    const Stride s = continue_injected ? 64 : static_cast<Stride>(64 * (1 + rng() % 8));
    const Addr a2 = a1 + static_cast<Addr>(s);

    const auto d1 = a.observe_load(ip, a1);
    ASSERT_EQ(d1, b.observe_load(ip, a1));
    ASSERT_FALSE(d1.triggered);
    const auto d2 = a.observe_load(ip, a2);
    ASSERT_EQ(d2, b.observe_load(ip, a2));
    const bool expect2 = r2.count(tag) && static_cast<Stride>(a1 - injected_addr[tag]) == s;
    ASSERT_EQ(d2.triggered, expect2) << "tag " << tag;
    const auto d3 = a.observe_load(ip, a2 + static_cast<Addr>(s));
    ASSERT_TRUE(d3.triggered);
  }
}

}  // namespace
}  // namespace pfguard
