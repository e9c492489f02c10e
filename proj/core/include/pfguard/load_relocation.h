#pragma once

// Runtime side of load relocation: the randomizing gadget in front of a
// protected branch, the rewrite pipeline the gadget drives, an equivalence
// check for rewritten listings, and the effect of relocation on a simulated
// timeline (the victim's branch loads trade instruction addresses).

#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "pfguard/interpreter.h"
#include "pfguard/listing.h"
#include "pfguard/relocation.h"
#include "pfguard/trace.h"

namespace pfguard {

// true means "relocate this time". The gadget calls the rewriter on both
// outcomes with a different flag, so whether it ran is not observable.
constexpr bool gadget_decide(std::uint64_t cycle_value) { return cycle_value % 2 == 0; }

struct RewriteResult {
  Program program;
  BranchRegion region;  // extracted from the input listing
  bool swapped = false;
  std::vector<std::string> log;
};

RewriteResult rewrite_listing(const Program& program, std::string_view begin_label,
                              std::string_view end_label, bool swap);

struct EquivalenceReport {
  bool equivalent = true;
  std::size_t cases = 0;
  std::size_t taken_cases = 0;        // original conditional jump taken
  std::size_t fallthrough_cases = 0;  // original conditional jump not taken
  std::string detail;                 // first mismatch, if any

  // Equivalent and both branch directions were exercised.
  bool passed() const { return equivalent && taken_cases > 0 && fallthrough_cases > 0; }
};

// Runs both listings from `region.begin_label` over a fixed family of initial
// states seeded with boundary values at every register and at the head's
// rip-relative operands, and compares observable traces.
EquivalenceReport verify_equivalence(const Program& original, const Program& rewritten,
                                     const BranchRegion& region);

struct VictimBranch {
  Addr ip_if = 0;
  Addr ip_else = 0;
};

// For each invocation of the victim branch (a run of loads at ip_if/ip_else
// not interrupted by a context switch) draws gadget_decide(rng()) and, when
// it says relocate, exchanges ip_if and ip_else on that invocation's loads.
// Addresses and every other event are untouched. `decisions`, if given,
// receives one entry per invocation.
Timeline apply_vlr_to_timeline(const Timeline& timeline, const VictimBranch& branch,
                               std::mt19937_64& rng, std::vector<bool>* decisions = nullptr);

}  // namespace pfguard
