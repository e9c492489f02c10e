#include "pfguard/load_relocation.h"

#include <algorithm>
#include <set>

#include "pfguard/hex.h"

namespace pfguard {
namespace {

std::vector<std::uint64_t> candidate_values(const BranchRegion& region) {
  std::set<std::uint64_t> values;
  for (std::uint64_t v = 0; v <= 0x10; ++v) values.insert(v);
  for (std::uint64_t v : {0x7fULL, 0x80ULL, 0x81ULL, 0xfeULL, 0xffULL, 0x100ULL, 0x7fffULL,
                          0x8000ULL, 0xffffULL, 0x7fffffffULL, 0x80000000ULL, 0xffffffffULL,
                          0x7fffffffffffffffULL, 0x8000000000000000ULL, ~0ULL}) {
    values.insert(v);
  }
  for (const auto& insn : region.head) {
    for (const auto& op : insn.operands) {
      if (op.kind != OperandKind::kImmediate) continue;
      const auto v = static_cast<std::uint64_t>(op.value);
      values.insert(v);
      values.insert(v + 1);
      values.insert(v - 1);
    }
  }
  return {values.begin(), values.end()};
}

std::string describe(const ObservableTrace& t) {
  std::string s = "[";
  for (std::size_t i = 0; i < t.size(); ++i) s += (i ? ", " : "") + to_string(t[i]);
  return s + "]";
}

}  // namespace

RewriteResult rewrite_listing(const Program& program, std::string_view begin_label,
                              std::string_view end_label, bool swap) {
  RewriteResult result;
  result.region = extract_region(program, begin_label, end_label);
  const BranchRegion& r = result.region;
  result.log.push_back("extract: region " + hex(r.begin) + ".." + hex(r.end) + ", if-block " +
                       std::to_string(r.if_block.size()) + " insns, else-block " +
                       std::to_string(r.else_block.size()) + " insns");
  result.log.push_back("gadget: obfuscation(" + r.begin_label + ", " + r.end_label + ", " +
                       (swap ? "1" : "0") + ")");
  result.log.push_back("mprotect: write access to pages " + hex(page_of(r.begin) * kPageSize) +
                       ".." + hex(page_of(r.end - 1) * kPageSize) + " (simulated)");
  if (!swap) {
    result.program = program;
    result.log.push_back("layout unchanged");
    return result;
  }
  RelocatedRegion relocated = relocate(r);
  result.log.insert(result.log.end(), relocated.log.begin(), relocated.log.end());
  result.program = apply_relocation(program, r, relocated);
  result.swapped = true;
  return result;
}

EquivalenceReport verify_equivalence(const Program& original, const Program& rewritten,
                                     const BranchRegion& region) {
  EquivalenceReport report;
  std::vector<Addr> head_targets;
  for (const auto& insn : region.head) {
    if (auto t = insn.rip_target()) head_targets.push_back(*t);
  }
  std::sort(head_targets.begin(), head_targets.end());

  const Addr jcc_addr = region.cond_jump().address;
  const Addr fallthrough = region.cond_jump().next_address();

  for (std::uint64_t v : candidate_values(region)) {
    for (int family = 0; family < 3; ++family) {
      MachineStateLite init;
      const std::uint64_t reg_value = family == 2 ? 0 : v;
      const std::uint64_t mem_value = family == 1 ? 0 : v;
      for (std::string_view name : {"rax", "rbx", "rcx", "rdx", "rsi", "rdi", "rbp", "rsp", "r8",
                                    "r9", "r10", "r11", "r12", "r13", "r14", "r15"}) {
        init.write_register(name, reg_value);
      }
      for (Addr t : head_targets) init.write_memory(t, mem_value, 8);

      ++report.cases;
      ExecutionInfo info;
      ObservableTrace a;
      ObservableTrace b;
      try {
        a = interpret(original, init, region.begin_label, kDefaultFuel, &info);
        b = interpret(rewritten, init, region.begin_label);
      } catch (const InterpreterError& e) {
        report.equivalent = false;
        if (report.detail.empty()) report.detail = "value " + hex(v) + ": " + e.what();
        continue;
      }
      auto it = std::find(info.executed.begin(), info.executed.end(), jcc_addr);
      if (it != info.executed.end() && it + 1 != info.executed.end()) {
        (*(it + 1) == fallthrough ? report.fallthrough_cases : report.taken_cases)++;
      }
      if (a != b) {
        report.equivalent = false;
        if (report.detail.empty()) {
          report.detail = "value " + hex(v) + ": original " + describe(a) + " vs rewritten " +
                          describe(b);
        }
      }
    }
  }
  return report;
}

Timeline apply_vlr_to_timeline(const Timeline& timeline, const VictimBranch& branch,
                               std::mt19937_64& rng, std::vector<bool>* decisions) {
  Timeline out = timeline;
  bool in_invocation = false;
  bool swap = false;
  for (auto& event : out.events) {
    if (std::holds_alternative<ContextSwitch>(event)) {
      in_invocation = false;
      continue;
    }
    auto* load = std::get_if<Load>(&event);
    if (!load || (load->ip != branch.ip_if && load->ip != branch.ip_else)) continue;
    if (!in_invocation) {
      in_invocation = true;
      swap = gadget_decide(rng());
      if (decisions) decisions->push_back(swap);
    }
    if (swap) load->ip = load->ip == branch.ip_if ? branch.ip_else : branch.ip_if;
  }
  return out;
}

}  // namespace pfguard
