#include "pfguard/relocation.h"

#include <algorithm>
#include <limits>
#include <map>
#include <optional>
#include <utility>

#include "pfguard/hex.h"

namespace pfguard {
namespace {

constexpr std::pair<std::string_view, std::string_view> kComplements[] = {
    {"je", "jne"}, {"jl", "jge"}, {"jle", "jg"}, {"jb", "jae"},
    {"jbe", "ja"}, {"js", "jns"}, {"jo", "jno"},
};

std::uint32_t byte_length(const std::vector<AsmInstruction>& insns) {
  std::uint32_t n = 0;
  for (const auto& i : insns) n += i.length;
  return n;
}

bool fits_signed(std::int64_t v, unsigned bits) {
  const std::int64_t lo = -(std::int64_t{1} << (bits - 1));
  const std::int64_t hi = (std::int64_t{1} << (bits - 1)) - 1;
  return v >= lo && v <= hi;
}

// Short jumps (2 bytes) carry a rel8, everything else a rel32.
unsigned branch_width(const AsmInstruction& insn) { return insn.length == 2 ? 8 : 32; }

void check_branch_reach(const AsmInstruction& insn) {
  const Operand* t = insn.target_operand();
  if (!t) return;
  const auto rel = static_cast<std::int64_t>(t->target - insn.next_address());
  const unsigned bits = branch_width(insn);
  if (!fits_signed(rel, bits)) {
    throw RelocationError(insn.mnemonic + " at " + hex(insn.address) + " cannot reach " +
                          hex(t->target) + " with a rel" + std::to_string(bits));
  }
}

}  // namespace

std::string negate_condition(std::string_view jcc) {
  for (const auto& [a, b] : kComplements) {
    if (jcc == a) return std::string(b);
    if (jcc == b) return std::string(a);
  }
  throw UnsupportedCondition("cannot negate '" + std::string(jcc) + "'");
}

BranchRegion extract_region(const Program& program, std::string_view begin_label,
                            std::string_view end_label) {
  const auto begin = program.label_address(begin_label);
  const auto end = program.label_address(end_label);
  if (!begin) throw RegionShapeError("label <" + std::string(begin_label) + "> not found");
  if (!end) throw RegionShapeError("label <" + std::string(end_label) + "> not found");
  if (*begin >= *end) throw RegionShapeError("region begin is not before region end");

  const auto first = program.index_at(*begin);
  if (!first) throw RegionShapeError("region begin is not an instruction");
  std::size_t last = *first;
  const auto& insns = program.instructions;
  while (last < insns.size() && insns[last].address < *end) ++last;
  if ((last < insns.size() && insns[last].address != *end) ||
      (last == insns.size() && program.end_address() != *end)) {
    throw RegionShapeError("region end is not on an instruction boundary");
  }

  BranchRegion region;
  region.begin_label = std::string(begin_label);
  region.end_label = std::string(end_label);
  region.begin = *begin;
  region.end = *end;

  std::optional<std::size_t> jcc;
  for (std::size_t i = *first; i < last; ++i) {
    if (!is_conditional_jump(insns[i].mnemonic)) continue;
    if (jcc) throw RegionShapeError("more than one conditional jump in region (nested branch)");
    jcc = i;
  }
  if (!jcc) throw RegionShapeError("no conditional jump in region");
  if (*jcc == *first || !is_compare(insns[*jcc - 1].mnemonic)) {
    throw RegionShapeError("conditional jump is not preceded by cmp/test");
  }

  const Addr else_start = insns[*jcc].target_operand()->target;
  if (else_start == *end) {
    throw RegionShapeError("empty else-block: conditional jump targets the region end");
  }
  const auto else_index = program.index_at(else_start);
  if (!else_index || else_start <= insns[*jcc].address || else_start >= *end) {
    throw RegionShapeError("conditional jump does not target an instruction inside the region");
  }
  if (*else_index == *jcc + 1) throw RegionShapeError("empty if-block");

  region.head.assign(insns.begin() + static_cast<std::ptrdiff_t>(*first),
                     insns.begin() + static_cast<std::ptrdiff_t>(*jcc + 1));
  region.if_block.assign(insns.begin() + static_cast<std::ptrdiff_t>(*jcc + 1),
                         insns.begin() + static_cast<std::ptrdiff_t>(*else_index));
  region.else_block.assign(insns.begin() + static_cast<std::ptrdiff_t>(*else_index),
                           insns.begin() + static_cast<std::ptrdiff_t>(last));

  const AsmInstruction& term = region.if_block.back();
  if (term.mnemonic != "jmp" || term.target_operand()->target != *end) {
    throw RegionShapeError("if-block does not end with jmp <" + region.end_label + ">");
  }

  for (std::size_t i = 0; i < insns.size(); ++i) {
    if (i >= *first && i < last) continue;
    const Operand* t = insns[i].target_operand();
    if (t && t->target > *begin && t->target < *end) {
      throw RegionShapeError("instruction at " + hex(insns[i].address) +
                             " jumps into the region from outside");
    }
  }
  for (const auto& l : program.labels) {
    if (l.address > *begin && l.address < *end) region.inner_labels.push_back(l);
  }
  return region;
}

RelocatedRegion relocate(const BranchRegion& region) {
  RelocatedRegion out;
  const Addr if_start = region.cond_jump().next_address();
  const Addr old_else = region.else_start();
  const AsmInstruction& term = region.if_terminator();
  std::vector<AsmInstruction> if_body(region.if_block.begin(), region.if_block.end() - 1);

  const Addr new_if_start = if_start;
  const Addr new_jmp_addr = new_if_start + byte_length(region.else_block);
  const Addr new_else_start = new_jmp_addr + term.length;

  std::map<Addr, Addr> moved;  // old address -> new address
  for (const auto& i : region.head) moved[i.address] = i.address;
  for (const auto& i : region.else_block) moved[i.address] = i.address - old_else + new_if_start;
  for (const auto& i : if_body) moved[i.address] = i.address - if_start + new_else_start;

  // Labels follow their instruction, except the else label which names the
  // new jump target.
  for (const auto& l : region.inner_labels) {
    Addr a = l.address == old_else ? new_else_start : moved.at(l.address);
    out.inner_labels.push_back(Label{l.name, a});
  }
  std::stable_sort(out.inner_labels.begin(), out.inner_labels.end(),
                   [](const Label& a, const Label& b) { return a.address < b.address; });
  auto symbol_for = [&](Addr target, const std::string& fallback, bool remapped) -> std::string {
    if (target == region.begin) return region.begin_label;
    if (target == region.end) return region.end_label;
    for (const auto& l : out.inner_labels) {
      if (l.address == target) return l.name;
    }
    return remapped ? std::string{} : fallback;
  };

  auto relink = [&](const AsmInstruction& src, Addr new_address) {
    AsmInstruction insn = src;
    insn.address = new_address;
    for (auto& op : insn.operands) {
      if (op.kind == OperandKind::kRipRelative) {
        const Addr target = src.next_address() + static_cast<Addr>(op.value);
        const auto disp = static_cast<std::int64_t>(target - insn.next_address());
        if (!fits_signed(disp, 32)) {
          throw RelocationError("displacement for " + insn.mnemonic + " at " +
                                hex(insn.address) + " overflows 32 bits");
        }
        if (disp != op.value) {
          out.log.push_back("offset: " + insn.mnemonic + " " + hex(src.address) + " -> " +
                            hex(insn.address) + ", disp " + signed_hex(op.value) + " -> " +
                            signed_hex(disp) + " (target " + hex(target) + ")");
        }
        op.value = disp;
      } else if (op.kind == OperandKind::kTarget) {
        const bool inside = op.target >= region.begin && op.target < region.end;
        if (inside) {
          auto it = moved.find(op.target);
          if (it == moved.end()) {
            throw RelocationError(insn.mnemonic + " at " + hex(src.address) +
                                  " targets the middle of an instruction");
          }
          op.target = it->second;
        }
        op.symbol = symbol_for(op.target, op.symbol, inside);
      }
    }
    check_branch_reach(insn);
    insn.raw_text = format_assembly(insn);
    return insn;
  };

  for (std::size_t k = 0; k + 1 < region.head.size(); ++k) {
    out.instructions.push_back(region.head[k]);
  }
  AsmInstruction jcc = region.cond_jump();
  const std::string old_mnemonic = jcc.mnemonic;
  jcc.mnemonic = negate_condition(jcc.mnemonic);
  jcc.operands[0] = Operand::make_target(new_else_start, symbol_for(new_else_start, "", true));
  check_branch_reach(jcc);
  jcc.raw_text = format_assembly(jcc);
  out.log.push_back("negate: " + old_mnemonic + " -> " + jcc.mnemonic + ", target " +
                    hex(old_else) + " -> " + hex(new_else_start));
  out.instructions.push_back(std::move(jcc));

  for (const auto& i : region.else_block) out.instructions.push_back(relink(i, moved.at(i.address)));

  AsmInstruction jmp;
  jmp.address = new_jmp_addr;
  jmp.length = term.length;
  jmp.mnemonic = "jmp";
  jmp.operands.push_back(Operand::make_target(region.end, region.end_label));
  check_branch_reach(jmp);
  jmp.raw_text = format_assembly(jmp);
  out.instructions.push_back(std::move(jmp));

  for (const auto& i : if_body) out.instructions.push_back(relink(i, moved.at(i.address)));

  const Addr span = region.end - region.begin;
  if (out.instructions.back().next_address() - region.begin != span) {
    throw RelocationError("swapped layout does not fit the original region");
  }
  out.log.push_back("swap: else-block " + hex(old_else) + " -> " + hex(new_if_start) +
                    ", if-block " + hex(if_start) + " -> " + hex(new_else_start));
  return out;
}

Program apply_relocation(const Program& program, const BranchRegion& region,
                         const RelocatedRegion& relocated) {
  Program out;
  for (const auto& i : program.instructions) {
    if (i.address == region.begin) {
      out.instructions.insert(out.instructions.end(), relocated.instructions.begin(),
                              relocated.instructions.end());
    }
    if (i.address >= region.begin && i.address < region.end) continue;
    out.instructions.push_back(i);
  }
  for (const auto& l : program.labels) {
    if (l.address > region.begin && l.address < region.end) continue;
    out.labels.push_back(l);
  }
  out.labels.insert(out.labels.end(), relocated.inner_labels.begin(),
                    relocated.inner_labels.end());
  std::stable_sort(out.labels.begin(), out.labels.end(),
                   [](const Label& a, const Label& b) { return a.address < b.address; });
  return out;
}

}  // namespace pfguard
