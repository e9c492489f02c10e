#pragma once

// Secret-branch block swapping over a parsed listing.
//
// A protected region [SENSITIVE_BEGIN, SENSITIVE_END) has the shape
//
//   head:   ... cmp/test ; jcc ELSE
//   if:     ...          ; jmp END
//   ELSE:   ...
//   END:
//
// relocate() produces
//
//   head:   ... cmp/test ; j!cc NEW_ELSE
//   new-if: <old else>   ; jmp END
//   NEW_ELSE: <old if without its jmp>
//   END:
//
// Nothing changes length: the inserted jmp reuses the length of the old
// terminator, so the region keeps its span. Rip-relative displacements of
// moved instructions are recomputed so absolute targets stay fixed, and
// branch targets inside the region follow the instruction they pointed at.

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "pfguard/listing.h"

namespace pfguard {

class RegionShapeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class RelocationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UnsupportedCondition : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct BranchRegion {
  std::string begin_label;
  std::string end_label;
  Addr begin = 0;
  Addr end = 0;
  std::vector<AsmInstruction> head;  // ends with compare + cond_jump
  std::vector<AsmInstruction> if_block;    // ends with `jmp end_label`
  std::vector<AsmInstruction> else_block;  // runs up to end_label
  // Labels strictly inside the region, excluding begin/end.
  std::vector<Label> inner_labels;

  const AsmInstruction& cond_jump() const { return head.back(); }
  const AsmInstruction& if_terminator() const { return if_block.back(); }
  Addr else_start() const { return else_block.front().address; }
};

BranchRegion extract_region(const Program& program, std::string_view begin_label,
                            std::string_view end_label);

// je<->jne, jl<->jge, jle<->jg, jb<->jae, jbe<->ja, js<->jns, jo<->jno.
// Throws UnsupportedCondition for anything else, including jmp.
std::string negate_condition(std::string_view jcc);

struct RelocatedRegion {
  std::vector<AsmInstruction> instructions;  // covers [begin, end)
  std::vector<Label> inner_labels;
  std::vector<std::string> log;
};

RelocatedRegion relocate(const BranchRegion& region);

// Program with the region replaced by its relocated form.
Program apply_relocation(const Program& program, const BranchRegion& region,
                         const RelocatedRegion& relocated);

}  // namespace pfguard
