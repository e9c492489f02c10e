#pragma once

// objdump-style x86-64 listing in AT&T syntax with explicit addresses:
//
//   0x1151: <SENSITIVE_BEGIN>:
//   0x1151:	movzbl 0x2eba(%rip),%eax	# 4012 <secret>
//   0x115a:	jne    1171 <.L1>
//   0x1184: <SENSITIVE_END>:
//
// Instruction lengths come from the distance to the next instruction. The
// last instruction takes its length from a `len=N` annotation inside its
// comment, or else from the first label placed after it.
//
// Only a small subset is accepted: mov{,b,w,l,q}, movzbl, lea{,q},
// cmp{,b,w,l,q}, test{,b,w,l,q}, the 14 conditional jumps, jmp, call, ret
// and nop. Memory operands must be rip-relative.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "pfguard/prefetcher.h"

namespace pfguard {

enum class OperandKind { kRegister, kImmediate, kRipRelative, kTarget };

struct Operand {
  OperandKind kind = OperandKind::kImmediate;
  std::string reg;         // kRegister, without '%'
  std::int64_t value = 0;  // kImmediate value or kRipRelative displacement
  Addr target = 0;         // kTarget absolute address
  std::string symbol;      // kTarget optional <symbol>

  static Operand make_register(std::string name);
  static Operand make_immediate(std::int64_t v);
  static Operand make_rip(std::int64_t displacement);
  static Operand make_target(Addr target, std::string symbol = {});

  friend bool operator==(const Operand&, const Operand&) = default;
};

struct AsmInstruction {
  Addr address = 0;
  std::uint32_t length = 0;
  std::string mnemonic;
  std::vector<Operand> operands;
  std::string raw_text;

  Addr next_address() const { return address + length; }
  // Absolute address of the rip-relative operand, if any.
  std::optional<Addr> rip_target() const;
  // Branch/call target operand, if any.
  const Operand* target_operand() const;
};

struct Label {
  std::string name;
  Addr address = 0;
  friend bool operator==(const Label&, const Label&) = default;
};

struct Program {
  std::vector<AsmInstruction> instructions;
  std::vector<Label> labels;  // listing order

  std::optional<Addr> label_address(std::string_view name) const;
  std::optional<std::string> label_at(Addr address) const;
  // Index of the instruction starting at `address`.
  std::optional<std::size_t> index_at(Addr address) const;
  Addr end_address() const;
};

class ListingError : public std::runtime_error {
 public:
  ListingError(std::size_t line, const std::string& what);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// General-purpose register alias: which 64-bit register it names, its width,
// and its bit offset (8 for ah/bh/ch/dh).
struct RegisterInfo {
  std::string_view canonical;
  unsigned bits = 64;
  unsigned shift = 0;
};
std::optional<RegisterInfo> lookup_register(std::string_view name);

bool is_supported_mnemonic(std::string_view mnemonic);
bool is_conditional_jump(std::string_view mnemonic);
bool is_compare(std::string_view mnemonic);
// true for jcc, jmp and call.
bool is_branch(std::string_view mnemonic);

Program parse_listing(std::string_view text);

std::string format_operand(const Operand& op);
// "mnemonic operands" without address or comment.
std::string format_assembly(const AsmInstruction& insn);
std::string format_listing(const Program& program);

}  // namespace pfguard
