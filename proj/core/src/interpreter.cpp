#include "pfguard/interpreter.h"

#include <sstream>

#include "pfguard/hex.h"

namespace pfguard {
namespace {

std::uint64_t mask_of(unsigned bits) {
  return bits >= 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << bits) - 1;
}

bool msb(std::uint64_t v, unsigned bits) { return (v >> (bits - 1)) & 1; }

unsigned suffix_bits(std::string_view mnemonic, std::string_view base) {
  if (mnemonic.size() == base.size() + 1) {
    switch (mnemonic.back()) {
      case 'b': return 8;
      case 'w': return 16;
      case 'l': return 32;
      case 'q': return 64;
      default: break;
    }
  }
  return 0;
}

class Machine {
 public:
  Machine(const Program& program, MachineStateLite state)
      : program_(program), s_(std::move(state)) {}

  unsigned operand_bits(const AsmInstruction& insn, std::string_view base) const {
    if (unsigned b = suffix_bits(insn.mnemonic, base)) return b;
    for (const auto& op : insn.operands) {
      if (op.kind == OperandKind::kRegister) return lookup_register(op.reg)->bits;
    }
    throw InterpreterError("ambiguous operand size for " + insn.mnemonic + " at " +
                           hex(insn.address));
  }

  std::uint64_t read(const AsmInstruction& insn, const Operand& op, unsigned bits) const {
    switch (op.kind) {
      case OperandKind::kImmediate:
        return static_cast<std::uint64_t>(op.value) & mask_of(bits);
      case OperandKind::kRegister:
        return s_.read_register(op.reg) & mask_of(bits);
      case OperandKind::kRipRelative:
        return s_.read_memory(*insn.rip_target(), bits / 8);
      case OperandKind::kTarget:
        break;
    }
    throw InterpreterError("bad source operand at " + hex(insn.address));
  }

  void write(const AsmInstruction& insn, const Operand& op, std::uint64_t value, unsigned bits) {
    if (op.kind == OperandKind::kRegister) {
      s_.write_register(op.reg, value);
      return;
    }
    if (op.kind == OperandKind::kRipRelative) {
      const Addr target = *insn.rip_target();
      s_.write_memory(target, value, bits / 8);
      s_.observable_trace.push_back(
          Observation{Observation::Kind::kWrite, target, {}, value & mask_of(bits), bits / 8});
      return;
    }
    throw InterpreterError("bad destination operand at " + hex(insn.address));
  }

  ObservableTrace run(Addr entry, std::size_t fuel, ExecutionInfo* info) {
    Addr pc = entry;
    const Addr end = program_.end_address();
    std::size_t steps = 0;
    while (pc != end) {
      const auto index = program_.index_at(pc);
      if (!index) throw WildJumpError("jump to " + hex(pc) + " which is not an instruction");
      if (steps == fuel) {
        throw DivergenceError("fuel of " + std::to_string(fuel) + " instructions exhausted");
      }
      ++steps;
      const AsmInstruction& insn = program_.instructions[*index];
      if (info) info->executed.push_back(pc);
      const std::string& m = insn.mnemonic;
      Addr next = insn.next_address();

      if (m == "ret") {
        break;
      } else if (m == "nop") {
      } else if (m == "jmp") {
        next = insn.operands[0].target;
      } else if (is_conditional_jump(m)) {
        if (condition_holds(m, s_.flags)) next = insn.operands[0].target;
      } else if (m == "call") {
        const Operand& t = insn.operands[0];
        s_.observable_trace.push_back(Observation{Observation::Kind::kCall, t.target, t.symbol,
                                                  s_.read_register("rdi"), 0});
      } else if (m == "movzbl") {
        const std::uint64_t v = read(insn, insn.operands[0], 8);
        write(insn, insn.operands[1], v, 32);
      } else if (m.starts_with("mov")) {
        const unsigned bits = operand_bits(insn, "mov");
        write(insn, insn.operands[1], read(insn, insn.operands[0], bits), bits);
      } else if (m.starts_with("lea")) {
        write(insn, insn.operands[1], *insn.rip_target(), 64);
      } else if (m.starts_with("cmp")) {
        const unsigned bits = operand_bits(insn, "cmp");
        s_.flags = compare_flags(read(insn, insn.operands[1], bits),
                                 read(insn, insn.operands[0], bits), bits);
      } else if (m.starts_with("test")) {
        const unsigned bits = operand_bits(insn, "test");
        s_.flags = test_flags(read(insn, insn.operands[1], bits),
                              read(insn, insn.operands[0], bits), bits);
      } else {
        throw InterpreterError("unsupported instruction " + m + " at " + hex(pc));
      }
      pc = next;
    }
    if (info) {
      info->steps = steps;
      info->final_state = s_;
    }
    return s_.observable_trace;
  }

 private:
  const Program& program_;
  MachineStateLite s_;
};

}  // namespace

std::string to_string(const Observation& obs) {
  std::ostringstream os;
  if (obs.kind == Observation::Kind::kWrite) {
    os << "write " << hex(obs.address) << " <- " << hex(obs.value) << " (" << obs.size << "B)";
  } else {
    os << "call " << hex(obs.address);
    if (!obs.symbol.empty()) os << " <" << obs.symbol << ">";
    os << " rdi=" << hex(obs.value);
  }
  return os.str();
}

bool condition_holds(std::string_view jcc, const Flags& f) {
  if (jcc == "je") return f.zf;
  if (jcc == "jne") return !f.zf;
  if (jcc == "jl") return f.sf != f.of;
  if (jcc == "jge") return f.sf == f.of;
  if (jcc == "jle") return f.zf || f.sf != f.of;
  if (jcc == "jg") return !f.zf && f.sf == f.of;
  if (jcc == "jb") return f.cf;
  if (jcc == "jae") return !f.cf;
  if (jcc == "jbe") return f.cf || f.zf;
  if (jcc == "ja") return !f.cf && !f.zf;
  if (jcc == "js") return f.sf;
  if (jcc == "jns") return !f.sf;
  if (jcc == "jo") return f.of;
  if (jcc == "jno") return !f.of;
  throw std::invalid_argument("unsupported condition '" + std::string(jcc) + "'");
}

Flags compare_flags(std::uint64_t dst, std::uint64_t src, unsigned bits) {
  const std::uint64_t m = mask_of(bits);
  dst &= m;
  src &= m;
  const std::uint64_t r = (dst - src) & m;
  Flags f;
  f.zf = r == 0;
  f.sf = msb(r, bits);
  f.cf = dst < src;
  f.of = msb((dst ^ src) & (dst ^ r), bits);
  return f;
}

Flags test_flags(std::uint64_t dst, std::uint64_t src, unsigned bits) {
  const std::uint64_t r = dst & src & mask_of(bits);
  Flags f;
  f.zf = r == 0;
  f.sf = msb(r, bits);
  return f;
}

std::uint64_t MachineStateLite::read_register(std::string_view name) const {
  const auto info = lookup_register(name);
  if (!info) throw InterpreterError("unknown register " + std::string(name));
  auto it = registers.find(std::string(info->canonical));
  const std::uint64_t full = it == registers.end() ? 0 : it->second;
  return (full >> info->shift) & mask_of(info->bits);
}

void MachineStateLite::write_register(std::string_view name, std::uint64_t value) {
  const auto info = lookup_register(name);
  if (!info) throw InterpreterError("unknown register " + std::string(name));
  std::uint64_t& full = registers[std::string(info->canonical)];
  if (info->bits == 64) {
    full = value;
  } else if (info->bits == 32) {
    full = value & mask_of(32);
  } else {
    const std::uint64_t m = mask_of(info->bits) << info->shift;
    full = (full & ~m) | ((value << info->shift) & m);
  }
}

std::uint64_t MachineStateLite::read_memory(Addr addr, unsigned size) const {
  std::uint64_t v = 0;
  for (unsigned i = 0; i < size; ++i) {
    auto it = memory.find(addr + i);
    const std::uint64_t byte = it == memory.end() ? 0 : it->second;
    v |= byte << (8 * i);
  }
  return v;
}

void MachineStateLite::write_memory(Addr addr, std::uint64_t value, unsigned size) {
  for (unsigned i = 0; i < size; ++i) {
    memory[addr + i] = static_cast<std::uint8_t>(value >> (8 * i));
  }
}

ObservableTrace interpret(const Program& program, const MachineStateLite& initial,
                          std::string_view entry_label, std::size_t fuel, ExecutionInfo* info) {
  const auto entry = program.label_address(entry_label);
  if (!entry) throw InterpreterError("entry label <" + std::string(entry_label) + "> not found");
  Machine machine(program, initial);
  return machine.run(*entry, fuel, info);
}

}  // namespace pfguard
