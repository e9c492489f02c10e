#include "pfguard/listing.h"

#include <algorithm>
#include <array>
#include <charconv>
#include <sstream>

#include "pfguard/hex.h"

namespace pfguard {
namespace {

constexpr std::array<std::string_view, 14> kConditionalJumps = {
    "je", "jne", "jl", "jge", "jle", "jg", "jb", "jae", "jbe", "ja", "js", "jns", "jo", "jno"};

constexpr std::array<std::string_view, 19> kDataMnemonics = {
    "mov",  "movb",  "movw",  "movl",  "movq",  "movzbl", "lea",
    "leaq", "cmp",   "cmpb",  "cmpw",  "cmpl",  "cmpq",   "test",
    "testb", "testw", "testl", "testq", "nop"};

struct RegisterRow {
  std::string_view q, d, w, b;
};

constexpr std::array<RegisterRow, 16> kRegisters = {{
    {"rax", "eax", "ax", "al"},     {"rbx", "ebx", "bx", "bl"},
    {"rcx", "ecx", "cx", "cl"},     {"rdx", "edx", "dx", "dl"},
    {"rsi", "esi", "si", "sil"},    {"rdi", "edi", "di", "dil"},
    {"rbp", "ebp", "bp", "bpl"},    {"rsp", "esp", "sp", "spl"},
    {"r8", "r8d", "r8w", "r8b"},    {"r9", "r9d", "r9w", "r9b"},
    {"r10", "r10d", "r10w", "r10b"}, {"r11", "r11d", "r11w", "r11b"},
    {"r12", "r12d", "r12w", "r12b"}, {"r13", "r13d", "r13w", "r13b"},
    {"r14", "r14d", "r14w", "r14b"}, {"r15", "r15d", "r15w", "r15b"},
}};

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

std::vector<std::string_view> split_operands(std::string_view text) {
  std::vector<std::string_view> out;
  int depth = 0;
  std::size_t start = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] == '(') ++depth;
    if (text[i] == ')') --depth;
    if (text[i] == ',' && depth == 0) {
      out.push_back(trim(text.substr(start, i - start)));
      start = i + 1;
    }
  }
  if (!trim(text).empty()) out.push_back(trim(text.substr(start)));
  return out;
}

Operand parse_data_operand(std::string_view text) {
  if (text.empty()) throw std::invalid_argument("empty operand");
  if (text.front() == '$') return Operand::make_immediate(parse_signed(text.substr(1)));
  if (text.front() == '%') {
    std::string_view name = text.substr(1);
    if (!lookup_register(name)) {
      throw std::invalid_argument("unknown register '" + std::string(text) + "'");
    }
    return Operand::make_register(std::string(name));
  }
  if (text.ends_with("(%rip)")) {
    std::string_view disp = text.substr(0, text.size() - 6);
    return Operand::make_rip(disp.empty() ? 0 : parse_signed(disp));
  }
  throw std::invalid_argument("unsupported operand '" + std::string(text) + "'");
}

Operand parse_target_operand(std::string_view text) {
  text = trim(text);
  const auto space = text.find_first_of(" \t");
  std::string_view addr = text.substr(0, space);
  std::string symbol;
  if (space != std::string_view::npos) {
    std::string_view rest = trim(text.substr(space));
    if (rest.size() < 2 || rest.front() != '<' || rest.back() != '>') {
      throw std::invalid_argument("malformed branch target '" + std::string(text) + "'");
    }
    symbol = std::string(rest.substr(1, rest.size() - 2));
  }
  return Operand::make_target(parse_hex(addr), std::move(symbol));
}

void check_shape(const AsmInstruction& insn) {
  const auto& m = insn.mnemonic;
  const auto& ops = insn.operands;
  auto require = [&](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument("'" + m + "': " + what);
  };
  if (m == "ret" || m == "nop") {
    require(ops.empty(), "takes no operands");
  } else if (is_branch(m)) {
    require(ops.size() == 1 && ops[0].kind == OperandKind::kTarget, "expects one target");
  } else {
    require(ops.size() == 2, "expects two operands");
    require(ops[1].kind != OperandKind::kImmediate, "destination cannot be an immediate");
    if (m == "lea" || m == "leaq") {
      require(ops[0].kind == OperandKind::kRipRelative && ops[1].kind == OperandKind::kRegister,
              "expects rip-relative source and register destination");
    }
    if (m == "movzbl") {
      require(ops[1].kind == OperandKind::kRegister && lookup_register(ops[1].reg)->bits == 32,
              "destination must be a 32-bit register");
    }
    require(!(ops[0].kind == OperandKind::kRipRelative && ops[1].kind == OperandKind::kRipRelative),
            "two memory operands");
  }
}

std::optional<std::uint32_t> parse_len_annotation(std::string_view comment) {
  const auto pos = comment.find("len=");
  if (pos == std::string_view::npos) return std::nullopt;
  std::string_view digits = comment.substr(pos + 4);
  std::uint32_t len = 0;
  auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), len);
  if (ec != std::errc() || ptr == digits.data() || len == 0) {
    throw std::invalid_argument("malformed len= annotation");
  }
  return len;
}

}  // namespace

Operand Operand::make_register(std::string name) {
  Operand op;
  op.kind = OperandKind::kRegister;
  op.reg = std::move(name);
  return op;
}

Operand Operand::make_immediate(std::int64_t v) {
  Operand op;
  op.kind = OperandKind::kImmediate;
  op.value = v;
  return op;
}

Operand Operand::make_rip(std::int64_t displacement) {
  Operand op;
  op.kind = OperandKind::kRipRelative;
  op.value = displacement;
  return op;
}

Operand Operand::make_target(Addr target, std::string symbol) {
  Operand op;
  op.kind = OperandKind::kTarget;
  op.target = target;
  op.symbol = std::move(symbol);
  return op;
}

std::optional<Addr> AsmInstruction::rip_target() const {
  for (const auto& op : operands) {
    if (op.kind == OperandKind::kRipRelative) return next_address() + static_cast<Addr>(op.value);
  }
  return std::nullopt;
}

const Operand* AsmInstruction::target_operand() const {
  for (const auto& op : operands) {
    if (op.kind == OperandKind::kTarget) return &op;
  }
  return nullptr;
}

std::optional<Addr> Program::label_address(std::string_view name) const {
  for (const auto& l : labels) {
    if (l.name == name) return l.address;
  }
  return std::nullopt;
}

std::optional<std::string> Program::label_at(Addr address) const {
  for (const auto& l : labels) {
    if (l.address == address) return l.name;
  }
  return std::nullopt;
}

std::optional<std::size_t> Program::index_at(Addr address) const {
  auto it = std::lower_bound(instructions.begin(), instructions.end(), address,
                             [](const AsmInstruction& i, Addr a) { return i.address < a; });
  if (it == instructions.end() || it->address != address) return std::nullopt;
  return static_cast<std::size_t>(it - instructions.begin());
}

Addr Program::end_address() const {
  return instructions.empty() ? 0 : instructions.back().next_address();
}

ListingError::ListingError(std::size_t line, const std::string& what)
    : std::runtime_error("listing line " + std::to_string(line) + ": " + what), line_(line) {}

std::optional<RegisterInfo> lookup_register(std::string_view name) {
  for (const auto& row : kRegisters) {
    if (name == row.q) return RegisterInfo{row.q, 64, 0};
    if (name == row.d) return RegisterInfo{row.q, 32, 0};
    if (name == row.w) return RegisterInfo{row.q, 16, 0};
    if (name == row.b) return RegisterInfo{row.q, 8, 0};
  }
  if (name == "ah") return RegisterInfo{"rax", 8, 8};
  if (name == "bh") return RegisterInfo{"rbx", 8, 8};
  if (name == "ch") return RegisterInfo{"rcx", 8, 8};
  if (name == "dh") return RegisterInfo{"rdx", 8, 8};
  return std::nullopt;
}

bool is_conditional_jump(std::string_view m) {
  return std::find(kConditionalJumps.begin(), kConditionalJumps.end(), m) !=
         kConditionalJumps.end();
}

bool is_compare(std::string_view m) { return m.starts_with("cmp") || m.starts_with("test"); }

bool is_branch(std::string_view m) {
  return is_conditional_jump(m) || m == "jmp" || m == "call";
}

bool is_supported_mnemonic(std::string_view m) {
  return is_branch(m) || m == "ret" ||
         std::find(kDataMnemonics.begin(), kDataMnemonics.end(), m) != kDataMnemonics.end();
}

Program parse_listing(std::string_view text) {
  Program program;
  std::vector<std::optional<std::uint32_t>> annotated;
  std::vector<std::size_t> insn_lines;
  std::vector<std::size_t> label_lines;
  std::optional<Addr> last_line_addr;
  std::size_t line_no = 0;

  while (!text.empty()) {
    ++line_no;
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    if (trim(line).empty()) continue;

    try {
      const auto colon = line.find(':');
      if (colon == std::string_view::npos) throw std::invalid_argument("missing 'ADDR:' prefix");
      const Addr addr = parse_hex(trim(line.substr(0, colon)));
      std::string_view rest = trim(line.substr(colon + 1));

      if (last_line_addr && addr < *last_line_addr) {
        throw std::invalid_argument("address " + hex(addr) + " goes backwards");
      }

      if (rest.starts_with('<')) {
        if (!rest.ends_with(">:")) throw std::invalid_argument("malformed label line");
        program.labels.push_back(Label{std::string(rest.substr(1, rest.size() - 3)), addr});
        label_lines.push_back(line_no);
        last_line_addr = addr;
        continue;
      }

      if (!program.instructions.empty() && addr <= program.instructions.back().address) {
        throw std::invalid_argument("instruction address " + hex(addr) + " is not increasing");
      }

      std::string_view comment;
      if (const auto hash = rest.find('#'); hash != std::string_view::npos) {
        comment = rest.substr(hash + 1);
        rest = trim(rest.substr(0, hash));
      }
      const auto space = rest.find_first_of(" \t");
      AsmInstruction insn;
      insn.address = addr;
      insn.mnemonic = std::string(rest.substr(0, space));
      insn.raw_text = std::string(trim(line));
      if (!is_supported_mnemonic(insn.mnemonic)) {
        throw std::invalid_argument("unsupported mnemonic '" + insn.mnemonic + "'");
      }
      const std::string_view operand_text =
          space == std::string_view::npos ? std::string_view{} : trim(rest.substr(space));
      if (is_branch(insn.mnemonic)) {
        insn.operands.push_back(parse_target_operand(operand_text));
      } else {
        for (auto op : split_operands(operand_text)) {
          insn.operands.push_back(parse_data_operand(op));
        }
      }
      check_shape(insn);
      annotated.push_back(parse_len_annotation(comment));
      insn_lines.push_back(line_no);
      program.instructions.push_back(std::move(insn));
      last_line_addr = addr;
    } catch (const std::invalid_argument& e) {
      throw ListingError(line_no, e.what());
    }
  }

  auto& insns = program.instructions;
  for (std::size_t i = 0; i < insns.size(); ++i) {
    std::optional<Addr> next;
    if (i + 1 < insns.size()) {
      next = insns[i + 1].address;
    } else if (annotated[i]) {
      next = insns[i].address + *annotated[i];
    } else {
      for (const auto& l : program.labels) {
        if (l.address > insns[i].address && (!next || l.address < *next)) next = l.address;
      }
    }
    if (!next) {
      throw ListingError(insn_lines[i],
                         "cannot infer length of last instruction (add len=N or an end label)");
    }
    const auto len = static_cast<std::uint32_t>(*next - insns[i].address);
    if (annotated[i] && *annotated[i] != len) {
      throw ListingError(insn_lines[i], "len= annotation disagrees with next address");
    }
    insns[i].length = len;
  }

  const Addr end = program.end_address();
  for (std::size_t i = 0; i < program.labels.size(); ++i) {
    const Label& l = program.labels[i];
    if (!program.index_at(l.address) && l.address != end) {
      throw ListingError(label_lines[i], "label <" + l.name + "> at " + hex(l.address) +
                                " is not on an instruction boundary");
    }
  }
  return program;
}

std::string format_operand(const Operand& op) {
  switch (op.kind) {
    case OperandKind::kRegister:
      return "%" + op.reg;
    case OperandKind::kImmediate:
      return "$" + signed_hex(op.value);
    case OperandKind::kRipRelative:
      return signed_hex(op.value) + "(%rip)";
    case OperandKind::kTarget: {
      std::string s = hex(op.target).substr(2);
      if (!op.symbol.empty()) s += " <" + op.symbol + ">";
      return s;
    }
  }
  return {};
}

std::string format_assembly(const AsmInstruction& insn) {
  std::string out = insn.mnemonic;
  if (insn.operands.empty()) return out;
  out.resize(std::max<std::size_t>(out.size(), 6), ' ');
  out += ' ';
  for (std::size_t i = 0; i < insn.operands.size(); ++i) {
    if (i) out += ',';
    out += format_operand(insn.operands[i]);
  }
  return out;
}

std::string format_listing(const Program& program) {
  std::ostringstream os;
  std::size_t next_label = 0;
  std::vector<Label> labels = program.labels;
  std::stable_sort(labels.begin(), labels.end(),
                   [](const Label& a, const Label& b) { return a.address < b.address; });
  auto emit_labels_through = [&](Addr addr) {
    while (next_label < labels.size() && labels[next_label].address <= addr) {
      os << hex(labels[next_label].address) << ": <" << labels[next_label].name << ">:\n";
      ++next_label;
    }
  };
  for (std::size_t i = 0; i < program.instructions.size(); ++i) {
    const auto& insn = program.instructions[i];
    emit_labels_through(insn.address);
    os << hex(insn.address) << ":\t" << format_assembly(insn);
    std::string comment;
    if (auto t = insn.rip_target()) comment = hex(*t).substr(2);
    const bool last = i + 1 == program.instructions.size();
    if (last) {
      const bool end_marked = std::any_of(labels.begin(), labels.end(), [&](const Label& l) {
        return l.address == insn.next_address();
      });
      if (!end_marked) comment += (comment.empty() ? "" : " ") + std::string("len=") +
                                  std::to_string(insn.length);
    }
    if (!comment.empty()) os << "\t# " << comment;
    os << '\n';
  }
  emit_labels_through(~Addr{0});
  return os.str();
}

}  // namespace pfguard
