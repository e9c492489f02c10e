#include "oracles.h"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace oracle {

Decision RefPrefetcher::observe(std::uint64_t ip, std::uint64_t addr) {
  const unsigned tag = static_cast<unsigned>(ip % 256);
  for (std::size_t i = 0; i < table_.size(); ++i) {
    if (table_[i].tag != tag) continue;
    E e = table_[i];
    table_.erase(table_.begin() + static_cast<std::ptrdiff_t>(i));
    const std::int64_t s = static_cast<std::int64_t>(addr - e.last);
    Decision d;
    if (e.has_stride && s == e.stride) {
      e.conf = e.conf == 3 ? 3 : e.conf + 1;
      if (e.conf >= 2) d = {true, addr + static_cast<std::uint64_t>(e.stride)};
    } else {
      if (e.has_stride && e.conf >= 2) d = {true, addr + static_cast<std::uint64_t>(e.stride)};
      e.has_stride = true;
      e.stride = s;
      e.conf = 1;
    }
    e.last = addr;
    table_.push_front(e);
    return d;
  }
  if (table_.size() == capacity_) table_.pop_back();
  table_.push_front(E{tag, addr, false, 0, 0});
  return {};
}

std::vector<pfguard::PrefetcherEntry> RefPrefetcher::entries() const {
  std::vector<pfguard::PrefetcherEntry> out;
  int rank = 0;
  for (const auto& e : table_) {
    pfguard::PrefetcherEntry p;
    p.tag = pfguard::IpTag{static_cast<std::uint8_t>(e.tag)};
    p.last_address = e.last;
    if (e.has_stride) p.stride = e.stride;
    p.confidence = e.conf;
    p.lru_rank = rank++;
    out.push_back(p);
  }
  return out;
}

std::vector<pfguard::PrefetcherEntry> post_injection_snapshot(std::uint64_t code_base,
                                                              std::uint64_t data_page,
                                                              std::size_t capacity) {
  std::vector<pfguard::PrefetcherEntry> out;
  int rank = 0;
  for (std::size_t k = 2 * capacity; k-- > capacity;) {
    pfguard::PrefetcherEntry e;
    e.tag = pfguard::IpTag{static_cast<std::uint8_t>((code_base + 5 * k) & 0xff)};
    e.last_address = data_page + (64 * k) % 4096;
    e.confidence = 0;
    e.lru_rank = rank++;
    out.push_back(e);
  }
  return out;
}

bool jcc_after_cmp(const std::string& jcc, std::uint64_t dst, std::uint64_t src, unsigned bits) {
  const std::uint64_t mask = bits == 64 ? ~0ULL : (1ULL << bits) - 1;
  const std::uint64_t a = dst & mask;
  const std::uint64_t b = src & mask;
  auto sext = [bits](std::uint64_t v) -> __int128 {
    if (bits < 64 && (v >> (bits - 1)) & 1) v |= ~((1ULL << bits) - 1);
    return static_cast<std::int64_t>(v);
  };
  const __int128 sa = sext(a);
  const __int128 sb = sext(b);
  const __int128 diff = sa - sb;
  const __int128 lo = -(static_cast<__int128>(1) << (bits - 1));
  const __int128 hi = (static_cast<__int128>(1) << (bits - 1)) - 1;
  const bool overflow = diff < lo || diff > hi;
  const bool negative = ((a - b) & mask) >> (bits - 1);
  if (jcc == "je") return a == b;
  if (jcc == "jne") return a != b;
  if (jcc == "jl") return sa < sb;
  if (jcc == "jge") return sa >= sb;
  if (jcc == "jle") return sa <= sb;
  if (jcc == "jg") return sa > sb;
  if (jcc == "jb") return a < b;
  if (jcc == "jae") return a >= b;
  if (jcc == "jbe") return a <= b;
  if (jcc == "ja") return a > b;
  if (jcc == "js") return negative;
  if (jcc == "jns") return !negative;
  if (jcc == "jo") return overflow;
  if (jcc == "jno") return !overflow;
  throw std::invalid_argument("oracle: unknown jcc " + jcc);
}

std::string corpus_path(const std::string& name) {
  return std::string(PFGUARD_CORPUS_DIR) + "/" + name;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> variant_paths() {
  std::vector<std::string> out;
  for (const auto& e : std::filesystem::directory_iterator(corpus_path("variants"))) {
    if (e.path().extension() == ".txt") out.push_back(e.path().string());
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::string> rip_targets(const pfguard::Program& program) {
  std::vector<std::string> out;
  for (const auto& insn : program.instructions) {
    for (const auto& op : insn.operands) {
      if (op.kind != pfguard::OperandKind::kRipRelative) continue;
      std::ostringstream s;
      s << insn.mnemonic;
      for (const auto& other : insn.operands) {
        if (other.kind == pfguard::OperandKind::kRegister) s << " %" << other.reg;
        if (other.kind == pfguard::OperandKind::kImmediate) s << " $" << other.value;
      }
      const std::uint64_t target = insn.address + insn.length + static_cast<std::uint64_t>(op.value);
      s << " -> " << std::hex << target;
      out.push_back(s.str());
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

TraceComparison compare_traces(const pfguard::Program& original,
                               const pfguard::Program& rewritten, const std::string& entry) {
  using namespace pfguard;
  const Addr start = *original.label_address(entry);
  std::vector<Addr> reads;
  const AsmInstruction* jcc = nullptr;
  for (const auto& insn : original.instructions) {
    if (insn.address < start) continue;
    if (is_conditional_jump(insn.mnemonic)) {
      jcc = &insn;
      break;
    }
    for (const auto& op : insn.operands) {
      if (op.kind == OperandKind::kRipRelative) {
        reads.push_back(insn.address + insn.length + static_cast<Addr>(op.value));
      }
    }
  }
  if (!jcc) throw std::runtime_error("oracle: no conditional jump after " + entry);

  TraceComparison cmp;
  for (unsigned v = 0; v < 256; ++v) {
    for (std::uint64_t pattern : {std::uint64_t{v}, std::uint64_t{v} * std::uint64_t{0x0101010101010101},
                                  std::uint64_t{v} << 24, std::uint64_t{v} << 56}) {
      MachineStateLite init;
      for (Addr a : reads) init.write_memory(a, pattern, 8);
      ExecutionInfo info;
      const auto before = interpret(original, init, entry, kDefaultFuel, &info);
      const auto after = interpret(rewritten, init, entry);
      auto it = std::find(info.executed.begin(), info.executed.end(), jcc->address);
      if (it != info.executed.end() && it + 1 != info.executed.end()) {
        if (*(it + 1) == jcc->operands[0].target) ++cmp.taken;
        else ++cmp.fallthrough;
      }
      if (before != after && cmp.identical) {
        cmp.identical = false;
        std::ostringstream s;
        s << "pattern 0x" << std::hex << pattern << ": traces differ";
        cmp.mismatch = s.str();
      }
    }
  }
  return cmp;
}

}  // namespace oracle
