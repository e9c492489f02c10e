#include "pfguard/trace.h"

#include <charconv>
#include <sstream>

namespace pfguard {
namespace {

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

Pid parse_pid(std::string_view token) {
  Pid value = 0;
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc() || ptr != token.data() + token.size()) {
    throw std::invalid_argument("bad pid '" + std::string(token) + "'");
  }
  if (value < 0) throw std::invalid_argument("negative pid " + std::string(token));
  return value;
}

}  // namespace

TraceParseError::TraceParseError(std::size_t line, const std::string& what)
    : std::runtime_error("trace line " + std::to_string(line) + ": " + what), line_(line) {}

Timeline parse_trace(std::string_view text) {
  Timeline timeline;
  std::size_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);

    if (const auto hash = line.find('#'); hash != std::string_view::npos) {
      std::string_view comment = trim(line.substr(hash + 1));
      if (comment.starts_with("seed:")) {
        try {
          std::string_view v = trim(comment.substr(5));
          std::uint64_t seed = 0;
          auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), seed);
          if (ec != std::errc() || ptr != v.data() + v.size()) throw std::invalid_argument("");
          timeline.seed = seed;
        } catch (const std::invalid_argument&) {
          throw TraceParseError(line_no, "bad seed comment");
        }
      } else if (comment.starts_with("description:")) {
        timeline.description = std::string(trim(comment.substr(12)));
      }
      line = line.substr(0, hash);
    }

    const auto tok = split_ws(line);
    if (tok.empty()) continue;

    try {
      const std::string_view kind = tok[0];
      auto expect = [&](std::size_t n) {
        if (tok.size() != n) {
          throw std::invalid_argument("'" + std::string(kind) + "' expects " +
                                      std::to_string(n - 1) + " fields, got " +
                                      std::to_string(tok.size() - 1));
        }
      };
      if (kind == "L") {
        expect(4);
        timeline.events.emplace_back(Load{parse_pid(tok[1]), parse_hex(tok[2]), parse_hex(tok[3])});
      } else if (kind == "CS") {
        expect(3);
        timeline.events.emplace_back(ContextSwitch{parse_pid(tok[1]), parse_pid(tok[2])});
      } else if (kind == "F") {
        expect(3);
        timeline.events.emplace_back(Flush{parse_pid(tok[1]), parse_hex(tok[2])});
      } else if (kind == "FA") {
        expect(2);
        timeline.events.emplace_back(FlushAll{parse_pid(tok[1])});
      } else {
        throw std::invalid_argument("unknown event kind '" + std::string(kind) + "'");
      }
    } catch (const std::invalid_argument& e) {
      throw TraceParseError(line_no, e.what());
    }
  }
  return timeline;
}

std::string format_event(const Event& event) {
  std::ostringstream os;
  std::visit(
      [&os](const auto& e) {
        using T = std::decay_t<decltype(e)>;
        if constexpr (std::is_same_v<T, Load>) {
          os << "L " << e.pid << ' ' << hex(e.ip) << ' ' << hex(e.addr);
        } else if constexpr (std::is_same_v<T, ContextSwitch>) {
          os << "CS " << e.from_pid << ' ' << e.to_pid;
        } else if constexpr (std::is_same_v<T, Flush>) {
          os << "F " << e.pid << ' ' << hex(e.addr);
        } else {
          os << "FA " << e.pid;
        }
      },
      event);
  return os.str();
}

std::string format_trace(const Timeline& timeline) {
  std::ostringstream os;
  if (!timeline.description.empty()) os << "# description: " << timeline.description << '\n';
  os << "# seed: " << timeline.seed << '\n';
  for (const auto& e : timeline.events) os << format_event(e) << '\n';
  return os.str();
}

}  // namespace pfguard
