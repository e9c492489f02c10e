#pragma once

// Line-oriented `key=value` configuration. `#` starts a comment, blank lines
// are ignored, keys may not repeat.

#include <cstddef>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>

namespace pfguard {

class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::size_t line, const std::string& what);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

using ConfigMap = std::map<std::string, std::string>;

ConfigMap parse_config(std::string_view text);

bool parse_bool(std::string_view value);

}  // namespace pfguard
