#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace eegstack::cli {

// Bad command line or config content; maps to exit code 1.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// `key = value` lines, `#` starts a comment. Every key must be known; values
// start from the documented defaults and are overridden in file order, then by
// --set arguments.
class RunConfig {
 public:
  RunConfig();

  static const std::map<std::string, std::string>& defaults();

  void merge_text(std::string_view text, const std::string& origin);
  void set(const std::string& key, const std::string& value, const std::string& origin = "--set");

  const std::string& str(const std::string& key) const;
  double real(const std::string& key) const;
  std::int64_t integer(const std::string& key) const;
  std::uint64_t u64(const std::string& key) const;
  bool flag(const std::string& key) const;
  std::vector<double> reals(const std::string& key) const;
  // Comma list and/or lo:hi:step ranges, e.g. "2,4,8" or "20:610:10".
  std::vector<std::size_t> sizes(const std::string& key) const;
  std::vector<std::string> strings(const std::string& key) const;

  // Effective configuration, one `key = value` per line in key order.
  std::string echo() const;
  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace eegstack::cli
