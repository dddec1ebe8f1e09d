#pragma once

#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace inferem {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Flat `section.key = value` configuration over a fixed set of known keys.
/// Layers merge as defaults < file < command line; unknown keys are rejected.
class Config {
 public:
  struct Entry {
    std::string key;
    std::string value;
    std::string help;
  };

  Config();

  void set(const std::string& key, const std::string& value);
  /// Parses `section.key = value` lines; `#` starts a comment.
  void merge_file(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  const std::string& get(const std::string& key) const;
  long get_int(const std::string& key) const;
  double get_double(const std::string& key) const;
  bool get_bool(const std::string& key) const;

  const std::vector<Entry>& entries() const { return entries_; }
  /// Lines of `key (default): help` for --help output.
  std::string describe() const;

 private:
  Entry& find(const std::string& key);
  const Entry& find(const std::string& key) const;
  void validate(const Entry& e) const;

  std::vector<Entry> entries_;
};

}  // namespace inferem
