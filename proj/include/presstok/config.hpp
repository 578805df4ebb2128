#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace presstok::cfg {

// Flat key=value run configuration. Every key must be registered with a
// typed default; unknown keys in a config file are rejected. The config
// hash is an FNV-1a digest of the canonical serialization (sorted keys,
// normalized formatting) and is embedded in every produced artifact.
class RunConfig {
 public:
  RunConfig();

  void load_file(const std::string& path);
  void set(const std::string& key, const std::string& value);

  int64_t get_int(const std::string& key) const;
  double get_double(const std::string& key) const;
  std::string get_string(const std::string& key) const;

  std::string canonical() const;
  uint64_t hash() const;
  std::string hash_hex() const;

  static const std::map<std::string, std::string>& defaults();

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace presstok::cfg
