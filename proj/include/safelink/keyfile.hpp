#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <string>
#include <vector>

namespace safelink {

// Minimal sectioned key/value format shared by scenario and tool configs:
// [section] headers, key = value lines, # comments. Every entry remembers
// its line so validation errors can point at the file.

struct KeyValue {
  std::string key;
  std::string value;
  int line = 0;
};

struct KeySection {
  std::string name;
  int line = 0;
  std::vector<KeyValue> entries;

  const KeyValue* find(const std::string& key) const;
};

struct KeyFile {
  std::string source;  // filename used in error messages
  std::vector<KeySection> sections;

  [[noreturn]] void fail(int line, const std::string& what) const;
};

KeyFile parse_keyfile(std::istream& in, std::string source_name);
KeyFile load_keyfile(const std::filesystem::path& path);

double parse_real(const KeyFile& file, const KeyValue& kv);
long long parse_integer(const KeyFile& file, const KeyValue& kv);
std::uint64_t parse_unsigned(const KeyFile& file, const KeyValue& kv);
bool parse_boolean(const KeyFile& file, const KeyValue& kv);

}  // namespace safelink
