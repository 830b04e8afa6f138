#include "safelink/keyfile.hpp"

#include <cctype>
#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <stdexcept>

namespace safelink {

namespace {

std::string trim(const std::string& s) {
  std::size_t begin = 0;
  std::size_t end = s.size();
  while (begin < end && std::isspace(static_cast<unsigned char>(s[begin])))
    ++begin;
  while (end > begin && std::isspace(static_cast<unsigned char>(s[end - 1])))
    --end;
  return s.substr(begin, end - begin);
}

}  // namespace

const KeyValue* KeySection::find(const std::string& key) const {
  for (const KeyValue& kv : entries) {
    if (kv.key == key) return &kv;
  }
  return nullptr;
}

void KeyFile::fail(int line, const std::string& what) const {
  throw std::runtime_error(source + ":" + std::to_string(line) + ": " + what);
}

KeyFile parse_keyfile(std::istream& in, std::string source_name) {
  KeyFile file;
  file.source = std::move(source_name);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = trim(raw);
    if (line.empty() || line[0] == '#') continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        file.fail(line_no, "section header is missing the closing bracket");
      const std::string name = trim(line.substr(1, line.size() - 2));
      if (name.empty()) file.fail(line_no, "section name is empty");
      file.sections.push_back({name, line_no, {}});
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      file.fail(line_no, "expected 'key = value' or a [section] header");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) file.fail(line_no, "key is empty");
    if (value.empty()) file.fail(line_no, "value for '" + key + "' is empty");
    if (file.sections.empty())
      file.fail(line_no, "entry appears before any [section] header");
    file.sections.back().entries.push_back({key, value, line_no});
  }
  return file;
}

KeyFile load_keyfile(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in)
    throw std::runtime_error("cannot open config file: " + path.string());
  return parse_keyfile(in, path.filename().string());
}

double parse_real(const KeyFile& file, const KeyValue& kv) {
  errno = 0;
  char* end = nullptr;
  const double value = std::strtod(kv.value.c_str(), &end);
  if (end != kv.value.c_str() + kv.value.size() || errno == ERANGE)
    file.fail(kv.line, "'" + kv.key + "' is not a number: " + kv.value);
  return value;
}

long long parse_integer(const KeyFile& file, const KeyValue& kv) {
  errno = 0;
  char* end = nullptr;
  const long long value = std::strtoll(kv.value.c_str(), &end, 10);
  if (end != kv.value.c_str() + kv.value.size() || errno == ERANGE)
    file.fail(kv.line, "'" + kv.key + "' is not an integer: " + kv.value);
  return value;
}

std::uint64_t parse_unsigned(const KeyFile& file, const KeyValue& kv) {
  errno = 0;
  char* end = nullptr;
  if (!kv.value.empty() && kv.value[0] == '-')
    file.fail(kv.line, "'" + kv.key + "' must be nonnegative: " + kv.value);
  const unsigned long long value = std::strtoull(kv.value.c_str(), &end, 10);
  if (end != kv.value.c_str() + kv.value.size() || errno == ERANGE)
    file.fail(kv.line, "'" + kv.key + "' is not an integer: " + kv.value);
  return value;
}

bool parse_boolean(const KeyFile& file, const KeyValue& kv) {
  if (kv.value == "true" || kv.value == "1") return true;
  if (kv.value == "false" || kv.value == "0") return false;
  file.fail(kv.line, "'" + kv.key + "' must be true or false: " + kv.value);
}

}  // namespace safelink
