#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace textcausal {

// Shortest decimal string that parses back to the identical double.
std::string format_double(double v);
double parse_double(std::string_view s);
long long parse_int(std::string_view s);

// Flat "key value" text record: one entry per line, insertion-ordered,
// first token the key, rest of the line the value. Blank lines and lines
// starting with '#' are ignored on read.
class KeyValueRecord {
 public:
  void set(std::string key, std::string value);
  void set(std::string key, double value) { set(std::move(key), format_double(value)); }
  void set_int(std::string key, long long value) { set(std::move(key), std::to_string(value)); }

  [[nodiscard]] bool has(std::string_view key) const;
  // Throws std::runtime_error naming the missing key.
  [[nodiscard]] const std::string& get(std::string_view key) const;
  [[nodiscard]] double get_double(std::string_view key) const { return parse_double(get(key)); }
  [[nodiscard]] long long get_int(std::string_view key) const { return parse_int(get(key)); }

  [[nodiscard]] const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }

  void write(std::ostream& os) const;
  static KeyValueRecord read(std::istream& is);

  std::string to_string() const;
  static KeyValueRecord parse(std::string_view text);

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

std::vector<std::string> split(std::string_view s, char sep);
std::string_view trim(std::string_view s);

std::string read_file(const std::filesystem::path& path);
// Writes via a temporary sibling and renames, so readers never see a
// half-written file. Throws std::runtime_error if the path is unwritable.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

}  // namespace textcausal
