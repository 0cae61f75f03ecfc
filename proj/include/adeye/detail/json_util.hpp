#pragma once

// Strict JSON reading shared by every document format in the project.

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>

#include "json.hpp"

#include "adeye/geometry.hpp"

namespace adeye::detail {

using nlohmann::json;

// Parses standard JSON, rejecting duplicate keys. Syntax errors become
// ParseError with a 1-based line/column.
json parse_strict(std::string_view text);

std::string join_path(std::string_view parent, std::string_view key);
std::string index_path(std::string_view parent, std::size_t index);

double as_number(const json& j, const std::string& path);
double as_finite(const json& j, const std::string& path);
std::int64_t as_integer(const json& j, const std::string& path);
std::uint64_t as_unsigned(const json& j, const std::string& path);
bool as_bool(const json& j, const std::string& path);
const std::string& as_string(const json& j, const std::string& path);
const json& as_array(const json& j, const std::string& path);
Vec2 as_vec2(const json& j, const std::string& path);

json vec2_json(Vec2 v);

// Object reader that remembers which keys were consumed; finish() rejects
// anything left over.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path);

  const json* optional(std::string_view key);
  const json& required(std::string_view key);
  std::string path_of(std::string_view key) const { return join_path(path_, key); }
  const std::string& path() const { return path_; }

  double number(std::string_view key, double fallback);
  double number(std::string_view key);
  std::int64_t integer(std::string_view key, std::int64_t fallback);
  bool boolean(std::string_view key, bool fallback);
  std::string string(std::string_view key, std::string fallback);
  std::string string(std::string_view key);

  void finish() const;

 private:
  const json& j_;
  std::string path_;
  std::set<std::string, std::less<>> used_;
};

}  // namespace adeye::detail
