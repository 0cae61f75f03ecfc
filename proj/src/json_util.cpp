#include "adeye/detail/json_util.hpp"

#include <cmath>
#include <vector>

#include "adeye/error.hpp"

namespace adeye::detail {

namespace {

std::pair<int, int> line_column(std::string_view text, std::size_t byte) {
  int line = 1, column = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      column = 1;
    } else {
      ++column;
    }
  }
  return {line, column};
}

std::string type_name(const json& j) { return j.type_name(); }

}  // namespace

json parse_strict(std::string_view text) {
  // One key set per open object; arrays push an empty placeholder so the
  // stack stays aligned with nesting.
  std::vector<std::set<std::string>> keys;
  std::vector<std::string> names;  // dotted path of each open container
  std::vector<bool> arrays;
  std::string last_key;
  const auto child_name = [&]() -> std::string {
    if (names.empty()) return "";
    if (arrays.back()) return names.back();
    return names.back().empty() ? last_key : names.back() + "." + last_key;
  };
  auto callback = [&](int /*depth*/, json::parse_event_t event, json& parsed) {
    switch (event) {
      case json::parse_event_t::object_start:
      case json::parse_event_t::array_start:
        names.push_back(child_name());
        keys.emplace_back();
        arrays.push_back(event == json::parse_event_t::array_start);
        break;
      case json::parse_event_t::object_end:
      case json::parse_event_t::array_end:
        keys.pop_back();
        names.pop_back();
        arrays.pop_back();
        break;
      case json::parse_event_t::key: {
        last_key = parsed.get<std::string>();
        if (!keys.back().insert(last_key).second) {
          const std::string where = names.back().empty() ? "top level" : "'" + names.back() + "'";
          throw ValidationError(child_name(), "duplicate key in object " + where);
        }
        break;
      }
      case json::parse_event_t::value: break;
    }
    return true;
  };
  try {
    return json::parse(text.begin(), text.end(), callback);
  } catch (const json::parse_error& e) {
    const auto [line, column] = line_column(text, e.byte > 0 ? e.byte - 1 : 0);
    std::string what = e.what();
    if (const auto pos = what.find("syntax error"); pos != std::string::npos) what = what.substr(pos);
    throw ParseError(line, column, what);
  }
}

std::string join_path(std::string_view parent, std::string_view key) {
  if (parent.empty()) return std::string(key);
  return std::string(parent) + "." + std::string(key);
}

std::string index_path(std::string_view parent, std::size_t index) {
  return std::string(parent) + "[" + std::to_string(index) + "]";
}

double as_number(const json& j, const std::string& path) {
  if (!j.is_number()) throw ValidationError(path, "expected number, got " + type_name(j));
  return j.get<double>();
}

double as_finite(const json& j, const std::string& path) {
  const double v = as_number(j, path);
  if (!std::isfinite(v)) throw ValidationError(path, "must be finite");
  return v;
}

std::int64_t as_integer(const json& j, const std::string& path) {
  if (!j.is_number_integer()) throw ValidationError(path, "expected integer, got " + type_name(j));
  if (j.is_number_unsigned() && j.get<std::uint64_t>() > static_cast<std::uint64_t>(INT64_MAX)) {
    throw ValidationError(path, "integer out of range");
  }
  return j.get<std::int64_t>();
}

std::uint64_t as_unsigned(const json& j, const std::string& path) {
  if (!j.is_number_unsigned()) throw ValidationError(path, "expected unsigned 64-bit integer");
  return j.get<std::uint64_t>();
}

bool as_bool(const json& j, const std::string& path) {
  if (!j.is_boolean()) throw ValidationError(path, "expected boolean, got " + type_name(j));
  return j.get<bool>();
}

const std::string& as_string(const json& j, const std::string& path) {
  if (!j.is_string()) throw ValidationError(path, "expected string, got " + type_name(j));
  return j.get_ref<const std::string&>();
}

const json& as_array(const json& j, const std::string& path) {
  if (!j.is_array()) throw ValidationError(path, "expected array, got " + type_name(j));
  return j;
}

Vec2 as_vec2(const json& j, const std::string& path) {
  if (!j.is_array() || j.size() != 2) throw ValidationError(path, "expected [x, y]");
  return {as_finite(j[0], index_path(path, 0)), as_finite(j[1], index_path(path, 1))};
}

json vec2_json(Vec2 v) { return json::array({v.x, v.y}); }

ObjectReader::ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
  if (!j_.is_object()) throw ValidationError(path_, "expected object, got " + type_name(j_));
}

const json* ObjectReader::optional(std::string_view key) {
  used_.emplace(key);
  const auto it = j_.find(std::string(key));
  return it == j_.end() ? nullptr : &*it;
}

const json& ObjectReader::required(std::string_view key) {
  const json* j = optional(key);
  if (!j) throw ValidationError(path_of(key), "missing required key");
  return *j;
}

double ObjectReader::number(std::string_view key, double fallback) {
  const json* j = optional(key);
  return j ? as_finite(*j, path_of(key)) : fallback;
}

double ObjectReader::number(std::string_view key) { return as_finite(required(key), path_of(key)); }

std::int64_t ObjectReader::integer(std::string_view key, std::int64_t fallback) {
  const json* j = optional(key);
  return j ? as_integer(*j, path_of(key)) : fallback;
}

bool ObjectReader::boolean(std::string_view key, bool fallback) {
  const json* j = optional(key);
  return j ? as_bool(*j, path_of(key)) : fallback;
}

std::string ObjectReader::string(std::string_view key, std::string fallback) {
  const json* j = optional(key);
  return j ? as_string(*j, path_of(key)) : fallback;
}

std::string ObjectReader::string(std::string_view key) { return as_string(required(key), path_of(key)); }

void ObjectReader::finish() const {
  for (const auto& item : j_.items()) {
    if (!used_.count(item.key())) throw ValidationError(path_of(item.key()), "unknown key");
  }
}

}  // namespace adeye::detail
