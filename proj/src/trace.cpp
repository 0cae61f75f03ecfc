#include "adeye/trace.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "adeye/error.hpp"
#include "adeye/rng.hpp"

namespace adeye {

using nlohmann::json;

void TraceLog::append(const json& record) {
  lines_.push_back(record.dump());
  digest_ = fnv1a64(lines_.back(), digest_);
  digest_ = fnv1a64("\n", digest_);
}

std::string TraceLog::text() const {
  std::string out;
  std::size_t n = 0;
  for (const auto& l : lines_) n += l.size() + 1;
  out.reserve(n);
  for (const auto& l : lines_) {
    out += l;
    out += '\n';
  }
  return out;
}

std::string TraceLog::digest_hex() const { return hex64(digest_); }

json TraceLog::record(std::size_t i) const { return json::parse(lines_.at(i)); }

json TraceLog::header() const {
  if (lines_.empty()) throw RunError("empty trace");
  return record(0);
}

TraceLog TraceLog::parse(std::string_view text) {
  TraceLog log;
  std::int64_t last_tick = -1;
  bool ended = false;
  std::size_t start = 0;
  std::size_t line_no = 0;
  const auto fail = [&](const std::string& what) -> void {
    throw RunError("trace line " + std::to_string(line_no) + ": " + what + " (last valid tick " +
                   std::to_string(last_tick) + ")");
  };
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) {
      ++line_no;
      fail("truncated record (missing newline)");
    }
    const std::string_view line = text.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (ended) fail("record after end");
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::parse_error&) {
      fail("malformed record");
    }
    if (!rec.is_object() || !rec.contains("type") || !rec["type"].is_string()) fail("record without type");
    const std::string type = rec["type"].get<std::string>();
    if (line_no == 1) {
      if (type != "header") fail("first record must be the header");
      if (rec.value("trace_format", 0) != kTraceFormat) fail("unsupported trace_format");
    } else if (type == "header") {
      fail("duplicate header");
    } else if (type == "state") {
      const auto tick = rec.value("tick", std::int64_t{-2});
      if (tick != last_tick + 1) fail("non-consecutive state tick");
      last_tick = tick;
    } else if (type == "end") {
      ended = true;
    } else if (type != "msg") {
      fail("unknown record type '" + type + "'");
    }
    log.lines_.emplace_back(line);
    log.digest_ = fnv1a64(line, log.digest_);
    log.digest_ = fnv1a64("\n", log.digest_);
  }
  if (log.lines_.empty()) throw RunError("empty trace");
  if (!ended) {
    ++line_no;
    fail("missing end record");
  }
  return log;
}

TraceLog TraceLog::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw RunError("cannot open trace '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

void TraceLog::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw RunError("cannot write trace '" + path.string() + "'");
  for (const auto& l : lines_) out << l << '\n';
}

std::string hex64(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

}  // namespace adeye
