#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace adeye {

inline constexpr int kTraceFormat = 1;

// Append-only NDJSON trace. Every record is dumped compactly with object
// keys in lexicographic order, so equal records give equal bytes.
class TraceLog {
 public:
  void append(const nlohmann::json& record);

  const std::vector<std::string>& lines() const { return lines_; }
  std::size_t size() const { return lines_.size(); }
  // Lines joined by '\n', with a trailing newline.
  std::string text() const;
  // FNV-1a 64 over text().
  std::uint64_t digest() const { return digest_; }
  std::string digest_hex() const;

  nlohmann::json record(std::size_t i) const;
  nlohmann::json header() const;

  // Checks framing: a header first, an end record last, consecutive state
  // ticks. Throws RunError naming the last valid tick otherwise.
  static TraceLog parse(std::string_view text);
  static TraceLog load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  bool operator==(const TraceLog& other) const { return lines_ == other.lines_; }

 private:
  std::vector<std::string> lines_;
  std::uint64_t digest_ = 0xCBF29CE484222325ULL;
};

std::string hex64(std::uint64_t value);

}  // namespace adeye
