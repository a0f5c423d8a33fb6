#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>

#include "gridfail/grid_model.hpp"

namespace gridfail {

inline constexpr const char* kEpisodeFormatVersion = "epis/1";

struct ParseError : std::runtime_error {
  ParseError(std::string msg, int line_no, std::string field_name)
      : std::runtime_error("line " + std::to_string(line_no) + ": " + msg +
                           (field_name.empty() ? "" : " (field '" + field_name + "')")),
        line(line_no),
        field(std::move(field_name)) {}
  int line;
  std::string field;
};

struct InvalidEpisodeError : std::runtime_error {
  explicit InvalidEpisodeError(const ValidationReport& report);
  ValidationReport report;
};

// Line-delimited JSON: header record, one record per observation, termination
// record last. Byte output is deterministic (fixed key order, shortest
// roundtrip decimals). Throws InvalidEpisodeError if validation fails; nothing
// is written in that case. Returns bytes written.
std::size_t write_episode(const Episode& e, const GridSchema& s, std::ostream& out);
std::size_t write_episode(const Episode& e, const GridSchema& s,
                          const std::filesystem::path& dest);

// Streaming reader; memory use is bounded by one record. Throws ParseError
// naming line number and field on malformed input.
Episode read_episode(std::istream& in);
Episode read_episode(const std::filesystem::path& source);

// Single-document JSON schema files.
std::size_t write_schema(const GridSchema& s, const std::filesystem::path& dest);
GridSchema read_schema(const std::filesystem::path& source);

}  // namespace gridfail
