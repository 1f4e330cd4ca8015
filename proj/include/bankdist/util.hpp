#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace bankdist {

// FNV-1a 64-bit, used for content digests in provenance records and the
// mock LLM fixture index. Not cryptographic.
std::uint64_t fnv1a(std::string_view data);
std::string fnv1a_hex(std::string_view data);

std::string to_lower(std::string s);
std::string trim(std::string_view s);
// Collapses runs of whitespace (incl. newlines) into single spaces and trims.
std::string normalize_whitespace(std::string_view s);

std::vector<std::string> split(std::string_view s, char sep);

// Single-line CSV field parsing/writing with RFC-4180 quoting.
std::vector<std::string> parse_csv_line(const std::string& line);
std::string csv_escape(const std::string& field);

bool is_valid_utf8(std::string_view s);

// Token = maximal run of alphanumeric characters, lowercased.
std::vector<std::string> tokenize(std::string_view s);

}  // namespace bankdist
