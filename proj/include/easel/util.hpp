#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace easel {

// Lowercase hex SHA-256 of the bytes of `data`.
std::string sha256_hex(std::string_view data);

std::string_view trim(std::string_view s);
std::string to_lower_ascii(std::string_view s);
bool starts_with_ci(std::string_view s, std::string_view prefix);

std::string read_file(const std::filesystem::path& path);

// Writes to a sibling temp file, fsyncs, then renames over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

// Splits on runs of '.', '!' or '?' followed by whitespace or end of text.
std::vector<std::string> split_sentences(std::string_view text);

// RFC 4180 style reader: quoted fields may contain the delimiter, quotes ("")
// and newlines. Returns rows including the header row.
std::vector<std::vector<std::string>> parse_csv(std::string_view text, char delimiter = ',');

std::string utc_timestamp();

} // namespace easel
