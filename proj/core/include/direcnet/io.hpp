#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace direcnet {

// Throws IoError when the file cannot be opened or read.
std::string read_file(const std::filesystem::path& path);

/// Writes to a sibling temporary file and renames it over `path`, so readers
/// never observe a partially written file.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

// 64-bit FNV-1a.
std::uint64_t fnv1a(std::string_view bytes, std::uint64_t state = 0xcbf29ce484222325ULL);

// Shortest decimal text that parses back to the same value.
std::string format_exact(double value);
std::string format_exact(float value);

// Whole-string numeric parsing; throws FormatError with `what` in the message.
double parse_double(std::string_view text, std::string_view what);
std::int64_t parse_int(std::string_view text, std::string_view what);

std::string_view trim(std::string_view text);

}  // namespace direcnet
