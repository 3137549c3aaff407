#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace caseenc {

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view content);

/// Shortest round-trip decimal representation of a double.
std::string format_double(double value);

/// 1-based line and column of a byte offset, for parse diagnostics.
std::string describe_offset(std::string_view text, std::size_t offset);

}  // namespace caseenc
