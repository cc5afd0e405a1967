#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace concord {

// Writes to a sibling temporary file, flushes, and renames over `path`, so
// readers see either the old or the new content.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

std::string read_file(const std::filesystem::path& path);

}  // namespace concord
