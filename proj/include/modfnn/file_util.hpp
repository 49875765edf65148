#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace modfnn {

// Writes `contents` to a sibling temporary file and renames it over `path`,
// so readers never observe a half-written file. Parent directories are
// created as needed.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

std::string read_file(const std::filesystem::path& path);

}  // namespace modfnn
