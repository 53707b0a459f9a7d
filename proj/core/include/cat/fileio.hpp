#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace cat {

std::string read_file(const std::filesystem::path& path);

/// Writes to a sibling temporary file and renames it into place, so a
/// failure never leaves a partial file at `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

/// Regular files in `dir` with the given extension, sorted by filename.
std::vector<std::filesystem::path> list_files(const std::filesystem::path& dir,
                                              std::string_view extension);

}  // namespace cat
