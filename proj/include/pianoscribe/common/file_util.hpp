#pragma once

#include <filesystem>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

namespace pianoscribe::io {

/// Writes through a temporary sibling file and renames it into place, so
/// readers never observe a partially written output.
void write_file_atomic(const std::filesystem::path& path,
                       const std::function<void(std::ostream&)>& writer);

std::vector<unsigned char> read_file_bytes(const std::filesystem::path& path);

} // namespace pianoscribe::io
