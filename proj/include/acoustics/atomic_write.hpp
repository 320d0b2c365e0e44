#pragma once

#include <filesystem>
#include <string>

namespace acoustics {

/// Writes content to a temp file next to `path`, then renames it into place,
/// so a failed run never leaves a truncated file behind.
void atomic_write_text(const std::filesystem::path& path, const std::string& content);

} // namespace acoustics
