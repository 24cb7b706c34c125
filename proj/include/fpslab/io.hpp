#pragma once

#include <string>
#include <string_view>

namespace fpslab {

/// Write `bytes` to `path` through a temporary file and a rename, so readers
/// never see a partial file. Throws IoError.
void write_file_atomic(const std::string& path, std::string_view bytes);

std::string read_file(const std::string& path);

}  // namespace fpslab
