#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "protorep/mdp.hpp"

namespace protorep {

/// Shortest round-trip decimal rendering (std::to_chars); the single float
/// formatter used for every emitted artifact so outputs are byte-stable.
std::string format_double(double x);

/// Dense matrix as comma-separated rows, one row per line, trailing newline.
std::string matrix_to_csv(const Matrix& m);

/// Parses what matrix_to_csv wrote (also accepts blank cells as NaN so
/// heatmap grids can be read back).  Throws ConfigError on ragged rows.
Matrix matrix_from_csv(const std::string& text);

/// FNV-1a 64-bit checksum; manifests record one per emitted artifact.
std::uint64_t fnv1a64(std::string_view bytes);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace protorep
