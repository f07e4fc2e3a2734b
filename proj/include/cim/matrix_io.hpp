#pragma once

// Plain binary matrix files: 16-byte header (rows:u64, cols:u64, little-endian)
// followed by rows*cols little-endian float64 values, row-major.

#include <filesystem>

#include "cim/monarch.hpp"

namespace cim::io {

monarch::DenseMatrix read_matrix(const std::filesystem::path& path);
void write_matrix(const std::filesystem::path& path, const monarch::DenseMatrix& W);

/// Writes `content` to a sibling temp file and renames it over `path`.
void write_atomic(const std::filesystem::path& path, const std::string& content);

}  // namespace cim::io
