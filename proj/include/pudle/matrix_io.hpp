#pragma once

#include "pudle/types.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace pudle {

std::string sha256_hex(const void* data, std::size_t len);
std::string sha256_hex(const std::string& s);
std::string sha256_file(const std::filesystem::path& path);

/// Two-file pair: <base>.bin holds raw little-endian f64 in row-major order,
/// <base>.meta.json records {rows, cols, dtype, layout, sha256}.
void save_matrix(const std::filesystem::path& base, const Matrix& m);
Matrix load_matrix(const std::filesystem::path& base);

/// Long-form CSV with header "r,c,value".
void save_matrix_csv(const std::filesystem::path& path, const Matrix& m);
Matrix load_matrix_csv(const std::filesystem::path& path);

void write_text_atomic(const std::filesystem::path& path,
                       const std::string& contents);

}  // namespace pudle
