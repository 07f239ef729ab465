#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "hcap/diff/tensor.hpp"

namespace hcap::features {

enum class Dtype : std::uint8_t { f32 = 0, f64 = 1 };

// "HCFT" feature file: magic, u16 version = 1, u8 dtype, u16 ndim,
// u32 dims, then the little-endian row-major payload.
constexpr std::uint16_t kVersion = 1;

// Header size in bytes for a file of `ndim` dimensions.
constexpr std::size_t header_bytes(std::size_t ndim) { return 4 + 2 + 1 + 2 + 4 * ndim; }

// Writes a [rows x cols] matrix (or 1-D vector). f32 narrows each value.
void write_features(const std::filesystem::path& path, const diff::Tensor& matrix, Dtype dtype = Dtype::f32);
std::string encode_features(const diff::Tensor& matrix, Dtype dtype = Dtype::f32);

// Reads a 1-D or 2-D file into a [rows x cols] tensor (1-D becomes 1 x n).
diff::Tensor read_features(const std::filesystem::path& path);
diff::Tensor decode_features(std::string_view bytes, const std::string& source = "<memory>");

}  // namespace hcap::features
