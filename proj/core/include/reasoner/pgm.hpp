#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "reasoner/tensor.hpp"

namespace reasoner {

/// Binary 8-bit PGM (P5) of a rank-2 tensor [rows, cols], scaled linearly
/// from the image's own [min, max] to [0, 255]. A constant image maps to 0.
std::vector<std::uint8_t> encode_pgm(const Tensor& image);
void write_pgm(const std::filesystem::path& path, const Tensor& image);

}  // namespace reasoner
