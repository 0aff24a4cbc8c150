#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace reasoner::io {

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
std::string read_text(const std::filesystem::path& path);

/// Writes to a sibling temporary file and renames it into place.
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_text_atomic(const std::filesystem::path& path, std::string_view text);

std::uint32_t crc32(std::span<const std::uint8_t> bytes);

/// Hex SHA-1 of "blob <size>\0" + content, the way git names objects.
std::string git_blob_hash(std::span<const std::uint8_t> bytes);
std::string git_blob_hash(std::string_view text);

void put_u32_le(std::vector<std::uint8_t>& out, std::uint32_t value);
std::uint32_t get_u32_le(std::span<const std::uint8_t> bytes, std::size_t offset);
void put_f32_le(std::vector<std::uint8_t>& out, float value);
float get_f32_le(std::span<const std::uint8_t> bytes, std::size_t offset);
void put_f64_le(std::vector<std::uint8_t>& out, double value);
double get_f64_le(std::span<const std::uint8_t> bytes, std::size_t offset);

}  // namespace reasoner::io
