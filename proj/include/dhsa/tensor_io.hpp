#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "dhsa/tensor.hpp"

namespace dhsa {

/// "DHSATEN1" + u32 header length + JSON {"rows","cols","dtype":"f32"} +
/// little-endian f32 data, row-major. Values are rounded to f32 on write.
std::vector<std::uint8_t> encode_tensor(const Matrix& m);
Matrix decode_tensor(std::span<const std::uint8_t> bytes);

void write_tensor(const std::string& path, const Matrix& m);
Matrix read_tensor(const std::string& path);

/// Rounds every entry through f32, i.e. what a write/read cycle yields.
Matrix round_to_f32(const Matrix& m);

// Little-endian helpers shared by the binary formats.
void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v);
void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v);
void put_f32(std::vector<std::uint8_t>& out, float v);
std::uint32_t get_u32(std::span<const std::uint8_t> bytes, std::size_t offset);
std::uint64_t get_u64(std::span<const std::uint8_t> bytes, std::size_t offset);
float get_f32(std::span<const std::uint8_t> bytes, std::size_t offset);

std::vector<std::uint8_t> read_file_bytes(const std::string& path);
void write_file_bytes(const std::string& path, std::span<const std::uint8_t> bytes);
void write_text_file(const std::string& path, const std::string& text);

}  // namespace dhsa
