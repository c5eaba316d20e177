#include "dhsa/tensor_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <stdexcept>

#include <json.hpp>

namespace dhsa {

namespace {
constexpr char kMagic[] = "DHSATEN1";
constexpr std::size_t kMagicSize = 8;

void need(std::span<const std::uint8_t> bytes, std::size_t offset, std::size_t count, const char* what) {
    if (offset + count > bytes.size()) throw std::runtime_error(std::string("truncated ") + what);
}
}  // namespace

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int b = 0; b < 4; ++b) out.push_back(static_cast<std::uint8_t>(v >> (8 * b)));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
    for (int b = 0; b < 8; ++b) out.push_back(static_cast<std::uint8_t>(v >> (8 * b)));
}

void put_f32(std::vector<std::uint8_t>& out, float v) { put_u32(out, std::bit_cast<std::uint32_t>(v)); }

std::uint32_t get_u32(std::span<const std::uint8_t> bytes, std::size_t offset) {
    need(bytes, offset, 4, "u32");
    std::uint32_t v = 0;
    for (int b = 0; b < 4; ++b) v |= static_cast<std::uint32_t>(bytes[offset + b]) << (8 * b);
    return v;
}

std::uint64_t get_u64(std::span<const std::uint8_t> bytes, std::size_t offset) {
    need(bytes, offset, 8, "u64");
    std::uint64_t v = 0;
    for (int b = 0; b < 8; ++b) v |= static_cast<std::uint64_t>(bytes[offset + b]) << (8 * b);
    return v;
}

float get_f32(std::span<const std::uint8_t> bytes, std::size_t offset) {
    return std::bit_cast<float>(get_u32(bytes, offset));
}

std::vector<std::uint8_t> encode_tensor(const Matrix& m) {
    std::vector<std::uint8_t> out(kMagic, kMagic + kMagicSize);
    const nlohmann::json header = {{"rows", m.rows()}, {"cols", m.cols()}, {"dtype", "f32"}};
    const std::string text = header.dump();
    put_u32(out, static_cast<std::uint32_t>(text.size()));
    out.insert(out.end(), text.begin(), text.end());
    for (double x : m.data()) put_f32(out, static_cast<float>(x));
    return out;
}

Matrix decode_tensor(std::span<const std::uint8_t> bytes) {
    need(bytes, 0, kMagicSize, "tensor magic");
    if (std::memcmp(bytes.data(), kMagic, kMagicSize) != 0) throw std::runtime_error("not a DHT1 tensor");
    const std::uint32_t header_size = get_u32(bytes, kMagicSize);
    const std::size_t header_at = kMagicSize + 4;
    need(bytes, header_at, header_size, "tensor header");
    const auto header = nlohmann::json::parse(bytes.begin() + header_at, bytes.begin() + header_at + header_size);
    if (header.at("dtype").get<std::string>() != "f32") throw std::runtime_error("unsupported tensor dtype");
    const auto rows = header.at("rows").get<std::size_t>();
    const auto cols = header.at("cols").get<std::size_t>();
    const std::size_t data_at = header_at + header_size;
    if (bytes.size() != data_at + rows * cols * 4) throw std::runtime_error("tensor payload size mismatch");
    std::vector<double> data(rows * cols);
    for (std::size_t n = 0; n < data.size(); ++n) data[n] = get_f32(bytes, data_at + 4 * n);
    return Matrix(rows, cols, std::move(data));
}

void write_tensor(const std::string& path, const Matrix& m) { write_file_bytes(path, encode_tensor(m)); }

Matrix read_tensor(const std::string& path) { return decode_tensor(read_file_bytes(path)); }

Matrix round_to_f32(const Matrix& m) {
    Matrix out = m;
    for (auto& x : out.data()) x = static_cast<double>(static_cast<float>(x));
    return out;
}

std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const std::string& path, std::span<const std::uint8_t> bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("write failed: " + path);
}

void write_text_file(const std::string& path, const std::string& text) {
    write_file_bytes(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

}  // namespace dhsa
