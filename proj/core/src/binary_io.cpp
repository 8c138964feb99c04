#include "binary_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "effgnn/error.hpp"

namespace effgnn::detail {

void BinaryWriter::bytes(std::string_view raw) { buf_.append(raw); }

void BinaryWriter::u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }

void BinaryWriter::u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

void BinaryWriter::u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

void BinaryWriter::f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }

void BinaryWriter::f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

void BinaryWriter::str(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    buf_.append(s);
}

void BinaryWriter::f32s(std::span<const float> values) {
    buf_.reserve(buf_.size() + values.size() * 4);
    for (float v : values) f32(v);
}

void BinaryWriter::write_file(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    out.write(buf_.data(), static_cast<std::streamsize>(buf_.size()));
    if (!out) throw IoError("write failed: " + path.string());
}

BinaryReader::BinaryReader(std::string data, std::string what)
    : data_(std::move(data)), what_(std::move(what)) {}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return std::move(ss).str();
}

BinaryReader BinaryReader::from_file(const std::filesystem::path& path) {
    return BinaryReader(read_file(path), path.string());
}

const unsigned char* BinaryReader::take(std::size_t n) {
    if (data_.size() - pos_ < n) fail("unexpected end of file");
    const auto* p = reinterpret_cast<const unsigned char*>(data_.data() + pos_);
    pos_ += n;
    return p;
}

void BinaryReader::expect_magic(std::string_view magic) {
    if (data_.size() < magic.size() || std::memcmp(data_.data(), magic.data(), magic.size()) != 0)
        fail("bad magic, expected '" + std::string(magic) + "'");
    pos_ = magic.size();
}

std::uint8_t BinaryReader::u8() { return *take(1); }

std::uint32_t BinaryReader::u32() {
    const auto* p = take(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
    return v;
}

std::uint64_t BinaryReader::u64() {
    const auto* p = take(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    return v;
}

float BinaryReader::f32() { return std::bit_cast<float>(u32()); }

double BinaryReader::f64() { return std::bit_cast<double>(u64()); }

std::string BinaryReader::str() {
    const std::uint32_t n = u32();
    const auto* p = take(n);
    return std::string(reinterpret_cast<const char*>(p), n);
}

void BinaryReader::f32s(std::span<float> out) {
    if ((data_.size() - pos_) / 4 < out.size()) fail("unexpected end of file");
    for (auto& v : out) v = f32();
}

void BinaryReader::expect_end() {
    if (!at_end()) fail("trailing bytes after payload");
}

void BinaryReader::fail(const std::string& why) const {
    throw CorruptFileError(what_ + ": " + why + " (offset " + std::to_string(pos_) + ")");
}

}  // namespace effgnn::detail
