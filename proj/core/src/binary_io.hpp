#pragma once

// Little-endian binary encoding shared by the embedding, graph and model files.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace effgnn::detail {

/// Whole file as bytes; throws IoError when unreadable.
std::string read_file(const std::filesystem::path& path);

class BinaryWriter {
public:
    void bytes(std::string_view raw);
    void u8(std::uint8_t v);
    void u32(std::uint32_t v);
    void u64(std::uint64_t v);
    void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
    void f32(float v);
    void f64(double v);
    void str(std::string_view s);
    void f32s(std::span<const float> values);

    const std::string& buffer() const noexcept { return buf_; }
    void write_file(const std::filesystem::path& path) const;

private:
    std::string buf_;
};

// Every read is bounds-checked; running past the end throws CorruptFileError
// naming `what_`.
class BinaryReader {
public:
    BinaryReader(std::string data, std::string what);
    static BinaryReader from_file(const std::filesystem::path& path);

    void expect_magic(std::string_view magic);
    std::uint8_t u8();
    std::uint32_t u32();
    std::uint64_t u64();
    std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
    float f32();
    double f64();
    std::string str();
    void f32s(std::span<float> out);

    bool at_end() const noexcept { return pos_ == data_.size(); }
    void expect_end();
    [[noreturn]] void fail(const std::string& why) const;

private:
    const unsigned char* take(std::size_t n);

    std::string data_;
    std::string what_;
    std::size_t pos_ = 0;
};

}  // namespace effgnn::detail
