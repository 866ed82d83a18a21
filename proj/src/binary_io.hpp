#pragma once

// Little-endian byte encoding shared by the embedding and checkpoint formats.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "batchmos/errors.hpp"

namespace batchmos::detail {

class ByteWriter {
public:
    void raw(std::string_view bytes) { buf_.insert(buf_.end(), bytes.begin(), bytes.end()); }

    template <typename U>
    void uint(U v) {
        for (std::size_t i = 0; i < sizeof(U); ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
    }

    void u8(std::uint8_t v) { uint(v); }
    void u16(std::uint16_t v) { uint(v); }
    void u32(std::uint32_t v) { uint(v); }
    void u64(std::uint64_t v) { uint(v); }
    void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

    void short_string(std::string_view s, const char* what) {
        if (s.size() > UINT16_MAX) throw Error(std::string(what) + " longer than 65535 bytes");
        u16(static_cast<std::uint16_t>(s.size()));
        raw(s);
    }

    const std::vector<char>& bytes() const noexcept { return buf_; }

private:
    std::vector<char> buf_;
};

class ByteReader {
public:
    explicit ByteReader(std::vector<char> bytes) : buf_(std::move(bytes)) {}

    std::size_t offset() const noexcept { return pos_; }
    std::size_t remaining() const noexcept { return buf_.size() - pos_; }

    void need(std::size_t n, const char* what) const {
        if (remaining() < n) throw CorruptionError(std::string("truncated file while reading ") + what, pos_);
    }

    std::string raw(std::size_t n, const char* what) {
        need(n, what);
        std::string s(buf_.data() + pos_, n);
        pos_ += n;
        return s;
    }

    template <typename U>
    U uint(const char* what) {
        need(sizeof(U), what);
        U v = 0;
        for (std::size_t i = 0; i < sizeof(U); ++i) {
            v |= static_cast<U>(static_cast<U>(static_cast<unsigned char>(buf_[pos_ + i])) << (8 * i));
        }
        pos_ += sizeof(U);
        return v;
    }

    std::uint8_t u8(const char* what) { return uint<std::uint8_t>(what); }
    std::uint16_t u16(const char* what) { return uint<std::uint16_t>(what); }
    std::uint32_t u32(const char* what) { return uint<std::uint32_t>(what); }
    std::uint64_t u64(const char* what) { return uint<std::uint64_t>(what); }
    float f32(const char* what) { return std::bit_cast<float>(u32(what)); }
    double f64(const char* what) { return std::bit_cast<double>(u64(what)); }

    std::string short_string(const char* what) {
        const std::uint16_t len = u16(what);
        return raw(len, what);
    }

private:
    std::vector<char> buf_;
    std::size_t pos_ = 0;
};

std::vector<char> read_file(const std::filesystem::path& path);

/// Writes to a sibling temporary and renames, so a failed write leaves no file.
void write_file_atomic(const std::filesystem::path& path, const std::vector<char>& bytes);

}  // namespace batchmos::detail
