#pragma once

// Little-endian encode/decode helpers shared by the .rvwt and .rvsc codecs.

#include <bit>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "onboard/error.hpp"

namespace onboard::detail {

class ByteWriter {
public:
    void bytes(std::string_view s) {
        for (char c : s) out_.push_back(static_cast<std::byte>(c));
    }

    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::byte>((v >> (8 * i)) & 0xFFu));
    }

    void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }

    void f32s(std::span<const float> vs) {
        out_.reserve(out_.size() + 4 * vs.size());
        for (float v : vs) f32(v);
    }

    std::vector<std::byte> take() { return std::move(out_); }

private:
    std::vector<std::byte> out_;
};

class ByteReader {
public:
    explicit ByteReader(std::span<const std::byte> in) : in_(in) {}

    std::size_t remaining() const noexcept { return in_.size() - pos_; }
    std::size_t position() const noexcept { return pos_; }

    void require(std::size_t n, const char* what) const {
        if (remaining() < n) {
            throw FormatError(FormatErrorKind::truncated,
                              std::string(what) + " needs " + std::to_string(n) + " bytes at offset " +
                                  std::to_string(pos_) + ", " + std::to_string(remaining()) + " left");
        }
    }

    std::string bytes(std::size_t n, const char* what) {
        require(n, what);
        std::string s(n, '\0');
        std::memcpy(s.data(), in_.data() + pos_, n);
        pos_ += n;
        return s;
    }

    std::uint32_t u32(const char* what) {
        require(4, what);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in_[pos_ + i]) << (8 * i);
        pos_ += 4;
        return v;
    }

    float f32(const char* what) { return std::bit_cast<float>(u32(what)); }

    std::vector<float> f32s(std::size_t n, const char* what) {
        // Checked before allocating so a hostile count cannot trigger a huge allocation.
        if (n > remaining() / 4) {
            throw FormatError(FormatErrorKind::truncated,
                              std::string(what) + " declares " + std::to_string(n) + " floats at offset " +
                                  std::to_string(pos_) + ", only " + std::to_string(remaining()) +
                                  " bytes left");
        }
        std::vector<float> out(n);
        for (auto& v : out) v = f32(what);
        return out;
    }

private:
    std::span<const std::byte> in_;
    std::size_t pos_ = 0;
};

inline std::vector<std::byte> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    in.seekg(0, std::ios::end);
    const auto size = in.tellg();
    if (size < 0) throw IoError("cannot stat " + path.string());
    in.seekg(0, std::ios::beg);
    std::vector<std::byte> buf(static_cast<std::size_t>(size));
    if (!buf.empty() && !in.read(reinterpret_cast<char*>(buf.data()), size)) {
        throw IoError("read failed for " + path.string());
    }
    return buf;
}

inline void write_file(const std::filesystem::path& path, std::span<const std::byte> bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot create " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed for " + path.string());
}

inline void write_text(const std::filesystem::path& path, std::string_view text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot create " + path.string());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw IoError("write failed for " + path.string());
}

inline std::string read_text(const std::filesystem::path& path) {
    auto bytes = read_file(path);
    return std::string(reinterpret_cast<const char*>(bytes.data()), bytes.size());
}

}  // namespace onboard::detail
