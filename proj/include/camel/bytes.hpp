#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <vector>

#include "camel/errors.hpp"

namespace camel::bytes {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

/// Append-only little-endian encoder.
class Writer {
public:
    void raw(const void* p, std::size_t n) {
        const auto* b = static_cast<const std::uint8_t*>(p);
        buf_.insert(buf_.end(), b, b + n);
    }
    template <class T>
    void put(T v) {
        raw(&v, sizeof v);
    }
    void str16(const std::string& s) {
        if (s.size() > 0xffff) throw FormatError(FormatError::Kind::Invalid, "string longer than 65535 bytes");
        put<std::uint16_t>(static_cast<std::uint16_t>(s.size()));
        raw(s.data(), s.size());
    }
    void str32(const std::string& s) {
        put<std::uint32_t>(static_cast<std::uint32_t>(s.size()));
        raw(s.data(), s.size());
    }
    std::vector<std::uint8_t>& buffer() { return buf_; }

private:
    std::vector<std::uint8_t> buf_;
};

/// Bounds-checked little-endian decoder; running off the end is FormatError(Truncated).
class Reader {
public:
    Reader(std::span<const std::uint8_t> b, std::string what) : b_(b), what_(std::move(what)) {}

    void raw(void* p, std::size_t n) {
        need(n);
        std::memcpy(p, b_.data() + pos_, n);
        pos_ += n;
    }
    template <class T>
    T get() {
        T v;
        raw(&v, sizeof v);
        return v;
    }
    std::string str16() { return str(get<std::uint16_t>()); }
    std::string str32() { return str(get<std::uint32_t>()); }
    std::size_t remaining() const noexcept { return b_.size() - pos_; }
    std::size_t pos() const noexcept { return pos_; }

private:
    std::string str(std::size_t n) {
        need(n);
        std::string s(reinterpret_cast<const char*>(b_.data() + pos_), n);
        pos_ += n;
        return s;
    }
    void need(std::size_t n) const {
        if (n > b_.size() - pos_) {
            throw FormatError(FormatError::Kind::Truncated, what_ + ": truncated at byte " + std::to_string(pos_) +
                                                                " (need " + std::to_string(n) + " more)");
        }
    }

    std::span<const std::uint8_t> b_;
    std::string what_;
    std::size_t pos_ = 0;
};

std::vector<std::uint8_t> read_file(const std::string& path);
void write_file(const std::string& path, std::span<const std::uint8_t> data);

}  // namespace camel::bytes
