#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <type_traits>

#include "callerspace/error.hpp"

namespace callerspace::binary {

/// Little-endian writer over an ostream.
class Writer {
public:
    explicit Writer(std::ostream& out) : out_(out) {}

    template <class T>
        requires std::is_arithmetic_v<T>
    void put(T value)
    {
        using Bits = std::conditional_t<sizeof(T) == 1, std::uint8_t,
                     std::conditional_t<sizeof(T) == 2, std::uint16_t,
                     std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>>>;
        const auto bits = std::bit_cast<Bits>(value);
        char bytes[sizeof(T)];
        for (std::size_t i = 0; i < sizeof(T); ++i) {
            bytes[i] = static_cast<char>((bits >> (8 * i)) & 0xFF);
        }
        out_.write(bytes, sizeof(T));
    }

    void put_bytes(const void* data, std::size_t size) { out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(size)); }

    /// u8 length prefix + bytes.
    void put_short_string(const std::string& s)
    {
        if (s.size() > 0xFF) {
            throw Error(ErrorCode::InvalidArgument, "string longer than 255 bytes: " + s.substr(0, 32) + "...");
        }
        put(static_cast<std::uint8_t>(s.size()));
        put_bytes(s.data(), s.size());
    }

    /// u32 length prefix + bytes.
    void put_long_string(const std::string& s)
    {
        put(static_cast<std::uint32_t>(s.size()));
        put_bytes(s.data(), s.size());
    }

    bool good() const { return out_.good(); }

private:
    std::ostream& out_;
};

/// Little-endian reader; any short read throws TruncatedFile.
class Reader {
public:
    explicit Reader(std::istream& in) : in_(in) {}

    template <class T>
        requires std::is_arithmetic_v<T>
    T get()
    {
        using Bits = std::conditional_t<sizeof(T) == 1, std::uint8_t,
                     std::conditional_t<sizeof(T) == 2, std::uint16_t,
                     std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>>>;
        unsigned char bytes[sizeof(T)];
        get_bytes(bytes, sizeof(T));
        Bits bits = 0;
        for (std::size_t i = 0; i < sizeof(T); ++i) {
            bits |= static_cast<Bits>(static_cast<Bits>(bytes[i]) << (8 * i));
        }
        return std::bit_cast<T>(bits);
    }

    void get_bytes(void* data, std::size_t size)
    {
        in_.read(static_cast<char*>(data), static_cast<std::streamsize>(size));
        if (static_cast<std::size_t>(in_.gcount()) != size) {
            throw Error(ErrorCode::TruncatedFile, "unexpected end of data");
        }
    }

    std::string get_short_string()
    {
        const auto len = get<std::uint8_t>();
        std::string s(len, '\0');
        get_bytes(s.data(), len);
        return s;
    }

    std::string get_long_string(std::uint32_t max_len = 1U << 28)
    {
        const auto len = get<std::uint32_t>();
        if (len > max_len) {
            throw Error(ErrorCode::TruncatedFile, "string length out of range");
        }
        std::string s(len, '\0');
        get_bytes(s.data(), len);
        return s;
    }

    /// True when no bytes remain.
    bool at_end() { return in_.peek() == std::char_traits<char>::eof(); }

private:
    std::istream& in_;
};

} // namespace callerspace::binary
