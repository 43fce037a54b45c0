#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <string_view>

#include "lfcap/error.hpp"

// Little-endian primitives shared by every binary container in the toolkit.
namespace lfcap::binary {

inline void write_u32(std::ostream& out, std::uint32_t value)
{
    if constexpr (std::endian::native == std::endian::big)
        value = __builtin_bswap32(value);
    out.write(reinterpret_cast<const char*>(&value), sizeof value);
}

inline void write_f32(std::ostream& out, float value)
{
    write_u32(out, std::bit_cast<std::uint32_t>(value));
}

inline void write_f32s(std::ostream& out, std::span<const float> values)
{
    if constexpr (std::endian::native == std::endian::little) {
        out.write(reinterpret_cast<const char*>(values.data()),
                  static_cast<std::streamsize>(values.size_bytes()));
    } else {
        for (float v : values)
            write_f32(out, v);
    }
}

inline void write_string(std::ostream& out, std::string_view s)
{
    write_u32(out, static_cast<std::uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline void read_exact(std::istream& in, char* dst, std::size_t n, const char* what)
{
    in.read(dst, static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in.gcount()) != n)
        throw IoError(std::string("truncated input while reading ") + what);
}

inline std::uint32_t read_u32(std::istream& in, const char* what = "u32")
{
    std::uint32_t value = 0;
    read_exact(in, reinterpret_cast<char*>(&value), sizeof value, what);
    if constexpr (std::endian::native == std::endian::big)
        value = __builtin_bswap32(value);
    return value;
}

inline float read_f32(std::istream& in, const char* what = "f32")
{
    return std::bit_cast<float>(read_u32(in, what));
}

inline void read_f32s(std::istream& in, std::span<float> dst, const char* what = "payload")
{
    read_exact(in, reinterpret_cast<char*>(dst.data()), dst.size_bytes(), what);
    if constexpr (std::endian::native == std::endian::big) {
        for (float& v : dst)
            v = std::bit_cast<float>(__builtin_bswap32(std::bit_cast<std::uint32_t>(v)));
    }
}

inline std::string read_string(std::istream& in, std::uint32_t max_len = 1u << 24)
{
    std::uint32_t n = read_u32(in, "string length");
    if (n > max_len)
        throw IoError("string field too long: " + std::to_string(n));
    std::string s(n, '\0');
    read_exact(in, s.data(), n, "string");
    return s;
}

inline void expect_magic(std::istream& in, std::string_view magic)
{
    char buf[4] = {};
    in.read(buf, 4);
    if (in.gcount() != 4 || std::string_view(buf, 4) != magic)
        throw IoError("bad magic, expected \"" + std::string(magic) + "\"");
}

} // namespace lfcap::binary
