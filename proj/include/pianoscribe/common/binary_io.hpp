#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>

#include "pianoscribe/common/errors.hpp"

// Little-endian helpers shared by every binary file format in the project.
namespace pianoscribe::io {

template <typename T>
void write_le(std::ostream& out, T value)
{
    static_assert(std::is_trivially_copyable_v<T>);
    using U = std::conditional_t<sizeof(T) == 8, std::uint64_t,
              std::conditional_t<sizeof(T) == 4, std::uint32_t,
              std::conditional_t<sizeof(T) == 2, std::uint16_t, std::uint8_t>>>;
    static_assert(sizeof(U) == sizeof(T));
    U bits = std::bit_cast<U>(value);
    std::array<char, sizeof(T)> bytes{};
    for (std::size_t i = 0; i < sizeof(T); ++i) {
        bytes[i] = static_cast<char>((bits >> (8 * i)) & 0xFF);
    }
    out.write(bytes.data(), bytes.size());
}

template <typename T>
T read_le(std::istream& in)
{
    static_assert(std::is_trivially_copyable_v<T>);
    using U = std::conditional_t<sizeof(T) == 8, std::uint64_t,
              std::conditional_t<sizeof(T) == 4, std::uint32_t,
              std::conditional_t<sizeof(T) == 2, std::uint16_t, std::uint8_t>>>;
    std::array<unsigned char, sizeof(T)> bytes{};
    in.read(reinterpret_cast<char*>(bytes.data()), bytes.size());
    if (!in) {
        throw FormatError("unexpected end of stream");
    }
    U bits = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
        bits |= static_cast<U>(bytes[i]) << (8 * i);
    }
    return std::bit_cast<T>(bits);
}

inline void write_magic(std::ostream& out, std::string_view magic)
{
    out.write(magic.data(), static_cast<std::streamsize>(magic.size()));
}

inline void expect_magic(std::istream& in, std::string_view magic)
{
    std::string got(magic.size(), '\0');
    in.read(got.data(), static_cast<std::streamsize>(got.size()));
    if (!in || got != magic) {
        throw FormatError("bad magic: expected \"" + std::string(magic) + "\"");
    }
}

} // namespace pianoscribe::io
