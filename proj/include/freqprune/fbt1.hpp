#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "freqprune/errors.hpp"
#include "freqprune/tensor.hpp"

// Raw tensor container "FBT1":
//   4 bytes magic "FBT1"
//   1 byte dtype: 0 = f32, 1 = f64
//   4 x u32 little-endian dims (n, c, h, w)
//   n*c*h*w little-endian scalars, row-major (n, c, h, w)

namespace freqprune::fbt1 {

inline constexpr char kMagic[4] = {'F', 'B', 'T', '1'};

template <typename T>
constexpr std::uint8_t dtype_code() {
    if constexpr (std::is_same_v<T, float>) return 0;
    else return 1;
}

namespace detail {

inline void put_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

inline std::uint32_t get_u32(std::istream& is, const std::string& path) {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4)) throw io_error("truncated FBT1 header: " + path);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace detail

template <typename T>
void write(const std::string& path, const Tensor<T>& t) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw io_error("cannot open for write: " + path);
    os.write(kMagic, 4);
    const std::uint8_t dt = dtype_code<T>();
    os.write(reinterpret_cast<const char*>(&dt), 1);
    detail::put_u32(os, static_cast<std::uint32_t>(t.n));
    detail::put_u32(os, static_cast<std::uint32_t>(t.c));
    detail::put_u32(os, static_cast<std::uint32_t>(t.h));
    detail::put_u32(os, static_cast<std::uint32_t>(t.w));
    // Little-endian host assumed; scalars are written as stored.
    os.write(reinterpret_cast<const char*>(t.data.data()),
             static_cast<std::streamsize>(t.data.size() * sizeof(T)));
    if (!os) throw io_error("write failed: " + path);
}

inline std::uint8_t peek_dtype(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw io_error("cannot open: " + path);
    char magic[4];
    if (!is.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
        throw io_error("bad FBT1 magic: " + path);
    char dt;
    if (!is.read(&dt, 1)) throw io_error("truncated FBT1 header: " + path);
    return static_cast<std::uint8_t>(dt);
}

template <typename T>
Tensor<T> read(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw io_error("cannot open: " + path);
    char magic[4];
    if (!is.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
        throw io_error("bad FBT1 magic: " + path);
    char dt;
    if (!is.read(&dt, 1)) throw io_error("truncated FBT1 header: " + path);
    if (static_cast<std::uint8_t>(dt) != dtype_code<T>())
        throw io_error("FBT1 dtype mismatch in " + path + " (file has code " +
                       std::to_string(int(dt)) + ")");
    const auto n = detail::get_u32(is, path), c = detail::get_u32(is, path),
               h = detail::get_u32(is, path), w = detail::get_u32(is, path);
    Tensor<T> t(static_cast<int>(n), static_cast<int>(c), static_cast<int>(h),
                static_cast<int>(w));
    if (!is.read(reinterpret_cast<char*>(t.data.data()),
                 static_cast<std::streamsize>(t.data.size() * sizeof(T))))
        throw io_error("truncated FBT1 payload: " + path);
    return t;
}

}  // namespace freqprune::fbt1
