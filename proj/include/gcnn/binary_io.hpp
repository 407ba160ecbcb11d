#ifndef GCNN_BINARY_IO_HPP
#define GCNN_BINARY_IO_HPP

// Little-endian primitives shared by the binary containers.

#include "gcnn/errors.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <type_traits>

namespace gcnn::io {

template <typename T>
T to_little_endian(T value) {
    static_assert(std::is_trivially_copyable_v<T>);
    if constexpr (std::endian::native == std::endian::big) {
        unsigned char bytes[sizeof(T)];
        std::memcpy(bytes, &value, sizeof(T));
        std::reverse(bytes, bytes + sizeof(T));
        std::memcpy(&value, bytes, sizeof(T));
    }
    return value;
}

template <typename T>
void write_le(std::ostream& os, T value) {
    value = to_little_endian(value);
    os.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_le(std::istream& is, const std::string& what) {
    T value{};
    const auto offset = static_cast<long long>(is.tellg());
    if (!is.read(reinterpret_cast<char*>(&value), sizeof(T))) {
        throw FormatError(what + ": truncated at byte offset " + std::to_string(offset));
    }
    return to_little_endian(value);
}

inline void write_doubles(std::ostream& os, const double* data, std::size_t count) {
    if constexpr (std::endian::native == std::endian::little) {
        os.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(count * sizeof(double)));
    } else {
        for (std::size_t i = 0; i < count; ++i) write_le(os, data[i]);
    }
}

inline void read_doubles(std::istream& is, double* data, std::size_t count, const std::string& what) {
    if constexpr (std::endian::native == std::endian::little) {
        const auto offset = static_cast<long long>(is.tellg());
        if (!is.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(count * sizeof(double)))) {
            throw FormatError(what + ": truncated payload starting at byte offset " + std::to_string(offset));
        }
    } else {
        for (std::size_t i = 0; i < count; ++i) data[i] = read_le<double>(is, what);
    }
}

} // namespace gcnn::io

#endif // GCNN_BINARY_IO_HPP
