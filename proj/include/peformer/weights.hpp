#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "peformer/tensor.hpp"

namespace peformer {

// Versioned container of named arrays:
//   u32 format version, u64 count,
//   then per array: u32 name length, UTF-8 name, u32 rank,
//   u64 shape[rank], f64 data (row-major), everything little-endian.
inline constexpr std::uint32_t kWeightFormatVersion = 1;

namespace detail {

inline void put_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    os.write(reinterpret_cast<const char*>(b), 4);
}

inline void put_u64(std::ostream& os, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    os.write(reinterpret_cast<const char*>(b), 8);
}

inline void put_f64(std::ostream& os, double d) {
    std::uint64_t v;
    std::memcpy(&v, &d, 8);
    put_u64(os, v);
}

inline std::uint32_t get_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    if (!is) throw std::runtime_error("weight container: truncated file");
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | b[i];
    return v;
}

inline std::uint64_t get_u64(std::istream& is) {
    unsigned char b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    if (!is) throw std::runtime_error("weight container: truncated file");
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
    return v;
}

inline double get_f64(std::istream& is) {
    const std::uint64_t v = get_u64(is);
    double d;
    std::memcpy(&d, &v, 8);
    return d;
}

}  // namespace detail

inline void save_weights(std::ostream& os, const std::map<std::string, TensorPtr>& arrays) {
    detail::put_u32(os, kWeightFormatVersion);
    detail::put_u64(os, arrays.size());
    for (const auto& [name, t] : arrays) {
        detail::put_u32(os, static_cast<std::uint32_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        detail::put_u32(os, static_cast<std::uint32_t>(t->shape.size()));
        for (auto d : t->shape) detail::put_u64(os, static_cast<std::uint64_t>(d));
        for (double v : t->data) detail::put_f64(os, v);
    }
}

inline void save_weights(const std::string& path, const std::map<std::string, TensorPtr>& arrays) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("weight container: cannot open " + path + " for writing");
    save_weights(os, arrays);
}

inline std::map<std::string, TensorPtr> load_weights(std::istream& is) {
    const std::uint32_t version = detail::get_u32(is);
    if (version != kWeightFormatVersion)
        throw std::runtime_error("weight container: unsupported format version " + std::to_string(version));
    const std::uint64_t count = detail::get_u64(is);
    std::map<std::string, TensorPtr> arrays;
    for (std::uint64_t i = 0; i < count; ++i) {
        const std::uint32_t name_len = detail::get_u32(is);
        std::string name(name_len, '\0');
        is.read(name.data(), name_len);
        if (!is) throw std::runtime_error("weight container: truncated name");
        const std::uint32_t rank = detail::get_u32(is);
        Shape shape(rank);
        for (std::uint32_t r = 0; r < rank; ++r) shape[r] = static_cast<std::int64_t>(detail::get_u64(is));
        const std::int64_t n = shape_numel(shape);
        std::vector<double> data(static_cast<std::size_t>(n));
        for (auto& v : data) v = detail::get_f64(is);
        arrays.emplace(std::move(name), make_tensor(std::move(shape), std::move(data)));
    }
    return arrays;
}

inline std::map<std::string, TensorPtr> load_weights(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("weight container: cannot open " + path);
    return load_weights(is);
}

}  // namespace peformer
