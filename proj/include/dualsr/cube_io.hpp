#pragma once

// .hsr cube format: a raw payload of little-endian f32 values in band-major
// order, plus a "<name>.hsr.meta" text sidecar of key = value lines:
//
//   bands = 31
//   height = 512
//   width = 512
//   dtype = f32
//   byte_order = little
//   order = band-major
//   max_value = 1
//   range = unit        (unit | signed)
//
// The loader divides by max_value when normalizing. Cubes with range = unit
// must land in [0,1] after normalization; signed cubes hold residuals.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "dualsr/cube.hpp"

namespace dualsr {

struct CubeMeta {
    std::size_t bands = 0;
    std::size_t height = 0;
    std::size_t width = 0;
    double max_value = 1.0;
    bool signed_range = false;
};

inline std::filesystem::path meta_path(const std::filesystem::path& payload)
{
    return std::filesystem::path(payload.string() + ".meta");
}

namespace detail {

inline std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

/// Parses "key = value" lines; '#' starts a comment.
inline std::map<std::string, std::string> parse_key_values(std::istream& in, const std::string& what)
{
    std::map<std::string, std::string> kv;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw Error(what + ": garbled line " + std::to_string(lineno) + ": '" + line + "'");
        kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    return kv;
}

inline std::size_t parse_dim(const std::map<std::string, std::string>& kv, const std::string& key)
{
    auto it = kv.find(key);
    if (it == kv.end()) throw Error("cube header: missing key '" + key + "'");
    std::size_t pos = 0;
    long long v = 0;
    try {
        v = std::stoll(it->second, &pos);
    } catch (const std::exception&) {
        throw Error("cube header: garbled value for '" + key + "'");
    }
    if (pos != it->second.size() || v < 1) throw Error("cube header: garbled value for '" + key + "'");
    return static_cast<std::size_t>(v);
}

inline std::uint32_t to_little(std::uint32_t v)
{
    if constexpr (std::endian::native == std::endian::big) return __builtin_bswap32(v);
    return v;
}

} // namespace detail

inline CubeMeta read_meta(const std::filesystem::path& payload)
{
    std::ifstream in(meta_path(payload));
    if (!in) throw Error("cube header missing: " + meta_path(payload).string());
    const auto kv = detail::parse_key_values(in, "cube header " + meta_path(payload).string());

    CubeMeta m;
    m.bands = detail::parse_dim(kv, "bands");
    m.height = detail::parse_dim(kv, "height");
    m.width = detail::parse_dim(kv, "width");
    auto expect = [&](const std::string& key, const std::string& value) {
        auto it = kv.find(key);
        if (it != kv.end() && it->second != value)
            throw Error("cube header: unsupported " + key + " '" + it->second + "'");
    };
    expect("dtype", "f32");
    expect("byte_order", "little");
    expect("order", "band-major");
    if (auto it = kv.find("max_value"); it != kv.end()) {
        try {
            m.max_value = std::stod(it->second);
        } catch (const std::exception&) {
            throw Error("cube header: garbled value for 'max_value'");
        }
        require(std::isfinite(m.max_value) && m.max_value > 0.0, "cube header: max_value must be positive");
    }
    if (auto it = kv.find("range"); it != kv.end()) {
        require(it->second == "unit" || it->second == "signed", "cube header: range must be unit or signed");
        m.signed_range = it->second == "signed";
    }
    return m;
}

/// Loads a cube. With normalize set, values are divided by the header's max_value.
inline HsiCube read_cube(const std::filesystem::path& path, bool normalize = true)
{
    const CubeMeta m = read_meta(path);
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cube payload missing: " + path.string());

    const std::size_t count = m.bands * m.height * m.width;
    std::error_code ec;
    const auto bytes = std::filesystem::file_size(path, ec);
    if (ec || bytes != count * sizeof(float))
        throw Error("payload size mismatch: " + path.string() + " has " + std::to_string(bytes) +
                    " bytes, header implies " + std::to_string(count * sizeof(float)));

    std::vector<float> data(count);
    std::vector<std::uint32_t> raw(count);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(count * sizeof(float)));
    if (!in) throw Error("payload size mismatch: short read from " + path.string());
    for (std::size_t k = 0; k < count; ++k) data[k] = std::bit_cast<float>(detail::to_little(raw[k]));

    if (normalize && m.max_value != 1.0) {
        const double inv = m.max_value;
        for (auto& v : data) v = static_cast<float>(v / inv);
    }
    HsiCube cube(m.bands, m.height, m.width, std::move(data));
    require(cube.all_finite(), "cube contains non-finite values: " + path.string());
    if (normalize && !m.signed_range)
        require(cube.in_unit_range(), "cube values outside [0,1] after normalization: " + path.string());
    return cube;
}

/// Writes payload and sidecar. Rejects non-finite cubes before touching disk.
inline void write_cube(const HsiCube& cube, const std::filesystem::path& path)
{
    require(!cube.empty(), "write_cube: empty cube");
    require(cube.all_finite(), "write_cube: cube contains non-finite values");

    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
    }
    {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write cube payload: " + path.string());
        std::vector<std::uint32_t> raw(cube.size());
        auto d = cube.data();
        for (std::size_t k = 0; k < raw.size(); ++k) raw[k] = detail::to_little(std::bit_cast<std::uint32_t>(d[k]));
        out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size() * sizeof(float)));
        if (!out) throw Error("cannot write cube payload: " + path.string());
    }
    std::ofstream meta(meta_path(path), std::ios::trunc);
    if (!meta) throw Error("cannot write cube header: " + meta_path(path).string());
    meta << "bands = " << cube.bands() << "\n"
         << "height = " << cube.height() << "\n"
         << "width = " << cube.width() << "\n"
         << "dtype = f32\n"
         << "byte_order = little\n"
         << "order = band-major\n"
         << "max_value = 1\n"
         << "range = " << (cube.in_unit_range() ? "unit" : "signed") << "\n";
    if (!meta) throw Error("cannot write cube header: " + meta_path(path).string());
}

} // namespace dualsr
