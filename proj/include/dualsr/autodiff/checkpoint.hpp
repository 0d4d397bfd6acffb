#pragma once

// Parameter checkpoint: a text manifest plus a ".bin" payload of
// concatenated little-endian f32 values in manifest order.
//
//   # free-form header lines ("key = value") before the first "param"
//   param <name> <dim0> <dim1> ...

#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "dualsr/autodiff/tensor.hpp"

namespace dualsr::ad {

struct NamedArray {
    std::string name;
    Shape shape;
    std::vector<float> values;
};

struct Checkpoint {
    std::map<std::string, std::string> header;
    std::vector<NamedArray> arrays;
};

inline std::filesystem::path payload_path(const std::filesystem::path& manifest)
{
    return std::filesystem::path(manifest.string() + ".bin");
}

inline void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& manifest)
{
    if (manifest.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(manifest.parent_path(), ec);
    }
    std::ofstream m(manifest, std::ios::trunc);
    std::ofstream b(payload_path(manifest), std::ios::binary | std::ios::trunc);
    if (!m || !b) throw Error("cannot write checkpoint: " + manifest.string());
    for (const auto& [k, v] : ckpt.header) m << k << " = " << v << "\n";
    for (const auto& a : ckpt.arrays) {
        require(numel(a.shape) == a.values.size(), "checkpoint: array '" + a.name + "' does not fill its shape");
        m << "param " << a.name;
        for (auto d : a.shape) m << ' ' << d;
        m << "\n";
        for (float v : a.values) {
            auto bits = std::bit_cast<std::uint32_t>(v);
            if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap32(bits);
            b.write(reinterpret_cast<const char*>(&bits), sizeof bits);
        }
    }
    if (!m || !b) throw Error("cannot write checkpoint: " + manifest.string());
}

inline Checkpoint load_checkpoint(const std::filesystem::path& manifest)
{
    std::ifstream m(manifest);
    if (!m) throw Error("checkpoint manifest missing: " + manifest.string());
    std::ifstream b(payload_path(manifest), std::ios::binary);
    if (!b) throw Error("checkpoint payload missing: " + payload_path(manifest).string());

    Checkpoint ckpt;
    std::string line;
    while (std::getline(m, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (line.rfind("param ", 0) == 0) {
            std::istringstream ls(line.substr(6));
            NamedArray a;
            ls >> a.name;
            std::size_t d = 0;
            while (ls >> d) a.shape.push_back(d);
            require(!a.name.empty() && !a.shape.empty(), "checkpoint: garbled param line '" + line + "'");
            a.values.resize(numel(a.shape));
            for (auto& v : a.values) {
                std::uint32_t bits = 0;
                b.read(reinterpret_cast<char*>(&bits), sizeof bits);
                if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap32(bits);
                v = std::bit_cast<float>(bits);
            }
            if (!b) throw Error("checkpoint payload shorter than manifest: " + manifest.string());
            ckpt.arrays.push_back(std::move(a));
        } else {
            const auto eq = line.find('=');
            require(eq != std::string::npos, "checkpoint: garbled header line '" + line + "'");
            auto trim = [](std::string s) {
                s.erase(0, s.find_first_not_of(" \t"));
                s.erase(s.find_last_not_of(" \t\r") + 1);
                return s;
            };
            ckpt.header[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
        }
    }
    b.peek();
    require(b.eof(), "checkpoint payload longer than manifest: " + manifest.string());
    return ckpt;
}

} // namespace dualsr::ad
