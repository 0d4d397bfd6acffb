#pragma once

#include <filesystem>
#include <string>

#include <unistd.h>

#include "dualsr/cube.hpp"
#include "dualsr/rng.hpp"

namespace dualsr::testing {

/// Fresh scratch directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag)
    {
        static int counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                ("dualsr_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir()
    {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline HsiCube random_cube(std::size_t bands, std::size_t height, std::size_t width, std::uint64_t seed,
                           double lo = 0.0, double hi = 1.0)
{
    Rng rng(seed);
    HsiCube c(bands, height, width);
    for (auto& v : c.data()) v = static_cast<float>(rng.uniform(lo, hi));
    return c;
}

} // namespace dualsr::testing
