#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "dualsr/error.hpp"

namespace dualsr {

/// A single 2-D image, row-major.
struct Plane {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<float> values;

    Plane() = default;
    Plane(std::size_t h, std::size_t w, float fill = 0.0f) : height(h), width(w), values(h * w, fill) {}
    Plane(std::size_t h, std::size_t w, std::vector<float> v) : height(h), width(w), values(std::move(v))
    {
        require(values.size() == h * w, "plane: value count does not match dimensions");
    }

    float& operator()(std::size_t y, std::size_t x) { return values[y * width + x]; }
    float operator()(std::size_t y, std::size_t x) const { return values[y * width + x]; }

    bool operator==(const Plane&) const = default;
};

/// L-band hyperspectral cube stored band-major: index (band, row, column).
class HsiCube {
public:
    HsiCube() = default;

    HsiCube(std::size_t bands, std::size_t height, std::size_t width, float fill = 0.0f)
        : bands_(bands), height_(height), width_(width), data_(bands * height * width, fill)
    {
        require(bands >= 1 && height >= 1 && width >= 1, "cube: dimensions must be positive");
    }

    HsiCube(std::size_t bands, std::size_t height, std::size_t width, std::vector<float> data)
        : bands_(bands), height_(height), width_(width), data_(std::move(data))
    {
        require(bands >= 1 && height >= 1 && width >= 1, "cube: dimensions must be positive");
        require(data_.size() == bands * height * width, "cube: data length must equal bands*height*width");
    }

    std::size_t bands() const noexcept { return bands_; }
    std::size_t height() const noexcept { return height_; }
    std::size_t width() const noexcept { return width_; }
    std::size_t plane_size() const noexcept { return height_ * width_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    std::span<float> data() noexcept { return data_; }
    std::span<const float> data() const noexcept { return data_; }

    /// Band l, 0-based.
    std::span<float> band(std::size_t l) { return std::span<float>(data_).subspan(l * plane_size(), plane_size()); }
    std::span<const float> band(std::size_t l) const
    {
        return std::span<const float>(data_).subspan(l * plane_size(), plane_size());
    }

    Plane band_plane(std::size_t l) const
    {
        auto b = band(l);
        return Plane(height_, width_, std::vector<float>(b.begin(), b.end()));
    }

    void set_band(std::size_t l, const Plane& p)
    {
        require(p.height == height_ && p.width == width_, "cube: band plane has wrong dimensions");
        std::copy(p.values.begin(), p.values.end(), band(l).begin());
    }

    float& operator()(std::size_t l, std::size_t y, std::size_t x) { return data_[(l * height_ + y) * width_ + x]; }
    float operator()(std::size_t l, std::size_t y, std::size_t x) const
    {
        return data_[(l * height_ + y) * width_ + x];
    }

    bool same_dims(const HsiCube& o) const noexcept
    {
        return bands_ == o.bands_ && height_ == o.height_ && width_ == o.width_;
    }

    bool all_finite() const noexcept
    {
        return std::all_of(data_.begin(), data_.end(), [](float v) { return std::isfinite(v); });
    }

    bool in_unit_range() const noexcept
    {
        return std::all_of(data_.begin(), data_.end(), [](float v) { return v >= 0.0f && v <= 1.0f; });
    }

    void clamp_unit()
    {
        for (auto& v : data_) v = std::clamp(v, 0.0f, 1.0f);
    }

    /// Bitwise equality of dims and payload.
    bool operator==(const HsiCube&) const = default;

private:
    std::size_t bands_ = 0;
    std::size_t height_ = 0;
    std::size_t width_ = 0;
    std::vector<float> data_;
};

inline std::string dims_string(const HsiCube& c)
{
    return std::to_string(c.bands()) + "x" + std::to_string(c.height()) + "x" + std::to_string(c.width());
}

} // namespace dualsr
