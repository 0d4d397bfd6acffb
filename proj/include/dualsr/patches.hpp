#pragma once

#include <vector>

#include "dualsr/cube.hpp"
#include "dualsr/resample.hpp"

namespace dualsr {

struct PatchSpec {
    std::size_t size = 32;
    std::size_t stride = 32;
    std::vector<double> scales{1.0, 0.75, 0.5};
    bool rotate = true;
    bool flip = true;
    /// SR factor the patches are destined for; every scaled patch edge must reach it.
    std::size_t sr_scale = 1;

    void validate() const
    {
        require(size >= 1 && stride >= 1, "patch spec: size and stride must be positive");
        require(!scales.empty(), "patch spec: at least one scale must be enabled");
        for (double s : scales) {
            const std::size_t edge = scaled_extent(size, s);
            require(edge >= sr_scale, "patch spec: scaled patch edge " + std::to_string(edge) +
                                          " is smaller than the SR factor");
        }
    }
};

/// Square spatial crops with full band depth, row-major tiling order; the
/// last partial row/column of tiles is dropped.
inline std::vector<HsiCube> extract_patches(const HsiCube& cube, const PatchSpec& spec)
{
    require(spec.size >= 1 && spec.stride >= 1, "patch spec: size and stride must be positive");
    if (spec.size > cube.height() || spec.size > cube.width())
        throw Error("extract_patches: patch size " + std::to_string(spec.size) + " exceeds image extent " +
                    std::to_string(cube.height()) + "x" + std::to_string(cube.width()));
    const std::size_t rows = (cube.height() - spec.size) / spec.stride + 1;
    const std::size_t cols = (cube.width() - spec.size) / spec.stride + 1;

    std::vector<HsiCube> patches;
    patches.reserve(rows * cols);
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            HsiCube p(cube.bands(), spec.size, spec.size);
            for (std::size_t l = 0; l < cube.bands(); ++l)
                for (std::size_t y = 0; y < spec.size; ++y)
                    for (std::size_t x = 0; x < spec.size; ++x)
                        p(l, y, x) = cube(l, r * spec.stride + y, c * spec.stride + x);
            patches.push_back(std::move(p));
        }
    }
    return patches;
}

/// Counter-clockwise quarter turn of every band: out(y, x) = in(x, W-1-y).
inline HsiCube rotate90(const HsiCube& cube)
{
    HsiCube out(cube.bands(), cube.width(), cube.height());
    for (std::size_t l = 0; l < cube.bands(); ++l)
        for (std::size_t y = 0; y < out.height(); ++y)
            for (std::size_t x = 0; x < out.width(); ++x) out(l, y, x) = cube(l, x, cube.width() - 1 - y);
    return out;
}

inline HsiCube flip_horizontal(const HsiCube& cube)
{
    HsiCube out(cube.bands(), cube.height(), cube.width());
    for (std::size_t l = 0; l < cube.bands(); ++l)
        for (std::size_t y = 0; y < cube.height(); ++y)
            for (std::size_t x = 0; x < cube.width(); ++x) out(l, y, x) = cube(l, y, cube.width() - 1 - x);
    return out;
}

/// Cartesian product {scales} x {identity, rotate-90} x {identity, flip}, in
/// that nesting order. Scaling uses bicubic resampling per band.
inline std::vector<HsiCube> augment(const HsiCube& patch, const PatchSpec& spec)
{
    require(patch.height() == patch.width(), "augment: patch must be square");
    PatchSpec checked = spec;
    checked.size = patch.height();
    checked.validate();

    std::vector<HsiCube> out;
    for (double s : spec.scales) {
        HsiCube base = (s == 1.0) ? patch : bicubic(patch, s);
        for (int rot = 0; rot < (spec.rotate ? 2 : 1); ++rot) {
            HsiCube r = rot ? rotate90(base) : base;
            out.push_back(r);
            if (spec.flip) out.push_back(flip_horizontal(r));
        }
    }
    return out;
}

} // namespace dualsr
