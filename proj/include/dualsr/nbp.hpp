#pragma once

// Neighboring band partition: every band i is reconstructed from a five-band
// window split into three groups, each containing i itself. Band indices in
// this header are 1-based, matching how bands are numbered in the window rules.

#include <array>
#include <vector>

#include "dualsr/cube.hpp"

namespace dualsr {

struct BandGroups {
    std::size_t current = 0;
    std::array<std::size_t, 1> g1{};
    std::array<std::size_t, 3> g2{};
    std::array<std::size_t, 3> g3{};

    bool operator==(const BandGroups&) const = default;
};

namespace detail {

inline void check_band(std::size_t i, std::size_t bands)
{
    require(bands >= 5, "nbp: need at least 5 bands, got " + std::to_string(bands));
    require(i >= 1 && i <= bands, "nbp: band index " + std::to_string(i) + " out of range [1, " +
                                      std::to_string(bands) + "]");
}

} // namespace detail

/// Five-band window around band i.
inline std::array<std::size_t, 5> window(std::size_t i, std::size_t bands)
{
    detail::check_band(i, bands);
    const std::size_t first = (i < 3) ? 1 : (i + 3 <= bands ? i - 2 : bands - 4);
    return {first, first + 1, first + 2, first + 3, first + 4};
}

/// Low edge (i in {1,2}) and high edge (i > L-3) use fixed groups; the high
/// edge keeps the non-monotone order [L-3, i, L-4] as written.
inline BandGroups partition(std::size_t i, std::size_t bands)
{
    detail::check_band(i, bands);
    const std::size_t L = bands;
    BandGroups g;
    g.current = i;
    g.g1 = {i};
    if (i < 3) {
        g.g2 = {1, 2, 3};
        g.g3 = {4, i, 5};
    } else if (i + 3 <= L) {
        g.g2 = {i - 1, i, i + 1};
        g.g3 = {i - 2, i, i + 2};
    } else {
        g.g2 = {L - 2, L - 1, L};
        g.g3 = {L - 3, i, L - 4};
    }
    return g;
}

struct GroupStacks {
    HsiCube g1;
    HsiCube g2;
    HsiCube g3;
};

namespace detail {

template <std::size_t N>
HsiCube gather(const HsiCube& cube, const std::array<std::size_t, N>& idx)
{
    HsiCube out(N, cube.height(), cube.width());
    for (std::size_t k = 0; k < N; ++k) {
        require(idx[k] >= 1 && idx[k] <= cube.bands(),
                "gather_groups: band index " + std::to_string(idx[k]) + " out of range");
        auto src = cube.band(idx[k] - 1);
        std::copy(src.begin(), src.end(), out.band(k).begin());
    }
    return out;
}

} // namespace detail

/// Copies the referenced bands into three dense stacks, in listed order.
inline GroupStacks gather_groups(const HsiCube& cube, const BandGroups& groups)
{
    return {detail::gather(cube, groups.g1), detail::gather(cube, groups.g2), detail::gather(cube, groups.g3)};
}

} // namespace dualsr
