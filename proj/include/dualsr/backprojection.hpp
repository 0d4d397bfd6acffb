#pragma once

// Fine stage: a single, iteration-free back-projection pass with a
// spectral-angle constraint, applicable on top of any coarse upscaler.
//
//   U = F(s, lr)             V = F(s/2, lr)
//   M = bicubic(U, 1/2)      Z = V - M
//   lambda = angle(M, V)     D = lambda * Z if lambda < 1 rad, else Z
//   N = bicubic(D, 2)        I_SR = clamp(U + N)

#include <cmath>
#include <concepts>
#include <utility>

#include "dualsr/coarse_net.hpp"
#include "dualsr/cube.hpp"
#include "dualsr/resample.hpp"

namespace dualsr {

enum class SamMode {
    per_pixel, ///< mean of per-pixel spectral angles
    global     ///< one angle between the flattened cubes
};

namespace detail {

/// Angle between two vectors as 2 atan2(|a/|a| - b/|b||, |a/|a| + b/|b||).
/// Equal to arccos of the normalized dot product, but exact (0) for parallel
/// inputs and well-conditioned near 0 and pi. Zero-norm inputs give 0.
template <typename GetA, typename GetB>
double vector_angle(std::size_t n, GetA a, GetB b)
{
    double na = 0.0, nb = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        na += a(k) * a(k);
        nb += b(k) * b(k);
    }
    if (na == 0.0 || nb == 0.0) return 0.0;
    na = std::sqrt(na);
    nb = std::sqrt(nb);
    double diff = 0.0, sum = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        const double x = a(k) / na, y = b(k) / nb;
        diff += (x - y) * (x - y);
        sum += (x + y) * (x + y);
    }
    return 2.0 * std::atan2(std::sqrt(diff), std::sqrt(sum));
}

} // namespace detail

/// Spectral angle in radians: mean per-pixel angle between the L-vectors of
/// a and b, or one angle between the flattened cubes in global mode.
inline double spectral_angle(const HsiCube& a, const HsiCube& b, SamMode mode = SamMode::per_pixel)
{
    require(a.same_dims(b), "spectral_angle: dimension mismatch " + dims_string(a) + " vs " + dims_string(b));
    const auto da = a.data(), db = b.data();
    if (mode == SamMode::global)
        return detail::vector_angle(
            da.size(), [&](std::size_t k) { return static_cast<double>(da[k]); },
            [&](std::size_t k) { return static_cast<double>(db[k]); });

    const std::size_t P = a.plane_size();
    double total = 0.0;
    for (std::size_t p = 0; p < P; ++p)
        total += detail::vector_angle(
            a.bands(), [&](std::size_t l) { return static_cast<double>(da[l * P + p]); },
            [&](std::size_t l) { return static_cast<double>(db[l * P + p]); });
    return total / static_cast<double>(P);
}

/// Anything that maps (scale, LR cube) to an SR cube of scale x the input size.
template <typename F>
concept CoarseUpscaler = requires(const F& f, int s, const HsiCube& c) {
    { f(s, c) } -> std::convertible_to<HsiCube>;
};

struct BicubicUpscaler {
    HsiCube operator()(int s, const HsiCube& lr) const { return bicubic(lr, static_cast<double>(s)); }
};

template <typename T>
struct ModelUpscaler {
    const CoarseModel<T>& model;
    HsiCube operator()(int s, const HsiCube& lr) const { return sr_cube(model, lr, s); }
};

struct RefineOptions {
    SamMode sam = SamMode::per_pixel;
    bool clamp = true;
};

struct FineStageTrace {
    HsiCube U, V, M, Z;
    double lambda_sam = 0.0; // radians
    HsiCube D, N;
    HsiCube unclamped; // U + N
    HsiCube I_SR;
};

/// Refinement from caller-supplied U (scale s) and V (scale s/2).
inline FineStageTrace refine_from_cubes(const HsiCube& U, const HsiCube& V, const RefineOptions& opts = {})
{
    require(U.bands() == V.bands(), "refine: band count mismatch (U " + dims_string(U) + ", V " + dims_string(V) + ")");
    require(U.height() == 2 * V.height() && U.width() == 2 * V.width(),
            "refine: U must be exactly 2x V spatially (U " + dims_string(U) + ", V " + dims_string(V) + ")");

    FineStageTrace t;
    t.U = U;
    t.V = V;
    t.M = bicubic(U, 0.5);
    t.Z = HsiCube(V.bands(), V.height(), V.width());
    {
        auto z = t.Z.data();
        const auto v = V.data();
        const auto m = std::as_const(t.M).data();
        for (std::size_t k = 0; k < z.size(); ++k) z[k] = v[k] - m[k];
    }
    t.lambda_sam = spectral_angle(t.M, V, opts.sam);
    t.D = t.Z;
    if (t.lambda_sam < 1.0) {
        const auto lam = static_cast<float>(t.lambda_sam);
        for (auto& d : t.D.data()) d = lam * d;
    }
    t.N = bicubic(t.D, 2.0);
    t.unclamped = HsiCube(U.bands(), U.height(), U.width());
    {
        auto out = t.unclamped.data();
        const auto u = U.data();
        const auto n = std::as_const(t.N).data();
        for (std::size_t k = 0; k < out.size(); ++k) out[k] = u[k] + n[k];
    }
    t.I_SR = t.unclamped;
    if (opts.clamp) t.I_SR.clamp_unit();
    return t;
}

/// Dual-stage result: coarse SR at s and s/2, then one back-projection pass.
template <CoarseUpscaler F>
FineStageTrace refine(const F& coarse, const HsiCube& lr, int s, const RefineOptions& opts = {})
{
    require(s >= 2 && s % 2 == 0, "refine: scale must be even and >= 2, got " + std::to_string(s));
    const auto su = static_cast<std::size_t>(s);
    HsiCube U = coarse(s, lr);
    HsiCube V = coarse(s / 2, lr);
    require(U.bands() == lr.bands() && U.height() == lr.height() * su && U.width() == lr.width() * su,
            "refine: upscaler returned " + dims_string(U) + " for x" + std::to_string(s) + " of " + dims_string(lr));
    require(V.bands() == lr.bands() && V.height() == lr.height() * su / 2 && V.width() == lr.width() * su / 2,
            "refine: upscaler returned " + dims_string(V) + " for x" + std::to_string(s / 2) + " of " + dims_string(lr));
    return refine_from_cubes(U, V, opts);
}

} // namespace dualsr
