#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "dualsr/cube.hpp"

namespace dualsr {

enum class KernelKind { cubic, lanczos, box, linear };

inline std::string kernel_name(KernelKind k)
{
    switch (k) {
    case KernelKind::cubic: return "cubic";
    case KernelKind::lanczos: return "lanczos";
    case KernelKind::box: return "box";
    case KernelKind::linear: return "linear";
    }
    return "?";
}

inline KernelKind parse_kernel(const std::string& name)
{
    if (name == "cubic" || name == "bicubic") return KernelKind::cubic;
    if (name == "lanczos" || name == "lanczos3") return KernelKind::lanczos;
    if (name == "box") return KernelKind::box;
    if (name == "linear" || name == "bilinear") return KernelKind::linear;
    throw Error("unknown kernel '" + name + "' (expected cubic|lanczos|box|linear)");
}

/// Support radius in source pixels at unit scale.
constexpr double kernel_radius(KernelKind k) noexcept
{
    switch (k) {
    case KernelKind::cubic: return 2.0;
    case KernelKind::lanczos: return 3.0;
    case KernelKind::box: return 0.5;
    case KernelKind::linear: return 1.0;
    }
    return 0.0;
}

/// Kernel profile at distance |x|. All four kernels are even functions.
inline double kernel_value(KernelKind k, double x) noexcept
{
    x = std::abs(x);
    switch (k) {
    case KernelKind::cubic: {
        // Keys cubic convolution, a = -0.5
        constexpr double a = -0.5;
        if (x <= 1.0) return ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0;
        if (x < 2.0) return ((a * x - 5.0 * a) * x + 8.0 * a) * x - 4.0 * a;
        return 0.0;
    }
    case KernelKind::lanczos: {
        constexpr double lobes = 3.0;
        if (x == 0.0) return 1.0;
        if (x >= lobes) return 0.0;
        const double px = std::numbers::pi * x;
        return lobes * std::sin(px) * std::sin(px / lobes) / (px * px);
    }
    case KernelKind::box: return x <= 0.5 ? 1.0 : 0.0;
    case KernelKind::linear: return x < 1.0 ? 1.0 - x : 0.0;
    }
    return 0.0;
}

/// scale: output/input size ratio. antialias stretches the kernel by 1/scale
/// when downscaling. Boundary handling is always edge replication.
struct ResamplePlan {
    double scale = 1.0;
    KernelKind kernel = KernelKind::cubic;
    bool antialias = true;
};

struct Tap {
    std::size_t index;
    double weight;
};

namespace detail {

/// Reversal-invariant sum: pairs terms from both ends first so a mirrored
/// term list produces the bitwise-identical result.
inline double symmetric_sum(const double* t, std::size_t n) noexcept
{
    double acc = 0.0;
    for (std::size_t k = 0; k < n / 2; ++k) acc += t[k] + t[n - 1 - k];
    if (n % 2 == 1) acc += t[n / 2];
    return acc;
}

} // namespace detail

/// Output extent for a given scale; the product must be a positive integer.
inline std::size_t scaled_extent(std::size_t n_in, double scale)
{
    require(n_in >= 1, "resample: empty image");
    require(std::isfinite(scale) && scale > 0.0, "resample: scale must be positive");
    const double exact = static_cast<double>(n_in) * scale;
    const double rounded = std::round(exact);
    if (rounded < 1.0 || std::abs(exact - rounded) > 1e-9 * std::max(1.0, exact))
        throw Error("resample: extent " + std::to_string(n_in) + " x scale " + std::to_string(scale) +
                    " is not an integer (non-divisible downscale)");
    return static_cast<std::size_t>(rounded);
}

/// Normalized taps for every output sample along one axis.
/// Output sample i is centred on source position (i + 0.5) * n_in / n_out - 0.5.
inline std::vector<std::vector<Tap>> compute_taps(std::size_t n_in, std::size_t n_out, KernelKind kernel,
                                                  bool antialias)
{
    require(n_in >= 1 && n_out >= 1, "resample: empty image");
    const double stretch =
        (antialias && n_out < n_in) ? static_cast<double>(n_out) / static_cast<double>(n_in) : 1.0;
    const double support = kernel_radius(kernel) / stretch;
    const auto in = static_cast<std::int64_t>(n_in);
    const auto out = static_cast<std::int64_t>(n_out);
    const double denom = 2.0 * static_cast<double>(out);

    std::vector<std::vector<Tap>> taps(n_out);
    std::vector<double> w;
    for (std::int64_t i = 0; i < out; ++i) {
        const double center = static_cast<double>((2 * i + 1) * in - out) / denom;
        const auto lo = static_cast<std::int64_t>(std::floor(center - support)) - 1;
        const auto hi = static_cast<std::int64_t>(std::ceil(center + support)) + 1;
        auto& row = taps[static_cast<std::size_t>(i)];
        w.clear();
        for (std::int64_t j = lo; j <= hi; ++j) {
            // distance numerator is an exact integer, so mirrored taps see equal |d|
            const std::int64_t num = 2 * j * out - (2 * i + 1) * in + out;
            const double x = static_cast<double>(num < 0 ? -num : num) / denom * stretch;
            const double k = kernel_value(kernel, x);
            if (k == 0.0) continue;
            const auto clamped = std::clamp<std::int64_t>(j, 0, in - 1);
            row.push_back({static_cast<std::size_t>(clamped), k});
            w.push_back(k);
        }
        const double total = detail::symmetric_sum(w.data(), w.size());
        require(total != 0.0, "resample: kernel has no support at an output sample");
        for (auto& t : row) t.weight /= total;
    }
    return taps;
}

/// Normalized weights of taps at integer offsets around a fractional source
/// position `phase` (taps at j - phase for every j inside the kernel support).
inline std::vector<double> phase_weights(KernelKind kernel, double phase)
{
    const double r = kernel_radius(kernel);
    std::vector<double> w;
    for (auto j = static_cast<std::int64_t>(std::floor(phase - r)); j <= static_cast<std::int64_t>(std::ceil(phase + r));
         ++j) {
        const double k = kernel_value(kernel, static_cast<double>(j) - phase);
        if (k != 0.0) w.push_back(k);
    }
    const double total = detail::symmetric_sum(w.data(), w.size());
    for (auto& v : w) v /= total;
    return w;
}

namespace detail {

inline void apply_taps(const float* src, std::size_t src_stride, float* dst, std::size_t dst_stride,
                       const std::vector<std::vector<Tap>>& taps, std::vector<double>& scratch)
{
    for (std::size_t i = 0; i < taps.size(); ++i) {
        const auto& row = taps[i];
        scratch.resize(row.size());
        for (std::size_t k = 0; k < row.size(); ++k)
            scratch[k] = row[k].weight * static_cast<double>(src[row[k].index * src_stride]);
        dst[i * dst_stride] = static_cast<float>(symmetric_sum(scratch.data(), scratch.size()));
    }
}

} // namespace detail

/// Separable resampling: along rows (width) first, then along columns.
inline Plane resample_plane(const Plane& image, const ResamplePlan& plan)
{
    require(image.height >= 1 && image.width >= 1 && image.values.size() == image.height * image.width,
            "resample: empty image");
    const std::size_t out_h = scaled_extent(image.height, plan.scale);
    const std::size_t out_w = scaled_extent(image.width, plan.scale);

    const auto col_taps = compute_taps(image.width, out_w, plan.kernel, plan.antialias);
    const auto row_taps = compute_taps(image.height, out_h, plan.kernel, plan.antialias);
    std::vector<double> scratch;

    Plane mid(image.height, out_w);
    for (std::size_t y = 0; y < image.height; ++y)
        detail::apply_taps(&image.values[y * image.width], 1, &mid.values[y * out_w], 1, col_taps, scratch);

    Plane out(out_h, out_w);
    for (std::size_t x = 0; x < out_w; ++x)
        detail::apply_taps(&mid.values[x], out_w, &out.values[x], out_w, row_taps, scratch);
    return out;
}

/// Per-band resampling; band count is preserved.
inline HsiCube resample_cube(const HsiCube& cube, const ResamplePlan& plan)
{
    require(!cube.empty(), "resample: empty cube");
    const std::size_t out_h = scaled_extent(cube.height(), plan.scale);
    const std::size_t out_w = scaled_extent(cube.width(), plan.scale);
    HsiCube out(cube.bands(), out_h, out_w);
    for (std::size_t l = 0; l < cube.bands(); ++l) out.set_band(l, resample_plane(cube.band_plane(l), plan));
    return out;
}

/// Bicubic (Keys, a = -0.5) resampling with anti-aliasing on downscale.
inline HsiCube bicubic(const HsiCube& cube, double scale)
{
    return resample_cube(cube, {scale, KernelKind::cubic, true});
}

inline Plane bicubic(const Plane& image, double scale)
{
    return resample_plane(image, {scale, KernelKind::cubic, true});
}

struct DegradedPair {
    HsiCube lr;
    HsiCube hr;
};

/// LR/HR training unit: lr = hr downscaled by 1/s with the given kernel.
inline DegradedPair degrade_pair(const HsiCube& hr, int s, KernelKind kernel)
{
    require(s >= 1, "degrade: scale factor must be >= 1");
    const auto su = static_cast<std::size_t>(s);
    if (hr.height() % su != 0 || hr.width() % su != 0)
        throw Error("degrade: " + std::to_string(hr.height()) + "x" + std::to_string(hr.width()) +
                    " is not divisible by scale " + std::to_string(s));
    HsiCube lr = resample_cube(hr, {1.0 / static_cast<double>(s), kernel, true});
    return {std::move(lr), hr};
}

} // namespace dualsr
