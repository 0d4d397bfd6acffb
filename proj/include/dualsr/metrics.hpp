#pragma once

#include <cmath>
#include <numbers>
#include <vector>

#include "dualsr/backprojection.hpp"
#include "dualsr/cube.hpp"

namespace dualsr {

constexpr double psnr_cap_db = 100.0;

struct MetricReport {
    double psnr = 0.0; // dB, mean of per-band values
    double ssim = 0.0; // mean of per-band values
    double sam = 0.0;  // degrees, mean per-pixel angle
    std::vector<double> band_psnr;
    std::vector<double> band_ssim;
};

namespace detail {

inline void check_pair(const HsiCube& ref, const HsiCube& test, const char* what)
{
    require(ref.same_dims(test),
            std::string(what) + ": dimension mismatch " + dims_string(ref) + " vs " + dims_string(test));
}

} // namespace detail

/// Per-band PSNR with MAX = 1; a zero-MSE band scores the 100 dB cap.
inline std::vector<double> band_psnr(const HsiCube& ref, const HsiCube& test)
{
    detail::check_pair(ref, test, "psnr");
    std::vector<double> out(ref.bands());
    for (std::size_t l = 0; l < ref.bands(); ++l) {
        const auto a = ref.band(l), b = test.band(l);
        double se = 0.0;
        for (std::size_t k = 0; k < a.size(); ++k) {
            const double d = static_cast<double>(a[k]) - b[k];
            se += d * d;
        }
        const double mse = se / static_cast<double>(a.size());
        out[l] = mse == 0.0 ? psnr_cap_db : std::min(psnr_cap_db, 10.0 * std::log10(1.0 / mse));
    }
    return out;
}

inline double psnr(const HsiCube& ref, const HsiCube& test)
{
    const auto b = band_psnr(ref, test);
    double s = 0.0;
    for (double v : b) s += v;
    return s / static_cast<double>(b.size());
}

namespace detail {

inline std::vector<double> gaussian_window(std::size_t size = 11, double sigma = 1.5)
{
    std::vector<double> g(size * size);
    const double c = static_cast<double>(size - 1) / 2.0;
    double total = 0.0;
    for (std::size_t y = 0; y < size; ++y)
        for (std::size_t x = 0; x < size; ++x) {
            const double dy = static_cast<double>(y) - c, dx = static_cast<double>(x) - c;
            total += g[y * size + x] = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
        }
    for (auto& v : g) v /= total;
    return g;
}

} // namespace detail

/// Per-band SSIM: 11x11 Gaussian window (sigma 1.5), K1 = 0.01, K2 = 0.03,
/// dynamic range 1, averaged over valid (fully inside) window positions.
inline std::vector<double> band_ssim(const HsiCube& ref, const HsiCube& test)
{
    detail::check_pair(ref, test, "ssim");
    constexpr std::size_t win = 11;
    require(ref.height() >= win && ref.width() >= win, "ssim: image smaller than the 11x11 window");
    constexpr double C1 = 0.01 * 0.01, C2 = 0.03 * 0.03;
    static const std::vector<double> g = detail::gaussian_window(win, 1.5);

    const std::size_t H = ref.height(), W = ref.width();
    std::vector<double> out(ref.bands());
    for (std::size_t l = 0; l < ref.bands(); ++l) {
        const auto a = ref.band(l), b = test.band(l);
        double acc = 0.0;
        for (std::size_t y0 = 0; y0 + win <= H; ++y0)
            for (std::size_t x0 = 0; x0 + win <= W; ++x0) {
                double mx = 0, my = 0, xx = 0, yy = 0, xy = 0;
                for (std::size_t y = 0; y < win; ++y)
                    for (std::size_t x = 0; x < win; ++x) {
                        const double w = g[y * win + x];
                        const double u = a[(y0 + y) * W + x0 + x], v = b[(y0 + y) * W + x0 + x];
                        mx += w * u;
                        my += w * v;
                        xx += w * u * u;
                        yy += w * v * v;
                        xy += w * u * v;
                    }
                const double vx = xx - mx * mx, vy = yy - my * my, cxy = xy - mx * my;
                acc += ((2 * mx * my + C1) * (2 * cxy + C2)) / ((mx * mx + my * my + C1) * (vx + vy + C2));
            }
        out[l] = acc / static_cast<double>((H - win + 1) * (W - win + 1));
    }
    return out;
}

inline double ssim(const HsiCube& ref, const HsiCube& test)
{
    const auto b = band_ssim(ref, test);
    double s = 0.0;
    for (double v : b) s += v;
    return s / static_cast<double>(b.size());
}

/// Mean per-pixel spectral angle in degrees.
inline double sam_metric(const HsiCube& ref, const HsiCube& test)
{
    detail::check_pair(ref, test, "sam");
    return spectral_angle(ref, test, SamMode::per_pixel) * 180.0 / std::numbers::pi;
}

inline MetricReport evaluate(const HsiCube& ref, const HsiCube& test)
{
    MetricReport r;
    r.band_psnr = band_psnr(ref, test);
    r.band_ssim = band_ssim(ref, test);
    for (double v : r.band_psnr) r.psnr += v;
    for (double v : r.band_ssim) r.ssim += v;
    r.psnr /= static_cast<double>(r.band_psnr.size());
    r.ssim /= static_cast<double>(r.band_ssim.size());
    r.sam = sam_metric(ref, test);
    return r;
}

} // namespace dualsr
