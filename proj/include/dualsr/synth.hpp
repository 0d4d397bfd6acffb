#pragma once

// Synthetic scenes from a linear mixing model: K smooth positive spectral
// signatures weighted by per-pixel abundances that sum to one. Abundances are
// a softmax over low-frequency random fields, so regions have soft edges and
// neighbouring bands stay strongly correlated.

#include <cmath>
#include <numbers>
#include <vector>

#include "dualsr/cube.hpp"
#include "dualsr/rng.hpp"

namespace dualsr {

struct SceneSpec {
    std::size_t bands = 16;
    std::size_t height = 64;
    std::size_t width = 64;
    std::size_t materials = 4;
    double smoothness = 3.0; // highest spatial frequency of the abundance fields, cycles per image
    std::uint64_t seed = 0;
};

struct Scene {
    HsiCube cube;
    std::vector<std::vector<double>> abundances; // [material][pixel], sums to 1 per pixel
    std::vector<std::vector<double>> signatures; // [material][band]
};

inline Scene generate_scene(const SceneSpec& spec)
{
    require(spec.materials >= 1, "synth: material count must be >= 1");
    require(spec.bands >= 1 && spec.height >= 8 && spec.width >= 8, "synth: degenerate dimensions (need >= 8 pixels)");
    require(spec.smoothness > 0.0, "synth: smoothness must be positive");

    Rng rng = Rng::stream(spec.seed, "synth");
    const std::size_t K = spec.materials, L = spec.bands, H = spec.height, W = spec.width, P = H * W;
    constexpr double two_pi = 2.0 * std::numbers::pi;

    Scene s;
    s.signatures.assign(K, std::vector<double>(L));
    for (auto& sig : s.signatures) {
        const double offset = rng.uniform(0.05, 0.3);
        double peaks[3][3];
        for (auto& pk : peaks) pk[0] = rng.uniform(0.2, 1.0), pk[1] = rng.uniform(-0.2, 1.2), pk[2] = rng.uniform(0.15, 0.4);
        for (std::size_t l = 0; l < L; ++l) {
            const double t = L == 1 ? 0.5 : static_cast<double>(l) / static_cast<double>(L - 1);
            double v = offset;
            for (const auto& pk : peaks) v += pk[0] * std::exp(-(t - pk[1]) * (t - pk[1]) / (2.0 * pk[2] * pk[2]));
            sig[l] = v;
        }
    }

    constexpr std::size_t waves = 6;
    constexpr double sharpness = 4.0;
    std::vector<std::vector<double>> field(K, std::vector<double>(P, 0.0));
    for (auto& f : field) {
        for (std::size_t m = 0; m < waves; ++m) {
            const double fx = rng.uniform(-spec.smoothness, spec.smoothness);
            const double fy = rng.uniform(-spec.smoothness, spec.smoothness);
            const double phase = rng.uniform(0.0, two_pi);
            const double amp = rng.uniform(0.5, 1.0);
            for (std::size_t y = 0; y < H; ++y)
                for (std::size_t x = 0; x < W; ++x)
                    f[y * W + x] += amp * std::cos(two_pi * (fx * static_cast<double>(x) / static_cast<double>(W) +
                                                             fy * static_cast<double>(y) / static_cast<double>(H)) +
                                                   phase);
        }
    }
    s.abundances.assign(K, std::vector<double>(P));
    for (std::size_t p = 0; p < P; ++p) {
        double mx = field[0][p];
        for (std::size_t k = 1; k < K; ++k) mx = std::max(mx, field[k][p]);
        double total = 0.0;
        for (std::size_t k = 0; k < K; ++k) total += s.abundances[k][p] = std::exp(sharpness * (field[k][p] - mx));
        for (std::size_t k = 0; k < K; ++k) s.abundances[k][p] /= total;
    }

    std::vector<double> mixed(L * P, 0.0);
    double peak = 0.0;
    for (std::size_t l = 0; l < L; ++l)
        for (std::size_t p = 0; p < P; ++p) {
            double v = 0.0;
            for (std::size_t k = 0; k < K; ++k) v += s.abundances[k][p] * s.signatures[k][l];
            mixed[l * P + p] = v;
            peak = std::max(peak, v);
        }
    std::vector<float> data(L * P);
    for (std::size_t n = 0; n < data.size(); ++n) data[n] = static_cast<float>(std::min(1.0, mixed[n] / peak));
    s.cube = HsiCube(L, H, W, std::move(data));
    return s;
}

inline HsiCube generate(const SceneSpec& spec) { return generate_scene(spec).cube; }

/// Mean Pearson correlation between consecutive bands across all pixels.
inline double mean_adjacent_band_correlation(const HsiCube& cube)
{
    if (cube.bands() < 2) return 1.0;
    const std::size_t P = cube.plane_size();
    double total = 0.0;
    for (std::size_t l = 0; l + 1 < cube.bands(); ++l) {
        const auto a = cube.band(l), b = cube.band(l + 1);
        double ma = 0, mb = 0;
        for (std::size_t p = 0; p < P; ++p) ma += a[p], mb += b[p];
        ma /= static_cast<double>(P);
        mb /= static_cast<double>(P);
        double sab = 0, saa = 0, sbb = 0;
        for (std::size_t p = 0; p < P; ++p) {
            sab += (a[p] - ma) * (b[p] - mb);
            saa += (a[p] - ma) * (a[p] - ma);
            sbb += (b[p] - mb) * (b[p] - mb);
        }
        total += (saa == 0.0 || sbb == 0.0) ? 1.0 : sab / std::sqrt(saa * sbb);
    }
    return total / static_cast<double>(cube.bands() - 1);
}

} // namespace dualsr
