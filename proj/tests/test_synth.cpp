#include <gtest/gtest.h>

#include "dualsr/metrics.hpp"
#include "dualsr/synth.hpp"

using namespace dualsr;

TEST(Synth, SameSeedSameCube)
{
    SceneSpec spec;
    spec.seed = 42;
    EXPECT_EQ(generate(spec), generate(spec));
    SceneSpec other = spec;
    other.seed = 43;
    EXPECT_NE(generate(spec), generate(other));
}

TEST(Synth, RangeAndAbundances)
{
    SceneSpec spec;
    spec.bands = 10;
    spec.height = 24;
    spec.width = 16;
    spec.seed = 3;
    const auto s = generate_scene(spec);
    EXPECT_EQ(dims_string(s.cube), "10x24x16");
    EXPECT_TRUE(s.cube.in_unit_range());
    EXPECT_TRUE(s.cube.all_finite());
    float peak = 0.0f;
    for (float v : s.cube.data()) peak = std::max(peak, v);
    EXPECT_EQ(peak, 1.0f);
    for (std::size_t p = 0; p < 24 * 16; ++p) {
        double sum = 0.0;
        for (const auto& a : s.abundances) {
            EXPECT_GE(a[p], 0.0);
            sum += a[p];
        }
        EXPECT_NEAR(sum, 1.0, 1e-12);
    }
    for (const auto& sig : s.signatures)
        for (double v : sig) EXPECT_GT(v, 0.0);
}

TEST(Synth, SingleMaterialIsRankOne)
{
    SceneSpec spec;
    spec.materials = 1;
    spec.seed = 5;
    const auto c = generate(spec);
    HsiCube scaled = c;
    for (auto& v : scaled.data()) v *= 0.5f;
    EXPECT_NEAR(sam_metric(c, scaled), 0.0, 1e-3);
    // every pixel has the same spectrum
    for (std::size_t l = 0; l < c.bands(); ++l)
        for (float v : c.band(l)) ASSERT_EQ(v, c.band(l)[0]);
}

TEST(Synth, AdjacentBandsAreStronglyCorrelated)
{
    double total = 0.0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        SceneSpec spec;
        spec.seed = seed;
        const double r = mean_adjacent_band_correlation(generate(spec));
        EXPECT_GE(r, 0.9) << "seed " << seed;
        total += r;
    }
    RecordProperty("mean_correlation", std::to_string(total / 20));
}

TEST(Synth, DegenerateSpecsAreRejected)
{
    SceneSpec spec;
    spec.height = 4;
    EXPECT_THROW(generate(spec), Error);
    spec = {};
    spec.materials = 0;
    EXPECT_THROW(generate(spec), Error);
}
