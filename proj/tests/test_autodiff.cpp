#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "dualsr/autodiff/checkpoint.hpp"
#include "dualsr/autodiff/ops.hpp"
#include "dualsr/autodiff/optim.hpp"
#include "support/fixtures.hpp"
#include "support/grad_suite.hpp"

using namespace dualsr;
using dualsr::testing::TempDir;
using dualsr::testing::TensorD;
using TensorF = ad::Tensor<float>;

TEST(Tensor, ShapeMismatchIsRejected)
{
    EXPECT_THROW(TensorF({2, 2}, {1.0f, 2.0f, 3.0f}), Error);
    EXPECT_THROW(ad::add(TensorF::zeros({2}), TensorF::zeros({3})), Error);
    EXPECT_THROW(ad::l1_loss(TensorF::zeros({2}), TensorF::zeros({3})), Error);
    EXPECT_THROW(ad::concat_channels<float>({TensorF::zeros({1, 2, 2}), TensorF::zeros({1, 3, 2})}), Error);
    EXPECT_THROW(ad::reshape(TensorF::zeros({2, 3}), {5}), Error);
}

TEST(Conv2d, DeltaKernelIsIdentity)
{
    Rng rng(1);
    auto x = dualsr::testing::random_tensor(rng, {1, 5, 6}, false);
    std::vector<double> w(9, 0.0);
    w[4] = 1.0;
    auto y = ad::conv2d(x, TensorD({1, 1, 3, 3}, w), TensorD::zeros({1}));
    EXPECT_EQ(y.values(), x.values());
}

TEST(Conv2d, PointwiseOnesIsChannelSum)
{
    TensorF x({2, 2, 2}, {1, 2, 3, 4, 10, 20, 30, 40});
    auto y = ad::conv2d(x, TensorF({1, 2, 1, 1}, {1, 1}), TensorF::zeros({1}));
    EXPECT_EQ(y.shape(), (ad::Shape{1, 2, 2}));
    EXPECT_EQ(y.values(), (std::vector<float>{11, 22, 33, 44}));
}

TEST(Conv2d, ZeroPaddingAtBorders)
{
    // 3x3 all-ones kernel on a ones image counts in-bounds neighbours.
    auto y = ad::conv2d(TensorF({1, 3, 3}, std::vector<float>(9, 1.0f)), TensorF({1, 1, 3, 3}, std::vector<float>(9, 1.0f)),
                        TensorF::zeros({1}));
    EXPECT_EQ(y.values(), (std::vector<float>{4, 6, 4, 6, 9, 6, 4, 6, 4}));
}

TEST(Conv2d, ChannelMismatchAndEvenKernelAreRejected)
{
    EXPECT_THROW(ad::conv2d(TensorF::zeros({2, 3, 3}), TensorF::zeros({1, 3, 3, 3}), TensorF::zeros({1})), Error);
    EXPECT_THROW(ad::conv2d(TensorF::zeros({1, 3, 3}), TensorF::zeros({1, 1, 2, 2}), TensorF::zeros({1})), Error);
}

TEST(Conv3dSeparable, SpectralDeltaIsIdentity)
{
    Rng rng(2);
    auto x = dualsr::testing::random_tensor(rng, {1, 3, 4, 4}, false);
    auto [spec, spat] = ad::conv3d_separable(x, TensorD({1, 1, 3, 1, 1}, {0, 1, 0}), TensorD::zeros({1}),
                                             TensorD::zeros({1, 1, 1, 3, 3}), TensorD::zeros({1}));
    EXPECT_EQ(spec.values(), x.values());
    for (double v : spat.values()) EXPECT_EQ(v, 0.0);
}

TEST(Conv3dSeparable, SpectralOnesIsDepthNeighbourhoodSum)
{
    TensorF x({1, 3, 1, 1}, {1, 2, 4});
    auto [spec, spat] = ad::conv3d_separable(x, TensorF({1, 1, 3, 1, 1}, {1, 1, 1}), TensorF::zeros({1}),
                                             TensorF::zeros({1, 1, 1, 3, 3}), TensorF::zeros({1}));
    EXPECT_EQ(spec.values(), (std::vector<float>{3, 7, 6}));
}

TEST(Conv3dSeparable, WrongKernelShapesAreRejected)
{
    auto x = TensorF::zeros({1, 3, 2, 2});
    EXPECT_THROW(ad::conv3d_separable(x, TensorF::zeros({1, 1, 1, 3, 3}), TensorF::zeros({1}),
                                      TensorF::zeros({1, 1, 1, 3, 3}), TensorF::zeros({1})),
                 Error);
}

TEST(PixelShuffle, Layout)
{
    TensorF x({4, 1, 1}, {1, 2, 3, 4}); // a, b, c, d
    auto y = ad::pixel_shuffle(x, 2);
    EXPECT_EQ(y.shape(), (ad::Shape{1, 2, 2}));
    EXPECT_EQ(y.values(), (std::vector<float>{1, 2, 3, 4}));

    // two pixels wide: channel blocks interleave per pixel
    TensorF x2({4, 1, 2}, {1, 5, 2, 6, 3, 7, 4, 8});
    EXPECT_EQ(ad::pixel_shuffle(x2, 2).values(), (std::vector<float>{1, 2, 5, 6, 3, 4, 7, 8}));
}

TEST(PixelShuffle, UnshuffleIsInverse)
{
    Rng rng(4);
    for (std::size_t r : {1u, 2u, 3u}) {
        auto x = dualsr::testing::random_tensor(rng, {2 * r * r, 3, 5}, false);
        EXPECT_EQ(ad::pixel_unshuffle(ad::pixel_shuffle(x, r), r).values(), x.values());
    }
    EXPECT_THROW(ad::pixel_shuffle(TensorF::zeros({3, 2, 2}), 2), Error);
}

TEST(PixelShuffle, GradientIsUnshuffleOfUpstream)
{
    Rng rng(5);
    auto x = dualsr::testing::random_tensor(rng, {8, 2, 3});
    auto up = dualsr::testing::random_weights(rng, 2 * 4 * 6);
    dualsr::testing::weighted_sum(ad::pixel_shuffle(x, 2), up).backward();
    auto expected = ad::pixel_unshuffle(TensorD({2, 4, 6}, up), 2);
    EXPECT_EQ(x.grad(), expected.values());
}

TEST(Elementwise, ReluAndScalarMul)
{
    auto y = ad::relu(TensorF({3}, {-1.0f, 0.0f, 2.0f}, true));
    EXPECT_EQ(y.values(), (std::vector<float>{0, 0, 2}));
    TensorF x({3}, {-1.0f, 0.0f, 2.0f}, true);
    ad::relu(x).backward();
    EXPECT_EQ(x.grad(), (std::vector<float>{0, 0, 1})); // subgradient at 0 is 0

    TensorF w = TensorF::scalar(0.0f, true);
    TensorF v({2}, {3.0f, -4.0f}, true);
    auto z = ad::scalar_mul(w, v);
    EXPECT_EQ(z.values(), (std::vector<float>{0, 0}));
    z.backward();
    EXPECT_EQ(w.grad()[0], -1.0f); // sum(x * upstream) with upstream ones
}

TEST(Elementwise, ConcatShapes)
{
    auto y = ad::concat_channels<float>({TensorF::zeros({2, 4, 4}), TensorF::zeros({3, 4, 4})});
    EXPECT_EQ(y.shape(), (ad::Shape{5, 4, 4}));
}

TEST(Elementwise, TransposeSwapsAxes)
{
    TensorF x({2, 3}, {1, 2, 3, 4, 5, 6});
    auto y = ad::transpose(x, 0, 1);
    EXPECT_EQ(y.shape(), (ad::Shape{3, 2}));
    EXPECT_EQ(y.values(), (std::vector<float>{1, 4, 2, 5, 3, 6}));
}

TEST(L1Loss, Values)
{
    EXPECT_EQ(ad::l1_loss(TensorF({2}, {0.3f, 0.7f}), TensorF({2}, {0.3f, 0.7f})).values()[0], 0.0f);
    EXPECT_EQ(ad::l1_loss(TensorF({2}, {0.0f, 1.0f}), TensorF({2}, {1.0f, 1.0f})).values()[0], 0.5f);
    TensorF p({2}, {0.0f, 1.0f}, true);
    ad::l1_loss(p, TensorF({2}, {1.0f, 1.0f})).backward();
    EXPECT_EQ(p.grad(), (std::vector<float>{-0.5f, 0.0f})); // tie -> 0
}

TEST(Backward, GradientsAccumulateWhenReused)
{
    TensorD x({3}, {1.0, -2.0, 0.5}, true);
    auto y = ad::add(x, x);
    dualsr::testing::weighted_sum(y, {1.0, 2.0, 3.0}).backward();
    EXPECT_EQ(x.grad(), (std::vector<double>{2.0, 4.0, 6.0}));

    // a second backward adds on top
    dualsr::testing::weighted_sum(ad::relu(x), {1.0, 1.0, 1.0}).backward();
    EXPECT_EQ(x.grad(), (std::vector<double>{3.0, 4.0, 7.0}));
    x.zero_grad();
    EXPECT_FALSE(x.has_grad());
}

TEST(Backward, DetachCutsTheGraph)
{
    TensorD x({2}, {1.0, 2.0}, true);
    auto y = ad::add(x.detach(), x);
    dualsr::testing::weighted_sum(y, {1.0, 1.0}).backward();
    EXPECT_EQ(x.grad(), (std::vector<double>{1.0, 1.0}));
}

TEST(GradCheck, EveryOpMatchesFiniteDifferences)
{
    for (const auto& c : dualsr::testing::op_gradient_suite(100)) {
        EXPECT_LT(c.max_rel_error, 1e-4) << c.op;
        EXPECT_GT(c.checked, 0u) << c.op;
    }
}

TEST(GradCheck, CoarseNetworkMatchesFiniteDifferences)
{
    const auto c = dualsr::testing::network_gradient_check();
    EXPECT_LT(c.max_rel_error, 1e-3);
    EXPECT_GT(c.checked, 500u);
}

TEST(Fuzz, FiniteInputsGiveFiniteOutputs)
{
    Rng rng(9);
    for (int t = 0; t < 50; ++t) {
        auto x = dualsr::testing::random_tensor(rng, {2, 4, 4}, true, -1e3, 1e3);
        auto w = dualsr::testing::random_tensor(rng, {8, 2, 3, 3}, true, -1e3, 1e3);
        auto y = ad::pixel_shuffle(ad::relu(ad::conv2d(x, w, TensorD::zeros({8}, true))), 2);
        auto loss = ad::l1_loss(y, TensorD::zeros(y.shape()));
        loss.backward();
        for (double v : y.values()) ASSERT_TRUE(std::isfinite(v));
        for (double v : x.grad()) ASSERT_TRUE(std::isfinite(v));
        for (double v : w.grad()) ASSERT_TRUE(std::isfinite(v));
    }
}

TEST(Adam, FirstStepMovesByLearningRate)
{
    std::vector<TensorD> params{TensorD({4}, {0.1, 0.2, 0.3, 0.4}, true)};
    for (auto& g : params[0].grad_buffer()) g = 1.0;
    const std::vector<double> before = params[0].values();
    ad::AdamState state;
    ad::adam_step(params, state);
    EXPECT_EQ(state.step, 1u);
    for (std::size_t k = 0; k < 4; ++k)
        EXPECT_LT(std::abs((params[0].values()[k] - before[k]) + 1e-4), 1e-8);
}

TEST(Adam, ZeroGradientLeavesParameters)
{
    std::vector<TensorD> params{TensorD({3}, {1.0, 2.0, 3.0}, true)};
    params[0].grad_buffer();
    ad::AdamState state;
    for (int k = 0; k < 3; ++k) ad::adam_step(params, state);
    EXPECT_EQ(params[0].values(), (std::vector<double>{1.0, 2.0, 3.0}));
    EXPECT_EQ(state.step, 3u);
}

TEST(Adam, NonFiniteGradientIsRejected)
{
    std::vector<TensorF> params{TensorF({1}, {1.0f}, true)};
    params[0].grad_buffer()[0] = std::numeric_limits<float>::infinity();
    ad::AdamState state;
    EXPECT_THROW(ad::adam_step(params, state), Error);
    EXPECT_EQ(state.step, 0u);
}

TEST(Adam, RunsAreDeterministic)
{
    auto run = [] {
        Rng rng(3);
        std::vector<TensorF> params{TensorF({16}, std::vector<float>(16, 0.5f), true)};
        ad::AdamState state;
        for (int s = 0; s < 20; ++s) {
            params[0].zero_grad();
            for (auto& g : params[0].grad_buffer()) g = static_cast<float>(rng.uniform(-1, 1));
            ad::adam_step(params, state);
        }
        return params[0].values();
    };
    EXPECT_EQ(run(), run());
}

TEST(Schedule, HalvesEveryThirtyEpochs)
{
    EXPECT_DOUBLE_EQ(ad::lr_schedule(0), 1e-4);
    EXPECT_DOUBLE_EQ(ad::lr_schedule(29), 1e-4);
    EXPECT_DOUBLE_EQ(ad::lr_schedule(30), 5e-5);
    EXPECT_DOUBLE_EQ(ad::lr_schedule(90), 1.25e-5);
}

TEST(Checkpoint, RoundtripIsBitExact)
{
    TempDir dir("ckpt");
    ad::Checkpoint ck;
    ck.header["format"] = "test";
    ck.arrays.push_back({"a", {2, 3}, {1, 2, 3, 4, 5, 6.5f}});
    ck.arrays.push_back({"b", {1}, {-0.125f}});
    ad::save_checkpoint(ck, dir / "m.ckpt");
    const auto back = ad::load_checkpoint(dir / "m.ckpt");
    EXPECT_EQ(back.header.at("format"), "test");
    ASSERT_EQ(back.arrays.size(), 2u);
    EXPECT_EQ(back.arrays[0].shape, (ad::Shape{2, 3}));
    EXPECT_EQ(back.arrays[0].values, ck.arrays[0].values);
    EXPECT_EQ(back.arrays[1].values, ck.arrays[1].values);

    std::filesystem::resize_file(ad::payload_path(dir / "m.ckpt"), 8);
    EXPECT_THROW(ad::load_checkpoint(dir / "m.ckpt"), Error);
}
