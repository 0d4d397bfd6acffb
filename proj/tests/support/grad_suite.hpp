#pragma once

// Randomized finite-difference checks for every autodiff op and for the full
// coarse network on a 5-band micro cube. Shared by the unit tests and the
// acceptance runner.

#include <string>
#include <vector>

#include "dualsr/coarse_net.hpp"
#include "support/fixtures.hpp"
#include "support/gradcheck.hpp"

namespace dualsr::testing {

struct OpCheck {
    std::string op;
    double max_rel_error = 0.0;
    std::size_t checked = 0;
};

namespace detail {

/// Values bounded away from 0 by `gap`, so a +-h probe never crosses a kink.
inline TensorD away_from_zero(Rng& rng, ad::Shape shape, double gap)
{
    auto t = random_tensor(rng, std::move(shape));
    for (auto& v : t.values()) v = (v < 0 ? -1.0 : 1.0) * (gap + std::abs(v));
    return t;
}

inline std::size_t dim_in(Rng& rng, std::size_t lo, std::size_t hi) { return lo + rng.below(hi - lo + 1); }

inline void merge(OpCheck& into, const GradCheckResult& r)
{
    into.max_rel_error = std::max(into.max_rel_error, r.max_rel_error);
    into.checked += r.checked;
}

} // namespace detail

/// Runs `trials` randomized checks per op (tensors up to 4x8x8, step 1e-3).
inline std::vector<OpCheck> op_gradient_suite(std::size_t trials, std::uint64_t seed = 1)
{
    using detail::dim_in;
    Rng rng(seed);
    std::vector<OpCheck> out;
    auto run = [&](const std::string& name, auto&& make_trial) {
        OpCheck c{name};
        for (std::size_t t = 0; t < trials; ++t) detail::merge(c, make_trial());
        out.push_back(c);
    };

    run("conv2d", [&] {
        const std::size_t ci = dim_in(rng, 1, 4), co = dim_in(rng, 1, 4), h = dim_in(rng, 1, 8), w = dim_in(rng, 1, 8);
        const std::size_t k = rng.below(2) ? 3 : 1;
        auto wts = random_weights(rng, co * h * w);
        return grad_check([&](const std::vector<TensorD>& in) { return weighted_sum(ad::conv2d(in[0], in[1], in[2]), wts); },
                          {random_tensor(rng, {ci, h, w}), random_tensor(rng, {co, ci, k, k}), random_tensor(rng, {co})});
    });
    run("conv3d", [&] {
        const std::size_t ci = dim_in(rng, 1, 3), co = dim_in(rng, 1, 3), d = dim_in(rng, 1, 3), h = dim_in(rng, 1, 6),
                          w = dim_in(rng, 1, 6);
        auto wts = random_weights(rng, co * d * h * w);
        return grad_check([&](const std::vector<TensorD>& in) { return weighted_sum(ad::conv3d(in[0], in[1], in[2]), wts); },
                          {random_tensor(rng, {ci, d, h, w}), random_tensor(rng, {co, ci, 3, 3, 3}), random_tensor(rng, {co})});
    });
    run("conv3d_separable", [&] {
        const std::size_t c = dim_in(rng, 1, 4), d = dim_in(rng, 1, 3), h = dim_in(rng, 1, 8), w = dim_in(rng, 1, 8);
        const std::size_t n = c * d * h * w;
        auto w1 = random_weights(rng, n), w2 = random_weights(rng, n);
        return grad_check(
            [&](const std::vector<TensorD>& in) {
                auto [a, b] = ad::conv3d_separable(in[0], in[1], in[2], in[3], in[4]);
                return ad::add(weighted_sum(a, w1), weighted_sum(b, w2));
            },
            {random_tensor(rng, {c, d, h, w}), random_tensor(rng, {c, c, 3, 1, 1}), random_tensor(rng, {c}),
             random_tensor(rng, {c, c, 1, 3, 3}), random_tensor(rng, {c})});
    });
    run("pixel_shuffle", [&] {
        const std::size_t c = dim_in(rng, 1, 2), h = dim_in(rng, 1, 4), w = dim_in(rng, 1, 4);
        auto wts = random_weights(rng, 4 * c * h * w);
        return grad_check([&](const std::vector<TensorD>& in) { return weighted_sum(ad::pixel_shuffle(in[0], 2), wts); },
                          {random_tensor(rng, {4 * c, h, w})});
    });
    run("pixel_unshuffle", [&] {
        const std::size_t c = dim_in(rng, 1, 4), h = 2 * dim_in(rng, 1, 4), w = 2 * dim_in(rng, 1, 4);
        auto wts = random_weights(rng, c * h * w);
        return grad_check([&](const std::vector<TensorD>& in) { return weighted_sum(ad::pixel_unshuffle(in[0], 2), wts); },
                          {random_tensor(rng, {c, h, w})});
    });
    run("relu", [&] {
        const std::size_t c = dim_in(rng, 1, 4), h = dim_in(rng, 1, 8), w = dim_in(rng, 1, 8);
        auto wts = random_weights(rng, c * h * w);
        return grad_check([&](const std::vector<TensorD>& in) { return weighted_sum(ad::relu(in[0]), wts); },
                          {detail::away_from_zero(rng, {c, h, w}, 0.01)});
    });
    run("add", [&] {
        const std::size_t c = dim_in(rng, 1, 4), h = dim_in(rng, 1, 8), w = dim_in(rng, 1, 8);
        auto wts = random_weights(rng, c * h * w);
        return grad_check([&](const std::vector<TensorD>& in) { return weighted_sum(ad::add(in[0], in[1]), wts); },
                          {random_tensor(rng, {c, h, w}), random_tensor(rng, {c, h, w})});
    });
    run("scalar_mul", [&] {
        const std::size_t c = dim_in(rng, 1, 4), h = dim_in(rng, 1, 8), w = dim_in(rng, 1, 8);
        auto wts = random_weights(rng, c * h * w);
        return grad_check([&](const std::vector<TensorD>& in) { return weighted_sum(ad::scalar_mul(in[0], in[1]), wts); },
                          {random_tensor(rng, {1}), random_tensor(rng, {c, h, w})});
    });
    run("concat_channels", [&] {
        const std::size_t a = dim_in(rng, 1, 3), b = dim_in(rng, 1, 3), h = dim_in(rng, 1, 8), w = dim_in(rng, 1, 8);
        auto wts = random_weights(rng, (a + b) * h * w);
        return grad_check([&](const std::vector<TensorD>& in) { return weighted_sum(ad::concat_channels<double>({in[0], in[1]}), wts); },
                          {random_tensor(rng, {a, h, w}), random_tensor(rng, {b, h, w})});
    });
    run("reshape", [&] {
        const std::size_t c = dim_in(rng, 1, 4), h = dim_in(rng, 1, 8), w = dim_in(rng, 1, 8);
        auto wts = random_weights(rng, c * h * w);
        return grad_check([&](const std::vector<TensorD>& in) { return weighted_sum(ad::reshape(in[0], {c * h, w}), wts); },
                          {random_tensor(rng, {c, h, w})});
    });
    run("transpose", [&] {
        const std::size_t a = dim_in(rng, 1, 3), b = dim_in(rng, 1, 4), h = dim_in(rng, 1, 4), w = dim_in(rng, 1, 4);
        const std::size_t ax = rng.below(4), bx = rng.below(4);
        auto wts = random_weights(rng, a * b * h * w);
        return grad_check([&](const std::vector<TensorD>& in) { return weighted_sum(ad::transpose(in[0], ax, bx), wts); },
                          {random_tensor(rng, {a, b, h, w})});
    });
    run("l1_loss", [&] {
        const std::size_t c = dim_in(rng, 1, 4), h = dim_in(rng, 1, 8), w = dim_in(rng, 1, 8);
        auto pred = random_tensor(rng, {c, h, w});
        auto gap = detail::away_from_zero(rng, {c, h, w}, 0.01);
        std::vector<double> t(pred.values());
        for (std::size_t k = 0; k < t.size(); ++k) t[k] += gap.values()[k];
        return grad_check([&](const std::vector<TensorD>& in) { return ad::l1_loss(in[0], in[1]); },
                          {pred, TensorD({c, h, w}, t, true)});
    });
    return out;
}

/// End-to-end check of the whole coarse network on a 5-band micro cube:
/// every parameter's gradient of the total L1 loss of all five SR bands
/// against a random target, with the band-to-band feature context kept in
/// the graph.
inline OpCheck network_gradient_check(std::uint64_t seed = 3, double h = 1e-5)
{
    CoarseConfig cfg;
    cfg.channels = 2;
    cfg.scale = 2;
    auto model = CoarseModel<float>::initialize(cfg, seed).cast<double>();
    // non-zero biases so every bias path carries signal
    Rng rng(seed + 100);
    for (auto& p : model.parameters())
        for (auto& v : p.values()) v += rng.uniform(-0.05, 0.05);
    const auto lr = random_cube(5, 4, 4, seed);
    const auto target = random_cube(5, 8, 8, seed + 1);

    auto f = [&](const std::vector<TensorD>&) {
        FcfState<double> state;
        state.detach = false;
        TensorD total = TensorD::scalar(0.0);
        for (std::size_t i = 1; i <= 5; ++i) {
            auto hr = target.band(i - 1);
            TensorD t({1, 8, 8}, std::vector<double>(hr.begin(), hr.end()));
            total = ad::add(total, ad::l1_loss(sr_band_tensor(model, lr, i, state), t));
        }
        return total;
    };
    const auto r = grad_check(f, model.parameters(), h);
    return {"coarse network (5 bands)", r.max_rel_error, r.checked};
}

} // namespace dualsr::testing
