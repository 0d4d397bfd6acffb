#pragma once

#include <cmath>
#include <functional>
#include <numeric>
#include <vector>

#include "dualsr/autodiff/optim.hpp"
#include "dualsr/coarse_net.hpp"
#include "dualsr/resample.hpp"
#include "dualsr/rng.hpp"

namespace dualsr {

struct TrainConfig {
    std::size_t epochs = 1;
    std::size_t batch = 64;
    std::uint64_t seed = 0;
    double base_lr = 1e-4;
    /// Weight of the auxiliary L1 term on the s/2 tap (target: HR bicubic-halved).
    /// 0 trains the full-scale output only.
    double tap_weight = 0.0;
};

struct TrainReport {
    std::vector<double> epoch_loss;     // mean full-scale L1 over every (batch, band) step of the epoch
    std::vector<double> epoch_tap_loss; // same for the s/2 tap (0 when tap_weight is 0)
};

/// Checks that every pair shares band count and that HR = scale x LR.
inline void validate_dataset(const std::vector<DegradedPair>& data, int scale)
{
    require(!data.empty(), "train: empty dataset");
    const std::size_t L = data.front().lr.bands();
    require(L >= 5, "train: need at least 5 bands");
    const auto s = static_cast<std::size_t>(scale);
    for (const auto& p : data) {
        require(p.lr.bands() == L && p.hr.bands() == L, "train: inconsistent dataset (band counts differ)");
        require(p.hr.height() == p.lr.height() * s && p.hr.width() == p.lr.width() * s,
                "train: inconsistent dataset (HR " + dims_string(p.hr) + " is not x" + std::to_string(scale) +
                    " of LR " + dims_string(p.lr) + ")");
    }
}

/// Mini-batch training with an optimizer step per band: for each batch, bands
/// 1..L are visited in order; at band i every sample contributes its L1 loss
/// against HR band i, the batch mean is back-propagated and ADAM steps once.
/// Batches are drawn from a per-epoch shuffle of the dataset.
///
/// With tap_weight > 0 the objective adds tap_weight * L1 between the s/2
/// output (same trunk, one upsampler stage fewer) and the HR band bicubic-
/// downscaled by 2, so the fine stage's V is a supervised reconstruction.
template <typename T>
TrainReport train(CoarseModel<T>& model, const std::vector<DegradedPair>& data, const TrainConfig& cfg,
                  const std::function<void(std::size_t epoch, double loss)>& on_epoch = {})
{
    TrainReport report;
    if (cfg.epochs == 0) return report;
    validate_dataset(data, model.config.scale);
    require(cfg.batch >= 1, "train: batch must be >= 1");

    Rng shuffle_rng = Rng::stream(cfg.seed, "shuffle");
    ad::AdamState adam;
    auto& params = model.parameters();
    const std::size_t L = data.front().lr.bands();

    const bool use_tap = cfg.tap_weight > 0.0;
    std::vector<HsiCube> hr_half;
    if (use_tap)
        for (const auto& p : data) hr_half.push_back(bicubic(p.hr, 0.5));
    const auto tap_scale = ad::Tensor<T>::scalar(static_cast<T>(cfg.tap_weight));
    const std::size_t stages = model.config.upsample_stages();

    std::vector<std::size_t> order(data.size());
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        adam.learning_rate = ad::lr_schedule(epoch, cfg.base_lr);
        std::iota(order.begin(), order.end(), std::size_t{0});
        for (std::size_t k = order.size(); k > 1; --k) std::swap(order[k - 1], order[shuffle_rng.below(k)]);

        double epoch_sum = 0.0, epoch_tap = 0.0;
        std::size_t epoch_steps = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch) {
            const std::size_t stop = std::min(order.size(), start + cfg.batch);
            const auto inv_batch = ad::Tensor<T>::scalar(static_cast<T>(1.0 / static_cast<double>(stop - start)));
            std::vector<FcfState<T>> states(stop - start);

            for (std::size_t band = 1; band <= L; ++band) {
                model.zero_grad();
                double step_loss = 0.0, step_tap = 0.0;
                for (std::size_t b = start; b < stop; ++b) {
                    const auto& pair = data[order[b]];
                    const Plane lr_band = pair.lr.band_plane(band - 1);
                    auto features = band_features(model, pair.lr, band, states[b - start]);
                    auto pred = upsample_head(model, features, stages, lr_band);
                    auto hr = pair.hr.band(band - 1);
                    ad::Tensor<T> target(pred.shape(), std::vector<T>(hr.begin(), hr.end()));
                    auto loss = ad::scalar_mul(inv_batch, ad::l1_loss(pred, target));
                    const double value = static_cast<double>(loss.values()[0]);
                    if (!std::isfinite(value)) throw Error("train: non-finite loss");
                    step_loss += value;
                    if (use_tap) {
                        auto tap = upsample_head(model, features, stages - 1, lr_band);
                        auto half = hr_half[order[b]].band(band - 1);
                        ad::Tensor<T> tap_target(tap.shape(), std::vector<T>(half.begin(), half.end()));
                        auto tap_loss = ad::scalar_mul(inv_batch, ad::l1_loss(tap, tap_target));
                        const double tv = static_cast<double>(tap_loss.values()[0]);
                        if (!std::isfinite(tv)) throw Error("train: non-finite loss");
                        step_tap += tv;
                        loss = ad::add(loss, ad::scalar_mul(tap_scale, tap_loss));
                    }
                    loss.backward();
                }
                ad::adam_step(params, adam);
                epoch_sum += step_loss;
                epoch_tap += step_tap;
                ++epoch_steps;
            }
        }
        report.epoch_loss.push_back(epoch_sum / static_cast<double>(epoch_steps));
        report.epoch_tap_loss.push_back(epoch_tap / static_cast<double>(epoch_steps));
        if (on_epoch) on_epoch(epoch, report.epoch_loss.back());
    }
    return report;
}

} // namespace dualsr
