#pragma once

// Coarse-stage network: each band is super-resolved from its neighboring-band
// groups. Per band i:
//
//   partition -> gather -> entry convs (1->C, 3->C, 3->C)
//     -> intra-group fusion (residual unit per branch, cross-branch 1x1 fuse)
//     -> inter-group fusion (depth-3 volume, 3x1x1 + 1x3x3, 1x3x3, fold, 1x1)
//     -> feature context fusion with the previous band's features
//     -> log2(s) sub-pixel x2 stages -> 3x3 projection to one channel
//     (+ bicubic upsample of the LR band when global_residual is on)
//
// Bands are processed sequentially so the previous band's fused features are
// available; FcfState carries them between calls.

#include <bit>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dualsr/autodiff/checkpoint.hpp"
#include "dualsr/autodiff/ops.hpp"
#include "dualsr/cube.hpp"
#include "dualsr/nbp.hpp"
#include "dualsr/resample.hpp"
#include "dualsr/rng.hpp"

namespace dualsr {

struct CoarseConfig {
    std::size_t channels = 64;
    std::size_t intra_stages = 1;
    int scale = 4;
    bool global_residual = true;

    void validate() const
    {
        require(channels >= 1, "coarse config: channels must be positive");
        require(intra_stages >= 1, "coarse config: intra_stages must be >= 1");
        require(scale >= 2 && std::has_single_bit(static_cast<unsigned>(scale)),
                "coarse config: scale must be a power of 2 (2, 4, 8, ...), got " + std::to_string(scale));
    }

    std::size_t upsample_stages() const { return static_cast<std::size_t>(std::countr_zero(static_cast<unsigned>(scale))); }

    bool operator==(const CoarseConfig&) const = default;
};

template <typename T>
class CoarseModel {
public:
    using Tensor = ad::Tensor<T>;

    CoarseConfig config;

    /// Fresh model: weights uniform in +-sqrt(1/fan_in), biases 0, FCF weights 0.5.
    static CoarseModel initialize(const CoarseConfig& cfg, std::uint64_t seed)
    {
        cfg.validate();
        CoarseModel m;
        m.config = cfg;
        Rng rng = Rng::stream(seed, "init");
        const std::size_t C = cfg.channels;

        auto conv = [&](const std::string& name, ad::Shape wshape) {
            std::size_t fan_in = 1;
            for (std::size_t k = 1; k < wshape.size(); ++k) fan_in *= wshape[k];
            const double bound = std::sqrt(1.0 / static_cast<double>(fan_in));
            std::vector<T> w(ad::numel(wshape));
            for (auto& v : w) v = static_cast<T>(rng.uniform(-bound, bound));
            const std::size_t c_out = wshape[0];
            m.add(name + ".w", Tensor(std::move(wshape), std::move(w), true));
            m.add(name + ".b", Tensor::zeros({c_out}, true));
        };

        conv("entry.g1", {C, 1, 3, 3});
        conv("entry.g2", {C, 3, 3, 3});
        conv("entry.g3", {C, 3, 3, 3});
        for (std::size_t s = 0; s < cfg.intra_stages; ++s) {
            for (std::size_t br = 1; br <= 3; ++br) {
                const std::string p = "intra." + std::to_string(s) + ".branch" + std::to_string(br);
                for (std::size_t blk = 1; blk <= 2; ++blk) {
                    conv(p + ".block" + std::to_string(blk) + ".conv1", {C, C, 3, 3});
                    conv(p + ".block" + std::to_string(blk) + ".conv2", {C, C, 3, 3});
                }
                conv(p + ".fuse", {C, 3 * C, 1, 1});
            }
        }
        conv("inter.spectral", {C, C, 3, 1, 1});
        conv("inter.spatial", {C, C, 1, 3, 3});
        conv("inter.refine", {C, C, 1, 3, 3});
        conv("inter.fold", {C, 3 * C, 1, 1});
        m.add("fcf.w1", Tensor::scalar(T(0.5), true));
        m.add("fcf.w2", Tensor::scalar(T(0.5), true));
        conv("fcf.conv", {C, 2 * C, 1, 1});
        for (std::size_t k = 0; k < cfg.upsample_stages(); ++k) conv("up." + std::to_string(k), {4 * C, C, 3, 3});
        conv("out", {1, C, 3, 3});
        return m;
    }

    const Tensor& param(const std::string& name) const
    {
        auto it = index_.find(name);
        require(it != index_.end(), "coarse model: no parameter '" + name + "'");
        return params_[it->second];
    }
    Tensor& param(const std::string& name)
    {
        auto it = index_.find(name);
        require(it != index_.end(), "coarse model: no parameter '" + name + "'");
        return params_[it->second];
    }

    std::vector<Tensor>& parameters() { return params_; }
    const std::vector<Tensor>& parameters() const { return params_; }
    const std::vector<std::string>& parameter_names() const { return names_; }

    std::size_t parameter_count() const
    {
        std::size_t n = 0;
        for (const auto& p : params_) n += p.numel();
        return n;
    }

    void zero_grad()
    {
        for (auto& p : params_) p.zero_grad();
    }

    /// Same architecture and values in another scalar type (e.g. the 64-bit
    /// shadow used for gradient checks).
    template <typename U>
    CoarseModel<U> cast() const
    {
        CoarseModel<U> out;
        out.config = config;
        for (std::size_t k = 0; k < params_.size(); ++k) {
            std::vector<U> v(params_[k].values().begin(), params_[k].values().end());
            out.add(names_[k], ad::Tensor<U>(params_[k].shape(), std::move(v), true));
        }
        return out;
    }

    ad::Checkpoint to_checkpoint() const
    {
        ad::Checkpoint ck;
        ck.header["format"] = "dualsr-coarse-1";
        ck.header["channels"] = std::to_string(config.channels);
        ck.header["intra_stages"] = std::to_string(config.intra_stages);
        ck.header["scale"] = std::to_string(config.scale);
        ck.header["global_residual"] = config.global_residual ? "1" : "0";
        for (std::size_t k = 0; k < params_.size(); ++k) {
            const auto& v = params_[k].values();
            ck.arrays.push_back({names_[k], params_[k].shape(), std::vector<float>(v.begin(), v.end())});
        }
        return ck;
    }

    static CoarseModel from_checkpoint(const ad::Checkpoint& ck)
    {
        auto get = [&](const std::string& key) -> const std::string& {
            auto it = ck.header.find(key);
            require(it != ck.header.end(), "checkpoint: missing header key '" + key + "'");
            return it->second;
        };
        require(get("format") == "dualsr-coarse-1", "checkpoint: unsupported format '" + get("format") + "'");
        CoarseConfig cfg;
        try {
            cfg.channels = std::stoul(get("channels"));
            cfg.intra_stages = std::stoul(get("intra_stages"));
            cfg.scale = std::stoi(get("scale"));
        } catch (const std::logic_error&) {
            throw Error("checkpoint: garbled model header");
        }
        cfg.global_residual = get("global_residual") == "1";
        CoarseModel m = initialize(cfg, 0);
        require(ck.arrays.size() == m.params_.size(), "checkpoint: parameter count does not match architecture");
        for (const auto& a : ck.arrays) {
            Tensor& p = m.param(a.name);
            require(p.shape() == a.shape, "checkpoint: shape mismatch for '" + a.name + "'");
            std::copy(a.values.begin(), a.values.end(), p.values().begin());
        }
        return m;
    }

    void save(const std::filesystem::path& path) const { ad::save_checkpoint(to_checkpoint(), path); }
    static CoarseModel load(const std::filesystem::path& path) { return from_checkpoint(ad::load_checkpoint(path)); }

    void add(std::string name, Tensor t)
    {
        index_.emplace(name, params_.size());
        names_.push_back(std::move(name));
        params_.push_back(std::move(t));
    }

private:
    std::vector<std::string> names_;
    std::vector<Tensor> params_;
    std::map<std::string, std::size_t> index_;
};

/// Feature context carried across the band loop. The learnable fusion
/// weights live in the model ("fcf.w1", "fcf.w2").
template <typename T>
struct FcfState {
    std::optional<ad::Tensor<T>> prev_features;
    /// Cut the cached features from the graph (training steps per band).
    bool detach = true;
};

namespace net {

template <typename T>
ad::Tensor<T> conv(const CoarseModel<T>& m, const std::string& name, const ad::Tensor<T>& x)
{
    const auto& w = m.param(name + ".w");
    if (w.rank() == 5) return ad::conv3d(x, w, m.param(name + ".b"));
    return ad::conv2d(x, w, m.param(name + ".b"));
}

template <typename T>
ad::Tensor<T> to_tensor(const HsiCube& stack)
{
    std::vector<T> v(stack.data().begin(), stack.data().end());
    return ad::Tensor<T>({stack.bands(), stack.height(), stack.width()}, std::move(v));
}

template <typename T>
struct Branches {
    ad::Tensor<T> b1, b2, b3;
};

/// Entry convs (1->C, 3->C, 3->C) over the three gathered groups.
template <typename T>
Branches<T> entry(const CoarseModel<T>& m, const GroupStacks& g)
{
    return {conv(m, "entry.g1", to_tensor<T>(g.g1)), conv(m, "entry.g2", to_tensor<T>(g.g2)),
            conv(m, "entry.g3", to_tensor<T>(g.g3))};
}

/// conv3x3 -> relu -> conv3x3 with a skip connection.
template <typename T>
ad::Tensor<T> residual_block(const CoarseModel<T>& m, const std::string& prefix, const ad::Tensor<T>& x)
{
    auto h = ad::relu(conv(m, prefix + ".conv1", x));
    return ad::add(x, conv(m, prefix + ".conv2", h));
}

} // namespace net

/// One intra-group fusion stage: a two-block residual unit per branch, then
/// each branch concatenates the other two branches onto itself and reduces
/// back to C channels with a 1x1 conv.
template <typename T>
net::Branches<T> intra_group_fusion(const CoarseModel<T>& m, std::size_t stage, const ad::Tensor<T>& f1,
                                    const ad::Tensor<T>& f2, const ad::Tensor<T>& f3)
{
    require(f1.shape() == f2.shape() && f2.shape() == f3.shape(), "intra_group_fusion: branch shapes differ");
    const std::string base = "intra." + std::to_string(stage) + ".branch";
    ad::Tensor<T> r[3];
    const ad::Tensor<T>* in[3] = {&f1, &f2, &f3};
    for (std::size_t k = 0; k < 3; ++k) {
        const std::string p = base + std::to_string(k + 1);
        r[k] = net::residual_block(m, p + ".block2", net::residual_block(m, p + ".block1", *in[k]));
    }
    auto fuse = [&](std::size_t k, std::size_t o1, std::size_t o2) {
        return net::conv(m, base + std::to_string(k + 1) + ".fuse", ad::concat_channels<T>({r[k], r[o1], r[o2]}));
    };
    return {fuse(0, 1, 2), fuse(1, 0, 2), fuse(2, 0, 1)};
}

/// Stacks the branches as a depth-3 volume, applies the spectral 3x1x1 and
/// spatial 1x3x3 convolutions in parallel, sums them, refines with another
/// 1x3x3, folds depth into channels and reduces to C channels.
template <typename T>
ad::Tensor<T> inter_group_fusion(const CoarseModel<T>& m, const ad::Tensor<T>& b1, const ad::Tensor<T>& b2,
                                 const ad::Tensor<T>& b3)
{
    require(b1.shape() == b2.shape() && b2.shape() == b3.shape() && b1.rank() == 3,
            "inter_group_fusion: branch shapes differ");
    const std::size_t C = b1.dim(0), H = b1.dim(1), W = b1.dim(2);
    // [3C,H,W] == [3,C,H,W] -> [C,3,H,W]
    auto volume = ad::transpose(ad::reshape(ad::concat_channels<T>({b1, b2, b3}), {3, C, H, W}), 0, 1);
    auto [spectral, spatial] = ad::conv3d_separable(volume, m.param("inter.spectral.w"), m.param("inter.spectral.b"),
                                                    m.param("inter.spatial.w"), m.param("inter.spatial.b"));
    auto refined = net::conv(m, "inter.refine", ad::add(spectral, spatial));
    auto folded = ad::reshape(ad::transpose(refined, 0, 1), {3 * C, H, W});
    return net::conv(m, "inter.fold", folded);
}

/// Feature context fusion. Band 1 passes through; later bands fuse with the
/// cached features of the previous band. The current features are cached.
template <typename T>
ad::Tensor<T> fcf(const CoarseModel<T>& m, const ad::Tensor<T>& current, std::size_t band, FcfState<T>& state)
{
    ad::Tensor<T> out;
    if (band == 1) {
        out = current;
    } else {
        require(state.prev_features.has_value(), "fcf: missing previous-band features for band " + std::to_string(band));
        require(state.prev_features->shape() == current.shape(), "fcf: previous-band features have a different shape");
        out = net::conv(m, "fcf.conv",
                        ad::concat_channels<T>({ad::scalar_mul(m.param("fcf.w1"), current),
                                                ad::scalar_mul(m.param("fcf.w2"), *state.prev_features)}));
    }
    state.prev_features = state.detach ? current.detach() : current;
    return out;
}

/// `stages` sub-pixel x2 stages (conv3x3 to 4C, shuffle r=2), then the 3x3
/// projection to one channel, plus the bicubic-upsampled LR band when the
/// global residual is on. Returns [1, 2^stages*h, 2^stages*w].
template <typename T>
ad::Tensor<T> upsample_head(const CoarseModel<T>& m, const ad::Tensor<T>& features, std::size_t stages,
                            const Plane& lr_band)
{
    require(stages <= m.config.upsample_stages(), "upsample_head: model has only " +
                                                      std::to_string(m.config.upsample_stages()) + " x2 stages");
    auto x = features;
    for (std::size_t k = 0; k < stages; ++k) x = ad::pixel_shuffle(net::conv(m, "up." + std::to_string(k), x), 2);
    auto y = net::conv(m, "out", x);
    if (m.config.global_residual) {
        const Plane up = stages == 0 ? lr_band : bicubic(lr_band, static_cast<double>(std::size_t{1} << stages));
        require(up.height == y.dim(1) && up.width == y.dim(2), "upsample_head: residual dims mismatch");
        y = ad::add(y, ad::Tensor<T>(y.shape(), std::vector<T>(up.values.begin(), up.values.end())));
    }
    return y;
}

/// Number of x2 stages needed to reach `scale` (a power of two not above the model scale).
inline std::size_t stages_for_scale(const CoarseConfig& cfg, int scale)
{
    require(scale >= 1 && std::has_single_bit(static_cast<unsigned>(scale)) && scale <= cfg.scale,
            "coarse model: scale " + std::to_string(scale) + " is not reachable with a x" +
                std::to_string(cfg.scale) + " model");
    return static_cast<std::size_t>(std::countr_zero(static_cast<unsigned>(scale)));
}

/// Fused features of band i (1-based) ahead of the upsampler; advances the FCF state.
template <typename T>
ad::Tensor<T> band_features(const CoarseModel<T>& m, const HsiCube& lr, std::size_t band, FcfState<T>& state)
{
    const BandGroups groups = partition(band, lr.bands());
    auto f = net::entry(m, gather_groups(lr, groups));
    for (std::size_t s = 0; s < m.config.intra_stages; ++s) f = intra_group_fusion(m, s, f.b1, f.b2, f.b3);
    return fcf(m, inter_group_fusion(m, f.b1, f.b2, f.b3), band, state);
}

/// Differentiable SR of band i (1-based) at `scale` (defaults to the model scale).
/// Lower power-of-two scales tap the upsampler cascade early and share the
/// final projection.
template <typename T>
ad::Tensor<T> sr_band_tensor(const CoarseModel<T>& m, const HsiCube& lr, std::size_t band, FcfState<T>& state,
                             int scale = 0)
{
    const std::size_t stages = stages_for_scale(m.config, scale == 0 ? m.config.scale : scale);
    return upsample_head(m, band_features(m, lr, band, state), stages, lr.band_plane(band - 1));
}

template <typename T>
Plane sr_band(const CoarseModel<T>& m, const HsiCube& lr, std::size_t band, FcfState<T>& state, int scale = 0)
{
    auto y = sr_band_tensor(m, lr, band, state, scale);
    Plane out(y.dim(1), y.dim(2));
    for (std::size_t k = 0; k < out.values.size(); ++k) out.values[k] = static_cast<float>(y.values()[k]);
    return out;
}

/// Full band-by-band SR of a cube, clamped to [0,1].
template <typename T>
HsiCube sr_cube(const CoarseModel<T>& m, const HsiCube& lr, int scale = 0)
{
    require(lr.bands() >= 5, "sr_cube: need at least 5 bands, got " + std::to_string(lr.bands()));
    const int s = scale == 0 ? m.config.scale : scale;
    stages_for_scale(m.config, s);
    const auto su = static_cast<std::size_t>(s);
    HsiCube out(lr.bands(), lr.height() * su, lr.width() * su);
    FcfState<T> state;
    for (std::size_t i = 1; i <= lr.bands(); ++i) out.set_band(i - 1, sr_band(m, lr, i, state, s));
    out.clamp_unit();
    return out;
}

} // namespace dualsr
