#pragma once

// Closed operator set of the coarse network: convolutions (2-D, 3-D and the
// separable 3x1x1 / 1x3x3 pair), pixel shuffle, relu, add, scalar multiply,
// channel concatenation, reshape, transpose and the L1 loss.
//
// Convolutions lower to im2col + GEMM (Eigen). Single-threaded Eigen GEMM has
// a fixed reduction order, so results are bitwise reproducible.

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <utility>

#include "dualsr/autodiff/tensor.hpp"

namespace dualsr::ad {

namespace detail {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapMat = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMapMat = Eigen::Map<const RowMat<T>>;

struct ConvGeometry {
    std::size_t c_in, depth, height, width; // input volume
    std::size_t c_out, kd, kh, kw;          // kernel

    std::size_t taps() const { return c_in * kd * kh * kw; }
    std::size_t voxels() const { return depth * height * width; }
    bool pointwise() const { return kd == 1 && kh == 1 && kw == 1; }
};

// col[(c, a, p, q)][(d, y, x)] = in[c, d + a - kd/2, y + p - kh/2, x + q - kw/2], zero outside.
template <typename T>
void im2col(const T* in, const ConvGeometry& g, T* col)
{
    const auto D = static_cast<std::ptrdiff_t>(g.depth), H = static_cast<std::ptrdiff_t>(g.height),
               W = static_cast<std::ptrdiff_t>(g.width);
    const auto pd = static_cast<std::ptrdiff_t>(g.kd / 2), ph = static_cast<std::ptrdiff_t>(g.kh / 2),
               pw = static_cast<std::ptrdiff_t>(g.kw / 2);
    const std::size_t N = g.voxels();
    std::size_t row = 0;
    for (std::size_t c = 0; c < g.c_in; ++c) {
        const T* src = in + c * N;
        for (std::ptrdiff_t a = 0; a < static_cast<std::ptrdiff_t>(g.kd); ++a)
            for (std::ptrdiff_t p = 0; p < static_cast<std::ptrdiff_t>(g.kh); ++p)
                for (std::ptrdiff_t q = 0; q < static_cast<std::ptrdiff_t>(g.kw); ++q, ++row) {
                    T* dst = col + row * N;
                    const std::ptrdiff_t dx = q - pw;
                    const std::ptrdiff_t x0 = std::max<std::ptrdiff_t>(0, -dx);
                    const std::ptrdiff_t x1 = std::min<std::ptrdiff_t>(W, W - dx);
                    for (std::ptrdiff_t d = 0; d < D; ++d) {
                        const std::ptrdiff_t sd = d + a - pd;
                        for (std::ptrdiff_t y = 0; y < H; ++y) {
                            T* out = dst + (d * H + y) * W;
                            const std::ptrdiff_t sy = y + p - ph;
                            if (sd < 0 || sd >= D || sy < 0 || sy >= H || x0 >= x1) {
                                std::fill(out, out + W, T(0));
                                continue;
                            }
                            const T* s = src + (sd * H + sy) * W;
                            std::fill(out, out + x0, T(0));
                            for (std::ptrdiff_t x = x0; x < x1; ++x) out[x] = s[x + dx];
                            std::fill(out + x1, out + W, T(0));
                        }
                    }
                }
    }
}

// Adjoint of im2col: scatter-add columns back into the input volume.
template <typename T>
void col2im_add(const T* col, const ConvGeometry& g, T* in)
{
    const auto D = static_cast<std::ptrdiff_t>(g.depth), H = static_cast<std::ptrdiff_t>(g.height),
               W = static_cast<std::ptrdiff_t>(g.width);
    const auto pd = static_cast<std::ptrdiff_t>(g.kd / 2), ph = static_cast<std::ptrdiff_t>(g.kh / 2),
               pw = static_cast<std::ptrdiff_t>(g.kw / 2);
    const std::size_t N = g.voxels();
    std::size_t row = 0;
    for (std::size_t c = 0; c < g.c_in; ++c) {
        T* dst = in + c * N;
        for (std::ptrdiff_t a = 0; a < static_cast<std::ptrdiff_t>(g.kd); ++a)
            for (std::ptrdiff_t p = 0; p < static_cast<std::ptrdiff_t>(g.kh); ++p)
                for (std::ptrdiff_t q = 0; q < static_cast<std::ptrdiff_t>(g.kw); ++q, ++row) {
                    const T* src = col + row * N;
                    const std::ptrdiff_t dx = q - pw;
                    const std::ptrdiff_t x0 = std::max<std::ptrdiff_t>(0, -dx);
                    const std::ptrdiff_t x1 = std::min<std::ptrdiff_t>(W, W - dx);
                    for (std::ptrdiff_t d = 0; d < D; ++d) {
                        const std::ptrdiff_t sd = d + a - pd;
                        if (sd < 0 || sd >= D) continue;
                        for (std::ptrdiff_t y = 0; y < H; ++y) {
                            const std::ptrdiff_t sy = y + p - ph;
                            if (sy < 0 || sy >= H) continue;
                            const T* s = src + (d * H + y) * W;
                            T* o = dst + (sd * H + sy) * W;
                            for (std::ptrdiff_t x = x0; x < x1; ++x) o[x + dx] += s[x];
                        }
                    }
                }
    }
}

template <typename T>
Tensor<T> conv_core(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias, const ConvGeometry& g,
                    Shape out_shape)
{
    require(g.kd % 2 == 1 && g.kh % 2 == 1 && g.kw % 2 == 1, "conv: kernel extents must be odd");
    require(bias.numel() == g.c_out, "conv: bias length must equal output channels");
    const std::size_t K = g.taps(), N = g.voxels();

    std::vector<T> col;
    if (!g.pointwise()) {
        col.resize(K * N);
        im2col(input.values().data(), g, col.data());
    }
    const T* col_ptr = g.pointwise() ? input.values().data() : col.data();

    std::vector<T> out(g.c_out * N);
    MapMat<T> out_m(out.data(), static_cast<Eigen::Index>(g.c_out), static_cast<Eigen::Index>(N));
    ConstMapMat<T> w_m(weight.values().data(), static_cast<Eigen::Index>(g.c_out), static_cast<Eigen::Index>(K));
    ConstMapMat<T> col_m(col_ptr, static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(N));
    out_m.noalias() = w_m * col_m;
    const auto& b = bias.values();
    for (std::size_t o = 0; o < g.c_out; ++o) {
        T* row = out.data() + o * N;
        for (std::size_t n = 0; n < N; ++n) row[n] += b[o];
    }

    return Tensor<T>::from_op(
        std::move(out_shape), std::move(out), {input, weight, bias},
        [g, col = std::move(col)](Node<T>& self) {
            const std::size_t K = g.taps(), N = g.voxels();
            const auto Ki = static_cast<Eigen::Index>(K), Ni = static_cast<Eigen::Index>(N),
                       Co = static_cast<Eigen::Index>(g.c_out);
            Node<T>& in = *self.parents[0];
            Node<T>& w = *self.parents[1];
            Node<T>& b = *self.parents[2];
            ConstMapMat<T> g_m(self.grad.data(), Co, Ni);
            const T* col_ptr = g.pointwise() ? in.value.data() : col.data();
            ConstMapMat<T> col_m(col_ptr, Ki, Ni);
            if (w.requires_grad) {
                MapMat<T> dw(w.grad_buffer().data(), Co, Ki);
                dw.noalias() += g_m * col_m.transpose();
            }
            if (b.requires_grad) {
                auto& db = b.grad_buffer();
                for (std::size_t o = 0; o < g.c_out; ++o) {
                    const T* row = self.grad.data() + o * N;
                    T acc = T(0);
                    for (std::size_t n = 0; n < N; ++n) acc += row[n];
                    db[o] += acc;
                }
            }
            if (in.requires_grad) {
                ConstMapMat<T> w_m(w.value.data(), Co, Ki);
                if (g.pointwise()) {
                    MapMat<T> dx(in.grad_buffer().data(), Ki, Ni);
                    dx.noalias() += w_m.transpose() * g_m;
                } else {
                    std::vector<T> dcol(K * N);
                    MapMat<T> dcol_m(dcol.data(), Ki, Ni);
                    dcol_m.noalias() = w_m.transpose() * g_m;
                    col2im_add(dcol.data(), g, in.grad_buffer().data());
                }
            }
        });
}

} // namespace detail

/// Same-padded 2-D cross-correlation: [C_in,H,W] * [C_out,C_in,kh,kw] + [C_out] -> [C_out,H,W].
template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias)
{
    require(input.rank() == 3, "conv2d: input must be [C,H,W], got " + shape_string(input.shape()));
    require(weight.rank() == 4, "conv2d: weight must be [C_out,C_in,kh,kw]");
    require(weight.dim(1) == input.dim(0), "conv2d: channel mismatch (input " + std::to_string(input.dim(0)) +
                                               ", weight expects " + std::to_string(weight.dim(1)) + ")");
    detail::ConvGeometry g{input.dim(0), 1, input.dim(1), input.dim(2), weight.dim(0), 1, weight.dim(2), weight.dim(3)};
    return detail::conv_core(input, weight, bias, g, {g.c_out, g.height, g.width});
}

/// Same-padded 3-D cross-correlation over [C_in,D,H,W] with weight [C_out,C_in,kd,kh,kw].
template <typename T>
Tensor<T> conv3d(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias)
{
    require(input.rank() == 4, "conv3d: input must be [C,D,H,W], got " + shape_string(input.shape()));
    require(weight.rank() == 5, "conv3d: weight must be [C_out,C_in,kd,kh,kw]");
    require(weight.dim(1) == input.dim(0), "conv3d: channel mismatch");
    detail::ConvGeometry g{input.dim(0), input.dim(1), input.dim(2), input.dim(3),
                           weight.dim(0), weight.dim(2), weight.dim(3), weight.dim(4)};
    return detail::conv_core(input, weight, bias, g, {g.c_out, g.depth, g.height, g.width});
}

/// Spectral (3x1x1) and spatial (1x3x3) convolutions of the same volume.
template <typename T>
std::pair<Tensor<T>, Tensor<T>> conv3d_separable(const Tensor<T>& input, const Tensor<T>& spectral_w,
                                                 const Tensor<T>& spectral_b, const Tensor<T>& spatial_w,
                                                 const Tensor<T>& spatial_b)
{
    require(spectral_w.rank() == 5 && spectral_w.dim(2) == 3 && spectral_w.dim(3) == 1 && spectral_w.dim(4) == 1,
            "conv3d_separable: spectral kernel must be 3x1x1");
    require(spatial_w.rank() == 5 && spatial_w.dim(2) == 1 && spatial_w.dim(3) == 3 && spatial_w.dim(4) == 3,
            "conv3d_separable: spatial kernel must be 1x3x3");
    return {conv3d(input, spectral_w, spectral_b), conv3d(input, spatial_w, spatial_b)};
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x)
{
    std::vector<T> out(x.values());
    for (auto& v : out) v = v > T(0) ? v : T(0);
    return Tensor<T>::from_op(x.shape(), std::move(out), {x}, [](Node<T>& self) {
        Node<T>& in = *self.parents[0];
        auto& g = in.grad_buffer();
        for (std::size_t k = 0; k < g.size(); ++k)
            if (in.value[k] > T(0)) g[k] += self.grad[k];
    });
}

template <typename T>
Tensor<T> add(const Tensor<T>& x, const Tensor<T>& y)
{
    require(x.shape() == y.shape(), "add: shape mismatch " + shape_string(x.shape()) + " vs " + shape_string(y.shape()));
    std::vector<T> out(x.values());
    const auto& yv = y.values();
    for (std::size_t k = 0; k < out.size(); ++k) out[k] += yv[k];
    return Tensor<T>::from_op(x.shape(), std::move(out), {x, y}, [](Node<T>& self) {
        for (auto& p : self.parents) {
            if (!p->requires_grad) continue;
            auto& g = p->grad_buffer();
            for (std::size_t k = 0; k < g.size(); ++k) g[k] += self.grad[k];
        }
    });
}

/// w * x with w a one-element tensor.
template <typename T>
Tensor<T> scalar_mul(const Tensor<T>& w, const Tensor<T>& x)
{
    require(w.numel() == 1, "scalar_mul: weight must hold exactly one value");
    const T s = w.values()[0];
    std::vector<T> out(x.values());
    for (auto& v : out) v *= s;
    return Tensor<T>::from_op(x.shape(), std::move(out), {w, x}, [](Node<T>& self) {
        Node<T>& w = *self.parents[0];
        Node<T>& x = *self.parents[1];
        if (w.requires_grad) {
            T acc = T(0);
            for (std::size_t k = 0; k < x.value.size(); ++k) acc += x.value[k] * self.grad[k];
            w.grad_buffer()[0] += acc;
        }
        if (x.requires_grad) {
            auto& g = x.grad_buffer();
            const T s = w.value[0];
            for (std::size_t k = 0; k < g.size(); ++k) g[k] += s * self.grad[k];
        }
    });
}

/// Concatenation along axis 0; all trailing dimensions must agree.
template <typename T>
Tensor<T> concat_channels(const std::vector<Tensor<T>>& xs)
{
    require(!xs.empty(), "concat_channels: no inputs");
    Shape tail(xs[0].shape().begin() + 1, xs[0].shape().end());
    std::size_t channels = 0;
    std::vector<T> out;
    for (const auto& x : xs) {
        require(Shape(x.shape().begin() + 1, x.shape().end()) == tail,
                "concat_channels: shape mismatch " + shape_string(x.shape()) + " vs " + shape_string(xs[0].shape()));
        channels += x.dim(0);
        out.insert(out.end(), x.values().begin(), x.values().end());
    }
    Shape shape{channels};
    shape.insert(shape.end(), tail.begin(), tail.end());
    return Tensor<T>::from_op(std::move(shape), std::move(out), xs, [](Node<T>& self) {
        std::size_t offset = 0;
        for (auto& p : self.parents) {
            const std::size_t n = p->value.size();
            if (p->requires_grad) {
                auto& g = p->grad_buffer();
                for (std::size_t k = 0; k < n; ++k) g[k] += self.grad[offset + k];
            }
            offset += n;
        }
    });
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape)
{
    require(numel(shape) == x.numel(), "reshape: element count mismatch " + shape_string(x.shape()) + " -> " +
                                           shape_string(shape));
    return Tensor<T>::from_op(std::move(shape), x.values(), {x}, [](Node<T>& self) {
        auto& g = self.parents[0]->grad_buffer();
        for (std::size_t k = 0; k < g.size(); ++k) g[k] += self.grad[k];
    });
}

/// Swaps two axes.
template <typename T>
Tensor<T> transpose(const Tensor<T>& x, std::size_t a, std::size_t b)
{
    const Shape& in_shape = x.shape();
    require(a < in_shape.size() && b < in_shape.size(), "transpose: axis out of range");
    Shape out_shape = in_shape;
    std::swap(out_shape[a], out_shape[b]);

    const std::size_t rank = in_shape.size();
    std::vector<std::size_t> in_stride(rank, 1);
    for (std::size_t k = rank - 1; k > 0; --k) in_stride[k - 1] = in_stride[k] * in_shape[k];
    std::vector<std::size_t> src_stride = in_stride; // stride in input for each output axis
    std::swap(src_stride[a], src_stride[b]);

    // perm[out_index] = in_index
    std::vector<std::size_t> perm(x.numel());
    std::vector<std::size_t> idx(rank, 0);
    for (std::size_t n = 0; n < perm.size(); ++n) {
        std::size_t src = 0;
        for (std::size_t k = 0; k < rank; ++k) src += idx[k] * src_stride[k];
        perm[n] = src;
        for (std::size_t k = rank; k-- > 0;) {
            if (++idx[k] < out_shape[k]) break;
            idx[k] = 0;
        }
    }
    std::vector<T> out(x.numel());
    for (std::size_t n = 0; n < out.size(); ++n) out[n] = x.values()[perm[n]];
    return Tensor<T>::from_op(std::move(out_shape), std::move(out), {x}, [perm = std::move(perm)](Node<T>& self) {
        auto& g = self.parents[0]->grad_buffer();
        for (std::size_t n = 0; n < perm.size(); ++n) g[perm[n]] += self.grad[n];
    });
}

namespace detail {

// For [C*r*r, H, W] <-> [C, r*H, r*W]: index in the shuffled layout for every
// index of the channel-stacked layout. Channel block (i*r + j) lands at
// spatial offset (i, j).
inline std::vector<std::size_t> shuffle_map(std::size_t c, std::size_t h, std::size_t w, std::size_t r)
{
    std::vector<std::size_t> map(c * r * r * h * w);
    const std::size_t H = h * r, W = w * r;
    std::size_t n = 0;
    for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < r; ++j)
                for (std::size_t y = 0; y < h; ++y)
                    for (std::size_t x = 0; x < w; ++x) map[n++] = (ch * H + y * r + i) * W + x * r + j;
    return map;
}

} // namespace detail

/// [C*r^2, H, W] -> [C, r*H, r*W].
template <typename T>
Tensor<T> pixel_shuffle(const Tensor<T>& x, std::size_t r)
{
    require(x.rank() == 3 && r >= 1, "pixel_shuffle: input must be [C,H,W]");
    require(x.dim(0) % (r * r) == 0, "pixel_shuffle: channels " + std::to_string(x.dim(0)) +
                                         " not divisible by r^2 = " + std::to_string(r * r));
    const std::size_t c = x.dim(0) / (r * r), h = x.dim(1), w = x.dim(2);
    auto map = detail::shuffle_map(c, h, w, r);
    std::vector<T> out(x.numel());
    for (std::size_t n = 0; n < map.size(); ++n) out[map[n]] = x.values()[n];
    return Tensor<T>::from_op({c, h * r, w * r}, std::move(out), {x}, [map = std::move(map)](Node<T>& self) {
        auto& g = self.parents[0]->grad_buffer();
        for (std::size_t n = 0; n < map.size(); ++n) g[n] += self.grad[map[n]];
    });
}

/// Inverse of pixel_shuffle: [C, r*H, r*W] -> [C*r^2, H, W].
template <typename T>
Tensor<T> pixel_unshuffle(const Tensor<T>& x, std::size_t r)
{
    require(x.rank() == 3 && r >= 1, "pixel_unshuffle: input must be [C,H,W]");
    require(x.dim(1) % r == 0 && x.dim(2) % r == 0, "pixel_unshuffle: spatial dims not divisible by r");
    const std::size_t c = x.dim(0), h = x.dim(1) / r, w = x.dim(2) / r;
    auto map = detail::shuffle_map(c, h, w, r);
    std::vector<T> out(x.numel());
    for (std::size_t n = 0; n < map.size(); ++n) out[n] = x.values()[map[n]];
    return Tensor<T>::from_op({c * r * r, h, w}, std::move(out), {x}, [map = std::move(map)](Node<T>& self) {
        auto& g = self.parents[0]->grad_buffer();
        for (std::size_t n = 0; n < map.size(); ++n) g[map[n]] += self.grad[n];
    });
}

/// Mean absolute error; the subgradient at ties is 0.
template <typename T>
Tensor<T> l1_loss(const Tensor<T>& pred, const Tensor<T>& target)
{
    require(pred.shape() == target.shape(),
            "l1_loss: shape mismatch " + shape_string(pred.shape()) + " vs " + shape_string(target.shape()));
    const auto& p = pred.values();
    const auto& t = target.values();
    T acc = T(0);
    for (std::size_t k = 0; k < p.size(); ++k) acc += std::abs(p[k] - t[k]);
    const T count = static_cast<T>(p.size());
    return Tensor<T>::from_op({1}, {acc / count}, {pred, target}, [count](Node<T>& self) {
        Node<T>& p = *self.parents[0];
        Node<T>& t = *self.parents[1];
        const T up = self.grad[0] / count;
        for (std::size_t k = 0; k < p.value.size(); ++k) {
            const T diff = p.value[k] - t.value[k];
            const T s = diff > T(0) ? up : (diff < T(0) ? -up : T(0));
            if (p.requires_grad) p.grad_buffer()[k] += s;
            if (t.requires_grad) t.grad_buffer()[k] -= s;
        }
    });
}

} // namespace dualsr::ad
