#pragma once

// Bicubic upsampling of latent levels and the shared per-pixel synthesis
// network mapping N stacked planes to C image channels.

#include <array>
#include <cmath>
#include <vector>

#include "mdq/autodiff.hpp"
#include "mdq/grid.hpp"
#include "mdq/image.hpp"
#include "mdq/mlp.hpp"

namespace mdq {

namespace detail {

// Catmull-Rom cubic convolution kernel (a = -0.5).
inline double cubic_weight(double d) {
    constexpr double a = -0.5;
    d = std::abs(d);
    if (d <= 1.0) return ((a + 2.0) * d - (a + 3.0)) * d * d + 1.0;
    if (d < 2.0) return ((a * d - 5.0 * a) * d + 8.0 * a) * d - 4.0 * a;
    return 0.0;
}

// Four taps per output sample with half-pixel alignment and edge clamping.
struct ResampleAxis {
    std::vector<std::array<std::size_t, 4>> index;
    std::vector<std::array<double, 4>> weight;

    ResampleAxis(std::size_t src, std::size_t dst) : index(dst), weight(dst) {
        const double ratio = static_cast<double>(src) / static_cast<double>(dst);
        for (std::size_t i = 0; i < dst; ++i) {
            const double x = (static_cast<double>(i) + 0.5) * ratio - 0.5;
            const double base = std::floor(x);
            const double t = x - base;
            for (int tap = 0; tap < 4; ++tap) {
                const auto pos = static_cast<long long>(base) + tap - 1;
                index[i][tap] = static_cast<std::size_t>(std::clamp<long long>(pos, 0, static_cast<long long>(src) - 1));
                weight[i][tap] = cubic_weight(t - (tap - 1));
            }
        }
    }
};

} // namespace detail

// Linear map from a rows x cols level to target_h x target_w; the backward
// pass applies the transpose.
inline ad::Tensor upsample_bicubic(const ad::Tensor& level, std::size_t target_h, std::size_t target_w) {
    require(level.defined() && level.shape().size() == 2, Errc::shape_mismatch, "upsample expects a 2D level");
    const std::size_t rows = level.dim(0), cols = level.dim(1);
    require(target_h >= rows && target_w >= cols, Errc::invalid_argument,
            "upsample target " + std::to_string(target_h) + "x" + std::to_string(target_w) +
                " smaller than source " + std::to_string(rows) + "x" + std::to_string(cols));

    if (rows == target_h && cols == target_w)
        return ad::reshape(level, {rows, cols}); // unit factor is exactly the identity

    auto ax = std::make_shared<detail::ResampleAxis>(cols, target_w);
    auto ay = std::make_shared<detail::ResampleAxis>(rows, target_h);
    const auto in = level.values();
    std::vector<double> tmp(rows * target_w);
    for (std::size_t r = 0; r < rows; ++r) {
        const double* src = in.data() + r * cols;
        double* dst = tmp.data() + r * target_w;
        for (std::size_t x = 0; x < target_w; ++x) {
            const auto& ix = ax->index[x];
            const auto& wx = ax->weight[x];
            dst[x] = wx[0] * src[ix[0]] + wx[1] * src[ix[1]] + wx[2] * src[ix[2]] + wx[3] * src[ix[3]];
        }
    }
    std::vector<double> out(target_h * target_w, 0.0);
    for (std::size_t y = 0; y < target_h; ++y) {
        double* dst = out.data() + y * target_w;
        for (int tap = 0; tap < 4; ++tap) {
            const double w = ay->weight[y][tap];
            if (w == 0.0) continue;
            const double* src = tmp.data() + ay->index[y][tap] * target_w;
            for (std::size_t x = 0; x < target_w; ++x) dst[x] += w * src[x];
        }
    }
    return ad::detail::make_result(
        {target_h, target_w}, std::move(out), {level},
        [ax, ay, rows, cols, target_h, target_w](ad::detail::Node& self) {
            std::vector<double> dtmp(rows * target_w, 0.0);
            for (std::size_t y = 0; y < target_h; ++y) {
                const double* g = self.grad.data() + y * target_w;
                for (int tap = 0; tap < 4; ++tap) {
                    const double w = ay->weight[y][tap];
                    if (w == 0.0) continue;
                    double* dst = dtmp.data() + ay->index[y][tap] * target_w;
                    for (std::size_t x = 0; x < target_w; ++x) dst[x] += w * g[x];
                }
            }
            auto din = ad::detail::grad_of(*self.parents[0]);
            for (std::size_t r = 0; r < rows; ++r) {
                const double* g = dtmp.data() + r * target_w;
                double* dst = din.data() + r * cols;
                for (std::size_t x = 0; x < target_w; ++x) {
                    const auto& ix = ax->index[x];
                    const auto& wx = ax->weight[x];
                    for (int tap = 0; tap < 4; ++tap) dst[ix[tap]] += wx[tap] * g[x];
                }
            }
        });
}

inline Grid<double> upsample_bicubic(const Grid<double>& level, std::size_t target_h, std::size_t target_w) {
    require(!level.empty(), Errc::invalid_argument, "upsample of an empty grid");
    const auto t = upsample_bicubic(ad::Tensor::from({level.rows, level.cols}, level.values), target_h, target_w);
    return Grid<double>(target_h, target_w, std::vector<double>(t.values().begin(), t.values().end()));
}

// N upsampled planes, each height x width.
struct UpsampledStack {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<ad::Tensor> planes;
};

// Planes [H x W] each -> one [H*W x N] matrix, pixel-major.
inline ad::Tensor stack_planes(const UpsampledStack& stack) {
    const std::size_t n = stack.planes.size();
    const std::size_t pixels = stack.height * stack.width;
    require(n > 0, Errc::invalid_argument, "stack needs at least one plane");
    for (const auto& p : stack.planes)
        require(p.size() == pixels, Errc::shape_mismatch,
                "plane of " + std::to_string(p.size()) + " values in a " + std::to_string(stack.height) + "x" +
                    std::to_string(stack.width) + " stack");
    std::vector<double> out(pixels * n);
    for (std::size_t k = 0; k < n; ++k) {
        const auto v = stack.planes[k].values();
        for (std::size_t i = 0; i < pixels; ++i) out[i * n + k] = v[i];
    }
    return ad::detail::make_result({pixels, n}, std::move(out), stack.planes,
                                   [n, pixels](ad::detail::Node& self) {
                                       for (std::size_t k = 0; k < n; ++k) {
                                           auto& parent = *self.parents[k];
                                           if (!parent.requires_grad) continue;
                                           auto g = ad::detail::grad_of(parent);
                                           for (std::size_t i = 0; i < pixels; ++i) g[i] += self.grad[i * n + k];
                                       }
                                   });
}

// N -> 12 -> 12 -> C with ReLU on the hidden layers.
struct SynthesisParams {
    Mlp net;

    static std::vector<std::size_t> widths(std::size_t levels, std::size_t channels) {
        return {levels, kHiddenUnits, kHiddenUnits, channels};
    }

    static SynthesisParams init(std::size_t levels, std::size_t channels, Rng& rng) {
        return {Mlp::init(widths(levels, channels), rng)};
    }

    std::size_t input_width() const { return net.input_width(); }
    std::size_t output_width() const { return net.output_width(); }
};

// Returns [H*W x C], raster order, channels interleaved; values unclamped.
inline ad::Tensor synth_forward(const SynthesisParams& params, const UpsampledStack& stack) {
    require(stack.planes.size() == params.input_width(), Errc::shape_mismatch,
            "synthesis expects " + std::to_string(params.input_width()) + " planes, got " +
                std::to_string(stack.planes.size()));
    return params.net.forward(stack_planes(stack));
}

// Eval-mode reconstruction from real-valued latent levels (already
// quantized and scaled by their steps). Shared by encoder and decoder.
inline Image synthesize(const SynthesisParams& params, const std::vector<Grid<double>>& levels,
                        std::size_t height, std::size_t width) {
    UpsampledStack stack{height, width, {}};
    for (const auto& level : levels)
        stack.planes.push_back(upsample_bicubic(ad::Tensor::from({level.rows, level.cols}, level.values), height, width));
    const ad::Tensor out = synth_forward(params, stack);
    Image img(width, height, params.output_width());
    std::copy(out.values().begin(), out.values().end(), img.data.begin());
    return img;
}

} // namespace mdq
