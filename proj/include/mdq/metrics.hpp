#pragma once

// PSNR and multi-scale SSIM on images with values in [0, 1].

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include "mdq/error.hpp"
#include "mdq/image.hpp"

namespace mdq {

inline constexpr double kPsnrCap = 100.0;

inline double psnr_from_mse(double mse) {
    if (!(mse > 0.0)) return kPsnrCap;
    return std::min(kPsnrCap, -10.0 * std::log10(mse));
}

// Peak 1.0; identical images report kPsnrCap.
inline double psnr(const Image& a, const Image& b) { return psnr_from_mse(distortion(a, b)); }

namespace detail {

// Single-channel plane, row-major.
struct Plane {
    std::size_t rows = 0, cols = 0;
    std::vector<double> v;
    double at(std::size_t r, std::size_t c) const { return v[r * cols + c]; }
};

inline std::array<double, 11> gaussian_window() {
    std::array<double, 11> w{};
    double total = 0.0;
    for (int i = 0; i < 11; ++i) {
        const double d = i - 5;
        w[i] = std::exp(-d * d / (2.0 * 1.5 * 1.5));
        total += w[i];
    }
    for (double& x : w) x /= total;
    return w;
}

// Separable 11x11 Gaussian, "valid" extent.
inline Plane blur_valid(const Plane& p) {
    static const auto w = gaussian_window();
    const std::size_t rows = p.rows - 10, cols = p.cols - 10;
    Plane h{p.rows, cols, std::vector<double>(p.rows * cols)};
    for (std::size_t r = 0; r < p.rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) {
            double acc = 0.0;
            for (int i = 0; i < 11; ++i) acc += w[i] * p.at(r, c + i);
            h.v[r * cols + c] = acc;
        }
    Plane out{rows, cols, std::vector<double>(rows * cols)};
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) {
            double acc = 0.0;
            for (int i = 0; i < 11; ++i) acc += w[i] * h.at(r + i, c);
            out.v[r * cols + c] = acc;
        }
    return out;
}

inline Plane product(const Plane& a, const Plane& b) {
    Plane out{a.rows, a.cols, std::vector<double>(a.v.size())};
    for (std::size_t i = 0; i < a.v.size(); ++i) out.v[i] = a.v[i] * b.v[i];
    return out;
}

// 2x2 mean pooling; a trailing odd row or column is dropped.
inline Plane downsample(const Plane& p) {
    const std::size_t rows = p.rows / 2, cols = p.cols / 2;
    Plane out{rows, cols, std::vector<double>(rows * cols)};
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c)
            out.v[r * cols + c] = 0.25 * (p.at(2 * r, 2 * c) + p.at(2 * r, 2 * c + 1) + p.at(2 * r + 1, 2 * c) +
                                          p.at(2 * r + 1, 2 * c + 1));
    return out;
}

struct SsimParts {
    double ssim; // mean of luminance * contrast-structure
    double cs;   // mean of contrast-structure
};

// Every expression treats a and b symmetrically so that swapping the
// arguments gives bit-identical results.
inline SsimParts ssim_parts(const Plane& a, const Plane& b) {
    constexpr double c1 = (0.01 * 1.0) * (0.01 * 1.0);
    constexpr double c2 = (0.03 * 1.0) * (0.03 * 1.0);
    const Plane mu_a = blur_valid(a), mu_b = blur_valid(b);
    const Plane aa = blur_valid(product(a, a)), bb = blur_valid(product(b, b)), ab = blur_valid(product(a, b));
    double ssim = 0.0, cs = 0.0;
    for (std::size_t i = 0; i < mu_a.v.size(); ++i) {
        const double ma = mu_a.v[i], mb = mu_b.v[i];
        const double var_a = aa.v[i] - ma * ma;
        const double var_b = bb.v[i] - mb * mb;
        const double cov = ab.v[i] - ma * mb;
        const double contrast = (2.0 * cov + c2) / (var_a + var_b + c2);
        const double luminance = (2.0 * ma * mb + c1) / (ma * ma + mb * mb + c1);
        ssim += luminance * contrast;
        cs += contrast;
    }
    const auto n = static_cast<double>(mu_a.v.size());
    return {ssim / n, cs / n};
}

} // namespace detail

inline constexpr std::array<double, 5> kMsSsimWeights = {0.0448, 0.2856, 0.3001, 0.2363, 0.1333};

// Scales that fit: the coarsest scale must still hold one 11x11 window, so
// 5 scales need a minimum side of 176.
inline int ms_ssim_scales(std::size_t width, std::size_t height) {
    const std::size_t side = std::min(width, height);
    int scales = 0;
    while (scales < 5 && (side >> scales) >= 11) ++scales;
    return scales;
}

// Five-scale MS-SSIM (11x11 Gaussian, sigma 1.5, K1 0.01, K2 0.03) per
// channel, averaged over channels. Smaller images use fewer scales with the
// leading weights renormalized. Negative contrast terms clamp to 0.
inline double ms_ssim(const Image& a, const Image& b) {
    require(a.same_dims(b), Errc::shape_mismatch, "ms_ssim: image dimensions differ");
    const int scales = ms_ssim_scales(a.width, a.height);
    require(scales >= 1, Errc::invalid_argument, "ms_ssim: image smaller than the 11x11 window");
    double weight_total = 0.0;
    for (int s = 0; s < scales; ++s) weight_total += kMsSsimWeights[s];

    double sum = 0.0;
    for (std::size_t ch = 0; ch < a.channels; ++ch) {
        detail::Plane pa{a.height, a.width, std::vector<double>(a.pixels())};
        detail::Plane pb{b.height, b.width, std::vector<double>(b.pixels())};
        for (std::size_t i = 0; i < a.pixels(); ++i) {
            pa.v[i] = a.data[i * a.channels + ch];
            pb.v[i] = b.data[i * b.channels + ch];
        }
        double score = 1.0;
        for (int s = 0; s < scales; ++s) {
            const auto parts = detail::ssim_parts(pa, pb);
            const double term = s + 1 == scales ? parts.ssim : parts.cs;
            score *= std::pow(std::max(term, 0.0), kMsSsimWeights[s] / weight_total);
            if (s + 1 < scales) {
                pa = detail::downsample(pa);
                pb = detail::downsample(pb);
            }
        }
        sum += score;
    }
    return std::clamp(sum / static_cast<double>(a.channels), 0.0, 1.0);
}

} // namespace mdq
