#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "mdq/error.hpp"

namespace mdq {

// Raster-order pixels with interleaved channels, nominally in [0, 1].
struct Image {
    std::size_t width = 0;
    std::size_t height = 0;
    std::size_t channels = 0;
    std::vector<double> data;

    Image() = default;
    Image(std::size_t w, std::size_t h, std::size_t c, double fill = 0.0)
        : width(w), height(h), channels(c), data(w * h * c, fill) {}

    std::size_t pixels() const { return width * height; }
    double& at(std::size_t row, std::size_t col, std::size_t ch) { return data[(row * width + col) * channels + ch]; }
    double at(std::size_t row, std::size_t col, std::size_t ch) const {
        return data[(row * width + col) * channels + ch];
    }
    bool same_dims(const Image& o) const { return width == o.width && height == o.height && channels == o.channels; }
};

// Clamps to [0, 1] and rounds to the 8-bit grid, still as doubles.
inline Image to_8bit_grid(const Image& img) {
    Image out = img;
    for (double& v : out.data) v = std::round(std::clamp(v, 0.0, 1.0) * 255.0) / 255.0;
    return out;
}

inline std::vector<std::uint8_t> to_bytes(const Image& img) {
    std::vector<std::uint8_t> out(img.data.size());
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = static_cast<std::uint8_t>(std::lround(std::clamp(img.data[i], 0.0, 1.0) * 255.0));
    return out;
}

inline Image from_bytes(std::size_t w, std::size_t h, std::size_t c, const std::vector<std::uint8_t>& bytes) {
    require(bytes.size() == w * h * c, Errc::shape_mismatch, "pixel byte count does not match dimensions");
    Image img(w, h, c);
    for (std::size_t i = 0; i < bytes.size(); ++i) img.data[i] = bytes[i] / 255.0;
    return img;
}

// Mean over C*W*H of squared differences.
inline double distortion(const Image& reference, const Image& reconstruction) {
    require(reference.same_dims(reconstruction), Errc::shape_mismatch,
            "distortion: " + std::to_string(reference.width) + "x" + std::to_string(reference.height) + "x" +
                std::to_string(reference.channels) + " vs " + std::to_string(reconstruction.width) + "x" +
                std::to_string(reconstruction.height) + "x" + std::to_string(reconstruction.channels));
    double total = 0.0;
    for (std::size_t i = 0; i < reference.data.size(); ++i) {
        const double d = reconstruction.data[i] - reference.data[i];
        total += d * d;
    }
    return total / static_cast<double>(reference.data.size());
}

} // namespace mdq
