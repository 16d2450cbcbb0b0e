#pragma once

// Hierarchical latent pyramids, the uniform scalar quantizer, the additive
// noise relaxation used while training, and the central interleaving rule.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "mdq/error.hpp"
#include "mdq/grid.hpp"
#include "mdq/rng.hpp"

namespace mdq {

// Alphabet of coded latent symbols; quantized latents are clamped into it.
inline constexpr std::int32_t kLatentMin = -256;
inline constexpr std::int32_t kLatentMax = 255;

struct LevelShape {
    std::size_t rows;
    std::size_t cols;
    bool operator==(const LevelShape&) const = default;
};

// Level k of an HxW image is ceil(H/2^k) x ceil(W/2^k).
inline LevelShape level_shape(std::size_t height, std::size_t width, std::size_t level) {
    const std::size_t div = std::size_t{1} << level;
    return {(height + div - 1) / div, (width + div - 1) / div};
}

// Rounds half away from zero.
inline double quantize(double value, double step) {
    if (!(step > 0.0 && std::isfinite(step)))
        fail(Errc::invalid_argument, "quantization step must be positive, got " + std::to_string(step));
    return step * std::round(value / step);
}

struct LatentPyramid {
    std::vector<Grid<double>> levels;
    std::vector<double> steps;
    int description_id = 1;

    static LatentPyramid zeros(std::size_t height, std::size_t width, std::size_t level_count,
                               std::vector<double> steps, int description_id) {
        require(level_count > 0, Errc::invalid_argument, "pyramid needs at least one level");
        require(steps.size() == level_count, Errc::invalid_argument, "one step per level required");
        LatentPyramid p;
        for (std::size_t k = 0; k < level_count; ++k) {
            const auto s = level_shape(height, width, k);
            p.levels.emplace_back(s.rows, s.cols, 0.0);
        }
        p.steps = std::move(steps);
        p.description_id = description_id;
        p.validate();
        return p;
    }

    std::size_t level_count() const { return levels.size(); }

    void validate() const {
        require(!levels.empty() && levels.size() == steps.size(), Errc::invalid_argument,
                "pyramid level/step count mismatch");
        require(description_id == 1 || description_id == 2, Errc::invalid_argument, "description id must be 1 or 2");
        for (double s : steps) require(s > 0.0 && std::isfinite(s), Errc::invalid_argument, "steps must be > 0");
        for (std::size_t k = 0; k < levels.size(); ++k) {
            const auto expect = level_shape(levels[0].rows, levels[0].cols, k);
            require(levels[k].rows == expect.rows && levels[k].cols == expect.cols, Errc::shape_mismatch,
                    "level " + std::to_string(k) + " violates the halving rule");
        }
    }

    bool same_layout(const LatentPyramid& other) const {
        if (levels.size() != other.levels.size()) return false;
        for (std::size_t k = 0; k < levels.size(); ++k)
            if (!levels[k].same_shape(other.levels[k])) return false;
        return true;
    }
};

inline LatentPyramid quantize_pyramid(const LatentPyramid& p) {
    LatentPyramid out = p;
    for (std::size_t k = 0; k < out.levels.size(); ++k)
        for (double& v : out.levels[k].values) v = quantize(v, out.steps[k]);
    return out;
}

// Integer symbols of a quantized pyramid, clamped to the coder alphabet.
// Throws when a value is not an integer multiple of its level step.
inline std::vector<Grid<std::int32_t>> pyramid_symbols(const LatentPyramid& p) {
    std::vector<Grid<std::int32_t>> out;
    for (std::size_t k = 0; k < p.levels.size(); ++k) {
        const auto& level = p.levels[k];
        Grid<std::int32_t> g(level.rows, level.cols, 0);
        for (std::size_t i = 0; i < level.size(); ++i) {
            const double units = level.values[i] / p.steps[k];
            const double r = std::round(units);
            if (!(std::abs(units - r) <= 1e-9 * std::max(1.0, std::abs(r))))
                fail(Errc::invalid_argument, "level " + std::to_string(k) + " holds a non-integer symbol");
            g.values[i] = static_cast<std::int32_t>(std::clamp<double>(r, kLatentMin, kLatentMax));
        }
        out.push_back(std::move(g));
    }
    return out;
}

inline LatentPyramid pyramid_from_symbols(const std::vector<Grid<std::int32_t>>& symbols,
                                          const std::vector<double>& steps, int description_id) {
    require(symbols.size() == steps.size(), Errc::invalid_argument, "one step per level required");
    LatentPyramid p;
    for (std::size_t k = 0; k < symbols.size(); ++k) {
        Grid<double> g(symbols[k].rows, symbols[k].cols, 0.0);
        for (std::size_t i = 0; i < g.size(); ++i) g.values[i] = symbols[k].values[i] * steps[k];
        p.levels.push_back(std::move(g));
    }
    p.steps = steps;
    p.description_id = description_id;
    p.validate();
    return p;
}

// Draws of U[-0.5, 0.5) scaled by each level's step, in level-then-raster order.
inline LatentPyramid add_uniform_noise(const LatentPyramid& p, std::uint64_t seed) {
    LatentPyramid out = p;
    Rng rng(seed);
    for (std::size_t k = 0; k < out.levels.size(); ++k)
        for (double& v : out.levels[k].values) v += (rng.uniform() - 0.5) * out.steps[k];
    return out;
}

// Central reconstruction takes even levels from description 1 and odd
// levels from description 2.
inline int central_source(std::size_t level) { return level % 2 == 0 ? 1 : 2; }

struct CentralLatentSet {
    std::vector<Grid<std::int32_t>> levels;
    std::vector<double> steps;
    std::vector<int> provenance;

    LatentPyramid as_pyramid() const { return pyramid_from_symbols(levels, steps, 1); }
};

inline CentralLatentSet interleave(const LatentPyramid& p1, const LatentPyramid& p2) {
    require(p1.level_count() == p2.level_count(), Errc::shape_mismatch,
            "interleave: level counts " + std::to_string(p1.level_count()) + " and " +
                std::to_string(p2.level_count()) + " differ");
    require(p1.same_layout(p2), Errc::shape_mismatch, "interleave: level shapes differ");
    const auto s1 = pyramid_symbols(p1);
    const auto s2 = pyramid_symbols(p2);
    CentralLatentSet out;
    for (std::size_t k = 0; k < p1.level_count(); ++k) {
        const int src = central_source(k);
        out.levels.push_back(src == 1 ? s1[k] : s2[k]);
        out.steps.push_back(src == 1 ? p1.steps[k] : p2.steps[k]);
        out.provenance.push_back(src);
    }
    return out;
}

} // namespace mdq
