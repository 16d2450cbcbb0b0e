#include <gtest/gtest.h>

#include <cmath>

#include "mdq/latents.hpp"
#include "test_util.hpp"

namespace mdq {
namespace {

LatentPyramid random_pyramid(std::size_t h, std::size_t w, std::size_t n, std::uint64_t seed, int id = 1) {
    std::vector<double> steps;
    for (std::size_t k = 0; k < n; ++k) steps.push_back(0.25 * static_cast<double>(k + 1));
    auto p = LatentPyramid::zeros(h, w, n, steps, id);
    Rng rng(seed);
    for (auto& level : p.levels)
        for (double& v : level.values) v = rng.uniform(-5.0, 5.0);
    return p;
}

TEST(Quantize, Examples) {
    EXPECT_EQ(quantize(0.74, 0.5), 0.5);
    EXPECT_EQ(quantize(-0.25, 1.0), 0.0);
    EXPECT_EQ(quantize(0.5, 1.0), 1.0);
    EXPECT_EQ(quantize(-0.5, 1.0), -1.0);
}

TEST(Quantize, RejectsNonPositiveStep) {
    EXPECT_THROW(quantize(1.0, 0.0), Error);
    EXPECT_THROW(quantize(1.0, -1.0), Error);
}

TEST(Quantize, IdempotentAndWithinHalfStep) {
    Rng rng(3);
    for (int i = 0; i < 10000; ++i) {
        const double v = rng.uniform(-100.0, 100.0);
        const double step = std::exp(rng.uniform(-5.0, 2.0));
        const double q = quantize(v, step);
        EXPECT_EQ(quantize(q, step), q);
        EXPECT_LE(std::abs(q - v), step / 2 * (1 + 1e-12));
    }
}

TEST(QuantizePyramid, ZeroAndIdempotent) {
    const auto zero = LatentPyramid::zeros(9, 7, 3, {1.0, 0.5, 2.0}, 1);
    EXPECT_EQ(quantize_pyramid(zero).levels, zero.levels);
    const auto q = quantize_pyramid(random_pyramid(9, 7, 3, 4));
    EXPECT_EQ(quantize_pyramid(q).levels, q.levels);
}

TEST(QuantizePyramid, WithinHalfStep) {
    const auto p = random_pyramid(16, 12, 4, 5);
    const auto q = quantize_pyramid(p);
    for (std::size_t k = 0; k < p.level_count(); ++k)
        for (std::size_t i = 0; i < p.levels[k].size(); ++i)
            EXPECT_LE(std::abs(q.levels[k].values[i] - p.levels[k].values[i]), p.steps[k] / 2 + 1e-12);
}

TEST(Noise, DeterministicAndBounded) {
    const auto p = random_pyramid(12, 12, 3, 6);
    const auto a = add_uniform_noise(p, 99), b = add_uniform_noise(p, 99);
    EXPECT_EQ(a.levels, b.levels);
    EXPECT_NE(a.levels, add_uniform_noise(p, 100).levels);
    for (std::size_t k = 0; k < p.level_count(); ++k)
        for (std::size_t i = 0; i < p.levels[k].size(); ++i)
            EXPECT_LE(std::abs(a.levels[k].values[i] - p.levels[k].values[i]), p.steps[k] / 2);
}

TEST(Noise, MonteCarloMeanIsZero) {
    // 1000 x 1000 single level, unit step: 10^6 draws
    const auto p = LatentPyramid::zeros(1000, 1000, 1, {1.0}, 1);
    const auto n = add_uniform_noise(p, 2024);
    double sum = 0.0;
    for (double v : n.levels[0].values) sum += v;
    EXPECT_NEAR(sum / 1e6, 0.0, 0.002);
}

TEST(Interleave, ThreeLevels) {
    const auto p1 = quantize_pyramid(random_pyramid(8, 8, 3, 10, 1));
    const auto p2 = quantize_pyramid(random_pyramid(8, 8, 3, 11, 2));
    const auto c = interleave(p1, p2);
    const auto s1 = pyramid_symbols(p1), s2 = pyramid_symbols(p2);
    EXPECT_EQ(c.levels[0], s1[0]);
    EXPECT_EQ(c.levels[1], s2[1]);
    EXPECT_EQ(c.levels[2], s1[2]);
    EXPECT_EQ(c.provenance, (std::vector<int>{1, 2, 1}));
}

TEST(Interleave, SixLevelsAlternate) {
    const auto p1 = quantize_pyramid(random_pyramid(64, 64, 6, 12, 1));
    const auto p2 = quantize_pyramid(random_pyramid(64, 64, 6, 13, 2));
    const auto c = interleave(p1, p2);
    const auto s1 = pyramid_symbols(p1), s2 = pyramid_symbols(p2);
    EXPECT_EQ(c.provenance, (std::vector<int>{1, 2, 1, 2, 1, 2}));
    for (std::size_t k = 0; k < 6; ++k) EXPECT_EQ(c.levels[k], k % 2 == 0 ? s1[k] : s2[k]);
    const auto as_p = c.as_pyramid();
    for (std::size_t k = 0; k < 6; ++k)
        EXPECT_EQ(as_p.levels[k], k % 2 == 0 ? p1.levels[k] : p2.levels[k]);
}

TEST(Interleave, IdenticalInputsGiveThatInput) {
    const auto p = quantize_pyramid(random_pyramid(10, 6, 3, 14));
    EXPECT_EQ(interleave(p, p).as_pyramid().levels, p.levels);
}

TEST(Interleave, RejectsMismatch) {
    const auto a = quantize_pyramid(random_pyramid(8, 8, 3, 1));
    EXPECT_THROW(interleave(a, quantize_pyramid(random_pyramid(8, 8, 2, 2))), Error);
    EXPECT_THROW(interleave(a, quantize_pyramid(random_pyramid(8, 10, 3, 2))), Error);
}

TEST(Pyramid, ShapeRule512) {
    const auto p = LatentPyramid::zeros(512, 512, 6, std::vector<double>(6, 1.0), 1);
    for (std::size_t k = 0; k < 6; ++k) {
        EXPECT_EQ(p.levels[k].rows, 512u >> k);
        EXPECT_EQ(p.levels[k].cols, 512u >> k);
    }
}

TEST(Pyramid, OddDimensionsUseCeiling) {
    EXPECT_EQ(level_shape(37, 20, 0), (LevelShape{37, 20}));
    EXPECT_EQ(level_shape(37, 20, 1), (LevelShape{19, 10}));
    EXPECT_EQ(level_shape(37, 20, 3), (LevelShape{5, 3}));
}

TEST(Pyramid, RejectsBadSteps) {
    EXPECT_THROW(LatentPyramid::zeros(8, 8, 2, {1.0, 0.0}, 1), Error);
    EXPECT_THROW(LatentPyramid::zeros(8, 8, 2, {1.0}, 1), Error);
}

TEST(Symbols, NonIntegerIsAnError) {
    auto p = LatentPyramid::zeros(4, 4, 1, {0.5}, 1);
    p.levels[0].values[3] = 0.3;
    EXPECT_THROW(pyramid_symbols(p), Error);
}

TEST(Symbols, ClampedToAlphabet) {
    auto p = LatentPyramid::zeros(2, 2, 1, {1.0}, 1);
    p.levels[0].values = {1000.0, -1000.0, 3.0, 0.0};
    const auto s = pyramid_symbols(p);
    EXPECT_EQ(s[0].values, (std::vector<std::int32_t>{kLatentMax, kLatentMin, 3, 0}));
}

TEST(Symbols, RoundTrip) {
    const auto q = quantize_pyramid(random_pyramid(11, 9, 3, 20));
    EXPECT_EQ(pyramid_from_symbols(pyramid_symbols(q), q.steps, 1).levels, q.levels);
}

} // namespace
} // namespace mdq
