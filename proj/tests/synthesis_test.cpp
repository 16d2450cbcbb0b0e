#include <gtest/gtest.h>

#include <cmath>

#include "mdq/synthesis.hpp"
#include "test_util.hpp"

namespace mdq {
namespace {

using test::fd_max_rel_error;
using test::random_values;

// Direct 2D evaluation of half-pixel Catmull-Rom resampling.
double keys(double d) {
    d = std::abs(d);
    if (d <= 1.0) return 1.5 * d * d * d - 2.5 * d * d + 1.0;
    if (d < 2.0) return -0.5 * d * d * d + 2.5 * d * d - 4.0 * d + 2.0;
    return 0.0;
}

Grid<double> bicubic_oracle(const Grid<double>& src, std::size_t th, std::size_t tw) {
    Grid<double> out(th, tw, 0.0);
    const auto clampi = [](long v, std::size_t n) { return static_cast<std::size_t>(std::clamp<long>(v, 0, long(n) - 1)); };
    for (std::size_t y = 0; y < th; ++y)
        for (std::size_t x = 0; x < tw; ++x) {
            const double sy = (y + 0.5) * double(src.rows) / double(th) - 0.5;
            const double sx = (x + 0.5) * double(src.cols) / double(tw) - 0.5;
            double acc = 0.0;
            for (long r = long(std::floor(sy)) - 1; r <= long(std::floor(sy)) + 2; ++r)
                for (long c = long(std::floor(sx)) - 1; c <= long(std::floor(sx)) + 2; ++c)
                    acc += keys(sy - double(r)) * keys(sx - double(c)) * src.at(clampi(r, src.rows), clampi(c, src.cols));
            out.at(y, x) = acc;
        }
    return out;
}

Grid<double> random_grid(std::size_t r, std::size_t c, std::uint64_t seed) { return {r, c, random_values(r * c, seed, -3, 3)}; }

TEST(Upsample, UnitFactorIsIdentity) {
    const auto g = random_grid(7, 5, 1);
    EXPECT_EQ(upsample_bicubic(g, 7, 5), g);
}

TEST(Upsample, ConstantStaysConstant) {
    const Grid<double> g(4, 3, 2.75);
    for (double v : upsample_bicubic(g, 16, 11).values) EXPECT_NEAR(v, 2.75, 1e-13);
}

TEST(Upsample, Linear) {
    const auto g1 = random_grid(5, 6, 2), g2 = random_grid(5, 6, 3);
    Grid<double> mix(5, 6, 0.0);
    for (std::size_t i = 0; i < mix.size(); ++i) mix.values[i] = 1.7 * g1.values[i] - 0.4 * g2.values[i];
    const auto a = upsample_bicubic(g1, 20, 23), b = upsample_bicubic(g2, 20, 23), m = upsample_bicubic(mix, 20, 23);
    for (std::size_t i = 0; i < m.size(); ++i) EXPECT_NEAR(m.values[i], 1.7 * a.values[i] - 0.4 * b.values[i], 1e-10);
}

TEST(Upsample, MatchesDirectOracle) {
    for (auto [r, c, th, tw] : {std::array<std::size_t, 4>{4, 4, 16, 16}, {3, 5, 9, 17}, {1, 1, 8, 8}, {2, 7, 5, 13}}) {
        const auto g = random_grid(r, c, 4 + r * 10 + c);
        const auto fast = upsample_bicubic(g, th, tw), slow = bicubic_oracle(g, th, tw);
        for (std::size_t i = 0; i < fast.size(); ++i) EXPECT_NEAR(fast.values[i], slow.values[i], 1e-12);
    }
}

TEST(Upsample, BackwardIsTranspose) {
    // d mse / dy = 2 (y - ref) / n; the level gradient must be U^T of that,
    // with the columns of U read off unit impulses.
    const auto xv = random_values(12, 5), ref = random_values(9 * 14, 6);
    auto x = ad::Tensor::from({3, 4}, xv, true);
    const auto y = upsample_bicubic(x, 9, 14);
    ad::backward(ad::mse(y, ref));
    std::vector<double> g(ref.size());
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = 2.0 * (y.values()[i] - ref[i]) / double(g.size());
    for (std::size_t i = 0; i < xv.size(); ++i) {
        Grid<double> e(3, 4, 0.0);
        e.values[i] = 1.0;
        const auto col = upsample_bicubic(e, 9, 14);
        double expect = 0.0;
        for (std::size_t o = 0; o < g.size(); ++o) expect += col.values[o] * g[o];
        EXPECT_NEAR(x.grad()[i], expect, 1e-12);
    }
}

TEST(Upsample, Errors) {
    EXPECT_THROW(upsample_bicubic(Grid<double>(), 4, 4), Error);
    EXPECT_THROW(upsample_bicubic(random_grid(4, 4, 1), 3, 8), Error);
}

TEST(Upsample, OddTargetKeepsExactSize) {
    const auto g = upsample_bicubic(random_grid(19, 10, 7), 37, 20);
    EXPECT_EQ(g.rows, 37u);
    EXPECT_EQ(g.cols, 20u);
}

UpsampledStack stack_of(const std::vector<Grid<double>>& planes) {
    UpsampledStack s{planes[0].rows, planes[0].cols, {}};
    for (const auto& p : planes) s.planes.push_back(ad::Tensor::from({p.rows, p.cols}, p.values));
    return s;
}

TEST(Synthesis, ZeroWeightsGiveBias) {
    auto params = SynthesisParams{Mlp::zeros(SynthesisParams::widths(2, 3), false)};
    auto b = params.net.layers().back().bias.mutable_values();
    b[0] = 0.1, b[1] = 0.5, b[2] = 0.9;
    const auto out = synth_forward(params, stack_of({random_grid(4, 4, 1), random_grid(4, 4, 2)}));
    for (std::size_t p = 0; p < 16; ++p)
        for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(out.values()[p * 3 + c], b[c]);
}

TEST(Synthesis, HandComputedOneUnit) {
    // 1 -> 1 -> 1 -> 1: y = 2 * relu(3 * relu(x - 1) + 0.5) - 1
    Mlp net = Mlp::zeros({1, 1, 1, 1}, false);
    net.layers()[0].weight.mutable_values()[0] = 1.0;
    net.layers()[0].bias.mutable_values()[0] = -1.0;
    net.layers()[1].weight.mutable_values()[0] = 3.0;
    net.layers()[1].bias.mutable_values()[0] = 0.5;
    net.layers()[2].weight.mutable_values()[0] = 2.0;
    net.layers()[2].bias.mutable_values()[0] = -1.0;
    const auto out = synth_forward({net}, stack_of({Grid<double>(2, 2, std::vector<double>{0.0, 1.0, 2.0, 3.0})}));
    const std::vector<double> got(out.values().begin(), out.values().end());
    EXPECT_EQ(got, (std::vector<double>{0.0, 0.0, 6.0, 12.0}));
}

TEST(Synthesis, MatchesScalarLoopOracle) {
    Rng rng(8);
    const auto params = SynthesisParams::init(3, 3, rng);
    const std::vector<Grid<double>> planes = {random_grid(16, 16, 9), random_grid(16, 16, 10), random_grid(16, 16, 11)};
    const auto out = synth_forward(params, stack_of(planes));
    const auto& layers = params.net.layers();
    for (std::size_t p = 0; p < 256; ++p) {
        std::vector<double> a = {planes[0].values[p], planes[1].values[p], planes[2].values[p]};
        for (std::size_t l = 0; l < layers.size(); ++l) {
            const std::size_t in = layers[l].weight.dim(0), n = layers[l].weight.dim(1);
            std::vector<double> b(n);
            for (std::size_t o = 0; o < n; ++o) {
                double acc = layers[l].bias.values()[o];
                for (std::size_t i = 0; i < in; ++i) acc += a[i] * layers[l].weight.values()[i * n + o];
                b[o] = l + 1 < layers.size() ? std::max(acc, 0.0) : acc;
            }
            a = b;
        }
        for (std::size_t c = 0; c < 3; ++c) EXPECT_NEAR(out.values()[p * 3 + c], a[c], 1e-10);
    }
}

TEST(Synthesis, PlaneCountMismatch) {
    Rng rng(1);
    const auto params = SynthesisParams::init(3, 1, rng);
    EXPECT_THROW(synth_forward(params, stack_of({random_grid(4, 4, 1), random_grid(4, 4, 2)})), Error);
}

TEST(Synthesis, ArchitectureWidths) {
    Rng rng(2);
    const auto p = SynthesisParams::init(6, 3, rng);
    EXPECT_EQ(p.net.widths(), (std::vector<std::size_t>{6, 12, 12, 3}));
}

TEST(Synthesis, GradientsMatchFiniteDifferences) {
    Rng rng(12);
    auto params = SynthesisParams::init(3, 3, rng);
    std::vector<ad::Tensor> levels = {ad::Tensor::from({8, 8}, random_values(64, 13), true),
                                      ad::Tensor::from({4, 4}, random_values(16, 14), true),
                                      ad::Tensor::from({2, 2}, random_values(4, 15), true)};
    const auto target = random_values(64 * 3, 16, 0, 1);
    auto loss = [&] {
        UpsampledStack s{8, 8, {}};
        for (const auto& l : levels) s.planes.push_back(upsample_bicubic(l, 8, 8));
        return ad::mse(synth_forward(params, s), target);
    };
    ad::backward(loss());
    auto f = [&] { return loss().item(); };
    for (auto* t : params.net.tensors()) {
        const std::vector<double> g(t->grad().begin(), t->grad().end());
        EXPECT_LT(fd_max_rel_error(f, t->mutable_values(), g), 1e-4);
    }
    for (auto& l : levels) {
        const std::vector<double> g(l.grad().begin(), l.grad().end());
        EXPECT_LT(fd_max_rel_error(f, l.mutable_values(), g), 1e-4);
    }
}

TEST(Synthesis, SynthesizeReturnsImage) {
    Rng rng(3);
    const auto params = SynthesisParams::init(2, 3, rng);
    const auto img = synthesize(params, {random_grid(6, 5, 1), random_grid(3, 3, 2)}, 6, 5);
    EXPECT_EQ(img.width, 5u);
    EXPECT_EQ(img.height, 6u);
    EXPECT_EQ(img.channels, 3u);
}

} // namespace
} // namespace mdq
