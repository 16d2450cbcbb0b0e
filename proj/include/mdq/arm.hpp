#pragma once

// Autoregressive probability model over latent grids: causal context
// gathering, Laplace (mu, b) prediction, and symbol rates.

#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "mdq/autodiff.hpp"
#include "mdq/grid.hpp"
#include "mdq/laplace.hpp"
#include "mdq/latents.hpp"
#include "mdq/mlp.hpp"

namespace mdq {

struct ContextSpec {
    // (dy, dx) pairs, each strictly before the current pixel in raster order.
    std::vector<std::pair<int, int>> offsets;

    std::size_t size() const { return offsets.size(); }

    // radius R: R full rows of width 2R+1 above, R pixels to the left.
    // R = 2 gives the default 12-pixel neighbourhood.
    static ContextSpec with_count(std::size_t count) {
        for (int radius = 1; radius <= 4; ++radius) {
            if (static_cast<std::size_t>(2 * radius * (radius + 1)) != count) continue;
            ContextSpec spec;
            for (int dy = -radius; dy < 0; ++dy)
                for (int dx = -radius; dx <= radius; ++dx) spec.offsets.emplace_back(dy, dx);
            for (int dx = -radius; dx < 0; ++dx) spec.offsets.emplace_back(0, dx);
            return spec;
        }
        fail(Errc::invalid_argument, "unsupported context pixel count " + std::to_string(count));
    }

    static ContextSpec standard() { return with_count(12); }

    void validate() const {
        require(!offsets.empty(), Errc::invalid_argument, "context needs at least one offset");
        for (auto [dy, dx] : offsets)
            require(dy < 0 || (dy == 0 && dx < 0), Errc::invalid_argument, "context offset is not causal");
    }
};

template <typename T>
inline std::vector<double> extract_context(const Grid<T>& level, std::size_t row, std::size_t col,
                                           const ContextSpec& spec) {
    if (row >= level.rows || col >= level.cols)
        fail(Errc::invalid_argument, "context position (" + std::to_string(row) + ", " + std::to_string(col) +
                                         ") outside " + std::to_string(level.rows) + "x" + std::to_string(level.cols) +
                                         " grid");
    std::vector<double> ctx(spec.size(), 0.0);
    for (std::size_t i = 0; i < spec.size(); ++i) {
        const long long r = static_cast<long long>(row) + spec.offsets[i].first;
        const long long c = static_cast<long long>(col) + spec.offsets[i].second;
        if (r >= 0 && c >= 0 && r < static_cast<long long>(level.rows) && c < static_cast<long long>(level.cols))
            ctx[i] = static_cast<double>(level.at(static_cast<std::size_t>(r), static_cast<std::size_t>(c)));
    }
    return ctx;
}

// Differentiable gather: level [rows x cols] -> [rows*cols x C]; zeros
// outside the grid.
inline ad::Tensor causal_context(const ad::Tensor& level, const ContextSpec& spec) {
    require(level.shape().size() == 2, Errc::shape_mismatch, "context gather expects a 2D level");
    const std::size_t rows = level.dim(0), cols = level.dim(1), n = spec.size();
    // source index per (pixel, offset); -1 when out of bounds
    auto source = std::make_shared<std::vector<long long>>(rows * cols * n, -1);
    std::vector<double> out(rows * cols * n, 0.0);
    const auto v = level.values();
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c)
            for (std::size_t i = 0; i < n; ++i) {
                const long long rr = static_cast<long long>(r) + spec.offsets[i].first;
                const long long cc = static_cast<long long>(c) + spec.offsets[i].second;
                if (rr < 0 || cc < 0 || rr >= static_cast<long long>(rows) || cc >= static_cast<long long>(cols))
                    continue;
                const std::size_t slot = (r * cols + c) * n + i;
                (*source)[slot] = rr * static_cast<long long>(cols) + cc;
                out[slot] = v[static_cast<std::size_t>((*source)[slot])];
            }
    return ad::detail::make_result({rows * cols, n}, std::move(out), {level}, [source](ad::detail::Node& self) {
        auto g = ad::detail::grad_of(*self.parents[0]);
        for (std::size_t slot = 0; slot < source->size(); ++slot)
            if ((*source)[slot] >= 0) g[static_cast<std::size_t>((*source)[slot])] += self.grad[slot];
    });
}

// C_ctx -> 12 -> 12 -> 2 (mu, raw scale).
struct ArmParams {
    Mlp net;

    static std::vector<std::size_t> widths(std::size_t context_count) {
        return {context_count, kHiddenUnits, kHiddenUnits, 2};
    }

    static ArmParams init(std::size_t context_count, Rng& rng) { return {Mlp::init(widths(context_count), rng)}; }

    std::size_t context_count() const { return net.input_width(); }
};

struct ArmPrediction {
    double mu;
    double b;
};

// Scalar evaluation shared by rate estimation, the encoder and the decoder.
class ArmEvaluator {
public:
    explicit ArmEvaluator(const ArmParams& params) : params_(params) {}

    ArmPrediction operator()(std::span<const double> context) {
        std::array<double, 2> out{};
        params_.net.forward_row(context, a_, b_, out);
        const double mu = std::isfinite(out[0]) ? out[0] : 0.0;
        return {mu, scale_from_raw(out[1])};
    }

private:
    const ArmParams& params_;
    std::vector<double> a_, b_;
};

inline ArmPrediction predict(const ArmParams& params, std::span<const double> context) {
    if (context.size() != params.context_count())
        fail(Errc::shape_mismatch, "context of " + std::to_string(context.size()) +
                                       " values for a model expecting " + std::to_string(params.context_count()));
    ArmEvaluator eval(params);
    return eval(context);
}

// Resolution weight of level k: (W_k * H_k) / 2^(2k).
inline double level_weight(std::size_t rows, std::size_t cols, std::size_t level) {
    return static_cast<double>(rows * cols) / std::ldexp(1.0, static_cast<int>(2 * level));
}

// Differentiable -weight * sum_i log2 p(y_i | mu_i, b_i) with continuous bin
// centres y [n] and network outputs [n x 2]. Bins clamped at the probability
// floor contribute 16 bits and no gradient. `bits` receives the unweighted sum.
inline ad::Tensor laplace_rate(const ad::Tensor& centres, const ad::Tensor& arm_out, double weight,
                               double* bits = nullptr) {
    const std::size_t n = centres.size();
    require(arm_out.shape().size() == 2 && arm_out.dim(0) == n && arm_out.dim(1) == 2, Errc::shape_mismatch,
            "rate expects [n x 2] model output for " + std::to_string(n) + " symbols");
    const auto y = centres.values();
    const auto out = arm_out.values();
    // per element: d(bits)/d(centre), d(bits)/d(mu), d(bits)/d(raw)
    auto partials = std::make_shared<std::vector<double>>(3 * n, 0.0);
    constexpr double inv_ln2 = 1.4426950408889634;
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double mu = out[2 * i];
        const double raw = out[2 * i + 1];
        const double b = scale_from_raw(raw);
        const LaplaceBin bin = laplace_bin(y[i], mu, b);
        if (!(bin.p > kProbFloor)) {
            total += 16.0;
            continue;
        }
        total += -std::log2(bin.p);
        const double dbits_dp = -inv_ln2 / bin.p;
        const bool scale_free = std::exp(raw) > kScaleMin && std::exp(raw) < kScaleMax;
        (*partials)[3 * i] = dbits_dp * bin.dp_dcentre;
        (*partials)[3 * i + 1] = dbits_dp * bin.dp_dmu;
        (*partials)[3 * i + 2] = scale_free ? dbits_dp * bin.dp_db * b : 0.0;
    }
    if (bits) *bits = total;
    return ad::detail::make_result({1}, {weight * total}, {centres, arm_out},
                                   [partials, weight, n](ad::detail::Node& self) {
                                       const double g = weight * self.grad[0];
                                       auto& yc = *self.parents[0];
                                       auto& o = *self.parents[1];
                                       if (yc.requires_grad) {
                                           auto dy = ad::detail::grad_of(yc);
                                           for (std::size_t i = 0; i < n; ++i) dy[i] += g * (*partials)[3 * i];
                                       }
                                       if (o.requires_grad) {
                                           auto dout = ad::detail::grad_of(o);
                                           for (std::size_t i = 0; i < n; ++i) {
                                               dout[2 * i] += g * (*partials)[3 * i + 1];
                                               dout[2 * i + 1] += g * (*partials)[3 * i + 2];
                                           }
                                       }
                                   });
}

// Bits of one level of integer symbols under the model, raster order.
inline double rate_level(const ArmParams& params, const Grid<std::int32_t>& symbols, const ContextSpec& spec) {
    require(spec.size() == params.context_count(), Errc::shape_mismatch, "context spec does not match model");
    ArmEvaluator eval(params);
    double total = 0.0;
    for (std::size_t r = 0; r < symbols.rows; ++r)
        for (std::size_t c = 0; c < symbols.cols; ++c) {
            const auto ctx = extract_context(symbols, r, c, spec);
            const auto [mu, b] = eval(ctx);
            total += -std::log2(laplace_prob(symbols.at(r, c), mu, b));
        }
    return total;
}

// Rate of a quantized pyramid. Weighted applies the per-level resolution
// weight (training objective); unweighted is the codelength estimate.
inline double rate_pyramid(const ArmParams& params, const LatentPyramid& p, const ContextSpec& spec, bool weighted) {
    const auto symbols = pyramid_symbols(p);
    double total = 0.0;
    for (std::size_t k = 0; k < symbols.size(); ++k) {
        const double bits = rate_level(params, symbols[k], spec);
        total += weighted ? level_weight(symbols[k].rows, symbols[k].cols, k) * bits : bits;
    }
    return total;
}

} // namespace mdq
