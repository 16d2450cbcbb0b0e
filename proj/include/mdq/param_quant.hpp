#pragma once

// Post-training quantization of the network parameters: one uniform step and
// one spread per network, chosen by a coordinate-wise grid search over the
// post-training cost.

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "mdq/arm.hpp"
#include "mdq/error.hpp"
#include "mdq/image.hpp"
#include "mdq/laplace.hpp"
#include "mdq/synthesis.hpp"
#include "mdq/training.hpp"

namespace mdq {

inline constexpr double kSigmaFloor = 1e-6;
// |symbol| bound; keeps symbol * step exact in a double and the escape code short.
inline constexpr std::int64_t kParamSymbolLimit = std::int64_t{1} << 40;

struct QuantizedGroup {
    std::vector<std::int64_t> symbols;
    double step = 1.0;
    double sigma = kSigmaFloor;

    std::vector<double> dequantized() const {
        std::vector<double> v(symbols.size());
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<double>(symbols[i]) * step;
        return v;
    }
};

// Steps and sigmas are stored rounded to float32 so the header carries them exactly.
inline double as_float32(double v) { return static_cast<double>(static_cast<float>(v)); }

inline QuantizedGroup quantize_group(std::span<const double> values, double step) {
    require(step > 0.0 && std::isfinite(step), Errc::invalid_argument,
            "quantization step must be positive, got " + std::to_string(step));
    QuantizedGroup g;
    g.step = step;
    g.symbols.resize(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double s = std::round(values[i] / step);
        if (!(std::isfinite(s) && std::abs(s) < static_cast<double>(kParamSymbolLimit)))
            fail(Errc::non_finite,
                 "parameter " + std::to_string(i) + " does not fit the symbol range at step " + std::to_string(step));
        g.symbols[i] = static_cast<std::int64_t>(s);
    }
    if (!values.empty()) {
        const auto deq = g.dequantized();
        double mean = 0.0;
        for (double v : deq) mean += v;
        mean /= static_cast<double>(deq.size());
        double var = 0.0;
        for (double v : deq) var += (v - mean) * (v - mean);
        g.sigma = std::sqrt(var / static_cast<double>(deq.size()));
    }
    g.sigma = as_float32(std::max(g.sigma, kSigmaFloor));
    return g;
}

// Laplace scale in symbol units from a standard deviation in value units.
inline double param_scale(double step, double sigma) { return sigma / (step * std::sqrt(2.0)); }

// Codelength estimate under a zero-mean Laplace in symbol units.
inline double param_rate(std::span<const std::int64_t> symbols, double step, double sigma) {
    require(sigma > 0.0, Errc::invalid_argument, "parameter spread must be positive");
    const double b = param_scale(step, sigma);
    double bits = 0.0;
    for (std::int64_t s : symbols) bits += -std::log2(laplace_prob(s, 0.0, b));
    return bits;
}

// 5 per decade over [1e-5, 1e-1], float32-rounded.
inline std::vector<double> candidate_steps(int per_decade = 5, double lo = 1e-5, double hi = 1e-1) {
    require(per_decade > 0 && lo > 0.0 && hi >= lo, Errc::invalid_argument, "bad candidate grid");
    const double decades = std::log10(hi / lo);
    const int n = static_cast<int>(std::lround(decades * per_decade));
    std::vector<double> out;
    for (int i = 0; i <= n; ++i) out.push_back(as_float32(lo * std::pow(10.0, static_cast<double>(i) / per_decade)));
    return out;
}

struct QuantizedParams {
    QuantizedGroup theta;
    std::vector<QuantizedGroup> psi; // one per description

    SynthesisParams synthesis(std::size_t levels, std::size_t channels) const {
        return {Mlp::unflatten(SynthesisParams::widths(levels, channels), theta.dequantized())};
    }
    ArmParams arm(std::size_t j, std::size_t context_count) const {
        return {Mlp::unflatten(ArmParams::widths(context_count), psi.at(j).dequantized())};
    }
};

// One candidate's measured post-training cost, kept per stage.
struct StageCandidate {
    double step;
    double cost;
};

struct StepSearchResult {
    QuantizedParams params;
    // stage 0 is theta, then psi_1, psi_2
    std::vector<std::vector<StageCandidate>> stages;
    double final_cost = 0.0;
};

namespace detail {

// Post-training cost with quantized latents. Rates are codelengths in bits.
// Each bit of description j is priced at lambda_j times the average
// resolution weight training put on that description's latent bits
// (weighted over unweighted latent rate), so lambda trades bits against
// distortion at the same exchange rate in both stages. Groups not yet
// quantized are left out; they are constant within a stage.
struct PostTrainingCost {
    const TrainedModel& model;
    const Image& image;
    const TrainConfig& cfg;
    std::vector<LatentPyramid> latents; // quantized, per description
    std::vector<LatentPyramid> central;
    std::vector<double> price; // cost per bit, per description

    PostTrainingCost(const TrainedModel& m, const Image& img, const TrainConfig& c) : model(m), image(img), cfg(c) {
        for (std::size_t j = 1; j <= m.description_count(); ++j) latents.push_back(m.quantized_pyramid(static_cast<int>(j)));
        if (latents.size() == 2) central.push_back(interleave(latents[0], latents[1]).as_pyramid());
        for (std::size_t j = 0; j < latents.size(); ++j) {
            const double plain = rate_pyramid(m.psi[j], latents[j], m.context, false);
            const double weighted = rate_pyramid(m.psi[j], latents[j], m.context, true);
            // all-free latents: fall back to the finest-level weight
            const double w = plain > 0.0 ? weighted / plain : static_cast<double>(m.width * m.height);
            price.push_back((j == 0 ? c.lambda1 : c.lambda2) * w);
        }
    }

    double distortion_terms(const SynthesisParams& theta) const {
        auto d = [&](const LatentPyramid& p) {
            return distortion(image, synthesize(theta, p.levels, model.height, model.width));
        };
        if (latents.size() == 1) return d(latents[0]);
        return d(central[0]) + cfg.alpha * (d(latents[0]) + d(latents[1]));
    }

    double lambda(std::size_t j) const { return price[j]; }

    double latent_bits(std::size_t j, const ArmParams& psi) const {
        return rate_pyramid(psi, latents[j], model.context, false);
    }
};

} // namespace detail

inline StepSearchResult search_steps(const TrainedModel& model, const Image& image, const TrainConfig& cfg,
                                     const std::vector<double>& candidates = candidate_steps()) {
    require(!candidates.empty(), Errc::invalid_argument, "empty candidate step grid");
    const detail::PostTrainingCost cost(model, image, cfg);
    const std::size_t n_desc = model.description_count();
    StepSearchResult result;
    result.params.psi.resize(n_desc);

    // Continuous-ARM latent rates; constant while theta is searched.
    std::vector<double> latent_bits(n_desc);
    for (std::size_t j = 0; j < n_desc; ++j) latent_bits[j] = cost.latent_bits(j, model.psi[j]);

    const auto theta_values = model.theta.net.flatten();
    const auto theta_widths = model.theta.net.widths();
    {
        std::vector<StageCandidate> table;
        double best = std::numeric_limits<double>::infinity();
        for (double step : candidates) {
            QuantizedGroup g = quantize_group(theta_values, step);
            const SynthesisParams theta{Mlp::unflatten(theta_widths, g.dequantized())};
            const double theta_bits = param_rate(g.symbols, g.step, g.sigma);
            double c = cost.distortion_terms(theta);
            for (std::size_t j = 0; j < n_desc; ++j) c += cost.lambda(j) * (latent_bits[j] + theta_bits);
            table.push_back({step, c});
            if (c < best) {
                best = c;
                result.params.theta = std::move(g);
            }
        }
        result.stages.push_back(std::move(table));
    }

    const SynthesisParams theta_q{Mlp::unflatten(theta_widths, result.params.theta.dequantized())};
    const double distortion_q = cost.distortion_terms(theta_q);
    const double theta_bits = param_rate(result.params.theta.symbols, result.params.theta.step, result.params.theta.sigma);
    std::vector<double> psi_bits(n_desc, 0.0);

    auto total = [&] {
        double c = distortion_q;
        for (std::size_t j = 0; j < n_desc; ++j) c += cost.lambda(j) * (latent_bits[j] + theta_bits + psi_bits[j]);
        return c;
    };

    for (std::size_t j = 0; j < n_desc; ++j) {
        const auto values = model.psi[j].net.flatten();
        const auto widths = model.psi[j].net.widths();
        std::vector<StageCandidate> table;
        double best = std::numeric_limits<double>::infinity();
        double best_latent = 0.0, best_psi = 0.0;
        for (double step : candidates) {
            QuantizedGroup g = quantize_group(values, step);
            const ArmParams psi{Mlp::unflatten(widths, g.dequantized())};
            latent_bits[j] = cost.latent_bits(j, psi);
            psi_bits[j] = param_rate(g.symbols, g.step, g.sigma);
            const double c = total();
            table.push_back({step, c});
            if (c < best) {
                best = c;
                best_latent = latent_bits[j];
                best_psi = psi_bits[j];
                result.params.psi[j] = std::move(g);
            }
        }
        latent_bits[j] = best_latent;
        psi_bits[j] = best_psi;
        result.stages.push_back(std::move(table));
    }
    result.final_cost = total();
    return result;
}

} // namespace mdq
