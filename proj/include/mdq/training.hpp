#pragma once

// Per-image joint optimization of the synthesis network, the two
// autoregressive networks and the two latent pyramids.

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mdq/arm.hpp"
#include "mdq/autodiff.hpp"
#include "mdq/image.hpp"
#include "mdq/latents.hpp"
#include "mdq/synthesis.hpp"

namespace mdq {

struct TrainConfig {
    double alpha = 0.1;
    // Tuned for 128x128; the per-pixel tradeoff scales with (W * H)^2, so
    // keep lambda * (W * H)^2 fixed across sizes.
    double lambda1 = 2e-10;
    double lambda2 = 2e-10;
    std::size_t iterations = 10000;
    double lr = 0.1;
    // Per-group overrides of lr. The networks diverge at 0.1.
    std::optional<double> lr_latent;
    std::optional<double> lr_synthesis = 0.01;
    std::optional<double> lr_arm = 0.01;
    // Fraction of iterations run at the full rate before dividing it by 10.
    double decay_fraction = 0.9;
    std::size_t levels = 6;
    std::uint64_t seed = 0;
    // Per-level latent quantization steps; empty means 1.0 everywhere.
    std::vector<double> latent_steps;
    std::size_t context_count = 12;
    // 2 for the two-description codec, 1 for the single-description baseline.
    std::size_t descriptions = 2;

    void validate() const {
        require(alpha >= 0.0 && alpha <= 1.0, Errc::invalid_argument, "alpha must lie in [0, 1]");
        require(lambda1 > 0.0 && lambda2 > 0.0, Errc::invalid_argument, "lambdas must be positive");
        require(iterations > 0, Errc::invalid_argument, "iterations must be positive");
        require(lr > 0.0, Errc::invalid_argument, "learning rate must be positive");
        for (const auto& o : {lr_latent, lr_synthesis, lr_arm})
            require(!o || *o >= 0.0, Errc::invalid_argument, "learning-rate overrides must be non-negative");
        require(decay_fraction > 0.0 && decay_fraction <= 1.0, Errc::invalid_argument,
                "decay_fraction must lie in (0, 1]");
        require(levels > 0 && levels <= 16, Errc::invalid_argument, "levels must be in 1..16");
        require(latent_steps.empty() || latent_steps.size() == levels, Errc::invalid_argument,
                "latent_steps needs one entry per level");
        for (double s : latent_steps) require(s > 0.0, Errc::invalid_argument, "latent steps must be positive");
        require(descriptions == 1 || descriptions == 2, Errc::invalid_argument, "descriptions must be 1 or 2");
        ContextSpec::with_count(context_count);
    }

    // Steps as stored in the bitstream (float32), expanded to doubles.
    std::vector<double> resolved_steps() const {
        std::vector<double> s = latent_steps.empty() ? std::vector<double>(levels, 1.0) : latent_steps;
        for (double& v : s) v = static_cast<double>(static_cast<float>(v));
        return s;
    }
};

struct TrainedModel {
    std::size_t width = 0;
    std::size_t height = 0;
    std::size_t channels = 0;
    SynthesisParams theta;
    std::vector<ArmParams> psi;                 // one per description
    std::vector<std::vector<ad::Tensor>> latents; // [description][level], in step units
    std::vector<double> steps;
    ContextSpec context;
    std::vector<double> loss_history;

    std::size_t description_count() const { return psi.size(); }
    std::size_t level_count() const { return steps.size(); }

    // Continuous latents of description j (1-based), in real units.
    LatentPyramid pyramid(int j) const {
        LatentPyramid p;
        for (std::size_t k = 0; k < level_count(); ++k) {
            const auto& t = latents.at(j - 1)[k];
            Grid<double> g(t.dim(0), t.dim(1), std::vector<double>(t.values().begin(), t.values().end()));
            for (double& v : g.values) v *= steps[k];
            p.levels.push_back(std::move(g));
        }
        p.steps = steps;
        p.description_id = j;
        return p;
    }

    // Integer symbols after eval-mode quantization, clamped to the alphabet.
    std::vector<Grid<std::int32_t>> symbols(int j) const {
        std::vector<Grid<std::int32_t>> out;
        for (const auto& t : latents.at(j - 1)) {
            Grid<std::int32_t> g(t.dim(0), t.dim(1), 0);
            for (std::size_t i = 0; i < g.size(); ++i)
                g.values[i] = static_cast<std::int32_t>(std::clamp<double>(std::round(t.values()[i]), kLatentMin, kLatentMax));
            out.push_back(std::move(g));
        }
        return out;
    }

    LatentPyramid quantized_pyramid(int j) const { return pyramid_from_symbols(symbols(j), steps, j); }
};

inline TrainedModel init_model(const Image& image, const TrainConfig& cfg) {
    cfg.validate();
    require(image.channels == 1 || image.channels == 3, Errc::invalid_argument, "image must have 1 or 3 channels");
    require(image.width > 0 && image.height > 0, Errc::invalid_argument, "empty image");
    TrainedModel m;
    m.width = image.width;
    m.height = image.height;
    m.channels = image.channels;
    m.steps = cfg.resolved_steps();
    m.context = ContextSpec::with_count(cfg.context_count);
    Rng theta_rng(mix_seed(cfg.seed, 0));
    m.theta = SynthesisParams::init(cfg.levels, image.channels, theta_rng);
    for (std::size_t j = 0; j < cfg.descriptions; ++j) {
        Rng rng(mix_seed(cfg.seed, j + 1));
        m.psi.push_back(ArmParams::init(cfg.context_count, rng));
        std::vector<ad::Tensor> levels;
        for (std::size_t k = 0; k < cfg.levels; ++k) {
            const auto s = level_shape(image.height, image.width, k);
            levels.push_back(ad::Tensor::zeros({s.rows, s.cols}, true));
        }
        m.latents.push_back(std::move(levels));
    }
    return m;
}

// Training cost and its components. d[0] is the central distortion, d[1]
// and d[2] the side distortions (absent for a single description).
struct LossTerms {
    ad::Tensor loss;
    double d[3] = {0.0, 0.0, 0.0};
    double rate_weighted[2] = {0.0, 0.0};
    double rate_bits[2] = {0.0, 0.0};
};

// Noise for description j (0-based), level k of one iteration.
inline std::uint64_t noise_seed(std::uint64_t iteration_seed, std::size_t j, std::size_t k) {
    return mix_seed(iteration_seed, 1000 + 64 * j + k);
}

inline LossTerms mdc_loss_terms(const TrainedModel& model, const Image& image, const TrainConfig& cfg,
                                std::uint64_t rng_seed) {
    require(image.width == model.width && image.height == model.height && image.channels == model.channels,
            Errc::shape_mismatch, "image does not match the model dimensions");
    const std::size_t n_desc = model.description_count();
    const std::size_t n_levels = model.level_count();

    LossTerms terms;
    std::vector<std::vector<ad::Tensor>> planes(n_desc);
    std::vector<ad::Tensor> rates(n_desc);
    for (std::size_t j = 0; j < n_desc; ++j) {
        std::vector<ad::Tensor> level_rates;
        std::vector<double> ones;
        for (std::size_t k = 0; k < n_levels; ++k) {
            const ad::Tensor& y = model.latents[j][k];
            std::vector<double> noise(y.size());
            Rng rng(noise_seed(rng_seed, j, k));
            for (double& u : noise) u = rng.uniform() - 0.5;
            const ad::Tensor noisy = ad::add(y, ad::Tensor::from(y.shape(), std::move(noise)));

            const ad::Tensor real = model.steps[k] == 1.0 ? noisy : ad::scale(noisy, model.steps[k]);
            planes[j].push_back(upsample_bicubic(real, model.height, model.width));

            const ad::Tensor ctx = causal_context(noisy, model.context);
            const ad::Tensor out = model.psi[j].net.forward(ctx);
            double bits = 0.0;
            level_rates.push_back(laplace_rate(noisy, out, level_weight(y.dim(0), y.dim(1), k), &bits));
            terms.rate_bits[j] += bits;
            ones.push_back(1.0);
        }
        rates[j] = ad::weighted_sum(level_rates, ones);
        terms.rate_weighted[j] = rates[j].item();
    }

    auto reconstruct = [&](std::vector<ad::Tensor> p) {
        return ad::mse(synth_forward(model.theta, {model.height, model.width, std::move(p)}), image.data);
    };

    if (n_desc == 1) {
        const ad::Tensor d = reconstruct(planes[0]);
        terms.d[0] = terms.d[1] = d.item();
        terms.loss = ad::weighted_sum({d, rates[0]}, {1.0, cfg.lambda1});
        return terms;
    }

    std::vector<ad::Tensor> central;
    for (std::size_t k = 0; k < n_levels; ++k) central.push_back(planes[central_source(k) - 1][k]);
    const ad::Tensor d0 = reconstruct(std::move(central));
    const ad::Tensor d1 = reconstruct(planes[0]);
    const ad::Tensor d2 = reconstruct(planes[1]);
    terms.d[0] = d0.item();
    terms.d[1] = d1.item();
    terms.d[2] = d2.item();
    terms.loss = ad::weighted_sum({d0, d1, d2, rates[0], rates[1]},
                                  {1.0, cfg.alpha, cfg.alpha, cfg.lambda1, cfg.lambda2});
    return terms;
}

// D_0 + alpha (D_1 + D_2) + lambda_1 R_1 + lambda_2 R_2 with noisy latents.
inline ad::Tensor mdc_loss(const TrainedModel& model, const Image& image, const TrainConfig& cfg,
                           std::uint64_t rng_seed) {
    return mdc_loss_terms(model, image, cfg, rng_seed).loss;
}

struct TrainProgress {
    std::size_t iteration;
    const LossTerms& terms;
};

inline TrainedModel train(const Image& image, const TrainConfig& cfg,
                          const std::function<void(const TrainProgress&)>& on_iteration = {}) {
    TrainedModel model = init_model(image, cfg);

    struct Slot {
        ad::Tensor* param;
        ad::AdamState state;
        bool is_latent;
    };
    std::vector<Slot> slots;
    const double lr_lat = cfg.lr_latent.value_or(cfg.lr);
    const double lr_syn = cfg.lr_synthesis.value_or(cfg.lr);
    const double lr_arm = cfg.lr_arm.value_or(cfg.lr);
    for (auto& levels : model.latents)
        for (auto& t : levels) slots.push_back({&t, ad::AdamState::for_param(t, lr_lat), true});
    for (auto* t : model.theta.net.tensors()) slots.push_back({t, ad::AdamState::for_param(*t, lr_syn), false});
    for (auto& psi : model.psi)
        for (auto* t : psi.net.tensors()) slots.push_back({t, ad::AdamState::for_param(*t, lr_arm), false});
    std::vector<double> base_lr;
    for (const auto& s : slots) base_lr.push_back(s.state.lr);

    const auto decay_at = static_cast<std::size_t>(std::floor(cfg.decay_fraction * static_cast<double>(cfg.iterations)));
    model.loss_history.reserve(cfg.iterations);
    for (std::size_t it = 0; it < cfg.iterations; ++it) {
        if (it == decay_at)
            for (std::size_t i = 0; i < slots.size(); ++i) slots[i].state.lr = base_lr[i] / 10.0;

        const LossTerms terms = mdc_loss_terms(model, image, cfg, mix_seed(cfg.seed, it + 1));
        const double loss = terms.loss.item();
        require(std::isfinite(loss), Errc::non_finite, "training loss is not finite at iteration " + std::to_string(it));
        ad::backward(terms.loss);
        for (auto& s : slots) {
            if (!s.param->has_grad()) continue;
            ad::adam_step(*s.param, s.state);
            if (s.is_latent)
                for (double& v : s.param->mutable_values())
                    v = std::clamp<double>(v, kLatentMin, kLatentMax);
        }
        model.loss_history.push_back(loss);
        if (on_iteration) on_iteration({it, terms});
    }
    return model;
}

// Eval-mode reconstructions (quantized latents, current theta). For two
// descriptions: {central, side1, side2}; for one: {side1}.
inline std::vector<Image> evaluate(const TrainedModel& model, const SynthesisParams& theta) {
    std::vector<LatentPyramid> q;
    for (std::size_t j = 1; j <= model.description_count(); ++j) q.push_back(model.quantized_pyramid(static_cast<int>(j)));
    std::vector<Image> out;
    if (q.size() == 2) out.push_back(synthesize(theta, interleave(q[0], q[1]).as_pyramid().levels, model.height, model.width));
    for (const auto& p : q) out.push_back(synthesize(theta, p.levels, model.height, model.width));
    return out;
}

} // namespace mdq
