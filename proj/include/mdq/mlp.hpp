#pragma once

// Small fully connected network shared by the synthesis and autoregressive
// models: affine layers with ReLU between them and a linear output.

#include <cmath>
#include <span>
#include <vector>

#include "mdq/autodiff.hpp"
#include "mdq/rng.hpp"

namespace mdq {

inline constexpr std::size_t kHiddenUnits = 12;

struct Layer {
    ad::Tensor weight; // [in x out]
    ad::Tensor bias;   // [out]
};

class Mlp {
public:
    Mlp() = default;

    // Weights and biases drawn from U[-1/sqrt(fan_in), 1/sqrt(fan_in)].
    static Mlp init(const std::vector<std::size_t>& widths, Rng& rng) {
        require(widths.size() >= 2, Errc::invalid_argument, "network needs input and output widths");
        Mlp m;
        for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
            const std::size_t in = widths[l], out = widths[l + 1];
            const double bound = 1.0 / std::sqrt(static_cast<double>(in));
            std::vector<double> w(in * out), b(out);
            for (double& v : w) v = rng.uniform(-bound, bound);
            for (double& v : b) v = rng.uniform(-bound, bound);
            m.layers_.push_back({ad::Tensor::from({in, out}, std::move(w), true),
                                 ad::Tensor::from({out}, std::move(b), true)});
        }
        return m;
    }

    static Mlp zeros(const std::vector<std::size_t>& widths, bool requires_grad = true) {
        Mlp m;
        for (std::size_t l = 0; l + 1 < widths.size(); ++l)
            m.layers_.push_back({ad::Tensor::zeros({widths[l], widths[l + 1]}, requires_grad),
                                 ad::Tensor::zeros({widths[l + 1]}, requires_grad)});
        return m;
    }

    std::size_t input_width() const { return layers_.front().weight.dim(0); }
    std::size_t output_width() const { return layers_.back().weight.dim(1); }
    std::size_t layer_count() const { return layers_.size(); }
    std::vector<std::size_t> widths() const {
        std::vector<std::size_t> w{input_width()};
        for (const auto& l : layers_) w.push_back(l.weight.dim(1));
        return w;
    }

    const std::vector<Layer>& layers() const { return layers_; }
    std::vector<Layer>& layers() { return layers_; }

    std::vector<ad::Tensor*> tensors() {
        std::vector<ad::Tensor*> out;
        for (auto& l : layers_) {
            out.push_back(&l.weight);
            out.push_back(&l.bias);
        }
        return out;
    }

    ad::Tensor forward(const ad::Tensor& input) const {
        ad::Tensor x = input;
        for (std::size_t l = 0; l < layers_.size(); ++l) {
            x = ad::affine(x, layers_[l].weight, layers_[l].bias);
            if (l + 1 < layers_.size()) x = ad::relu(x);
        }
        return x;
    }

    // One input row through plain scalar loops in a fixed summation order.
    // Encoder and decoder both evaluate the autoregressive model through this
    // path so their probabilities agree bit for bit.
    void forward_row(std::span<const double> input, std::vector<double>& scratch_a,
                     std::vector<double>& scratch_b, std::span<double> output) const {
        if (input.size() != input_width())
            fail(Errc::shape_mismatch, "network input has " + std::to_string(input.size()) + " values, expected " +
                                           std::to_string(input_width()));
        scratch_a.assign(input.begin(), input.end());
        for (std::size_t l = 0; l < layers_.size(); ++l) {
            const auto w = layers_[l].weight.values();
            const auto b = layers_[l].bias.values();
            const std::size_t in = layers_[l].weight.dim(0), out = layers_[l].weight.dim(1);
            scratch_b.assign(out, 0.0);
            for (std::size_t o = 0; o < out; ++o) {
                double acc = b[o];
                for (std::size_t i = 0; i < in; ++i) acc += scratch_a[i] * w[i * out + o];
                scratch_b[o] = (l + 1 < layers_.size() && acc <= 0.0) ? 0.0 : acc;
            }
            scratch_a.swap(scratch_b);
        }
        std::copy(scratch_a.begin(), scratch_a.end(), output.begin());
    }

    // Canonical flattening: layer by layer, weights row-major then bias.
    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (const auto& l : layers_) n += l.weight.size() + l.bias.size();
        return n;
    }

    std::vector<double> flatten() const {
        std::vector<double> out;
        out.reserve(parameter_count());
        for (const auto& l : layers_) {
            out.insert(out.end(), l.weight.values().begin(), l.weight.values().end());
            out.insert(out.end(), l.bias.values().begin(), l.bias.values().end());
        }
        return out;
    }

    static Mlp unflatten(const std::vector<std::size_t>& widths, std::span<const double> values,
                         bool requires_grad = false) {
        Mlp m = zeros(widths, requires_grad);
        require(values.size() == m.parameter_count(), Errc::shape_mismatch,
                "network expects " + std::to_string(m.parameter_count()) + " parameters, got " +
                    std::to_string(values.size()));
        std::size_t pos = 0;
        for (auto& l : m.layers_) {
            for (auto* t : {&l.weight, &l.bias}) {
                auto v = t->mutable_values();
                std::copy(values.begin() + pos, values.begin() + pos + v.size(), v.begin());
                pos += v.size();
            }
        }
        return m;
    }

    // Deep copy with fresh graph leaves.
    Mlp clone(bool requires_grad) const { return unflatten(widths(), flatten(), requires_grad); }

private:
    std::vector<Layer> layers_;
};

} // namespace mdq
