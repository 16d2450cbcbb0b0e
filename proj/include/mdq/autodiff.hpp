#pragma once

// Minimal define-by-run reverse-mode differentiation over dense row-major
// arrays of doubles. Only the handful of ops the codec graph needs exist;
// composite kernels (upsampling, context gathering, Laplace rate) live next to
// the modules that own them and plug in through detail::make_result.

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "mdq/error.hpp"

namespace mdq::ad {

using Shape = std::vector<std::size_t>;

inline std::size_t element_count(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>{});
}

inline std::string shape_string(const Shape& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += "x";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

namespace detail {

struct Node {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad; // allocated lazily, only when requires_grad
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward;

    void ensure_grad() {
        if (requires_grad && grad.empty()) grad.assign(value.size(), 0.0);
    }
};

} // namespace detail

class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false) {
        const std::size_t n = element_count(shape);
        return from(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
    }

    static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false) {
        require(!shape.empty() || values.size() == 1, Errc::shape_mismatch, "empty shape needs one value");
        for (std::size_t d : shape) require(d > 0, Errc::shape_mismatch, "dimensions must be positive");
        require(element_count(shape) == values.size(), Errc::shape_mismatch,
                "shape " + shape_string(shape) + " holds " + std::to_string(element_count(shape)) +
                    " values, got " + std::to_string(values.size()));
        auto node = std::make_shared<detail::Node>();
        node->shape = std::move(shape);
        node->value = std::move(values);
        node->requires_grad = requires_grad;
        return Tensor(std::move(node));
    }

    static Tensor scalar(double v, bool requires_grad = false) { return from({1}, {v}, requires_grad); }

    explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    std::size_t size() const { return node_->value.size(); }
    std::size_t dim(std::size_t i) const { return node_->shape.at(i); }

    std::span<const double> values() const { return node_->value; }
    std::span<double> mutable_values() { return node_->value; }
    double item() const {
        require(size() == 1, Errc::shape_mismatch, "item() on tensor of shape " + shape_string(shape()));
        return node_->value[0];
    }

    bool requires_grad() const { return node_->requires_grad; }
    bool has_grad() const { return !node_->grad.empty(); }
    std::span<const double> grad() const { return node_->grad; }
    std::span<double> mutable_grad() { return node_->grad; }
    void zero_grad() { std::fill(node_->grad.begin(), node_->grad.end(), 0.0); }

    bool same_node(const Tensor& other) const { return node_ == other.node_; }
    detail::Node* node() const { return node_.get(); }
    const std::shared_ptr<detail::Node>& node_ptr() const { return node_; }

private:
    std::shared_ptr<detail::Node> node_;
};

namespace detail {

// Builds an op result. The backward closure and parent links are retained
// only when some parent participates in differentiation, so inference graphs
// free their intermediates immediately.
inline Tensor make_result(Shape shape, std::vector<double> value, std::vector<Tensor> parents,
                          std::function<void(Node&)> backward) {
    auto node = std::make_shared<Node>();
    node->shape = std::move(shape);
    node->value = std::move(value);
    node->requires_grad = std::any_of(parents.begin(), parents.end(),
                                      [](const Tensor& t) { return t.requires_grad(); });
    if (node->requires_grad) {
        for (auto& p : parents) node->parents.push_back(p.node_ptr());
        node->backward = std::move(backward);
    }
    return Tensor(std::move(node));
}

inline std::span<double> grad_of(Node& node) {
    node.ensure_grad();
    return node.grad;
}

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMajor>;
using MutMap = Eigen::Map<RowMajor>;

} // namespace detail

// out[b,o] = sum_i input[b,i] * weight[i,o] + bias[o]
inline Tensor affine(const Tensor& input, const Tensor& weight, const Tensor& bias) {
    require(input.shape().size() == 2 && weight.shape().size() == 2 && bias.shape().size() == 1,
            Errc::shape_mismatch, "affine expects input[BxI], weight[IxO], bias[O]");
    const std::size_t rows = input.dim(0), in = input.dim(1), out = weight.dim(1);
    require(weight.dim(0) == in, Errc::shape_mismatch,
            "affine: input width " + std::to_string(in) + " does not match weight rows " +
                std::to_string(weight.dim(0)));
    require(bias.dim(0) == out, Errc::shape_mismatch,
            "affine: bias length " + std::to_string(bias.dim(0)) + " does not match weight columns " +
                std::to_string(out));

    std::vector<double> result(rows * out);
    {
        detail::ConstMap x(input.values().data(), rows, in);
        detail::ConstMap w(weight.values().data(), in, out);
        Eigen::Map<const Eigen::RowVectorXd> b(bias.values().data(), out);
        detail::MutMap y(result.data(), rows, out);
        y.noalias() = x * w;
        y.rowwise() += b;
    }
    return detail::make_result(
        {rows, out}, std::move(result), {input, weight, bias},
        [rows, in, out](detail::Node& self) {
            auto& x = *self.parents[0];
            auto& w = *self.parents[1];
            auto& b = *self.parents[2];
            detail::ConstMap dy(self.grad.data(), rows, out);
            if (x.requires_grad) {
                detail::MutMap dx(detail::grad_of(x).data(), rows, in);
                dx.noalias() += dy * detail::ConstMap(w.value.data(), in, out).transpose();
            }
            if (w.requires_grad) {
                detail::MutMap dw(detail::grad_of(w).data(), in, out);
                dw.noalias() += detail::ConstMap(x.value.data(), rows, in).transpose() * dy;
            }
            if (b.requires_grad) {
                Eigen::Map<Eigen::RowVectorXd> db(detail::grad_of(b).data(), out);
                db += dy.colwise().sum();
            }
        });
}

// Subgradient at exactly zero is taken as 0.
inline Tensor relu(const Tensor& input) {
    std::vector<double> result(input.values().begin(), input.values().end());
    for (double& v : result) v = v > 0.0 ? v : 0.0;
    return detail::make_result(input.shape(), std::move(result), {input}, [](detail::Node& self) {
        auto& x = *self.parents[0];
        auto dx = detail::grad_of(x);
        for (std::size_t i = 0; i < dx.size(); ++i)
            if (x.value[i] > 0.0) dx[i] += self.grad[i];
    });
}

inline Tensor add(const Tensor& a, const Tensor& b) {
    require(a.shape() == b.shape(), Errc::shape_mismatch,
            "add: " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
    std::vector<double> result(a.size());
    for (std::size_t i = 0; i < result.size(); ++i) result[i] = a.values()[i] + b.values()[i];
    return detail::make_result(a.shape(), std::move(result), {a, b}, [](detail::Node& self) {
        for (auto& parent : self.parents) {
            if (!parent->requires_grad) continue;
            auto g = detail::grad_of(*parent);
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
        }
    });
}

inline Tensor scale(const Tensor& a, double factor) {
    std::vector<double> result(a.values().begin(), a.values().end());
    for (double& v : result) v *= factor;
    return detail::make_result(a.shape(), std::move(result), {a}, [factor](detail::Node& self) {
        auto g = detail::grad_of(*self.parents[0]);
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += factor * self.grad[i];
    });
}

inline Tensor reshape(const Tensor& a, Shape shape) {
    require(element_count(shape) == a.size(), Errc::shape_mismatch,
            "reshape " + shape_string(a.shape()) + " to " + shape_string(shape));
    std::vector<double> result(a.values().begin(), a.values().end());
    return detail::make_result(std::move(shape), std::move(result), {a}, [](detail::Node& self) {
        auto g = detail::grad_of(*self.parents[0]);
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    });
}

inline Tensor sum(const Tensor& a) {
    double total = 0.0;
    for (double v : a.values()) total += v;
    return detail::make_result({1}, {total}, {a}, [](detail::Node& self) {
        auto g = detail::grad_of(*self.parents[0]);
        for (double& v : g) v += self.grad[0];
    });
}

// sum_i w_i * t_i over scalar tensors; used to assemble the training cost.
inline Tensor weighted_sum(const std::vector<Tensor>& terms, const std::vector<double>& weights) {
    require(terms.size() == weights.size() && !terms.empty(), Errc::invalid_argument,
            "weighted_sum needs matching non-empty term and weight lists");
    double total = 0.0;
    for (std::size_t i = 0; i < terms.size(); ++i) total += weights[i] * terms[i].item();
    return detail::make_result({1}, {total}, terms, [weights, n = terms.size()](detail::Node& self) {
        // parents only holds tensors when the node requires grad, in input order
        for (std::size_t i = 0; i < n; ++i) {
            auto& parent = *self.parents[i];
            if (!parent.requires_grad) continue;
            detail::grad_of(parent)[0] += weights[i] * self.grad[0];
        }
    });
}

// Mean squared difference against a constant reference of the same length.
inline Tensor mse(const Tensor& a, std::span<const double> reference) {
    require(a.size() == reference.size(), Errc::shape_mismatch,
            "mse: " + std::to_string(a.size()) + " values vs reference of " + std::to_string(reference.size()));
    const auto n = static_cast<double>(a.size());
    double total = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a.values()[i] - reference[i];
        total += d * d;
    }
    std::vector<double> ref(reference.begin(), reference.end());
    return detail::make_result({1}, {total / n}, {a}, [ref = std::move(ref), n](detail::Node& self) {
        auto& x = *self.parents[0];
        auto g = detail::grad_of(x);
        const double k = 2.0 * self.grad[0] / n;
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += k * (x.value[i] - ref[i]);
    });
}

// Populates d(loss)/d(t) for every requires_grad tensor reachable from loss.
// Leaf gradients accumulate across calls until zeroed.
inline void backward(const Tensor& loss) {
    require(loss.defined() && loss.size() == 1, Errc::shape_mismatch,
            "backward() needs a scalar loss, got " + (loss.defined() ? shape_string(loss.shape()) : "undefined"));
    if (!loss.requires_grad()) return;

    // Iterative post-order DFS gives a topological order (parents first).
    std::vector<detail::Node*> order;
    std::unordered_set<detail::Node*> visited;
    std::vector<std::pair<detail::Node*, std::size_t>> stack{{loss.node(), 0}};
    visited.insert(loss.node());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            detail::Node* parent = node->parents[next++].get();
            if (parent->requires_grad && visited.insert(parent).second) stack.emplace_back(parent, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    loss.node()->ensure_grad();
    loss.node()->grad[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        detail::Node* node = *it;
        if (node->backward && !node->grad.empty()) node->backward(*node);
    }
    // Interior gradients are only needed during the sweep.
    for (detail::Node* node : order)
        if (node->backward) std::vector<double>().swap(node->grad);
}

struct AdamState {
    std::vector<double> first_moment;
    std::vector<double> second_moment;
    std::uint64_t step_count = 0;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    static AdamState for_param(const Tensor& param, double lr) {
        require(lr >= 0.0, Errc::invalid_argument, "learning rate must be non-negative");
        AdamState s;
        s.first_moment.assign(param.size(), 0.0);
        s.second_moment.assign(param.size(), 0.0);
        s.lr = lr;
        return s;
    }
};

// Bias-corrected Adam update; zeroes the gradient afterwards.
inline void adam_step(Tensor& param, AdamState& state) {
    require(param.has_grad(), Errc::invalid_argument, "adam_step: parameter has no gradient");
    require(state.first_moment.size() == param.size() && state.second_moment.size() == param.size(),
            Errc::shape_mismatch, "adam_step: moment arrays do not match parameter size");
    require(state.beta1 > 0 && state.beta1 < 1 && state.beta2 > 0 && state.beta2 < 1 && state.epsilon > 0,
            Errc::invalid_argument, "adam_step: constants out of range");

    ++state.step_count;
    const double t = static_cast<double>(state.step_count);
    const double c1 = 1.0 - std::pow(state.beta1, t);
    const double c2 = 1.0 - std::pow(state.beta2, t);
    auto values = param.mutable_values();
    auto grad = param.mutable_grad();
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double g = grad[i];
        state.first_moment[i] = state.beta1 * state.first_moment[i] + (1.0 - state.beta1) * g;
        state.second_moment[i] = state.beta2 * state.second_moment[i] + (1.0 - state.beta2) * g * g;
        const double m_hat = state.first_moment[i] / c1;
        const double v_hat = state.second_moment[i] / c2;
        // lr == 0 must leave -0.0 untouched too, so skip the subtraction outright
        if (state.lr != 0.0) values[i] -= state.lr * m_hat / (std::sqrt(v_hat) + state.epsilon);
    }
    param.zero_grad();
}

} // namespace mdq::ad
