#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "id3/errors.hpp"

namespace id3 {

// Dense row-major tensor of 64-bit reals, rank <= 2 for parameters.
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<std::size_t> shape)
        : shape_(std::move(shape)), data_(count(shape_), 0.0) {}

    Tensor(std::vector<std::size_t> shape, std::vector<double> data)
        : shape_(std::move(shape)), data_(std::move(data)) {
        if (count(shape_) != data_.size()) {
            throw DimensionError("tensor data length " + std::to_string(data_.size()) +
                                 " does not match shape " + shape_string());
        }
    }

    static Tensor vec(std::vector<double> data) {
        const std::size_t n = data.size();
        return Tensor({n}, std::move(data));
    }

    static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> data) {
        return Tensor({rows, cols}, std::move(data));
    }

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t size() const { return data_.size(); }
    std::size_t rows() const { return shape_.empty() ? 0 : shape_[0]; }
    std::size_t cols() const { return rank() == 2 ? shape_[1] : 1; }

    double operator[](std::size_t i) const { return data_[i]; }
    double& operator[](std::size_t i) { return data_[i]; }
    double at(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }
    double& at(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }

    const std::vector<double>& data() const { return data_; }
    std::vector<double>& data() { return data_; }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

    std::string shape_string() const {
        std::string s = "[";
        for (std::size_t i = 0; i < shape_.size(); ++i) {
            if (i) s += "x";
            s += std::to_string(shape_[i]);
        }
        return s + "]";
    }

private:
    static std::size_t count(const std::vector<std::size_t>& shape) {
        std::size_t n = 1;
        for (std::size_t d : shape) n *= d;
        return n;
    }

    std::vector<std::size_t> shape_;
    std::vector<double> data_;
};

using NodeId = std::size_t;

// Reverse-mode tape. Nodes are appended in topological order; backward
// walks the tape in reverse and accumulates into per-node gradient buffers.
class Tape {
public:
    NodeId leaf(Tensor value) { return push(std::move(value), {}); }

    NodeId matmul(NodeId a, NodeId b) {
        const Tensor& av = value(a);
        const Tensor& bv = value(b);
        if (av.rank() != 2 || bv.rank() != 2 || av.cols() != bv.rows()) {
            throw DimensionError("matmul shape mismatch: " + av.shape_string() + " x " +
                                 bv.shape_string());
        }
        const std::size_t m = av.rows(), k = av.cols(), n = bv.cols();
        Tensor out({m, n});
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t p = 0; p < k; ++p) {
                const double aip = av.at(i, p);
                for (std::size_t j = 0; j < n; ++j) out.at(i, j) += aip * bv.at(p, j);
            }
        NodeId id = push(std::move(out), {a, b});
        nodes_[id].back = [a, b, m, k, n](Tape& t, NodeId self) {
            const Tensor& g = t.grad(self);
            const Tensor& av2 = t.value(a);
            const Tensor& bv2 = t.value(b);
            Tensor& ga = t.grad_mut(a);
            Tensor& gb = t.grad_mut(b);
            // dA = dC * B^T, dB = A^T * dC
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t p = 0; p < k; ++p) {
                    double s = 0.0;
                    for (std::size_t j = 0; j < n; ++j) s += g.at(i, j) * bv2.at(p, j);
                    ga.at(i, p) += s;
                }
            for (std::size_t p = 0; p < k; ++p)
                for (std::size_t j = 0; j < n; ++j) {
                    double s = 0.0;
                    for (std::size_t i = 0; i < m; ++i) s += av2.at(i, p) * g.at(i, j);
                    gb.at(p, j) += s;
                }
        };
        return id;
    }

    // add with the one allowed broadcast: matrix[m x n] + row vector[n]
    NodeId add(NodeId a, NodeId b) {
        const Tensor& av = value(a);
        const Tensor& bv = value(b);
        if (av.same_shape(bv)) {
            Tensor out = av;
            for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
            NodeId id = push(std::move(out), {a, b});
            nodes_[id].back = [a, b](Tape& t, NodeId self) {
                const Tensor& g = t.grad(self);
                Tensor& ga = t.grad_mut(a);
                Tensor& gb = t.grad_mut(b);
                for (std::size_t i = 0; i < g.size(); ++i) {
                    ga[i] += g[i];
                    gb[i] += g[i];
                }
            };
            return id;
        }
        if (av.rank() == 2 && bv.rank() == 1 && av.cols() == bv.size()) {
            Tensor out = av;
            for (std::size_t r = 0; r < av.rows(); ++r)
                for (std::size_t c = 0; c < av.cols(); ++c) out.at(r, c) += bv[c];
            NodeId id = push(std::move(out), {a, b});
            nodes_[id].back = [a, b](Tape& t, NodeId self) {
                const Tensor& g = t.grad(self);
                Tensor& ga = t.grad_mut(a);
                Tensor& gb = t.grad_mut(b);
                for (std::size_t r = 0; r < g.rows(); ++r)
                    for (std::size_t c = 0; c < g.cols(); ++c) {
                        ga.at(r, c) += g.at(r, c);
                        gb[c] += g.at(r, c);
                    }
            };
            return id;
        }
        throw DimensionError("add shape mismatch: " + av.shape_string() + " + " +
                             bv.shape_string());
    }

    NodeId relu(NodeId a) {
        Tensor out = value(a);
        for (std::size_t i = 0; i < out.size(); ++i)
            if (out[i] < 0.0) out[i] = 0.0;
        NodeId id = push(std::move(out), {a});
        nodes_[id].back = [a](Tape& t, NodeId self) {
            const Tensor& g = t.grad(self);
            const Tensor& x = t.value(a);
            Tensor& ga = t.grad_mut(a);
            for (std::size_t i = 0; i < g.size(); ++i)
                if (x[i] > 0.0) ga[i] += g[i];
        };
        return id;
    }

    NodeId tanh(NodeId a) {
        Tensor out = value(a);
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(out[i]);
        NodeId id = push(std::move(out), {a});
        nodes_[id].back = [a](Tape& t, NodeId self) {
            const Tensor& g = t.grad(self);
            const Tensor& y = t.value(self);
            Tensor& ga = t.grad_mut(a);
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * (1.0 - y[i] * y[i]);
        };
        return id;
    }

    // mean over batch of -log softmax(logits)[label]; scalar output
    NodeId softmax_cross_entropy(NodeId logits, const std::vector<std::size_t>& labels) {
        const Tensor& lv = value(logits);
        if (lv.rank() != 2 || lv.rows() != labels.size()) {
            throw DimensionError("softmax_cross_entropy: logits " + lv.shape_string() +
                                 " vs " + std::to_string(labels.size()) + " labels");
        }
        const std::size_t b = lv.rows(), c = lv.cols();
        Tensor probs({b, c});
        double loss = 0.0;
        for (std::size_t i = 0; i < b; ++i) {
            if (labels[i] >= c) {
                throw InputError("label " + std::to_string(labels[i]) +
                                 " out of range [0, " + std::to_string(c) + ")");
            }
            double mx = lv.at(i, 0);
            for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, lv.at(i, j));
            double z = 0.0;
            for (std::size_t j = 0; j < c; ++j) z += std::exp(lv.at(i, j) - mx);
            const double logz = std::log(z) + mx;
            for (std::size_t j = 0; j < c; ++j) probs.at(i, j) = std::exp(lv.at(i, j) - logz);
            loss -= lv.at(i, labels[i]) - logz;
        }
        loss /= static_cast<double>(b);
        NodeId id = push(Tensor({1}, {loss}), {logits});
        nodes_[id].back = [logits, probs = std::move(probs), labels](Tape& t, NodeId self) {
            const double g = t.grad(self)[0];
            Tensor& gl = t.grad_mut(logits);
            const std::size_t b2 = probs.rows(), c2 = probs.cols();
            const double inv_b = 1.0 / static_cast<double>(b2);
            for (std::size_t i = 0; i < b2; ++i)
                for (std::size_t j = 0; j < c2; ++j) {
                    double d = probs.at(i, j);
                    if (j == labels[i]) d -= 1.0;
                    gl.at(i, j) += g * d * inv_b;
                }
        };
        return id;
    }

    void backward(NodeId loss) {
        if (nodes_.empty()) throw UsageError("backward on empty tape");
        if (value(loss).size() != 1) {
            throw UsageError("backward requires a scalar loss, got shape " +
                             value(loss).shape_string());
        }
        for (auto& n : nodes_) {
            n.grad = Tensor(n.value.shape());
        }
        nodes_[loss].grad[0] = 1.0;
        for (std::size_t i = loss + 1; i-- > 0;) {
            if (nodes_[i].back) nodes_[i].back(*this, i);
        }
    }

    const Tensor& value(NodeId id) const { return nodes_[id].value; }
    const Tensor& grad(NodeId id) const { return nodes_[id].grad; }
    Tensor& grad_mut(NodeId id) { return nodes_[id].grad; }
    std::size_t size() const { return nodes_.size(); }

private:
    struct Node {
        Tensor value;
        Tensor grad;
        std::vector<NodeId> parents;
        std::function<void(Tape&, NodeId)> back;
    };

    NodeId push(Tensor value, std::vector<NodeId> parents) {
        nodes_.push_back(Node{std::move(value), Tensor(), std::move(parents), nullptr});
        return nodes_.size() - 1;
    }

    std::vector<Node> nodes_;
};

// Central-difference gradient of loss_fn with respect to param, test oracle.
// loss_fn is re-evaluated with individual entries perturbed by +/- h.
template <typename LossFn>
Tensor finite_diff_grad(Tensor& param, LossFn&& loss_fn, double h = 1e-5) {
    Tensor g(param.shape());
    for (std::size_t i = 0; i < param.size(); ++i) {
        const double saved = param[i];
        param[i] = saved + h;
        const double lp = loss_fn();
        param[i] = saved - h;
        const double lm = loss_fn();
        param[i] = saved;
        g[i] = (lp - lm) / (2.0 * h);
    }
    return g;
}

}  // namespace id3
