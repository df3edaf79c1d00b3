#pragma once

#include <functional>
#include <random>

#include "bicam/tensor.hpp"

namespace bicam {

// Single-use reverse-mode tape. Node ids are issued in topological order,
// so the backward sweep is a reverse iteration over the node list.
class Tape {
public:
    using Id = int;

    Id leaf(Tensor v, bool requires_grad = true);
    Id constant(Tensor v) { return leaf(std::move(v), false); }

    const Tensor& value(Id id) const { return nodes_[check(id)].value; }
    const Tensor& grad(Id id) const { return nodes_[check(id)].grad; }
    bool requires_grad(Id id) const { return nodes_[check(id)].requires_grad; }

    // elementwise
    Id add(Id a, Id b);
    Id sub(Id a, Id b);
    Id mul(Id a, Id b);  // Hadamard
    Id scale(Id a, double s);
    Id add_scalar(Id a, double s);
    Id relu(Id a);
    Id tanh_op(Id a);
    Id logistic(Id a);

    // shape/linear
    Id matmul(Id a, Id b);           // [m,n]x[n,p] -> [m,p]; [m,n]x[n] -> [m]
    Id dot(Id a, Id b);              // [n].[n] -> scalar
    Id sum(Id a);                    // -> scalar
    Id concat(const std::vector<Id>& parts);  // vectors -> vector
    Id row(Id matrix, int r);        // gather one row of a [m,n] matrix
    Id reshape(Id a, std::vector<int> shape);
    Id transpose(Id a);              // rank-2 only

    // pipeline ops
    Id dropout(Id a, double rate, std::mt19937_64& rng, bool train);
    Id conv1d(Id x, Id w, Id b, int window, int stride);  // x:[d,n] w:[l,d*window] b:[l] -> [l,L]
    Id max_over_time(Id maps);       // [l,L] -> [l]
    Id sum_pool(Id a, int k);        // [n] -> [n/k], non-overlapping windows
    Id power_normalize(Id a);        // sign(x)*sqrt(|x|)
    Id l2_normalize(Id a, bool strict = false);  // guarded: x / (||x|| + 1e-12), grad 0 at x=0;
                                                 // strict errors on a zero vector
    Id circ_corr(Id h, Id t);        // [h*t]_i = sum_k h_k t_{(k+i) mod d}
    Id softmax_cross_entropy(Id logits, int label);  // -> scalar

    void backward(Id loss);

    // forward-only helper
    static std::vector<double> softmax(const Tensor& logits);

    size_t num_nodes() const { return nodes_.size(); }

private:
    struct Node {
        Tensor value;
        Tensor grad;
        bool requires_grad = false;
        std::function<void(Tape&)> back;  // empty for leaves/constants
    };

    Id check(Id id) const {
        if (id < 0 || static_cast<size_t>(id) >= nodes_.size())
            throw UsageError("invalid tape node id");
        return id;
    }
    Id push(Tensor v, bool requires_grad, std::function<void(Tape&)> back);
    Tensor& g(Id id) { return nodes_[static_cast<size_t>(id)].grad; }
    const Tensor& v(Id id) const { return nodes_[static_cast<size_t>(id)].value; }

    std::vector<Node> nodes_;
};

}  // namespace bicam
