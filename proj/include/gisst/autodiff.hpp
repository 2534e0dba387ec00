#pragma once

// Reverse-mode differentiation over a linear tape.
//
// A Tape owns every value produced during one forward pass. Var is a cheap
// handle (tape pointer + slot index). Operations append a node whose backward
// rule reads the node's adjoint and accumulates into its inputs' adjoints.
// backward() walks the tape once, newest to oldest.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include "gisst/tensor.hpp"

namespace gisst::ad {

class Tape;

class Var {
public:
    Var() = default;
    Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

    const Tensor& value() const;
    const Shape& shape() const { return value().shape; }
    bool requires_grad() const;
    /// Adjoint after backward(); empty for values that do not require gradients.
    std::optional<Tensor> grad() const;

    Tape& tape() const { return *tape_; }
    std::size_t id() const { return id_; }
    bool valid() const { return tape_ != nullptr; }

private:
    Tape* tape_ = nullptr;
    std::size_t id_ = 0;
};

/// Directed edge u -> v. Messages flow from source to target.
struct Edge {
    std::size_t source = 0;
    std::size_t target = 0;
    bool operator==(const Edge&) const = default;
};

class Tape {
public:
    /// Backward rule: receives the tape and the adjoint of the node being processed.
    using BackwardFn = std::function<void(Tape&, std::span<const double>)>;

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;
    Tape(Tape&&) = default;
    Tape& operator=(Tape&&) = default;

    Var constant(Tensor value);
    Var parameter(Tensor value);

    /// Appends a computed node. requires_grad is inherited from the inputs by the callers.
    Var record(Tensor value, bool requires_grad, BackwardFn backward);

    /// Seeds d(loss)/d(loss) = 1 and propagates to every reachable node flagged requires_grad.
    void backward(Var loss);

    const Tensor& value(std::size_t id) const { return nodes_[id].value; }
    bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
    std::optional<Tensor> grad(std::size_t id) const;

    /// Adds `g` into the adjoint of node `id` (no-op when the node does not require gradients).
    void accumulate(std::size_t id, std::span<const double> g);
    /// Mutable adjoint buffer, allocated on first use. Only valid for requires_grad nodes.
    std::vector<double>& grad_buffer(std::size_t id);

    std::size_t size() const { return nodes_.size(); }
    void zero_grad();

private:
    struct Node {
        Tensor value;
        std::vector<double> grad;
        bool requires_grad = false;
        BackwardFn backward;
    };
    std::vector<Node> nodes_;
};

// Dense algebra -------------------------------------------------------------

Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var hadamard(Var a, Var b);
Var sigmoid(Var a);
Var relu(Var a);
/// Natural log. Throws numeric_error on any entry <= 0; clamp first when needed.
Var log(Var a);
Var neg(Var a);
Var scale(Var a, double factor);
Var add_scalar(Var a, double c);
/// Elementwise power with a constant exponent; inputs must be positive.
Var pow(Var a, double exponent);
/// Clamp into [lo, hi]; gradient passes through strictly inside the interval only.
Var clamp(Var a, double lo, double hi);

/// [a || b] for two vectors.
Var concat_rows(Var a, Var b);
/// Contiguous slice [begin, begin + length) of a vector.
Var slice(Var a, std::size_t begin, std::size_t length);

Var sum(Var a);
Var mean(Var a);

// Broadcasting helpers (the only broadcasts the model needs) ----------------

/// M[i, j] * v[j] for M [n x d], v [d].
Var mul_cols(Var m, Var v);
/// M[i, j] * s[i] for M [n x h], s [n].
Var mul_rows(Var m, Var s);
/// M[i, j] + v[j].
Var add_bias(Var m, Var v);
/// M [e x k] times vector v [k] -> [e].
Var matvec(Var m, Var v);

// Index operations -----------------------------------------------------------

/// out[k] = v[index[k]].
Var gather(Var v, std::span<const std::size_t> index);
/// out[index[k]] += v[k], output length `size`.
Var scatter_add(Var v, std::span<const std::size_t> index, std::size_t size);

/// out[v] = sum over edges (u -> v) of w[e] * src[u].
Var scatter_aggregate(Var edge_weights, Var src_values, std::span<const Edge> edges);

// Losses ---------------------------------------------------------------------

/// Mean over `mask` rows of -sum_c y[i, c] log softmax(logits)[i, c]. Row-max stabilised.
Var softmax_cross_entropy(Var logits, const Tensor& labels, std::span<const std::size_t> mask);

/// Inverted dropout. Identity when `training` is false or rate == 0.
Var dropout(Var a, double rate, bool training, std::mt19937_64& rng);

Tensor one_hot(std::span<const int> labels, std::size_t num_classes);

}  // namespace gisst::ad
