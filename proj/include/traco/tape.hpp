#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include "traco/matrix.hpp"

namespace traco {

class Tape;

// Handle to a node on a tape. Cheap to copy; only valid for the tape that
// created it and until that tape is cleared.
struct Var {
    Tape* tape = nullptr;
    std::uint32_t id = 0;

    const Matrix& val() const;
};

// Reverse-mode gradient tape over matrix-valued nodes. Creation order is a
// topological order, so the backward pass walks nodes in reverse. Gradients
// of a node accumulate additively across all of its uses.
class Tape {
public:
    using Id = std::uint32_t;

    // Input that participates in differentiation (a model parameter).
    Var leaf(const Matrix& value);
    // Input treated as a constant (no gradient).
    Var constant(const Matrix& value);

    // Registers a named parameter once per tape; repeated calls with the same
    // name return the same node so gradients from every use accumulate there.
    Var param(const std::string& name, const Matrix& value);

    const Matrix& value(Id id) const { return nodes_[id].value; }
    // Gradient of `id` after backward(); a zero matrix if the node was never
    // reached.
    Matrix gradient(Id id) const;
    const Matrix& value(const Var& v) const { return value(v.id); }
    Matrix gradient(const Var& v) const { return gradient(v.id); }

    // Seeds d(root)/d(root) = 1 (root must be 1x1) and propagates to leaves.
    void backward(const Var& root);

    const std::unordered_map<std::string, Id>& registered_params() const { return params_; }

    std::size_t node_count() const { return nodes_.size(); }
    void clear();

    // --- internals used by the op implementations ---
    struct Node {
        Matrix value;
        Matrix grad;  // empty until first accumulation
        bool requires_grad = false;
        std::function<void(Tape&)> backward_fn;  // empty for leaves/constants
    };

    Var emplace(Matrix value, bool requires_grad, std::function<void(Tape&)> backward_fn);
    bool requires_grad(Id id) const { return nodes_[id].requires_grad; }
    // Gradient of a node that is known to have been reached (backward rules
    // only run when their output gradient is live).
    const Matrix& grad_ref(Id id) const { return nodes_[id].grad; }
    // Returns the gradient buffer of `id`, allocating zeros on first use.
    Matrix& grad_buffer(Id id);
    Id next_id() const { return static_cast<Id>(nodes_.size()); }

private:
    std::vector<Node> nodes_;
    std::unordered_map<std::string, Id> params_;
};

// --- operation vocabulary (forward value + recorded backward rule) ---

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);  // elementwise
Var neg(Var a);
Var scale(Var a, double c);
Var add_scalar(Var a, double c);
Var add_const(Var a, const Matrix& m);
Var mul_const(Var a, const Matrix& m);
Var matmul(Var a, Var b);
Var transpose(Var a);
Var exp(Var a);
Var log(Var a);
Var softplus(Var a);
// Broadcasts a column vector (rows x 1) across all columns of a.
Var add_col(Var a, Var v);
// Broadcasts a row vector (1 x cols) across all rows of a.
Var add_row(Var a, Var v);
Var logsumexp_rows(Var a);  // rows x 1
Var logsumexp_cols(Var a);  // 1 x cols
Var sum_all(Var a);         // 1 x 1
Var sum_rows(Var a);        // rows x 1
Var sum_cols(Var a);        // 1 x cols
Var pairwise_sq_dist(Var a, Var b);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }

inline Var sub_row(Var a, Var v) { return add_row(a, neg(v)); }
inline Var sub_col(Var a, Var v) { return add_col(a, neg(v)); }
inline Var dot(Var a, Var b) { return sum_all(mul(a, b)); }
inline Var log_softmax_cols(Var a) { return sub_row(a, logsumexp_cols(a)); }
inline Var softmax_cols(Var a) { return exp(log_softmax_cols(a)); }
inline Var log_softmax_rows(Var a) { return sub_col(a, logsumexp_rows(a)); }
inline Var softmax_rows(Var a) { return exp(log_softmax_rows(a)); }

}  // namespace traco
