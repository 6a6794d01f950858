#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "hopular/rng.hpp"
#include "hopular/tensor.hpp"

namespace hopular {

class Tape;

// Handle to a node on a Tape. Cheap to copy; invalidated by Tape::clear().
struct Var {
    Tape* tape = nullptr;
    uint32_t id = 0;

    bool valid() const { return tape != nullptr; }
    const Tensor& value() const;
};

// Reverse-mode differentiation tape. Operations append nodes in evaluation
// order; parents always precede children, so a single reverse sweep over the
// creation order is a reverse topological traversal. Gradients of a node
// accumulate contributions from all of its consumers.
class Tape {
public:
    Var leaf(Tensor value);              // requires_grad = true
    Var constant(Tensor value);          // requires_grad = false

    const Tensor& value(Var v) const;
    // Accumulated gradient of v after backward(); zeros if v never received one.
    Tensor grad(Var v) const;

    // Seeds d(root)/d(root) = 1 and sweeps the tape once in reverse creation
    // order. root must be scalar. Call once per tape.
    void backward(Var root);

    void clear();
    size_t node_count() const { return nodes_.size(); }

    // Internal: used by operation builders.
    Var emit(Tensor value, std::vector<uint32_t> parents,
             std::function<void(Tape&, uint32_t)> pull, bool force_no_grad = false);
    void accumulate(uint32_t id, const Tensor& contribution);
    void accumulate_at(uint32_t id, int64_t flat_index, double contribution);
    const Tensor& node_grad(uint32_t id) const;
    bool node_needs_grad(uint32_t id) const { return nodes_[id].needs_grad; }

private:
    struct Node {
        Tensor value;
        Tensor grad;  // empty until first accumulation
        std::vector<uint32_t> parents;
        std::function<void(Tape&, uint32_t)> pull;
        bool needs_grad = false;
    };
    std::vector<Node> nodes_;
    bool swept_ = false;
};

// Elementwise and scalar arithmetic.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);              // elementwise
Var scale(Var a, double c);
Var add_const(Var a, double c);
Var mul_by_scalar(Var a, Var s);    // tensor times scalar Var

// Linear algebra.
Var matmul(Var a, Var b);
Var matvec(Var a, Var v);
Var matvec_transposed(Var a, Var v);  // a^T v
Var dot(Var a, Var b);
Var transpose(Var a);

// Softmax family (numerically stable via max-subtraction).
Var softmax_scaled(Var v, double beta);
Var softmax_columns(Var m, double beta);
Var logsumexp(Var v, double beta);

// Reductions & structure.
Var sum(Var v);
Var mean(Var v);
Var row(Var m, int64_t i);
Var col(Var m, int64_t j);
Var elem(Var v, int64_t i);
Var slice(Var v, int64_t start, int64_t len);
Var concat(std::span<const Var> parts);              // vectors -> vector
Var concat_columns(std::span<const Var> columns);    // n vectors of size d -> d x n
Var stack_rows(std::span<const Var> mats);           // vertically stack matrices
Var replace_elem(Var v, int64_t i, Var s);
Var reshape(Var v, std::vector<int64_t> shape);
Var vec_to_columns(Var v, int64_t e, int64_t d);     // column j = v[j*e, (j+1)*e)
Var columns_to_vec(Var m);                           // inverse of vec_to_columns

// Inverted dropout: scales kept activations by 1/(1-p) at training time and is
// the identity at evaluation time. p == 1 zeroes the tensor.
Var dropout(Var v, double p, Rng& rng, bool training);

// Gradient barrier: copies the value onto the tape as a constant.
Var detach(Var v);

// Central-difference gradient checker. Builds the graph with `f`, obtains the
// analytic gradient via backward(), and compares against central differences
// with step eps (eps must lie in [1e-7, 1e-3]). Returns
// max_i |analytic_i - central_i| / (|analytic_i| + |central_i| + 1e-12).
double finite_diff_check(const std::function<Var(Tape&, Var)>& f, const Tensor& x, double eps);

}  // namespace hopular
