#pragma once

#include <cstdint>
#include <functional>
#include <unordered_map>
#include <vector>

#include "delicate/rng.hpp"
#include "delicate/tensor/tensor.hpp"

namespace delicate::tensor {

class Tape;

// Handle to a node on a tape.
struct Var {
    Tape* tape = nullptr;
    int id = -1;
};

// Reverse-mode computation tape. Nodes are recorded in execution order,
// which is already a topological order; backward() visits each node once in
// reverse and accumulates (+=) into parameter gradient buffers, so a
// parameter referenced at several tape sites receives the sum of its
// site-local gradients.
class Tape {
public:
    explicit Tape(Precision precision = Precision::f64, bool training = false,
                  Rng* dropout_rng = nullptr, bool grad_enabled = true);

    Var leaf(Tensor value);

    // Trainable leaf. Repeated calls with the same Param return the same
    // node, which is what makes weight tying work.
    Var param(Param& p);

    // Seeds d(loss)/d(loss) = 1 and sweeps the tape in reverse. Requires a
    // 1-element loss produced by this tape.
    void backward(Var loss);

    const Tensor& value(Var v) const { return nodes_[v.id].value; }
    Tensor& grad(Var v) { return nodes_[v.id].grad; }

    Precision precision() const { return precision_; }
    bool training() const { return training_; }
    bool grad_enabled() const { return grad_enabled_; }
    Rng* dropout_rng() { return dropout_rng_; }
    std::size_t size() const { return nodes_.size(); }

    // Internal to the op implementations.
    Var push(Tensor value, const char* op_name);
    void set_backprop(Var v, std::function<void()> backprop);

private:
    struct Node {
        Tensor value;
        Tensor grad;
        std::function<void()> backprop;
        Param* param = nullptr;
    };

    Precision precision_;
    bool training_;
    bool grad_enabled_;
    Rng* dropout_rng_;
    std::vector<Node> nodes_;
    std::unordered_map<const Param*, int> param_nodes_;
};

// ---- primitive forward ops ----------------------------------------------

// Matrix product over the last two axes; leading (batch) dims must match
// exactly. [.., m, k] x [.., k, n] -> [.., m, n].
Var matmul(Var a, Var b);

Var add(Var a, Var b);                       // same shape
Var add_bias(Var x, Var bias);               // bias is rank 1, broadcast over rows
Var mul(Var a, Var b);                       // elementwise
Var scale(Var a, double c);
Var transpose_last2(Var a);
Var permute(Var a, const std::vector<int>& axes);
Var reshape(Var a, Shape shape);
Var concat(const std::vector<Var>& parts, int axis);
Var slice(Var a, int axis, std::int64_t start, std::int64_t len);

// Row lookup: table [V, H] indexed by ids; output shape = leading + {H}.
Var embedding(Var table, const std::vector<int>& ids, const Shape& leading);

// Picks rows of a rank-2 tensor; backward scatter-adds.
Var gather_rows(Var x, const std::vector<std::int64_t>& rows);

Var layer_norm(Var x, Var gamma, Var beta, double eps = 1e-12);
Var gelu(Var x);                             // tanh approximation
Var tanh_act(Var x);
Var softmax(Var x, int axis = -1);           // shift-stabilized
Var dropout(Var x, double p);                // identity when tape is in eval mode

// Adds a large negative bias to masked key columns of attention scores
// [B, heads, S, S]; key_real has B*S entries (1 = real token, 0 = PAD).
Var mask_attention_scores(Var scores, const std::vector<std::uint8_t>& key_real);

Var sum_all(Var x);                          // scalar

// ---- loss ops -------------------------------------------------------------

// Mean over labeled rows of -log softmax(logits)[target]. `targets` has one
// entry per row of the [N, V] logits; -1 marks an unlabeled row. At least
// one row must be labeled.
Var masked_cross_entropy(Var logits, const std::vector<int>& targets);

// Mean over all elements of (a - b)^2.
Var mse(Var a, Var b);

// Numerically stable binary cross-entropy on logits [N] or [N, 1].
Var bce_with_logits(Var logits, const std::vector<double>& targets);

}  // namespace delicate::tensor
