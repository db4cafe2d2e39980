#pragma once

#include <functional>
#include <vector>

#include "causalcast/array.hpp"

namespace causalcast::ad {

class Tape;

/// Handle to a node on a Tape. Cheap to copy; valid until the tape is
/// cleared. A Var through which no gradient flows has requires_grad()
/// false and its grad() stays empty after backward().
class Var {
public:
    Var() : tape_(nullptr), idx_(-1) {}
    Var(Tape* tape, int32_t idx) : tape_(tape), idx_(idx) {}

    const Array& value() const;
    const Array& grad() const;
    bool requires_grad() const;
    bool valid() const { return tape_ != nullptr; }
    int32_t index() const { return idx_; }
    Tape* tape() const { return tape_; }

private:
    Tape* tape_;
    int32_t idx_;
};

/// Reverse-mode autodiff over a dynamically built graph. Ops append nodes
/// to the tape; backward() walks them in reverse creation order (a valid
/// topological order since parents always precede children). A tape is
/// confined to one thread; independent tapes may run in parallel.
///
/// Typical lifecycle: clear(), build forward graph, backward(loss), read
/// leaf grads, repeat. clear() keeps node capacity so per-sample graphs
/// do not reallocate.
class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    void clear();
    size_t node_count() const { return nodes_.size(); }

    Var leaf(Array value, bool requires_grad);

    /// Same value, no gradient flow: upstream gradients are unchanged by
    /// its presence.
    Var detach(Var a);

    // Elementwise binary ops. Shapes must match, or one side may broadcast:
    // a 1x1 scalar against anything, or a 1xN row against MxN.
    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var mul(Var a, Var b);

    Var scale(Var a, double c);       // a * c
    Var add_const(Var a, double c);   // a + c

    Var matmul(Var a, Var b);         // (m x k) * (k x n)
    Var transpose(Var a);

    Var sigmoid(Var a);
    Var tanh(Var a);
    Var exp(Var a);
    Var log(Var a);                   // requires strictly positive input
    Var relu(Var a);
    Var xlogx(Var a);                 // x*log(x) with 0*log(0) := 0

    /// Row-wise softmax over entries where keep(r,c) != 0 (equivalent to
    /// adding -inf to excluded scores). Excluded entries are exactly 0;
    /// fully excluded rows come back all-zero rather than NaN. Uses
    /// max-subtraction for stability. `keep` is a constant, not a node.
    Var masked_softmax(Var scores, const Array& keep);

    /// Per-row normalization over columns (mean 0, variance 1, population
    /// variance), then affine gamma/beta (both 1 x cols).
    Var layer_norm(Var x, Var gamma, Var beta, double eps = 1e-8);

    Var concat_cols(const std::vector<Var>& parts);  // (m x c_i) -> m x sum(c_i)
    Var stack_rows(const std::vector<Var>& rows);    // (1 x n each) -> k x n
    Var slice_rows(Var a, int64_t r0, int64_t r1);   // rows [r0, r1)
    Var slice_cols(Var a, int64_t c0, int64_t c1);   // cols [c0, c1)

    Var sum(Var a);                   // -> 1x1
    Var mean(Var a);                  // -> 1x1

    /// Backprop from a scalar output; accumulates into leaf grads.
    /// `seed` is the upstream gradient of `out` (1.0 for a plain loss).
    void backward(Var out, double seed = 1.0);

private:
    friend class Var;

    enum class Op : uint8_t {
        Leaf, Add, Sub, Mul, Scale, AddConst, MatMul, Transpose,
        Sigmoid, Tanh, Exp, Log, Relu, XLogX, MaskedSoftmax, LayerNorm,
        ConcatCols, StackRows, SliceRows, SliceCols, Sum, Mean,
    };

    struct Node {
        Array value;
        Array grad;           // empty until touched by backward
        Array aux0, aux1;     // op-specific saved tensors
        double c0 = 0.0;
        int64_t i0 = 0, i1 = 0;
        int32_t parent_off = 0;
        int32_t parent_count = 0;
        Op op = Op::Leaf;
        bool requires_grad = false;
    };

    Var push(Op op, Array value, std::initializer_list<Var> parents);
    Var push(Op op, Array value, const std::vector<Var>& parents);
    Node& node(int32_t i) { return nodes_[static_cast<size_t>(i)]; }
    const Node& node(int32_t i) const { return nodes_[static_cast<size_t>(i)]; }
    int32_t parent(const Node& n, int32_t k) const {
        return ppool_[static_cast<size_t>(n.parent_off + k)];
    }
    Array& ensure_grad(int32_t i);
    void accumulate(int32_t i, const Array& g);
    void backward_node(int32_t i);

    std::vector<Node> nodes_;
    std::vector<int32_t> ppool_;
};

/// Builds a scalar graph from one leaf input on the given tape.
using ScalarFn = std::function<Var(Tape&, Var)>;

/// Max over coordinates of |autodiff - central_difference| /
/// (|central_difference| + 1e-8). A non-finite intermediate during an
/// offset evaluation raises NonFinite naming the coordinate.
double finite_difference_check(const ScalarFn& f, const Array& point, double step);

}  // namespace causalcast::ad
