#include "causalcast/autodiff.hpp"

#include <cmath>
#include <cstdlib>

#include "causalcast/common.hpp"

namespace causalcast::ad {

namespace {

// Broadcast-aware element read: a dim of 1 repeats along that axis.
inline double bread(const Array& x, int64_t r, int64_t c) {
    return x(x.rows() == 1 ? 0 : r, x.cols() == 1 ? 0 : c);
}

void broadcast_shape(const Array& a, const Array& b, const char* op,
                     int64_t& rows, int64_t& cols) {
    auto merge = [&](int64_t x, int64_t y) -> int64_t {
        if (x == y) return x;
        if (x == 1) return y;
        if (y == 1) return x;
        fail("ShapeMismatch", std::string(op) + ": incompatible shapes " +
                                  a.shape_str() + " vs " + b.shape_str());
    };
    rows = merge(a.rows(), b.rows());
    cols = merge(a.cols(), b.cols());
}

// Sum `g` down to `shape` (inverse of broadcasting) and add into `dst`.
void reduce_accumulate(Array& dst, const Array& g) {
    if (dst.same_shape(g)) {
        double* d = dst.data_mut();
        const double* s = g.data();
        for (int64_t i = 0; i < g.size(); ++i) d[i] += s[i];
        return;
    }
    for (int64_t r = 0; r < g.rows(); ++r) {
        for (int64_t c = 0; c < g.cols(); ++c) {
            dst.at_mut(dst.rows() == 1 ? 0 : r, dst.cols() == 1 ? 0 : c) += g(r, c);
        }
    }
}

}  // namespace

const Array& Var::value() const { return tape_->node(idx_).value; }
const Array& Var::grad() const { return tape_->node(idx_).grad; }
bool Var::requires_grad() const { return tape_->node(idx_).requires_grad; }

void Tape::clear() {
    nodes_.clear();
    ppool_.clear();
}

Var Tape::push(Op op, Array value, std::initializer_list<Var> parents) {
    return push(op, std::move(value), std::vector<Var>(parents));
}

Var Tape::push(Op op, Array value, const std::vector<Var>& parents) {
    Node n;
    n.op = op;
    n.value = std::move(value);
    n.parent_off = static_cast<int32_t>(ppool_.size());
    n.parent_count = static_cast<int32_t>(parents.size());
    for (const Var& p : parents) {
        if (p.tape() != this) fail("ShapeMismatch", "op mixes nodes from different tapes");
        ppool_.push_back(p.index());
        n.requires_grad = n.requires_grad || p.requires_grad();
    }
    nodes_.push_back(std::move(n));
    return Var(this, static_cast<int32_t>(nodes_.size() - 1));
}

Var Tape::leaf(Array value, bool requires_grad) {
    Var v = push(Op::Leaf, std::move(value), {});
    node(v.index()).requires_grad = requires_grad;
    return v;
}

Var Tape::detach(Var a) { return leaf(a.value(), false); }

Var Tape::add(Var a, Var b) {
    int64_t rows, cols;
    broadcast_shape(a.value(), b.value(), "add", rows, cols);
    std::vector<double> out(static_cast<size_t>(rows * cols));
    size_t k = 0;
    for (int64_t r = 0; r < rows; ++r)
        for (int64_t c = 0; c < cols; ++c, ++k)
            out[k] = bread(a.value(), r, c) + bread(b.value(), r, c);
    return push(Op::Add, Array(rows, cols, std::move(out)), {a, b});
}

Var Tape::sub(Var a, Var b) {
    int64_t rows, cols;
    broadcast_shape(a.value(), b.value(), "sub", rows, cols);
    std::vector<double> out(static_cast<size_t>(rows * cols));
    size_t k = 0;
    for (int64_t r = 0; r < rows; ++r)
        for (int64_t c = 0; c < cols; ++c, ++k)
            out[k] = bread(a.value(), r, c) - bread(b.value(), r, c);
    return push(Op::Sub, Array(rows, cols, std::move(out)), {a, b});
}

Var Tape::mul(Var a, Var b) {
    int64_t rows, cols;
    broadcast_shape(a.value(), b.value(), "mul", rows, cols);
    std::vector<double> out(static_cast<size_t>(rows * cols));
    size_t k = 0;
    for (int64_t r = 0; r < rows; ++r)
        for (int64_t c = 0; c < cols; ++c, ++k)
            out[k] = bread(a.value(), r, c) * bread(b.value(), r, c);
    return push(Op::Mul, Array(rows, cols, std::move(out)), {a, b});
}

Var Tape::scale(Var a, double c) {
    std::vector<double> out(a.value().values());
    for (double& v : out) v *= c;
    Var r = push(Op::Scale, Array(a.value().rows(), a.value().cols(), std::move(out)), {a});
    node(r.index()).c0 = c;
    return r;
}

Var Tape::add_const(Var a, double c) {
    std::vector<double> out(a.value().values());
    for (double& v : out) v += c;
    Var r = push(Op::AddConst, Array(a.value().rows(), a.value().cols(), std::move(out)), {a});
    node(r.index()).c0 = c;
    return r;
}

Var Tape::matmul(Var a, Var b) {
    const Array& A = a.value();
    const Array& B = b.value();
    if (A.cols() != B.rows()) {
        fail("ShapeMismatch", "matmul: " + A.shape_str() + " * " + B.shape_str());
    }
    const int64_t m = A.rows(), kk = A.cols(), n = B.cols();
    std::vector<double> out(static_cast<size_t>(m * n), 0.0);
    for (int64_t i = 0; i < m; ++i) {
        for (int64_t k = 0; k < kk; ++k) {
            const double av = A(i, k);
            if (av == 0.0) continue;
            const double* brow = B.data() + k * n;
            double* orow = out.data() + i * n;
            for (int64_t j = 0; j < n; ++j) orow[j] += av * brow[j];
        }
    }
    return push(Op::MatMul, Array(m, n, std::move(out)), {a, b});
}

Var Tape::transpose(Var a) {
    const Array& A = a.value();
    std::vector<double> out(static_cast<size_t>(A.size()));
    for (int64_t r = 0; r < A.rows(); ++r)
        for (int64_t c = 0; c < A.cols(); ++c)
            out[static_cast<size_t>(c * A.rows() + r)] = A(r, c);
    return push(Op::Transpose, Array(A.cols(), A.rows(), std::move(out)), {a});
}

Var Tape::sigmoid(Var a) {
    std::vector<double> out(a.value().values());
    for (double& v : out) v = 1.0 / (1.0 + std::exp(-v));
    return push(Op::Sigmoid, Array(a.value().rows(), a.value().cols(), std::move(out)), {a});
}

Var Tape::tanh(Var a) {
    std::vector<double> out(a.value().values());
    for (double& v : out) v = std::tanh(v);
    return push(Op::Tanh, Array(a.value().rows(), a.value().cols(), std::move(out)), {a});
}

Var Tape::exp(Var a) {
    std::vector<double> out(a.value().values());
    for (double& v : out) v = std::exp(v);
    return push(Op::Exp, Array(a.value().rows(), a.value().cols(), std::move(out)), {a});
}

Var Tape::log(Var a) {
    std::vector<double> out(a.value().values());
    for (double& v : out) {
        if (v <= 0.0) fail("DomainError", "log: non-positive input " + std::to_string(v));
        v = std::log(v);
    }
    return push(Op::Log, Array(a.value().rows(), a.value().cols(), std::move(out)), {a});
}

Var Tape::relu(Var a) {
    std::vector<double> out(a.value().values());
    for (double& v : out) v = v > 0.0 ? v : 0.0;
    return push(Op::Relu, Array(a.value().rows(), a.value().cols(), std::move(out)), {a});
}

Var Tape::xlogx(Var a) {
    std::vector<double> out(a.value().values());
    for (double& v : out) v = v > 0.0 ? v * std::log(v) : 0.0;
    return push(Op::XLogX, Array(a.value().rows(), a.value().cols(), std::move(out)), {a});
}

Var Tape::masked_softmax(Var scores, const Array& keep) {
    const Array& S = scores.value();
    require_same_shape(S, keep, "masked_softmax");
    const int64_t rows = S.rows(), cols = S.cols();
    std::vector<double> out(static_cast<size_t>(rows * cols), 0.0);
    for (int64_t r = 0; r < rows; ++r) {
        double mx = -1e300;
        bool any = false;
        for (int64_t c = 0; c < cols; ++c) {
            if (keep(r, c) != 0.0) {
                any = true;
                if (S(r, c) > mx) mx = S(r, c);
            }
        }
        if (!any) continue;  // fully masked row stays all-zero
        double z = 0.0;
        for (int64_t c = 0; c < cols; ++c) {
            if (keep(r, c) != 0.0) {
                const double e = std::exp(S(r, c) - mx);
                out[static_cast<size_t>(r * cols + c)] = e;
                z += e;
            }
        }
        for (int64_t c = 0; c < cols; ++c) out[static_cast<size_t>(r * cols + c)] /= z;
    }
    Var v = push(Op::MaskedSoftmax, Array(rows, cols, std::move(out)), {scores});
    node(v.index()).aux0 = keep;
    return v;
}

Var Tape::layer_norm(Var x, Var gamma, Var beta, double eps) {
    const Array& X = x.value();
    const int64_t rows = X.rows(), cols = X.cols();
    if (gamma.value().rows() != 1 || gamma.value().cols() != cols ||
        beta.value().rows() != 1 || beta.value().cols() != cols) {
        fail("ShapeMismatch", "layer_norm: affine params must be 1x" + std::to_string(cols));
    }
    std::vector<double> xhat(static_cast<size_t>(rows * cols));
    std::vector<double> inv(static_cast<size_t>(rows));
    std::vector<double> out(static_cast<size_t>(rows * cols));
    for (int64_t r = 0; r < rows; ++r) {
        double mu = 0.0;
        for (int64_t c = 0; c < cols; ++c) mu += X(r, c);
        mu /= static_cast<double>(cols);
        double var = 0.0;
        for (int64_t c = 0; c < cols; ++c) {
            const double d = X(r, c) - mu;
            var += d * d;
        }
        var /= static_cast<double>(cols);
        const double is = 1.0 / std::sqrt(var + eps);
        inv[static_cast<size_t>(r)] = is;
        for (int64_t c = 0; c < cols; ++c) {
            const double h = (X(r, c) - mu) * is;
            xhat[static_cast<size_t>(r * cols + c)] = h;
            out[static_cast<size_t>(r * cols + c)] =
                h * gamma.value()(0, c) + beta.value()(0, c);
        }
    }
    Var v = push(Op::LayerNorm, Array(rows, cols, std::move(out)), {x, gamma, beta});
    Node& n = node(v.index());
    n.aux0 = Array(rows, cols, std::move(xhat));
    n.aux1 = Array(rows, 1, std::move(inv));
    n.c0 = eps;
    return v;
}

Var Tape::concat_cols(const std::vector<Var>& parts) {
    if (parts.empty()) fail("ShapeMismatch", "concat_cols: no inputs");
    const int64_t rows = parts[0].value().rows();
    int64_t cols = 0;
    for (const Var& p : parts) {
        if (p.value().rows() != rows) {
            fail("ShapeMismatch", "concat_cols: row mismatch " + p.value().shape_str());
        }
        cols += p.value().cols();
    }
    std::vector<double> out(static_cast<size_t>(rows * cols));
    int64_t off = 0;
    for (const Var& p : parts) {
        const Array& A = p.value();
        for (int64_t r = 0; r < rows; ++r)
            for (int64_t c = 0; c < A.cols(); ++c)
                out[static_cast<size_t>(r * cols + off + c)] = A(r, c);
        off += A.cols();
    }
    return push(Op::ConcatCols, Array(rows, cols, std::move(out)), parts);
}

Var Tape::stack_rows(const std::vector<Var>& rows_in) {
    if (rows_in.empty()) fail("ShapeMismatch", "stack_rows: no inputs");
    const int64_t cols = rows_in[0].value().cols();
    int64_t rows = 0;
    for (const Var& p : rows_in) {
        if (p.value().cols() != cols) {
            fail("ShapeMismatch", "stack_rows: col mismatch " + p.value().shape_str());
        }
        rows += p.value().rows();
    }
    std::vector<double> out;
    out.reserve(static_cast<size_t>(rows * cols));
    for (const Var& p : rows_in) {
        const auto& v = p.value().values();
        out.insert(out.end(), v.begin(), v.end());
    }
    return push(Op::StackRows, Array(rows, cols, std::move(out)), rows_in);
}

Var Tape::slice_rows(Var a, int64_t r0, int64_t r1) {
    const Array& A = a.value();
    if (r0 < 0 || r1 > A.rows() || r0 >= r1) {
        fail("ShapeMismatch", "slice_rows: [" + std::to_string(r0) + "," +
                                  std::to_string(r1) + ") of " + A.shape_str());
    }
    std::vector<double> out(A.data() + r0 * A.cols(), A.data() + r1 * A.cols());
    Var v = push(Op::SliceRows, Array(r1 - r0, A.cols(), std::move(out)), {a});
    node(v.index()).i0 = r0;
    node(v.index()).i1 = r1;
    return v;
}

Var Tape::slice_cols(Var a, int64_t c0, int64_t c1) {
    const Array& A = a.value();
    if (c0 < 0 || c1 > A.cols() || c0 >= c1) {
        fail("ShapeMismatch", "slice_cols: [" + std::to_string(c0) + "," +
                                  std::to_string(c1) + ") of " + A.shape_str());
    }
    std::vector<double> out(static_cast<size_t>(A.rows() * (c1 - c0)));
    size_t k = 0;
    for (int64_t r = 0; r < A.rows(); ++r)
        for (int64_t c = c0; c < c1; ++c, ++k) out[k] = A(r, c);
    Var v = push(Op::SliceCols, Array(A.rows(), c1 - c0, std::move(out)), {a});
    node(v.index()).i0 = c0;
    node(v.index()).i1 = c1;
    return v;
}

Var Tape::sum(Var a) {
    double s = 0.0;
    for (double v : a.value().values()) s += v;
    return push(Op::Sum, Array::scalar(s), {a});
}

Var Tape::mean(Var a) {
    double s = 0.0;
    for (double v : a.value().values()) s += v;
    return push(Op::Mean, Array::scalar(s / static_cast<double>(a.value().size())), {a});
}

Array& Tape::ensure_grad(int32_t i) {
    Node& n = node(i);
    if (n.grad.empty()) n.grad = Array(n.value.rows(), n.value.cols());
    return n.grad;
}

void Tape::accumulate(int32_t i, const Array& g) {
    Node& n = node(i);
    if (!n.requires_grad) return;
    reduce_accumulate(ensure_grad(i), g);
}

void Tape::backward(Var out, double seed) {
    if (!out.valid() || out.tape() != this) fail("ShapeMismatch", "backward: invalid output var");
    if (out.value().size() != 1) {
        fail("ShapeMismatch", "backward: output must be scalar, got " + out.value().shape_str());
    }
    if (!out.requires_grad()) return;
    ensure_grad(out.index()).at_mut(0, 0) += seed;
    for (int32_t i = out.index(); i >= 0; --i) {
        Node& n = node(i);
        if (n.op == Op::Leaf || !n.requires_grad || n.grad.empty()) continue;
        backward_node(i);
    }
}

void Tape::backward_node(int32_t i) {
    Node& n = node(i);
    const Array& g = n.grad;
    const Array& y = n.value;
    switch (n.op) {
        case Op::Leaf:
            break;
        case Op::Add: {
            accumulate(parent(n, 0), g);
            accumulate(parent(n, 1), g);
            break;
        }
        case Op::Sub: {
            accumulate(parent(n, 0), g);
            Node& b = node(parent(n, 1));
            if (b.requires_grad) {
                Array neg(g.rows(), g.cols());
                for (int64_t k = 0; k < g.size(); ++k) neg.data_mut()[k] = -g.data()[k];
                accumulate(parent(n, 1), neg);
            }
            break;
        }
        case Op::Mul: {
            const Array& av = node(parent(n, 0)).value;
            const Array& bv = node(parent(n, 1)).value;
            if (node(parent(n, 0)).requires_grad) {
                Array da(g.rows(), g.cols());
                for (int64_t r = 0; r < g.rows(); ++r)
                    for (int64_t c = 0; c < g.cols(); ++c)
                        da.at_mut(r, c) = g(r, c) * bread(bv, r, c);
                accumulate(parent(n, 0), da);
            }
            if (node(parent(n, 1)).requires_grad) {
                Array db(g.rows(), g.cols());
                for (int64_t r = 0; r < g.rows(); ++r)
                    for (int64_t c = 0; c < g.cols(); ++c)
                        db.at_mut(r, c) = g(r, c) * bread(av, r, c);
                accumulate(parent(n, 1), db);
            }
            break;
        }
        case Op::Scale: {
            Array da(g.rows(), g.cols());
            for (int64_t k = 0; k < g.size(); ++k) da.data_mut()[k] = g.data()[k] * n.c0;
            accumulate(parent(n, 0), da);
            break;
        }
        case Op::AddConst:
            accumulate(parent(n, 0), g);
            break;
        case Op::MatMul: {
            const Array& A = node(parent(n, 0)).value;
            const Array& B = node(parent(n, 1)).value;
            const int64_t m = A.rows(), kk = A.cols(), nn = B.cols();
            if (node(parent(n, 0)).requires_grad) {
                Array da(m, kk);
                for (int64_t r = 0; r < m; ++r)
                    for (int64_t j = 0; j < nn; ++j) {
                        const double gv = g(r, j);
                        if (gv == 0.0) continue;
                        for (int64_t k = 0; k < kk; ++k) da.at_mut(r, k) += gv * B(k, j);
                    }
                accumulate(parent(n, 0), da);
            }
            if (node(parent(n, 1)).requires_grad) {
                Array db(kk, nn);
                for (int64_t r = 0; r < m; ++r)
                    for (int64_t k = 0; k < kk; ++k) {
                        const double av = A(r, k);
                        if (av == 0.0) continue;
                        for (int64_t j = 0; j < nn; ++j) db.at_mut(k, j) += av * g(r, j);
                    }
                accumulate(parent(n, 1), db);
            }
            break;
        }
        case Op::Transpose: {
            Array da(y.cols(), y.rows());
            for (int64_t r = 0; r < g.rows(); ++r)
                for (int64_t c = 0; c < g.cols(); ++c) da.at_mut(c, r) = g(r, c);
            accumulate(parent(n, 0), da);
            break;
        }
        case Op::Sigmoid: {
            Array da(g.rows(), g.cols());
            for (int64_t k = 0; k < g.size(); ++k) {
                const double s = y.at(k);
                da.data_mut()[k] = g.at(k) * s * (1.0 - s);
            }
            accumulate(parent(n, 0), da);
            break;
        }
        case Op::Tanh: {
            Array da(g.rows(), g.cols());
            for (int64_t k = 0; k < g.size(); ++k) {
                const double t = y.at(k);
                da.data_mut()[k] = g.at(k) * (1.0 - t * t);
            }
            accumulate(parent(n, 0), da);
            break;
        }
        case Op::Exp: {
            Array da(g.rows(), g.cols());
            for (int64_t k = 0; k < g.size(); ++k) da.data_mut()[k] = g.at(k) * y.at(k);
            accumulate(parent(n, 0), da);
            break;
        }
        case Op::Log: {
            const Array& xv = node(parent(n, 0)).value;
            Array da(g.rows(), g.cols());
            for (int64_t k = 0; k < g.size(); ++k) da.data_mut()[k] = g.at(k) / xv.at(k);
            accumulate(parent(n, 0), da);
            break;
        }
        case Op::Relu: {
            const Array& xv = node(parent(n, 0)).value;
            Array da(g.rows(), g.cols());
            for (int64_t k = 0; k < g.size(); ++k)
                da.data_mut()[k] = xv.at(k) > 0.0 ? g.at(k) : 0.0;
            accumulate(parent(n, 0), da);
            break;
        }
        case Op::XLogX: {
            const Array& xv = node(parent(n, 0)).value;
            Array da(g.rows(), g.cols());
            for (int64_t k = 0; k < g.size(); ++k)
                da.data_mut()[k] = xv.at(k) > 0.0 ? g.at(k) * (std::log(xv.at(k)) + 1.0) : 0.0;
            accumulate(parent(n, 0), da);
            break;
        }
        case Op::MaskedSoftmax: {
            const Array& keep = n.aux0;
            Array da(g.rows(), g.cols());
            for (int64_t r = 0; r < g.rows(); ++r) {
                double dot = 0.0;
                for (int64_t c = 0; c < g.cols(); ++c) dot += g(r, c) * y(r, c);
                for (int64_t c = 0; c < g.cols(); ++c) {
                    da.at_mut(r, c) = keep(r, c) != 0.0 ? y(r, c) * (g(r, c) - dot) : 0.0;
                }
            }
            accumulate(parent(n, 0), da);
            break;
        }
        case Op::LayerNorm: {
            const Array& xhat = n.aux0;
            const Array& inv = n.aux1;
            const Array& gamma = node(parent(n, 1)).value;
            const int64_t rows = g.rows(), cols = g.cols();
            if (node(parent(n, 1)).requires_grad) {
                Array dg(1, cols);
                for (int64_t r = 0; r < rows; ++r)
                    for (int64_t c = 0; c < cols; ++c) dg.at_mut(0, c) += g(r, c) * xhat(r, c);
                accumulate(parent(n, 1), dg);
            }
            if (node(parent(n, 2)).requires_grad) {
                Array db(1, cols);
                for (int64_t r = 0; r < rows; ++r)
                    for (int64_t c = 0; c < cols; ++c) db.at_mut(0, c) += g(r, c);
                accumulate(parent(n, 2), db);
            }
            if (node(parent(n, 0)).requires_grad) {
                Array dx(rows, cols);
                const double cn = static_cast<double>(cols);
                for (int64_t r = 0; r < rows; ++r) {
                    double m1 = 0.0, m2 = 0.0;
                    for (int64_t c = 0; c < cols; ++c) {
                        const double dxh = g(r, c) * gamma(0, c);
                        m1 += dxh;
                        m2 += dxh * xhat(r, c);
                    }
                    m1 /= cn;
                    m2 /= cn;
                    const double is = inv(r, 0);
                    for (int64_t c = 0; c < cols; ++c) {
                        const double dxh = g(r, c) * gamma(0, c);
                        dx.at_mut(r, c) = is * (dxh - m1 - xhat(r, c) * m2);
                    }
                }
                accumulate(parent(n, 0), dx);
            }
            break;
        }
        case Op::ConcatCols: {
            int64_t off = 0;
            for (int32_t p = 0; p < n.parent_count; ++p) {
                const Node& pn = node(parent(n, p));
                const int64_t pc = pn.value.cols();
                if (pn.requires_grad) {
                    Array da(pn.value.rows(), pc);
                    for (int64_t r = 0; r < da.rows(); ++r)
                        for (int64_t c = 0; c < pc; ++c) da.at_mut(r, c) = g(r, off + c);
                    accumulate(parent(n, p), da);
                }
                off += pc;
            }
            break;
        }
        case Op::StackRows: {
            int64_t off = 0;
            for (int32_t p = 0; p < n.parent_count; ++p) {
                const Node& pn = node(parent(n, p));
                const int64_t pr = pn.value.rows();
                if (pn.requires_grad) {
                    Array da(pr, pn.value.cols());
                    for (int64_t r = 0; r < pr; ++r)
                        for (int64_t c = 0; c < da.cols(); ++c) da.at_mut(r, c) = g(off + r, c);
                    accumulate(parent(n, p), da);
                }
                off += pr;
            }
            break;
        }
        case Op::SliceRows: {
            const Node& pn = node(parent(n, 0));
            Array da(pn.value.rows(), pn.value.cols());
            for (int64_t r = 0; r < g.rows(); ++r)
                for (int64_t c = 0; c < g.cols(); ++c) da.at_mut(n.i0 + r, c) = g(r, c);
            accumulate(parent(n, 0), da);
            break;
        }
        case Op::SliceCols: {
            const Node& pn = node(parent(n, 0));
            Array da(pn.value.rows(), pn.value.cols());
            for (int64_t r = 0; r < g.rows(); ++r)
                for (int64_t c = 0; c < g.cols(); ++c) da.at_mut(r, n.i0 + c) = g(r, c);
            accumulate(parent(n, 0), da);
            break;
        }
        case Op::Sum: {
            const Node& pn = node(parent(n, 0));
            accumulate(parent(n, 0), Array::full(pn.value.rows(), pn.value.cols(), g.at(0)));
            break;
        }
        case Op::Mean: {
            const Node& pn = node(parent(n, 0));
            const double gv = g.at(0) / static_cast<double>(pn.value.size());
            accumulate(parent(n, 0), Array::full(pn.value.rows(), pn.value.cols(), gv));
            break;
        }
    }
}

double finite_difference_check(const ScalarFn& f, const Array& point, double step) {
    if (step <= 0.0) fail("ConfigError", "finite_difference_check: step must be positive");
    Tape tape;
    Var x = tape.leaf(point, true);
    Var out = f(tape, x);
    if (out.value().size() != 1) {
        fail("ShapeMismatch", "finite_difference_check: f must return a scalar");
    }
    tape.backward(out);
    const Array ad = x.grad().empty() ? Array(point.rows(), point.cols()) : x.grad();

    std::vector<double> base = point.values();
    auto eval_at = [&](int64_t i, double v) -> double {
        std::vector<double> pv = base;
        pv[static_cast<size_t>(i)] = v;
        try {
            Tape t;
            Var xx = t.leaf(Array(point.rows(), point.cols(), std::move(pv)), false);
            return f(t, xx).value().item();
        } catch (const PipelineError& e) {
            if (e.category() == "NonFinite") {
                fail("NonFinite",
                     "non-finite intermediate at coordinate " + std::to_string(i));
            }
            throw;
        }
    };

    double max_rel = 0.0;
    for (int64_t i = 0; i < point.size(); ++i) {
        const double fp = eval_at(i, base[static_cast<size_t>(i)] + step);
        const double fm = eval_at(i, base[static_cast<size_t>(i)] - step);
        const double fd = (fp - fm) / (2.0 * step);
        const double rel = std::abs(ad.at(i) - fd) / (std::abs(fd) + 1e-8);
        if (rel > max_rel) max_rel = rel;
    }
    return max_rel;
}

}  // namespace causalcast::ad
