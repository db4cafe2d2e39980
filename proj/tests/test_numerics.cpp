#include <cmath>
#include <vector>

#include "causalcast/autodiff.hpp"
#include "causalcast/common.hpp"
#include "doctest.h"

using causalcast::Array;
using causalcast::PipelineError;
using causalcast::Rng;
using causalcast::ad::ScalarFn;
using causalcast::ad::Tape;
using causalcast::ad::Var;

namespace {

Array random_array(Rng& rng, int64_t rows, int64_t cols, double lo, double hi) {
    std::vector<double> v(static_cast<size_t>(rows * cols));
    for (double& x : v) x = rng.uniform(lo, hi);
    return Array(rows, cols, std::move(v));
}

// Scalarizes an op output with fixed positive weights so the gradient check
// sees a nontrivial signal on every coordinate.
Var weighted_sum(Tape& t, Var x, const Array& w) {
    return t.sum(t.mul(x, t.leaf(w, false)));
}

}  // namespace

TEST_CASE("sigmoid at zero is one half") {
    Tape t;
    Var x = t.leaf(Array::scalar(0.0), false);
    CHECK(t.sigmoid(x).value().item() == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("masked softmax excludes masked entries exactly") {
    Tape t;
    Var s = t.leaf(Array::row({1.0, 1.0, 7.0}), false);
    Array keep(1, 3, {1.0, 1.0, 0.0});
    Array out = t.masked_softmax(s, keep).value();
    CHECK(out(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(out(0, 1) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(out(0, 2) == 0.0);
}

TEST_CASE("masked softmax rows sum to one over kept entries") {
    Rng rng(7);
    for (int trial = 0; trial < 50; ++trial) {
        const int64_t rows = 1 + static_cast<int64_t>(rng.uniform_int(6));
        const int64_t cols = 2 + static_cast<int64_t>(rng.uniform_int(8));
        Array scores = random_array(rng, rows, cols, -30.0, 30.0);
        Array keep(rows, cols);
        for (int64_t i = 0; i < keep.size(); ++i)
            keep.data_mut()[i] = rng.uniform() < 0.6 ? 1.0 : 0.0;
        Tape t;
        Array out = t.masked_softmax(t.leaf(scores, false), keep).value();
        for (int64_t r = 0; r < rows; ++r) {
            double s = 0.0;
            bool any = false;
            for (int64_t c = 0; c < cols; ++c) {
                CHECK(out(r, c) >= 0.0);
                if (keep(r, c) == 0.0) CHECK(out(r, c) == 0.0);
                any = any || keep(r, c) != 0.0;
                s += out(r, c);
            }
            if (any) {
                CHECK(s == doctest::Approx(1.0).epsilon(1e-9));
            } else {
                CHECK(s == 0.0);  // fully masked row: zeros, not NaN
            }
        }
    }
}

TEST_CASE("layer norm output is standardized before affine") {
    Rng rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        const int64_t rows = 1 + static_cast<int64_t>(rng.uniform_int(4));
        const int64_t cols = 4 + static_cast<int64_t>(rng.uniform_int(12));
        Tape t;
        Var x = t.leaf(random_array(rng, rows, cols, -5.0, 5.0), false);
        Var gamma = t.leaf(Array::full(1, cols, 1.0), false);
        Var beta = t.leaf(Array(1, cols), false);
        Array out = t.layer_norm(x, gamma, beta).value();
        for (int64_t r = 0; r < rows; ++r) {
            double mu = 0.0, var = 0.0;
            for (int64_t c = 0; c < cols; ++c) mu += out(r, c);
            mu /= static_cast<double>(cols);
            for (int64_t c = 0; c < cols; ++c) var += (out(r, c) - mu) * (out(r, c) - mu);
            var /= static_cast<double>(cols);
            CHECK(std::abs(mu) <= 1e-6);
            CHECK(std::abs(var - 1.0) <= 1e-6);
        }
    }
}

TEST_CASE("detach blocks gradient flow and keeps values") {
    Tape t;
    Var x = t.leaf(Array::row({0.4, -1.2}), true);
    Var h = t.tanh(x);
    Var d = t.detach(h);
    CHECK(d.value().values() == h.value().values());
    CHECK_FALSE(d.requires_grad());

    // loss = sum(tanh(x)) + sum(detach(tanh(x))): the detached branch must not
    // change the gradient of the live branch.
    Var loss = t.add(t.sum(h), t.sum(d));
    t.backward(loss);
    Array g = x.grad();
    for (int64_t i = 0; i < 2; ++i) {
        const double th = std::tanh(x.value().at(i));
        CHECK(g.at(i) == doctest::Approx(1.0 - th * th).epsilon(1e-12));
    }
}

TEST_CASE("gradient of sum(tanh(x)) matches finite differences") {
    ScalarFn f = [](Tape& t, Var x) { return t.sum(t.tanh(x)); };
    const double err =
        causalcast::ad::finite_difference_check(f, Array::row({0.3, -0.7}), 1e-5);
    CHECK(err <= 1e-6);
}

TEST_CASE("finite difference check on quadratic and constant") {
    ScalarFn quad = [](Tape& t, Var x) { return t.sum(t.mul(x, x)); };
    CHECK(causalcast::ad::finite_difference_check(quad, Array::scalar(3.0), 1e-5) <= 1e-8);

    Tape t;
    Var x = t.leaf(Array::row({1.0, 2.0}), true);
    Var c = t.leaf(Array::scalar(5.0), false);
    Var loss = t.add(t.scale(t.sum(x), 0.0), t.sum(c));
    t.backward(loss);
    CHECK(x.grad().at(0) == 0.0);
    CHECK(x.grad().at(1) == 0.0);
}

TEST_CASE("shape mismatch raises a structured error naming the op") {
    Tape t;
    Var a = t.leaf(Array(2, 3), false);
    Var b = t.leaf(Array(3, 3), false);
    try {
        t.add(a, b);
        FAIL("expected ShapeMismatch");
    } catch (const PipelineError& e) {
        CHECK(e.category() == "ShapeMismatch");
        CHECK(std::string(e.what()).find("add") != std::string::npos);
        CHECK(std::string(e.what()).find("2x3") != std::string::npos);
    }
}

TEST_CASE("per-op gradients match central finite differences") {
    // 100 randomized trials per op, relative error <= 1e-4.
    constexpr int kTrials = 100;
    constexpr double kStep = 1e-5;
    constexpr double kTol = 1e-4;
    Rng rng(1234);

    auto run = [&](const char* name, const ScalarFn& f, const Array& point) {
        const double err = causalcast::ad::finite_difference_check(f, point, kStep);
        INFO("op " << std::string(name));
        CHECK(err <= kTol);
    };

    for (int trial = 0; trial < kTrials; ++trial) {
        const int64_t m = 2 + static_cast<int64_t>(rng.uniform_int(3));
        const int64_t n = 2 + static_cast<int64_t>(rng.uniform_int(3));
        const Array w = random_array(rng, m, n, 0.5, 1.5);
        const Array other = random_array(rng, m, n, -1.5, 1.5);
        const Array point = random_array(rng, m, n, -2.0, 2.0);

        run("add", [&](Tape& t, Var x) {
            return weighted_sum(t, t.add(x, t.leaf(other, false)), w);
        }, point);
        run("sub", [&](Tape& t, Var x) {
            return weighted_sum(t, t.sub(t.leaf(other, false), x), w);
        }, point);
        run("mul", [&](Tape& t, Var x) {
            return weighted_sum(t, t.mul(x, t.leaf(other, false)), w);
        }, point);
        run("scale_addconst", [&](Tape& t, Var x) {
            return t.sum(t.add_const(t.scale(x, -1.7), 0.3));
        }, point);
        run("sigmoid", [&](Tape& t, Var x) { return weighted_sum(t, t.sigmoid(x), w); }, point);
        run("tanh", [&](Tape& t, Var x) { return weighted_sum(t, t.tanh(x), w); }, point);
        run("exp", [&](Tape& t, Var x) { return weighted_sum(t, t.exp(x), w); }, point);

        const Array pos = random_array(rng, m, n, 0.4, 3.0);
        run("log", [&](Tape& t, Var x) { return weighted_sum(t, t.log(x), w); }, pos);
        run("xlogx", [&](Tape& t, Var x) { return weighted_sum(t, t.xlogx(x), w); }, pos);

        Array away(m, n);
        for (int64_t i = 0; i < away.size(); ++i) {
            const double v = rng.uniform(0.1, 2.0);
            away.data_mut()[i] = rng.uniform() < 0.5 ? v : -v;  // keep off the relu kink
        }
        run("relu", [&](Tape& t, Var x) { return weighted_sum(t, t.relu(x), w); }, away);

        const int64_t k = 2 + static_cast<int64_t>(rng.uniform_int(3));
        const Array right = random_array(rng, n, k, -1.0, 1.0);
        const Array wmk = random_array(rng, m, k, 0.5, 1.5);
        run("matmul_left", [&](Tape& t, Var x) {
            return weighted_sum(t, t.matmul(x, t.leaf(right, false)), wmk);
        }, point);
        const Array left = random_array(rng, k, m, -1.0, 1.0);
        const Array wkn = random_array(rng, k, n, 0.5, 1.5);
        run("matmul_right", [&](Tape& t, Var x) {
            return weighted_sum(t, t.matmul(t.leaf(left, false), x), wkn);
        }, point);

        Array keep(m, n);
        for (int64_t i = 0; i < keep.size(); ++i)
            keep.data_mut()[i] = rng.uniform() < 0.7 ? 1.0 : 0.0;
        run("masked_softmax", [&](Tape& t, Var x) {
            return weighted_sum(t, t.masked_softmax(x, keep), w);
        }, point);

        // Two-column layer norm is degenerate (output is the sign pattern, so
        // the x-gradient is eps-scale and the fd comparison is pure noise);
        // the model always normalizes over d >= 3 features.
        const int64_t ln_cols = std::max<int64_t>(n, 3);
        Array spread(m, ln_cols);
        for (int64_t r = 0; r < m; ++r)
            for (int64_t c = 0; c < ln_cols; ++c)
                spread.at_mut(r, c) = 1.5 * static_cast<double>(c) + rng.uniform(-0.4, 0.4);
        const Array gamma_val = random_array(rng, 1, ln_cols, 0.5, 1.5);
        const Array ln_w = random_array(rng, m, ln_cols, 0.5, 1.5);
        run("layer_norm", [&](Tape& t, Var x) {
            Var gamma = t.leaf(gamma_val, false);
            Var beta = t.leaf(Array(1, ln_cols), false);
            return weighted_sum(t, t.layer_norm(x, gamma, beta), ln_w);
        }, spread);

        run("stack_slice_concat", [&](Tape& t, Var x) {
            Var top = t.slice_rows(x, 0, 1);
            Var rest = t.slice_rows(x, 1, m);
            Var back = t.stack_rows({top, rest});
            Var l = t.slice_cols(back, 0, 1);
            Var r = t.slice_cols(back, 1, n);
            return weighted_sum(t, t.concat_cols({l, r}), w);
        }, point);

        run("transpose_mean", [&](Tape& t, Var x) { return t.mean(t.transpose(x)); }, point);
    }
}

TEST_CASE("layer_norm gradient wrt affine params") {
    Rng rng(99);
    for (int trial = 0; trial < 20; ++trial) {
        const int64_t n = 4;
        const Array xval = random_array(rng, 3, n, -2.0, 2.0);
        const Array w = random_array(rng, 3, n, 0.5, 1.5);
        ScalarFn f = [&](Tape& t, Var gamma) {
            Var x = t.leaf(xval, false);
            Var beta = t.leaf(Array(1, n), false);
            return weighted_sum(t, t.layer_norm(x, gamma, beta), w);
        };
        CHECK(causalcast::ad::finite_difference_check(f, random_array(rng, 1, n, 0.5, 1.5),
                                                      1e-5) <= 1e-4);
    }
}

TEST_CASE("broadcast add and mul reduce gradients correctly") {
    Rng rng(321);
    const Array big = random_array(rng, 4, 3, -1.0, 1.0);
    const Array w = random_array(rng, 4, 3, 0.5, 1.5);
    ScalarFn frow = [&](Tape& t, Var rowv) {
        return weighted_sum(t, t.add(t.leaf(big, false), rowv), w);
    };
    CHECK(causalcast::ad::finite_difference_check(frow, random_array(rng, 1, 3, -1.0, 1.0),
                                                  1e-5) <= 1e-4);
    ScalarFn fscalar = [&](Tape& t, Var s) {
        return weighted_sum(t, t.mul(t.leaf(big, false), s), w);
    };
    CHECK(causalcast::ad::finite_difference_check(fscalar, Array::scalar(0.7), 1e-5) <= 1e-4);
}
