#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace causalcast {

/// Dense row-major matrix of doubles. Every tensor in the model is at most
/// rank 2 per sample, so a (rows, cols) carrier is sufficient; vectors are
/// 1 x n and scalars 1 x 1. Values are validated finite at construction:
/// NaN/Inf never enter the computation graph.
///
/// Arrays are plain values: cheap to move, safe to share by const reference
/// across threads, never mutated after construction by the op layer.
class Array {
public:
    Array() : rows_(0), cols_(0) {}

    /// Zero-filled.
    Array(int64_t rows, int64_t cols);

    /// Takes ownership of `values` (row-major); length must equal rows*cols
    /// and every entry must be finite.
    Array(int64_t rows, int64_t cols, std::vector<double> values);

    static Array scalar(double v) { return Array(1, 1, {v}); }
    static Array row(std::vector<double> v);
    static Array full(int64_t rows, int64_t cols, double v);

    int64_t rows() const { return rows_; }
    int64_t cols() const { return cols_; }
    int64_t size() const { return rows_ * cols_; }
    bool empty() const { return size() == 0; }

    double operator()(int64_t r, int64_t c) const { return v_[r * cols_ + c]; }
    double& at_mut(int64_t r, int64_t c) { return v_[r * cols_ + c]; }
    double at(int64_t i) const { return v_[i]; }

    const std::vector<double>& values() const { return v_; }
    const double* data() const { return v_.data(); }
    double* data_mut() { return v_.data(); }

    /// Scalar accessor; requires size() == 1.
    double item() const;

    std::string shape_str() const;

    bool same_shape(const Array& o) const {
        return rows_ == o.rows_ && cols_ == o.cols_;
    }

private:
    int64_t rows_, cols_;
    std::vector<double> v_;
};

/// Throws ShapeMismatch naming `op` unless a and b have identical shapes.
void require_same_shape(const Array& a, const Array& b, const char* op);

}  // namespace causalcast
