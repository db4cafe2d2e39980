#include "causalcast/array.hpp"

#include <cmath>

#include "causalcast/common.hpp"

namespace causalcast {

namespace {

void check_dims(int64_t rows, int64_t cols) {
    if (rows <= 0 || cols <= 0) {
        fail("ShapeMismatch", "array dimensions must be positive, got " +
                                  std::to_string(rows) + "x" + std::to_string(cols));
    }
}

}  // namespace

Array::Array(int64_t rows, int64_t cols) : rows_(rows), cols_(cols) {
    check_dims(rows, cols);
    v_.assign(static_cast<size_t>(rows * cols), 0.0);
}

Array::Array(int64_t rows, int64_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), v_(std::move(values)) {
    check_dims(rows, cols);
    if (static_cast<int64_t>(v_.size()) != rows * cols) {
        fail("ShapeMismatch", "value count " + std::to_string(v_.size()) +
                                  " does not match shape " + shape_str());
    }
    for (size_t i = 0; i < v_.size(); ++i) {
        if (!std::isfinite(v_[i])) {
            fail("NonFinite", "non-finite value at flat index " + std::to_string(i));
        }
    }
}

Array Array::row(std::vector<double> v) {
    const int64_t n = static_cast<int64_t>(v.size());
    return Array(1, n, std::move(v));
}

Array Array::full(int64_t rows, int64_t cols, double v) {
    check_dims(rows, cols);
    return Array(rows, cols, std::vector<double>(static_cast<size_t>(rows * cols), v));
}

double Array::item() const {
    if (size() != 1) {
        fail("ShapeMismatch", "item() requires a 1x1 array, got " + shape_str());
    }
    return v_[0];
}

std::string Array::shape_str() const {
    return std::to_string(rows_) + "x" + std::to_string(cols_);
}

void require_same_shape(const Array& a, const Array& b, const char* op) {
    if (!a.same_shape(b)) {
        fail("ShapeMismatch", std::string(op) + ": " + a.shape_str() + " vs " + b.shape_str());
    }
}

}  // namespace causalcast
