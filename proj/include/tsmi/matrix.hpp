#pragma once

#include <cstddef>
#include <vector>

namespace tsmi {

#ifdef TSMI_USE_DOUBLE
using real = double;
#else
using real = float;
#endif

// Dense row-major matrix. Vectors are 1xN or Nx1 as convenient.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, real fill = real(0))
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
    Matrix(std::size_t rows, std::size_t cols, std::vector<real> values);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }

    real& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    real operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
    real* data() { return data_.data(); }
    const real* data() const { return data_.data(); }
    real* row(std::size_t r) { return data_.data() + r * cols_; }
    const real* row(std::size_t r) const { return data_.data() + r * cols_; }

    bool same_shape(const Matrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }
    bool all_finite() const;
    void fill(real v) { data_.assign(data_.size(), v); }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<real> data_;
};

// OpenMP-parallel product a*b. Bitwise identical to matmul_serial for any
// thread count: per-element accumulation order is fixed.
Matrix matmul(const Matrix& a, const Matrix& b);
// Serial reference, kept for testing and benchmarking.
Matrix matmul_serial(const Matrix& a, const Matrix& b);

// a * b^T and a^T * b, the transposed variants backprop needs.
Matrix matmul_nt(const Matrix& a, const Matrix& b);
Matrix matmul_tn(const Matrix& a, const Matrix& b);
Matrix matmul_nt_serial(const Matrix& a, const Matrix& b);
Matrix matmul_tn_serial(const Matrix& a, const Matrix& b);

// Row-wise softmax with max-subtraction.
Matrix softmax_rows(const Matrix& m);

// Gradient of softmax_rows: given probs p and upstream grad dp, returns
// d(input). Row-wise p .* (dp - sum(p .* dp)).
Matrix softmax_rows_backward(const Matrix& probs, const Matrix& grad);

// Row-wise RMS normalization with elementwise gain (no mean centering).
// gain is 1 x cols.
Matrix rmsnorm(const Matrix& x, const Matrix& gain, real eps);

// Backward pass for rmsnorm. Accumulates the gain gradient into gain_grad.
Matrix rmsnorm_backward(const Matrix& x, const Matrix& gain, real eps,
                        const Matrix& grad, Matrix& gain_grad);

void add_inplace(Matrix& a, const Matrix& b);
void scale_inplace(Matrix& a, real s);

}  // namespace tsmi
